/** Bootstrap: resolve the access token, load assignments, wire the two task
 * screens to the API with offline retry. */

import { ApiClient, ApiError, NetworkError } from "./api.js";
import { RetryQueue } from "./queue.js";
import {
  renderErrorPage,
  renderScoringTask,
  renderSelectionTask,
  updateItemState,
  type SubmitResult,
} from "./render.js";
import type { ScoringViewModel, SelectionViewModel } from "./views.js";

export function tokenFromLocation(loc: Pick<Location, "search" | "hash">): string | null {
  const fromQuery = new URLSearchParams(loc.search).get("token");
  if (fromQuery) return fromQuery;
  const hash = loc.hash.replace(/^#/, "");
  return hash || null;
}

export class EvalApp {
  private readonly queue = new RetryQueue(5000,
    (error) => error instanceof NetworkError);

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly token: string,
  ) {}

  async start(): Promise<void> {
    let summary;
    try {
      summary = await this.client.assignments(this.token);
    } catch (error) {
      // Invalid/expired tokens get a plain notice and nothing else.
      if (error instanceof ApiError) {
        renderErrorPage(this.root, "This access link is not valid. " +
          "Please check the link you were given.");
      } else {
        renderErrorPage(this.root, "The evaluation service is unreachable. " +
          "Please try again in a moment.");
      }
      return;
    }
    const tasks = summary.tasks.map((t) => t.task);
    this.renderShell(tasks);
    if (tasks.length > 0) {
      await this.showTask(tasks[0]);
    } else {
      renderErrorPage(this.taskRoot(), "No review tasks are assigned to this link.");
    }
  }

  private renderShell(tasks: string[]): void {
    this.root.replaceChildren();
    const header = document.createElement("header");
    header.className = "app-header";
    const title = document.createElement("h1");
    title.textContent = "Requirement quality review";
    header.appendChild(title);
    const nav = document.createElement("nav");
    nav.className = "task-nav";
    for (const task of tasks) {
      const button = document.createElement("button");
      button.textContent = task === "scoring"
        ? "Task 1: score NFRs" : "Task 2: pick attributes";
      button.dataset.task = task;
      button.addEventListener("click", () => void this.showTask(task));
      nav.appendChild(button);
    }
    header.appendChild(nav);
    this.root.appendChild(header);
    const main = document.createElement("main");
    main.className = "task-root";
    this.root.appendChild(main);
  }

  private taskRoot(): HTMLElement {
    return this.root.querySelector<HTMLElement>(".task-root") ?? this.root;
  }

  async showTask(task: string): Promise<void> {
    const target = this.taskRoot();
    try {
      if (task === "scoring") {
        const payload = await this.client.scoringTask(this.token);
        renderScoringTask(target, payload, { submit: (vm) => this.submitScore(vm) });
      } else {
        const payload = await this.client.selectionTask(this.token);
        renderSelectionTask(target, payload,
          { submit: (vm) => this.submitSelection(vm) });
      }
    } catch (error) {
      renderErrorPage(target, error instanceof ApiError
        ? "This task could not be loaded."
        : "The evaluation service is unreachable.");
    }
  }

  private async submitScore(vm: ScoringViewModel): Promise<SubmitResult> {
    if (vm.validityInput === null || vm.applicabilityInput === null) {
      throw new Error("choose both scores before submitting");
    }
    const body = {
      nfr_id: vm.nfrId,
      validity: vm.validityInput,
      applicability: vm.applicabilityInput,
    };
    try {
      await this.client.submitScore(this.token, body);
      return { state: "saved" };
    } catch (error) {
      if (error instanceof NetworkError) {
        this.queue.enqueue(vm.nfrId,
          async () => { await this.client.submitScore(this.token, body); },
          (state) => updateItemState(this.taskRoot(), vm.nfrId,
            state === "saved" ? "saved" : state === "pending" ? "pending" : "error"));
        return { state: "pending" };
      }
      throw error;
    }
  }

  private async submitSelection(vm: SelectionViewModel): Promise<SubmitResult> {
    if (vm.chosen === null) {
      throw new Error("choose an attribute before submitting");
    }
    const body = { nfr_id: vm.nfrId, attribute: vm.chosen };
    try {
      await this.client.submitSelection(this.token, body);
      return { state: "saved" };
    } catch (error) {
      if (error instanceof NetworkError) {
        this.queue.enqueue(vm.nfrId,
          async () => { await this.client.submitSelection(this.token, body); },
          (state) => updateItemState(this.taskRoot(), vm.nfrId,
            state === "saved" ? "saved" : state === "pending" ? "pending" : "error"));
        return { state: "pending" };
      }
      throw error;
    }
  }

  /** Exposed for tests and for manual "try again now" affordances. */
  flushQueue(): Promise<void> {
    return this.queue.flush();
  }
}

export function mount(root: HTMLElement): void {
  const token = tokenFromLocation(window.location);
  if (!token) {
    renderErrorPage(root, "This page needs the personal access link you were " +
      "given (it carries your review token).");
    return;
  }
  const app = new EvalApp(root, new ApiClient(""), token);
  void app.start();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document.getElementById("app") as HTMLElement);
}
