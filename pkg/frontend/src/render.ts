/** DOM rendering for both evaluator screens.
 *
 * Everything is built with createElement/textContent from explicit view-model
 * fields, so only allowlisted data can ever reach the page: the selection
 * screen renders FR text, NFR text, and the nine fixed options, and has no
 * path for an assigned attribute or a model identifier to leak into the DOM.
 */

import type { ScoringPayload, SelectionPayload, RubricLevel } from "./types.js";
import {
  buildScoringViewModels,
  buildSelectionViewModels,
  firstUnansweredIndex,
  progressOf,
  scoringComplete,
  selectionComplete,
  type ScoringViewModel,
  type SelectionViewModel,
} from "./views.js";

export type SubmitResult = { state: "saved" | "pending" };

export interface TaskHandlers<VM> {
  submit(vm: VM): Promise<SubmitResult>;
}

const SCORES = [1, 2, 3, 4, 5];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderErrorPage(root: HTMLElement, message: string): void {
  root.replaceChildren();
  const box = el("div", "error-page");
  box.appendChild(el("h1", undefined, "Unable to load your review"));
  box.appendChild(el("p", "error-message", message));
  root.appendChild(box);
}

function renderProgress(progress: { done: number; total: number }): HTMLElement {
  const wrap = el("div", "progress");
  wrap.setAttribute("role", "progressbar");
  const bar = el("div", "progress-bar");
  const fill = el("div", "progress-fill");
  const pct = progress.total === 0 ? 0 : (progress.done / progress.total) * 100;
  fill.style.width = `${pct}%`;
  bar.appendChild(fill);
  wrap.appendChild(bar);
  wrap.appendChild(el("span", "progress-text",
    `${progress.done} of ${progress.total} reviewed`));
  return wrap;
}

function renderFrNav(frIds: string[]): HTMLElement {
  const nav = el("nav", "fr-nav");
  nav.appendChild(el("span", "fr-nav-label", "Requirements:"));
  for (const frId of frIds) {
    const link = el("a", "fr-nav-link", frId);
    link.href = `#fr-${frId}`;
    nav.appendChild(link);
  }
  return nav;
}

function renderRubric(title: string, levels: RubricLevel[]): HTMLElement {
  const box = el("section", "rubric");
  box.appendChild(el("h3", undefined, title));
  const list = el("dl", "rubric-levels");
  for (const level of levels) {
    list.appendChild(el("dt", undefined, `${level.score} - ${level.label}`));
    list.appendChild(el("dd", undefined, level.definition));
  }
  box.appendChild(list);
  return box;
}

function renderFrozenNotice(): HTMLElement {
  return el("p", "frozen-notice",
    "This sample has been frozen. Your answers are shown read-only.");
}

function statusArea(): HTMLElement {
  const status = el("span", "item-status");
  status.dataset.state = "";
  return status;
}

function setStatus(item: HTMLElement, state: "" | "pending" | "saved" | "error",
                   message = ""): void {
  const status = item.querySelector<HTMLElement>(".item-status");
  if (!status) return;
  status.dataset.state = state;
  status.textContent = state === "saved" ? "Saved"
    : state === "pending" ? "Submission pending, will retry"
    : message;
  item.classList.toggle("answered", state === "saved");
}

function scoreRow(name: string, legend: string, current: number | null,
                  disabled: boolean, onPick: (value: number) => void): HTMLElement {
  const fieldset = el("fieldset", "score-row");
  fieldset.appendChild(el("legend", undefined, legend));
  for (const score of SCORES) {
    const label = el("label", "score-choice");
    const input = el("input");
    input.type = "radio";
    input.name = name;
    input.value = String(score);
    input.checked = current === score;
    input.disabled = disabled;
    input.addEventListener("change", () => onPick(score));
    label.appendChild(input);
    label.appendChild(el("span", undefined, String(score)));
    fieldset.appendChild(label);
  }
  return fieldset;
}

function groupByFr<VM extends { frId: string; frText: string }>(
  models: VM[],
): { frId: string; frText: string; items: VM[] }[] {
  const groups: { frId: string; frText: string; items: VM[] }[] = [];
  for (const vm of models) {
    const last = groups[groups.length - 1];
    if (last && last.frId === vm.frId) {
      last.items.push(vm);
    } else {
      groups.push({ frId: vm.frId, frText: vm.frText, items: [vm] });
    }
  }
  return groups;
}

function markCurrent(container: HTMLElement, models: { saved: boolean }[]): void {
  const index = firstUnansweredIndex(models);
  const items = container.querySelectorAll<HTMLElement>(".item");
  const target = items[index];
  if (target) {
    target.classList.add("current");
    target.scrollIntoView?.({ block: "start" });
  }
}

function refreshProgress(container: HTMLElement, models: { saved: boolean }[]): void {
  const current = container.querySelector(".progress");
  if (current) current.replaceWith(renderProgress(progressOf(models)));
}

async function handleSubmit<VM>(item: HTMLElement, vm: VM,
                                handlers: TaskHandlers<VM>,
                                onSaved: () => void): Promise<void> {
  setStatus(item, "");
  try {
    const result = await handlers.submit(vm);
    if (result.state === "saved") {
      setStatus(item, "saved");
      onSaved();
    } else {
      setStatus(item, "pending");
    }
  } catch (error) {
    // Validation and authorization errors surface inline; inputs keep state.
    const message = error instanceof Error ? error.message : String(error);
    setStatus(item, "error", message);
  }
}

export function renderScoringTask(root: HTMLElement, payload: ScoringPayload,
                                  handlers: TaskHandlers<ScoringViewModel>): void {
  const models = buildScoringViewModels(payload);
  root.replaceChildren();
  const container = el("div", "task task-scoring");
  container.appendChild(el("h2", undefined, "NFR scoring: validity and applicability"));
  container.appendChild(renderProgress(progressOf(models)));
  if (payload.frozen) container.appendChild(renderFrozenNotice());
  container.appendChild(renderFrNav(payload.frs.map((g) => g.fr_id)));

  const rubrics = el("aside", "rubric-panel");
  rubrics.appendChild(renderRubric("Validity", payload.rubrics.validity));
  rubrics.appendChild(renderRubric("Applicability", payload.rubrics.applicability));
  container.appendChild(rubrics);

  for (const group of groupByFr(models)) {
    const section = el("section", "fr-group");
    section.id = `fr-${group.frId}`;
    const heading = el("h3", "fr-heading");
    heading.appendChild(el("span", "fr-id", group.frId));
    heading.appendChild(el("span", "fr-text", group.frText));
    section.appendChild(heading);

    for (const vm of group.items) {
      const item = el("article", "item item-scoring");
      item.id = `item-${vm.nfrId}`;
      if (vm.saved) item.classList.add("answered");
      item.appendChild(el("p", "nfr-text", vm.nfrText));

      const meta = el("dl", "nfr-meta");
      meta.appendChild(el("dt", undefined, "Assigned attribute"));
      meta.appendChild(el("dd", "assigned-attribute",
        vm.subcharacteristic
          ? `${vm.assignedAttribute} (${vm.subcharacteristic})`
          : vm.assignedAttribute));
      meta.appendChild(el("dt", undefined, "Justification"));
      meta.appendChild(el("dd", "justification", vm.justification));
      item.appendChild(meta);

      const submit = el("button", "submit", vm.saved ? "Update" : "Submit");
      submit.disabled = payload.frozen || !scoringComplete(vm);

      const sync = () => {
        submit.disabled = payload.frozen || !scoringComplete(vm);
      };
      item.appendChild(scoreRow(`validity-${vm.nfrId}`, "Validity (1-5)",
        vm.validityInput, payload.frozen, (value) => {
          vm.validityInput = value;
          sync();
        }));
      item.appendChild(scoreRow(`applicability-${vm.nfrId}`, "Applicability (1-5)",
        vm.applicabilityInput, payload.frozen, (value) => {
          vm.applicabilityInput = value;
          sync();
        }));

      submit.addEventListener("click", () => {
        void handleSubmit(item, vm, handlers, () => {
          vm.saved = true;
          submit.textContent = "Update";
          refreshProgress(container, models);
        });
      });
      item.appendChild(submit);
      item.appendChild(statusArea());
      section.appendChild(item);
    }
    container.appendChild(section);
  }
  root.appendChild(container);
  markCurrent(container, models);
}

export function renderSelectionTask(root: HTMLElement, payload: SelectionPayload,
                                    handlers: TaskHandlers<SelectionViewModel>): void {
  const models = buildSelectionViewModels(payload);
  root.replaceChildren();
  const container = el("div", "task task-selection");
  container.appendChild(el("h2", undefined,
    "Attribute selection: pick the most appropriate quality attribute"));
  container.appendChild(renderProgress(progressOf(models)));
  if (payload.frozen) container.appendChild(renderFrozenNotice());
  container.appendChild(renderFrNav(payload.frs.map((g) => g.fr_id)));

  for (const group of groupByFr(models)) {
    const section = el("section", "fr-group");
    section.id = `fr-${group.frId}`;
    const heading = el("h3", "fr-heading");
    heading.appendChild(el("span", "fr-id", group.frId));
    heading.appendChild(el("span", "fr-text", group.frText));
    section.appendChild(heading);

    for (const vm of group.items) {
      const item = el("article", "item item-selection");
      item.id = `item-${vm.nfrId}`;
      if (vm.saved) item.classList.add("answered");
      item.appendChild(el("p", "nfr-text", vm.nfrText));

      const submit = el("button", "submit", vm.saved ? "Update" : "Submit");
      submit.disabled = payload.frozen || !selectionComplete(vm);

      const fieldset = el("fieldset", "option-list");
      fieldset.appendChild(el("legend", undefined, "Quality attribute"));
      for (const option of vm.options) {
        const label = el("label", "option-choice");
        const input = el("input");
        input.type = "radio";
        input.name = `attribute-${vm.nfrId}`;
        input.value = option;
        input.checked = vm.chosen === option;
        input.disabled = payload.frozen;
        input.addEventListener("change", () => {
          vm.chosen = option;
          submit.disabled = payload.frozen || !selectionComplete(vm);
        });
        label.appendChild(input);
        label.appendChild(el("span", undefined, option));
        fieldset.appendChild(label);
      }
      item.appendChild(fieldset);

      submit.addEventListener("click", () => {
        void handleSubmit(item, vm, handlers, () => {
          vm.saved = true;
          submit.textContent = "Update";
          refreshProgress(container, models);
        });
      });
      item.appendChild(submit);
      item.appendChild(statusArea());
      section.appendChild(item);
    }
    container.appendChild(section);
  }
  root.appendChild(container);
  markCurrent(container, models);
}

export function updateItemState(root: HTMLElement, nfrId: string,
                                state: "saved" | "pending" | "error",
                                message = ""): void {
  const item = root.querySelector<HTMLElement>(`[id="item-${nfrId}"]`);
  if (item) setStatus(item, state, message);
}
