import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { EvalApp } from "../src/app.js";
import { renderScoringTask } from "../src/render.js";
import type { ScoringViewModel } from "../src/views.js";
import { jsonResponse, scoringPayload } from "./fixtures.js";

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = "";
  root = document.createElement("div");
  root.className = "task-root";
  document.body.appendChild(root);
});

const noopHandlers = {
  submit: vi.fn(async (_vm: ScoringViewModel) => ({ state: "saved" as const })),
};

function pick(item: HTMLElement, dimension: string, score: number): void {
  const radio = [...item.querySelectorAll(`input[name^="${dimension}-"]`)]
    .find((n) => (n as HTMLInputElement).value === String(score)) as HTMLInputElement;
  radio.click();
}

describe("scoring screen", () => {
  it("shows both rubrics verbatim beside the inputs", () => {
    renderScoringTask(root, scoringPayload(), noopHandlers);
    const text = root.textContent ?? "";
    for (let score = 1; score <= 5; score++) {
      expect(text).toContain(`validity definition ${score}`);
      expect(text).toContain(`applicability definition ${score}`);
    }
  });

  it("shows the assigned attribute and justification during scoring", () => {
    renderScoringTask(root, scoringPayload(), noopHandlers);
    const item = root.querySelector(".item-scoring") as HTMLElement;
    expect(item.querySelector(".assigned-attribute")?.textContent)
      .toBe("Performance Efficiency (Time Behaviour)");
    expect(item.querySelector(".justification")?.textContent)
      .toContain("bounded response time");
  });

  it("keeps submit disabled until both scores are chosen", () => {
    renderScoringTask(root, scoringPayload(), noopHandlers);
    const item = root.querySelector(".item-scoring") as HTMLElement;
    const submit = item.querySelector("button.submit") as HTMLButtonElement;
    expect(submit.disabled).toBe(true);
    pick(item, "validity", 5);
    expect(submit.disabled).toBe(true);
    pick(item, "applicability", 4);
    expect(submit.disabled).toBe(false);
  });

  it("submitting validity 5 / applicability 4 posts the exact documented body", async () => {
    const fetchFn = vi.fn(async () => jsonResponse({ stored: {} }));
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const app = new EvalApp(document.body, client, "tok-9");
    const payload = scoringPayload();
    renderScoringTask(root, payload, {
      submit: (vm) => app["submitScore"](vm),
    });
    const item = root.querySelector(".item-scoring") as HTMLElement;
    pick(item, "validity", 5);
    pick(item, "applicability", 4);
    (item.querySelector("button.submit") as HTMLButtonElement).click();
    await vi.waitFor(() => {
      expect(fetchFn).toHaveBeenCalledTimes(1);
    });
    const [url, init] = fetchFn.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("/api/scores");
    expect(init.body).toBe(JSON.stringify({
      nfr_id: payload.frs[0].nfrs[0].nfr_id, validity: 5, applicability: 4,
    }));
    expect((init.headers as Record<string, string>)["X-Eval-Token"]).toBe("tok-9");
  });

  it("rehydrates previously submitted scores from the server", () => {
    const payload = scoringPayload();
    payload.frs[0].nfrs[0].submitted = { validity: 4, applicability: 5 };
    payload.progress = { done: 1, total: 2 };
    renderScoringTask(root, payload, noopHandlers);
    const item = root.querySelector(".item-scoring") as HTMLElement;
    const validity = item.querySelector(
      'input[name^="validity-"]:checked') as HTMLInputElement;
    const applicability = item.querySelector(
      'input[name^="applicability-"]:checked') as HTMLInputElement;
    expect(validity.value).toBe("4");
    expect(applicability.value).toBe("5");
    expect(item.classList.contains("answered")).toBe(true);
  });

  it("queues the submission with a visible pending state when offline, then "
     + "saves on retry", async () => {
    let offline = true;
    const fetchFn = vi.fn(async () => {
      if (offline) throw new TypeError("Failed to fetch");
      return jsonResponse({ stored: {} });
    });
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const app = new EvalApp(document.body, client, "tok-9");
    renderScoringTask(root, scoringPayload(), {
      submit: (vm) => app["submitScore"](vm),
    });
    const item = root.querySelector(".item-scoring") as HTMLElement;
    pick(item, "validity", 3);
    pick(item, "applicability", 3);
    (item.querySelector("button.submit") as HTMLButtonElement).click();
    await vi.waitFor(() => {
      const status = item.querySelector(".item-status") as HTMLElement;
      expect(status.dataset.state).toBe("pending");
    });
    offline = false;
    await app.flushQueue();
    const status = item.querySelector(".item-status") as HTMLElement;
    expect(status.dataset.state).toBe("saved");
  });

  it("updates the progress bar after a successful submission", async () => {
    renderScoringTask(root, scoringPayload(), noopHandlers);
    const item = root.querySelector(".item-scoring") as HTMLElement;
    pick(item, "validity", 5);
    pick(item, "applicability", 5);
    (item.querySelector("button.submit") as HTMLButtonElement).click();
    await vi.waitFor(() => {
      expect(root.querySelector(".progress-text")?.textContent)
        .toBe("1 of 2 reviewed");
    });
  });
});
