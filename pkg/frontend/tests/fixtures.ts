import type { ScoringPayload, SelectionPayload } from "../src/types.js";

export const NINE_OPTIONS = [
  "Functional Suitability",
  "Performance Efficiency",
  "Compatibility",
  "Usability",
  "Reliability",
  "Security",
  "Maintainability",
  "Flexibility",
  "Safety",
];

export const RUBRIC = {
  validity: [1, 2, 3, 4, 5].map((score) => ({
    score,
    label: `validity level ${score}`,
    definition: `validity definition ${score}`,
  })),
  applicability: [1, 2, 3, 4, 5].map((score) => ({
    score,
    label: `applicability level ${score}`,
    definition: `applicability definition ${score}`,
  })),
};

export function scoringPayload(overrides: Partial<ScoringPayload> = {}): ScoringPayload {
  return {
    task: "scoring",
    evaluator_id: "E01",
    frozen: false,
    progress: { done: 0, total: 2 },
    rubrics: RUBRIC,
    frs: [
      {
        fr_id: "FR-01",
        fr_text: "The system shall let users sign in.",
        nfrs: [
          {
            nfr_id: "n1a2b3c4d5e6f7a8",
            text: "Sign-in shall finish within 2 seconds for 95% of attempts.",
            attribute: "Performance Efficiency",
            subcharacteristic: "Time Behaviour",
            justification: "The sign-in step implies a bounded response time.",
            submitted: null,
          },
          {
            nfr_id: "nb2c3d4e5f6a7b8c",
            text: "Credentials shall never appear in log output.",
            attribute: "Security",
            subcharacteristic: null,
            justification: "Credential handling follows from the sign-in step.",
            submitted: null,
          },
        ],
      },
    ],
    ...overrides,
  };
}

/** Selection payload. The deliberately planted `attribute`/`model_id` fields
 * simulate a leaky server; the UI must never render them. */
export function selectionPayload(overrides: Partial<SelectionPayload> = {}): SelectionPayload {
  const payload: SelectionPayload = {
    task: "selection",
    evaluator_id: "E01",
    frozen: false,
    progress: { done: 0, total: 2 },
    options: [...NINE_OPTIONS],
    frs: [
      {
        fr_id: "FR-02",
        fr_text: "The system shall export monthly statements.",
        nfrs: [
          {
            nfr_id: "nc3d4e5f6a7b8c9d",
            text: "Statement export shall finish within 30 seconds.",
            submitted: null,
          },
          {
            nfr_id: "nd4e5f6a7b8c9d0e",
            text: "Exported files shall open in common spreadsheet tools.",
            submitted: null,
          },
        ],
      },
    ],
    ...overrides,
  };
  for (const group of payload.frs) {
    for (const item of group.nfrs) {
      Object.assign(item as object, {
        attribute: "LEAKED-ATTRIBUTE-MARKER",
        model_id: "leaked-model-zz9",
      });
    }
  }
  return payload;
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
