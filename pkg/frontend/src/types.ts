/** Payload shapes of the evaluation HTTP API. */

export interface Progress {
  done: number;
  total: number;
}

export interface RubricLevel {
  score: number;
  label: string;
  definition: string;
}

export interface ScoringItem {
  nfr_id: string;
  text: string;
  attribute: string;
  subcharacteristic: string | null;
  justification: string;
  submitted: { validity: number; applicability: number } | null;
}

export interface SelectionItem {
  nfr_id: string;
  text: string;
  submitted: string | null;
}

export interface FrGroup<T> {
  fr_id: string;
  fr_text: string;
  nfrs: T[];
}

export interface ScoringPayload {
  task: "scoring";
  evaluator_id: string;
  frozen: boolean;
  progress: Progress;
  frs: FrGroup<ScoringItem>[];
  rubrics: { validity: RubricLevel[]; applicability: RubricLevel[] };
}

export interface SelectionPayload {
  task: "selection";
  evaluator_id: string;
  frozen: boolean;
  progress: Progress;
  frs: FrGroup<SelectionItem>[];
  options: string[];
}

export interface TaskSummary {
  task: "scoring" | "selection";
  fr_count: number;
  nfr_count: number;
  done: number;
  frozen: boolean;
}

export interface AssignmentsSummary {
  evaluator_id: string;
  tasks: TaskSummary[];
}

export interface ScoreBody {
  nfr_id: string;
  validity: number;
  applicability: number;
}

export interface SelectionBody {
  nfr_id: string;
  attribute: string;
}
