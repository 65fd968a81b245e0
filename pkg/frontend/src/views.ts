/** View models: flat, renderer-friendly projections of the task payloads.
 * Selection view models never carry an assigned attribute or model identity;
 * the payload has no such fields and nothing here invents them. */

import type { ScoringPayload, SelectionPayload } from "./types.js";

export interface ScoringViewModel {
  nfrId: string;
  frId: string;
  frText: string;
  nfrText: string;
  assignedAttribute: string;
  subcharacteristic: string | null;
  justification: string;
  validityInput: number | null;
  applicabilityInput: number | null;
  saved: boolean;
}

export interface SelectionViewModel {
  nfrId: string;
  frId: string;
  frText: string;
  nfrText: string;
  options: string[];
  chosen: string | null;
  saved: boolean;
}

export function buildScoringViewModels(payload: ScoringPayload): ScoringViewModel[] {
  const models: ScoringViewModel[] = [];
  for (const group of payload.frs) {
    for (const item of group.nfrs) {
      models.push({
        nfrId: item.nfr_id,
        frId: group.fr_id,
        frText: group.fr_text,
        nfrText: item.text,
        assignedAttribute: item.attribute,
        subcharacteristic: item.subcharacteristic,
        justification: item.justification,
        validityInput: item.submitted?.validity ?? null,
        applicabilityInput: item.submitted?.applicability ?? null,
        saved: item.submitted !== null,
      });
    }
  }
  return models;
}

export function buildSelectionViewModels(payload: SelectionPayload): SelectionViewModel[] {
  if (payload.options.length !== 9) {
    throw new Error(`expected exactly nine attribute options, got ${payload.options.length}`);
  }
  const models: SelectionViewModel[] = [];
  for (const group of payload.frs) {
    for (const item of group.nfrs) {
      models.push({
        nfrId: item.nfr_id,
        frId: group.fr_id,
        frText: group.fr_text,
        nfrText: item.text,
        options: [...payload.options],
        chosen: item.submitted,
        saved: item.submitted !== null,
      });
    }
  }
  return models;
}

export function scoringComplete(vm: ScoringViewModel): boolean {
  return vm.validityInput !== null && vm.applicabilityInput !== null;
}

export function selectionComplete(vm: SelectionViewModel): boolean {
  return vm.chosen !== null;
}

export function progressOf(models: { saved: boolean }[]): { done: number; total: number } {
  return {
    done: models.filter((m) => m.saved).length,
    total: models.length,
  };
}

/** Index of the first item without a saved answer, for session resume. */
export function firstUnansweredIndex(models: { saved: boolean }[]): number {
  const index = models.findIndex((m) => !m.saved);
  return index === -1 ? models.length : index;
}
