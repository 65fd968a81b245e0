"""Dual-task human evaluation service: stratified sampling, disjoint
evaluator assignments, blind selection payloads, and durable record storage
behind an HTTP API."""
from .records import (SCORING, SELECTION, TASKS, Assignment, EvaluationSample,
                      Evaluator, NfrRef, ScoreRecord, SelectionRecord)
from .sampling import allocate_strata, assign_evaluators, draw_sample
from .service import EvalService
from .store import EvalStore

__all__ = [
    "SCORING", "SELECTION", "TASKS",
    "Assignment", "EvaluationSample", "Evaluator", "NfrRef",
    "ScoreRecord", "SelectionRecord",
    "allocate_strata", "assign_evaluators", "draw_sample",
    "EvalService", "EvalStore",
]
