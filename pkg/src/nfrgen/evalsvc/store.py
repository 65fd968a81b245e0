"""Single-file embedded relational store for study data.

SQLite with write-ahead logging: every record survives a process restart and
reloads field-identical. Writes are serialized through one lock so the store
can sit behind a concurrent HTTP API.
"""
from __future__ import annotations

import json
import sqlite3
import threading
from pathlib import Path
from typing import Iterable, Mapping

from ..errors import NotFoundError, ValidationError
from .records import Assignment, EvaluationSample, Evaluator, NfrRef, ScoreRecord, SelectionRecord

_SCHEMA = """
CREATE TABLE IF NOT EXISTS frs (
    fr_id TEXT PRIMARY KEY,
    text TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS nfrs (
    nfr_id TEXT PRIMARY KEY,
    fr_id TEXT NOT NULL,
    model_id TEXT NOT NULL,
    text TEXT NOT NULL,
    attribute TEXT NOT NULL,
    subcharacteristic TEXT,
    justification TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS evaluators (
    evaluator_id TEXT PRIMARY KEY,
    display_name TEXT NOT NULL,
    years_experience INTEGER NOT NULL,
    role_title TEXT NOT NULL,
    token TEXT UNIQUE
);
CREATE TABLE IF NOT EXISTS samples (
    task TEXT PRIMARY KEY,
    sample_id TEXT NOT NULL,
    seed INTEGER NOT NULL,
    target_count INTEGER NOT NULL,
    frozen INTEGER NOT NULL DEFAULT 0,
    strata TEXT NOT NULL,
    members TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS assignments (
    evaluator_id TEXT NOT NULL,
    task TEXT NOT NULL,
    fr_ids TEXT NOT NULL,
    nfr_ids TEXT NOT NULL,
    designated_model TEXT,
    PRIMARY KEY (evaluator_id, task)
);
CREATE TABLE IF NOT EXISTS scores (
    evaluator_id TEXT NOT NULL,
    nfr_id TEXT NOT NULL,
    validity INTEGER NOT NULL,
    applicability INTEGER NOT NULL,
    submitted_at TEXT NOT NULL,
    PRIMARY KEY (evaluator_id, nfr_id)
);
CREATE TABLE IF NOT EXISTS selections (
    evaluator_id TEXT NOT NULL,
    nfr_id TEXT NOT NULL,
    attribute TEXT NOT NULL,
    submitted_at TEXT NOT NULL,
    PRIMARY KEY (evaluator_id, nfr_id)
);
CREATE TABLE IF NOT EXISTS audit_log (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    at TEXT NOT NULL,
    actor TEXT NOT NULL,
    action TEXT NOT NULL,
    detail TEXT NOT NULL
);
"""


class EvalStore:
    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.Lock()
        with self._lock:
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA foreign_keys=ON")
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    def __enter__(self) -> "EvalStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- requirement data -----------------------------------------------

    def add_frs(self, frs: Iterable[tuple[str, str]]) -> None:
        with self._lock:
            self._conn.executemany(
                "INSERT OR REPLACE INTO frs (fr_id, text) VALUES (?, ?)", list(frs))
            self._conn.commit()

    def add_nfrs(self, rows: Iterable[Mapping]) -> None:
        payload = [(r["nfr_id"], r["fr_id"], r["model_id"], r["text"],
                    r["attribute"], r.get("subcharacteristic"), r["justification"])
                   for r in rows]
        with self._lock:
            self._conn.executemany(
                "INSERT OR REPLACE INTO nfrs (nfr_id, fr_id, model_id, text, "
                "attribute, subcharacteristic, justification) VALUES (?,?,?,?,?,?,?)",
                payload)
            self._conn.commit()

    def fr_texts(self) -> dict[str, str]:
        rows = self._conn.execute("SELECT fr_id, text FROM frs").fetchall()
        return {r["fr_id"]: r["text"] for r in rows}

    def nfr_rows(self) -> list[dict]:
        rows = self._conn.execute(
            "SELECT nfr_id, fr_id, model_id, text, attribute, subcharacteristic, "
            "justification FROM nfrs ORDER BY nfr_id").fetchall()
        return [dict(r) for r in rows]

    def nfr_refs(self) -> dict[str, NfrRef]:
        rows = self._conn.execute(
            "SELECT nfr_id, fr_id, model_id, attribute FROM nfrs").fetchall()
        return {r["nfr_id"]: NfrRef(r["nfr_id"], r["fr_id"], r["model_id"],
                                    r["attribute"]) for r in rows}

    def model_ids(self) -> list[str]:
        rows = self._conn.execute("SELECT DISTINCT model_id FROM nfrs").fetchall()
        return sorted(r["model_id"] for r in rows)

    # -- evaluators ------------------------------------------------------

    def add_evaluators(self, evaluators: Iterable[Evaluator]) -> None:
        with self._lock:
            for e in evaluators:
                existing = self._conn.execute(
                    "SELECT 1 FROM evaluators WHERE evaluator_id = ?",
                    (e.evaluator_id,)).fetchone()
                if existing:
                    raise ValidationError(f"evaluator {e.evaluator_id!r} already exists")
                self._conn.execute(
                    "INSERT INTO evaluators (evaluator_id, display_name, "
                    "years_experience, role_title) VALUES (?,?,?,?)",
                    (e.evaluator_id, e.display_name, e.years_experience, e.role_title))
            self._conn.commit()

    def evaluators(self) -> list[Evaluator]:
        rows = self._conn.execute(
            "SELECT evaluator_id, display_name, years_experience, role_title "
            "FROM evaluators ORDER BY evaluator_id").fetchall()
        return [Evaluator(r["evaluator_id"], r["display_name"],
                          r["years_experience"], r["role_title"]) for r in rows]

    def set_token(self, evaluator_id: str, token: str) -> None:
        with self._lock:
            cur = self._conn.execute(
                "UPDATE evaluators SET token = ? WHERE evaluator_id = ?",
                (token, evaluator_id))
            if cur.rowcount == 0:
                raise NotFoundError(f"evaluator {evaluator_id!r} not found")
            self._conn.commit()

    def token_for(self, evaluator_id: str) -> str | None:
        row = self._conn.execute(
            "SELECT token FROM evaluators WHERE evaluator_id = ?",
            (evaluator_id,)).fetchone()
        if row is None:
            raise NotFoundError(f"evaluator {evaluator_id!r} not found")
        return row["token"]

    def evaluator_by_token(self, token: str) -> Evaluator:
        row = self._conn.execute(
            "SELECT evaluator_id, display_name, years_experience, role_title "
            "FROM evaluators WHERE token = ?", (token,)).fetchone()
        if row is None:
            raise NotFoundError("unknown evaluator token")
        return Evaluator(row["evaluator_id"], row["display_name"],
                         row["years_experience"], row["role_title"])

    # -- samples ---------------------------------------------------------

    def save_sample(self, sample: EvaluationSample, target_count: int) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO samples (task, sample_id, seed, "
                "target_count, frozen, strata, members) VALUES (?,?,?,?,0,?,?)",
                (sample.task, sample.sample_id, sample.seed, target_count,
                 json.dumps(sample.strata, sort_keys=True), json.dumps(list(sample.members))))
            self._conn.commit()

    def get_sample(self, task: str) -> EvaluationSample | None:
        row = self._conn.execute(
            "SELECT * FROM samples WHERE task = ?", (task,)).fetchone()
        if row is None:
            return None
        return EvaluationSample(
            sample_id=row["sample_id"], task=row["task"],
            members=tuple(json.loads(row["members"])),
            strata=json.loads(row["strata"]), seed=row["seed"])

    def sample_frozen(self, task: str) -> bool:
        row = self._conn.execute(
            "SELECT frozen FROM samples WHERE task = ?", (task,)).fetchone()
        return bool(row and row["frozen"])

    def freeze_sample(self, task: str) -> None:
        with self._lock:
            cur = self._conn.execute(
                "UPDATE samples SET frozen = 1 WHERE task = ?", (task,))
            if cur.rowcount == 0:
                raise NotFoundError(f"no sample exists for task {task!r}")
            self._conn.commit()

    # -- assignments -----------------------------------------------------

    def save_assignments(self, assignments: Iterable[Assignment]) -> None:
        with self._lock:
            self._conn.execute("DELETE FROM assignments")
            self._conn.executemany(
                "INSERT INTO assignments (evaluator_id, task, fr_ids, nfr_ids, "
                "designated_model) VALUES (?,?,?,?,?)",
                [(a.evaluator_id, a.task, json.dumps(list(a.fr_ids)),
                  json.dumps(list(a.nfr_ids)), a.designated_model)
                 for a in assignments])
            self._conn.commit()

    @staticmethod
    def _assignment_from_row(row: sqlite3.Row) -> Assignment:
        return Assignment(
            evaluator_id=row["evaluator_id"], task=row["task"],
            fr_ids=tuple(json.loads(row["fr_ids"])),
            nfr_ids=tuple(json.loads(row["nfr_ids"])),
            designated_model=row["designated_model"])

    def assignments(self) -> list[Assignment]:
        rows = self._conn.execute(
            "SELECT * FROM assignments ORDER BY evaluator_id, task").fetchall()
        return [self._assignment_from_row(r) for r in rows]

    def assignment_for(self, evaluator_id: str, task: str) -> Assignment | None:
        row = self._conn.execute(
            "SELECT * FROM assignments WHERE evaluator_id = ? AND task = ?",
            (evaluator_id, task)).fetchone()
        return self._assignment_from_row(row) if row else None

    # -- submissions -----------------------------------------------------

    def upsert_score(self, record: ScoreRecord) -> bool:
        """Insert or replace; returns True when a prior record was replaced."""
        with self._lock:
            prior = self._conn.execute(
                "SELECT validity, applicability FROM scores WHERE evaluator_id = ? "
                "AND nfr_id = ?", (record.evaluator_id, record.nfr_id)).fetchone()
            self._conn.execute(
                "INSERT OR REPLACE INTO scores (evaluator_id, nfr_id, validity, "
                "applicability, submitted_at) VALUES (?,?,?,?,?)",
                (record.evaluator_id, record.nfr_id, record.validity,
                 record.applicability, record.submitted_at))
            if prior is not None:
                self._conn.execute(
                    "INSERT INTO audit_log (at, actor, action, detail) VALUES (?,?,?,?)",
                    (record.submitted_at, record.evaluator_id, "score_replaced",
                     json.dumps({"nfr_id": record.nfr_id,
                                 "previous": [prior["validity"], prior["applicability"]],
                                 "new": [record.validity, record.applicability]})))
            self._conn.commit()
            return prior is not None

    def upsert_selection(self, record: SelectionRecord) -> bool:
        with self._lock:
            prior = self._conn.execute(
                "SELECT attribute FROM selections WHERE evaluator_id = ? AND nfr_id = ?",
                (record.evaluator_id, record.nfr_id)).fetchone()
            self._conn.execute(
                "INSERT OR REPLACE INTO selections (evaluator_id, nfr_id, attribute, "
                "submitted_at) VALUES (?,?,?,?)",
                (record.evaluator_id, record.nfr_id, record.chosen_attribute,
                 record.submitted_at))
            if prior is not None:
                self._conn.execute(
                    "INSERT INTO audit_log (at, actor, action, detail) VALUES (?,?,?,?)",
                    (record.submitted_at, record.evaluator_id, "selection_replaced",
                     json.dumps({"nfr_id": record.nfr_id,
                                 "previous": prior["attribute"],
                                 "new": record.chosen_attribute})))
            self._conn.commit()
            return prior is not None

    def scores(self) -> list[ScoreRecord]:
        rows = self._conn.execute(
            "SELECT * FROM scores ORDER BY evaluator_id, nfr_id").fetchall()
        return [ScoreRecord(r["evaluator_id"], r["nfr_id"], r["validity"],
                            r["applicability"], r["submitted_at"]) for r in rows]

    def selections(self) -> list[SelectionRecord]:
        rows = self._conn.execute(
            "SELECT * FROM selections ORDER BY evaluator_id, nfr_id").fetchall()
        return [SelectionRecord(r["evaluator_id"], r["nfr_id"], r["attribute"],
                                r["submitted_at"]) for r in rows]

    def score_for(self, evaluator_id: str, nfr_id: str) -> ScoreRecord | None:
        row = self._conn.execute(
            "SELECT * FROM scores WHERE evaluator_id = ? AND nfr_id = ?",
            (evaluator_id, nfr_id)).fetchone()
        if row is None:
            return None
        return ScoreRecord(row["evaluator_id"], row["nfr_id"], row["validity"],
                           row["applicability"], row["submitted_at"])

    def selection_for(self, evaluator_id: str, nfr_id: str) -> SelectionRecord | None:
        row = self._conn.execute(
            "SELECT * FROM selections WHERE evaluator_id = ? AND nfr_id = ?",
            (evaluator_id, nfr_id)).fetchone()
        if row is None:
            return None
        return SelectionRecord(row["evaluator_id"], row["nfr_id"],
                               row["attribute"], row["submitted_at"])

    def audit_entries(self) -> list[dict]:
        rows = self._conn.execute("SELECT * FROM audit_log ORDER BY id").fetchall()
        return [dict(r) for r in rows]
