from __future__ import annotations

import io
import json

import pytest
from hypothesis import given, strategies as st

from nfrgen.corpus import (FrSubset, RequirementKind, SelectionStrategy, SrsDocument,
                           filter_srs_documents, parse_requirements_file,
                           select_fr_subset)
from nfrgen.errors import ArgumentError, CapacityError, RowParseError

from conftest import make_frs


def _parse(text: str, format: str = "tsv"):
    return parse_requirements_file(io.BytesIO(text.encode("utf-8")), format)


# The 15 source documents: (name, year, fr_count). Their FR counts sum to 503.
DOCS = [
    ("Email", 2009, 95), ("GParted", 2010, 24), ("opensg 0.1", 2011, 18),
    ("Split merge", 2010, 13), ("Fishing Logbook", 2010, 35), ("home 1.3", 2010, 33),
    ("Gaia", 2009, 27), ("warc III", 2009, 35), ("Library System", 2009, 51),
    ("Peppol", 2009, 11), ("VUB", 2008, 31), ("Video Search", 2009, 16),
    ("Caiso", 2008, 54), ("KeePass", 2008, 33), ("Peering", 2008, 27),
]


class TestParse:
    def test_direct_column_mapping(self):
        result = _parse("The system shall allow users to log in.\tFR\n")
        assert len(result.records) == 1
        record = result.records[0]
        assert record.kind is RequirementKind.FR
        assert record.text == "The system shall allow users to log in."
        assert not result.rejected

    def test_empty_stream(self):
        result = _parse("")
        assert result.records == [] and result.rejected == []

    def test_full_dataset_counts(self):
        # 6,118 rows: 3,964 functional and 2,154 non-functional labels.
        lines = [f"Requirement text {i}.\tFR" for i in range(3964)]
        lines += [f"Requirement text {i}.\tNFR" for i in range(3964, 6118)]
        result = _parse("\n".join(lines) + "\n")
        assert len(result.records) == 6118
        assert result.count(RequirementKind.FR) == 3964
        assert result.count(RequirementKind.NFR) == 2154

    def test_header_detected_by_exact_names(self):
        result = _parse("text\tlabel\tsource_doc\tyear\nDo something.\tFR\tdoc\t2009\n")
        assert len(result.records) == 1
        assert result.records[0].source_doc == "doc"
        assert result.records[0].year == 2009

    def test_non_header_first_row_kept(self):
        result = _parse("Text describing a feature.\tFR\n")
        assert len(result.records) == 1

    def test_label_synonyms_case_insensitive(self):
        result = _parse("A.\tfunctional\nB.\tNon-Functional\nC.\tfr\nD.\tNFR\n")
        kinds = [r.kind for r in result.records]
        assert kinds == [RequirementKind.FR, RequirementKind.NFR,
                         RequirementKind.FR, RequirementKind.NFR]

    def test_unknown_label_rejected_not_dropped(self):
        result = _parse("A.\tFR\nB.\tF\nC.\tNFR\n")
        assert len(result.records) == 2
        assert len(result.rejected) == 1
        assert result.rejected[0].row_number == 2
        assert "F" in result.rejected[0].reason

    def test_malformed_row_raises_with_row_number(self):
        with pytest.raises(RowParseError) as exc:
            _parse("A.\tFR\nonly one column\n")
        assert exc.value.row_number == 2
        assert "only one column" in exc.value.raw

    def test_empty_text_is_malformed(self):
        with pytest.raises(RowParseError):
            _parse("   \tFR\n")

    def test_csv_format(self):
        result = _parse("Do the thing.,FR\n", format="csv")
        assert result.records[0].kind is RequirementKind.FR

    def test_ids_deterministic_from_row_index(self):
        first = _parse("A.\tFR\nB.\tNFR\n")
        second = _parse("A.\tFR\nB.\tNFR\n")
        assert [r.id for r in first.records] == [r.id for r in second.records]
        assert len({r.id for r in first.records}) == 2

    def test_duplicate_texts_kept_with_warning(self):
        result = _parse("Same text.\tFR\nSame text.\tFR\n")
        assert len(result.records) == 2
        assert len({r.id for r in result.records}) == 2
        assert any("duplicate" in w for w in result.warnings)

    def test_not_utf8_rejected(self):
        with pytest.raises(Exception) as exc:
            parse_requirements_file(io.BytesIO(b"\xff\xfe bad"), "tsv")
        assert "UTF-8" in str(exc.value)

    @given(st.lists(st.tuples(
        st.text(alphabet="abcXYZ ", min_size=1, max_size=20).filter(str.strip),
        st.sampled_from(["FR", "NFR", "functional", "non-functional", "bogus", "F"])),
        max_size=40))
    def test_totality_records_plus_rejected(self, rows):
        text = "".join(f"{t}\t{label}\n" for t, label in rows)
        result = _parse(text)
        assert len(result.records) + len(result.rejected) == len(rows)


class TestFilterDocs:
    def docs(self):
        return [SrsDocument(name=n, topic="", year=y, fr_count=c) for n, y, c in DOCS]

    def test_all_fifteen_in_window(self):
        docs = self.docs()
        kept = filter_srs_documents(docs, 2008, 2011)
        assert len(kept) == 15
        assert sum(d.fr_count for d in kept) == 503

    def test_empty_window(self):
        assert filter_srs_documents(self.docs(), 3000, 3001) == []

    def test_boundary_inclusion(self):
        docs = [SrsDocument("a", "", 2007, 1), SrsDocument("b", "", 2008, 1),
                SrsDocument("c", "", 2012, 1)]
        kept = filter_srs_documents(docs, 2008, 2011)
        assert [d.name for d in kept] == ["b"]

    def test_min_over_max(self):
        with pytest.raises(ArgumentError):
            filter_srs_documents(self.docs(), 2011, 2008)


class TestSelectSubset:
    def test_deterministic_and_distinct(self):
        records = make_frs(100)
        first = select_fr_subset(records, 34, "uniform_random", seed=7)
        second = select_fr_subset(records, 34, "uniform_random", seed=7)
        assert first == second
        assert len(first.members) == 34
        assert len(set(first.member_ids)) == 34

    def test_count_zero(self):
        subset = select_fr_subset(make_frs(5), 0, "uniform_random", seed=1)
        assert subset.members == ()

    def test_capacity_error_reports_both_numbers(self):
        with pytest.raises(CapacityError) as exc:
            select_fr_subset(make_frs(10), 34, "uniform_random", seed=1)
        assert exc.value.requested == 34
        assert exc.value.available == 10

    def test_nfr_records_not_selectable(self):
        records = make_frs(3)
        parsed = _parse("An NFR.\tNFR\n")
        with pytest.raises(CapacityError):
            select_fr_subset(records + parsed.records, 4, "uniform_random", seed=1)

    def test_stratified_balance(self):
        records = []
        for doc in ("d1", "d2", "d3"):
            for r in make_frs(10, prefix=f"{doc}-FR"):
                records.append(type(r)(id=r.id, text=r.text, kind=r.kind,
                                       source_doc=doc))
        subset = select_fr_subset(records, 8, "per_document_stratified", seed=3)
        per_doc = {}
        for member in subset.members:
            per_doc[member.source_doc] = per_doc.get(member.source_doc, 0) + 1
        assert max(per_doc.values()) - min(per_doc.values()) <= 1
        assert sum(per_doc.values()) == 8

    def test_explicit_list(self):
        records = make_frs(6)
        subset = select_fr_subset(records, 3, "explicit_list", seed=0,
                                  explicit_ids=["FR-05", "FR-01", "FR-03"])
        assert list(subset.member_ids) == ["FR-05", "FR-01", "FR-03"]

    def test_explicit_list_requires_ids(self):
        with pytest.raises(ArgumentError):
            select_fr_subset(make_frs(6), 3, "explicit_list", seed=0)

    def test_manifest_round_trip(self):
        subset = select_fr_subset(make_frs(20), 7, "uniform_random", seed=11)
        reparsed = FrSubset.from_dict(json.loads(json.dumps(subset.to_dict())))
        assert reparsed == subset
        assert reparsed.strategy is SelectionStrategy.UNIFORM_RANDOM

    @given(st.integers(min_value=0, max_value=30), st.integers())
    def test_determinism_property(self, count, seed):
        records = make_frs(30)
        a = select_fr_subset(records, count, "uniform_random", seed)
        b = select_fr_subset(records, count, "uniform_random", seed)
        assert a == b
        assert len(set(a.member_ids)) == count
