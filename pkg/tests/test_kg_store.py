import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgrag import kg_store
from kgrag.errors import EmptyField, MalformedRecord
from kgrag.kg_store import Triplet


def make_stream(lines):
    return io.BytesIO(("\n".join(lines) + "\n").encode("utf-8"))


class TestParseExport:
    def test_single_record(self):
        stream = make_stream(['{"subject": "opacity", "relation": '
                              '"suggestive_of", "object": "pneumonia", '
                              '"source_id": "r1"}'])
        [t] = kg_store.parse_export(stream)
        assert t == Triplet("opacity", "suggestive_of", "pneumonia", "r1")

    def test_empty_stream(self):
        assert kg_store.parse_export(io.BytesIO(b"")) == []

    def test_malformed_line_reported_with_number(self, fixtures_dir):
        with open(fixtures_dir / "triplets_malformed.jsonl", "rb") as fh:
            with pytest.raises(MalformedRecord) as excinfo:
                kg_store.parse_export(fh)
        assert excinfo.value.line_no == 4

    def test_first_three_lines_of_malformed_fixture_parse(self, fixtures_dir):
        lines = (fixtures_dir / "triplets_malformed.jsonl").read_bytes().splitlines()
        triplets = kg_store.parse_export(io.BytesIO(b"\n".join(lines[:3])))
        assert len(triplets) == 3

    def test_blank_subject_rejected(self):
        stream = make_stream(['{"subject": " ", "relation": "r", "object": "b"}'])
        with pytest.raises(EmptyField):
            kg_store.parse_export(stream)

    def test_unknown_keys_ignored(self):
        stream = make_stream(['{"subject": "a", "relation": "r", '
                              '"object": "b", "extra": 1}'])
        assert len(kg_store.parse_export(stream)) == 1

    def test_semicolon_field_rejected(self):
        stream = make_stream(['{"subject": "a;b", "relation": "r", "object": "c"}'])
        with pytest.raises(MalformedRecord) as excinfo:
            kg_store.parse_export(stream)
        assert excinfo.value.line_no == 1

    @given(st.text(min_size=1, max_size=20))
    def test_adversarial_fields_never_reach_canonical_text(self, field):
        import json
        line = json.dumps({"subject": field, "relation": "r", "object": "b"})
        try:
            triplets = kg_store.parse_export(io.BytesIO(line.encode("utf-8")))
        except MalformedRecord:
            return
        for t in triplets:
            text = kg_store.canonical_text(t)
            assert ";" not in text and "\n" not in text


class TestCanonicalText:
    def test_running_example(self):
        t = Triplet("opacity", "suggestive_of", "pneumonia")
        assert kg_store.canonical_text(t) == "opacity suggestive_of pneumonia"

    def test_template(self):
        assert kg_store.canonical_text(Triplet("a", "r", "b")) == "a r b"

    def test_failure_case_triplet(self):
        t = Triplet("line", "suggestive_of", "hydropneumothorax")
        assert kg_store.canonical_text(t) == "line suggestive_of hydropneumothorax"

    def test_deterministic(self):
        t1 = Triplet("a", "r", "b", "x")
        t2 = Triplet("a", "r", "b", "y")
        assert kg_store.canonical_text(t1) == kg_store.canonical_text(t2)


class TestFilterByRelation:
    def test_basic(self):
        triplets = [Triplet("a", "suggestive_of", "b"),
                    Triplet("c", "located_at", "d")]
        kept = kg_store.filter_by_relation(triplets, "suggestive_of")
        assert kept == [triplets[0]]

    def test_absent_relation(self):
        triplets = [Triplet("a", "r", "b")]
        assert kg_store.filter_by_relation(triplets, "zzz") == []

    def test_fixture_count(self, fixture_triplets):
        kept = kg_store.filter_by_relation(fixture_triplets, "suggestive_of")
        assert len(kept) == 12
        # order-preserving subset
        remaining = list(fixture_triplets)
        for t in kept:
            assert t in remaining
            remaining = remaining[remaining.index(t) + 1:]

    def test_case_sensitive(self):
        triplets = [Triplet("a", "Suggestive_of", "b")]
        assert kg_store.filter_by_relation(triplets, "suggestive_of") == []


class TestBuildDatastore:
    def test_duplicates_retained_by_default(self):
        t = Triplet("opacities", "suggestive_of", "effusions")
        records = kg_store.build_datastore([t] * 5, dedup=False)
        assert len(records) == 5
        assert [r.id for r in records] == [0, 1, 2, 3, 4]

    def test_dedup(self):
        t = Triplet("opacities", "suggestive_of", "effusions")
        records = kg_store.build_datastore([t] * 5, dedup=True)
        assert len(records) == 1

    def test_fixture_dedup_count(self, fixture_triplets):
        records = kg_store.build_datastore(fixture_triplets, dedup=True)
        assert len(records) == 17

    def test_ids_dense(self, fixture_records):
        assert [r.id for r in fixture_records] == list(range(20))

    def test_canonical_text_consistent(self, fixture_records):
        for rec in fixture_records:
            assert rec.canonical_text == kg_store.canonical_text(rec.triplet)

    @given(st.lists(st.tuples(st.sampled_from("abc"), st.sampled_from("rq"),
                              st.sampled_from("xyz")), max_size=30))
    def test_dedup_properties(self, specs):
        triplets = [Triplet(s, r, o) for s, r, o in specs]
        plain = kg_store.build_datastore(triplets, dedup=False)
        assert len(plain) == len(triplets)
        deduped = kg_store.build_datastore(triplets, dedup=True)
        texts = [r.canonical_text for r in deduped]
        assert len(texts) == len(set(texts))


class TestPersistence:
    def test_round_trip(self, fixture_records):
        buf = io.StringIO()
        kg_store.save_datastore(fixture_records, buf)
        buf.seek(0)
        loaded = kg_store.load_datastore(buf)
        assert loaded == fixture_records

    def test_header_present(self, fixture_records):
        buf = io.StringIO()
        kg_store.save_datastore(fixture_records, buf)
        header = buf.getvalue().splitlines()[0]
        assert '"format": "KGDS"' in header and '"count": 20' in header

    def test_bad_header_rejected(self):
        with pytest.raises(MalformedRecord):
            kg_store.load_datastore(io.StringIO('{"format": "nope"}\n'))

    def test_count_mismatch_rejected(self, fixture_records):
        buf = io.StringIO()
        kg_store.save_datastore(fixture_records, buf)
        lines = buf.getvalue().splitlines()
        truncated = "\n".join(lines[:-1]) + "\n"
        with pytest.raises(MalformedRecord):
            kg_store.load_datastore(io.StringIO(truncated))

    def test_determinism(self, fixture_triplets):
        out = []
        for _ in range(2):
            records = kg_store.build_datastore(fixture_triplets)
            buf = io.StringIO()
            kg_store.save_datastore(records, buf)
            out.append(buf.getvalue())
        assert out[0] == out[1]
