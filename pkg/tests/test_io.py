"""Unit tests for the interchange formats and canonical serialization."""

import json
import math

import numpy as np
import pytest

import grideval as ge
from grideval.io import (
    ANNOTATION_HEADER,
    CaseManifest,
    SCHEMA_VERSION,
    build_case,
    build_cases,
    dumps_canonical,
    load_annotations,
    load_embeddings,
    load_manifests,
    save_annotations,
    save_embeddings,
    save_manifests,
    sidecar_path,
    write_report,
)


class TestDumpsCanonical:
    def test_scalars(self):
        assert dumps_canonical(None) == "null"
        assert dumps_canonical(True) == "true"
        assert dumps_canonical(False) == "false"
        assert dumps_canonical(3) == "3"
        assert dumps_canonical("aé") == '"a\\u00e9"'

    def test_bool_is_not_an_int(self):
        assert dumps_canonical([True, 1]) == "[true,1]"

    def test_keys_sorted(self):
        assert dumps_canonical({"b": 1, "a": 2}) == '{"a":2,"b":1}'

    def test_nested(self):
        doc = {"z": [1, {"y": None}], "a": (False,)}
        assert dumps_canonical(doc) == '{"a":[false],"z":[1,{"y":null}]}'

    def test_numpy_types(self):
        doc = {"i": np.int64(4), "f": np.float64(0.5), "v": np.arange(3)}
        assert dumps_canonical(doc) == '{"f":0.5,"i":4,"v":[0,1,2]}'

    def test_floats_roundtrip_bitwise(self):
        rng = np.random.default_rng(60)
        values = list(rng.normal(size=50)) + [
            0.1, 1e-300, 1e300, -0.0, 2.0**-1074, math.pi,
        ]
        for x in values:
            text = dumps_canonical(float(x))
            back = json.loads(text)
            assert (back == x and math.copysign(1, back) == math.copysign(1, x))

    def test_output_is_valid_json(self):
        rng = np.random.default_rng(61)
        doc = {"a": list(rng.normal(size=10)), "b": {"c": 1, "d": "x"}}
        parsed = json.loads(dumps_canonical(doc))
        assert parsed["b"]["c"] == 1

    def test_idempotent_through_parse(self):
        rng = np.random.default_rng(62)
        doc = {"vals": list(rng.normal(size=20)), "n": 3, "s": "id"}
        once = dumps_canonical(doc)
        again = dumps_canonical(json.loads(once))
        assert once == again

    def test_nonfinite_rejected(self):
        for bad in (math.inf, -math.inf, math.nan):
            with pytest.raises(ge.InvalidInputError):
                dumps_canonical({"x": bad})

    def test_nonstring_keys_rejected(self):
        with pytest.raises(ge.InvalidInputError):
            dumps_canonical({1: "x"})

    def test_unsupported_type_rejected(self):
        with pytest.raises(ge.InvalidInputError):
            dumps_canonical({"x": object()})


def _embeddings(rng, n=5, d=6, prefix="e"):
    return [
        ge.Embedding(id=f"{prefix}{i:03d}", vector=rng.normal(size=d))
        for i in range(n)
    ]


class TestEmbeddingStore:
    def test_roundtrip_bitwise(self, tmp_path):
        rng = np.random.default_rng(63)
        embs = _embeddings(rng)
        path = tmp_path / "store.jsonl"
        save_embeddings(path, embs)
        loaded = load_embeddings(path)
        assert sorted(loaded) == [e.id for e in embs]
        for e in embs:
            assert np.array_equal(loaded[e.id].vector, e.vector)
        second = tmp_path / "store2.jsonl"
        save_embeddings(second, loaded)
        assert path.read_bytes() == second.read_bytes()

    def test_file_sorted_by_id(self, tmp_path):
        rng = np.random.default_rng(64)
        embs = list(reversed(_embeddings(rng)))
        path = tmp_path / "store.jsonl"
        save_embeddings(path, embs)
        ids = [json.loads(line)["id"] for line in path.read_text().splitlines()]
        assert ids == sorted(ids)

    def test_wide_record(self, tmp_path):
        rng = np.random.default_rng(65)
        emb = ge.Embedding(id="wide", vector=rng.normal(size=2048))
        path = tmp_path / "wide.jsonl"
        save_embeddings(path, [emb])
        loaded = load_embeddings(path)
        assert loaded["wide"].dim == 2048
        assert np.array_equal(loaded["wide"].vector, emb.vector)

    def test_empty_file_is_empty_store(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_embeddings(path) == {}

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "gaps.jsonl"
        rec = {"dim": 2, "id": "a", "values": [1.0, 2.0]}
        path.write_text("\n" + json.dumps(rec) + "\n\n")
        assert list(load_embeddings(path)) == ["a"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ge.IngestionError):
            load_embeddings(tmp_path / "nope.jsonl")

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"dim":2,"id":"a","values":[1.0,2.0]}\n{oops\n')
        with pytest.raises(ge.IngestionError, match="line 2"):
            load_embeddings(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        rec = '{"dim":1,"id":"a","values":[1.0]}\n'
        path.write_text(rec + rec)
        with pytest.raises(ge.IngestionError, match="duplicate id"):
            load_embeddings(path)

    def test_dim_mismatch_names_both_ids(self, tmp_path):
        path = tmp_path / "mix.jsonl"
        path.write_text(
            '{"dim":2,"id":"first","values":[1.0,2.0]}\n'
            '{"dim":3,"id":"second","values":[1.0,2.0,3.0]}\n'
        )
        with pytest.raises(ge.IngestionError, match="first") as exc:
            load_embeddings(path)
        assert "second" in str(exc.value)

    def test_values_length_mismatch(self, tmp_path):
        path = tmp_path / "short.jsonl"
        path.write_text('{"dim":3,"id":"a","values":[1.0,2.0]}\n')
        with pytest.raises(ge.IngestionError, match="length 3"):
            load_embeddings(path)

    def test_values_and_offset_are_exclusive(self, tmp_path):
        path = tmp_path / "both.jsonl"
        path.write_text('{"dim":1,"id":"a","values":[1.0],"offset":0}\n')
        with pytest.raises(ge.IngestionError, match="exactly one"):
            load_embeddings(path)
        path.write_text('{"dim":1,"id":"a"}\n')
        with pytest.raises(ge.IngestionError, match="exactly one"):
            load_embeddings(path)

    def test_missing_id_or_dim(self, tmp_path):
        path = tmp_path / "nofields.jsonl"
        path.write_text('{"dim":1,"values":[1.0]}\n')
        with pytest.raises(ge.IngestionError):
            load_embeddings(path)
        path.write_text('{"id":"a","values":[1.0]}\n')
        with pytest.raises(ge.IngestionError):
            load_embeddings(path)

    def test_zero_vector_rejected_at_load(self, tmp_path):
        path = tmp_path / "zero.jsonl"
        path.write_text('{"dim":2,"id":"a","values":[0.0,0.0]}\n')
        with pytest.raises(ge.IngestionError, match="line 1"):
            load_embeddings(path)

    def test_nonfinite_values_rejected_at_load(self, tmp_path):
        path = tmp_path / "inf.jsonl"
        path.write_text('{"dim":1,"id":"a","values":[Infinity]}\n')
        with pytest.raises(ge.IngestionError, match="line 1"):
            load_embeddings(path)

    def test_sidecar_roundtrip(self, tmp_path):
        rng = np.random.default_rng(66)
        embs = _embeddings(rng, n=4, d=7)
        path = tmp_path / "side.jsonl"
        save_embeddings(path, embs, sidecar=True)
        raw = sidecar_path(path)
        assert raw.exists() and raw.stat().st_size == 4 * 7 * 4
        loaded = load_embeddings(path)
        for e in embs:
            quantized = e.vector.astype("<f4").astype(np.float64)
            assert np.array_equal(loaded[e.id].vector, quantized)
        second = tmp_path / "side2.jsonl"
        save_embeddings(second, loaded, sidecar=True)
        assert path.read_bytes() == second.read_bytes()
        assert raw.read_bytes() == sidecar_path(second).read_bytes()

    def test_sidecar_missing(self, tmp_path):
        path = tmp_path / "lost.jsonl"
        path.write_text('{"dim":1,"id":"a","offset":0}\n')
        with pytest.raises(ge.IngestionError, match="sidecar"):
            load_embeddings(path)

    def test_sidecar_offset_out_of_bounds(self, tmp_path):
        path = tmp_path / "oob.jsonl"
        path.write_text('{"dim":2,"id":"a","offset":4}\n')
        sidecar_path(path).write_bytes(b"\x00" * 8)
        with pytest.raises(ge.IngestionError, match="bounds"):
            load_embeddings(path)

    def test_save_rejects_duplicate_ids(self, tmp_path):
        emb = ge.Embedding(id="a", vector=[1.0])
        with pytest.raises(ge.InvalidInputError):
            save_embeddings(tmp_path / "x.jsonl", [emb, emb])


class TestManifests:
    def _manifest(self):
        return CaseManifest(
            prompt_id="p1", width=2, height=1,
            images=(("i0", "e0", 1.0), ("i1", "e1", 0.25)),
            targets=("t0", "t1"),
        )

    def test_roundtrip(self, tmp_path):
        path = tmp_path / "cases.json"
        save_manifests(path, [self._manifest()])
        loaded = load_manifests(path)
        assert len(loaded) == 1
        m = loaded[0]
        assert m.prompt_id == "p1"
        assert m.images == (("i0", "e0", 1.0), ("i1", "e1", 0.25))
        assert m.targets == ("t0", "t1")
        second = tmp_path / "cases2.json"
        save_manifests(second, loaded)
        assert path.read_bytes() == second.read_bytes()

    def test_saliency_defaults_to_one(self, tmp_path):
        doc = {
            "schema_version": SCHEMA_VERSION,
            "cases": [{
                "prompt_id": "p", "width": 1, "height": 1,
                "images": [{"image_id": "i", "embedding_ref": "e"}],
                "targets": [{"embedding_ref": "t"}],
            }],
        }
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc))
        assert load_manifests(path)[0].images[0][2] == 1.0

    def test_schema_version_checked(self, tmp_path):
        path = tmp_path / "v9.json"
        path.write_text(json.dumps({"schema_version": "9", "cases": []}))
        with pytest.raises(ge.IngestionError, match="schema_version"):
            load_manifests(path)

    def test_requires_cases_key(self, tmp_path):
        path = tmp_path / "bare.json"
        path.write_text(json.dumps({"schema_version": SCHEMA_VERSION}))
        with pytest.raises(ge.IngestionError, match="cases"):
            load_manifests(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        with pytest.raises(ge.IngestionError, match="invalid JSON"):
            load_manifests(path)

    def test_bad_case_entry_named_by_index(self, tmp_path):
        doc = {"schema_version": SCHEMA_VERSION,
               "cases": [{"prompt_id": "p", "width": 1}]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ge.IngestionError, match="case #0"):
            load_manifests(path)

    def test_shape_validation(self):
        with pytest.raises(ge.IngestionError, match="grid"):
            CaseManifest(prompt_id="p", width=2, height=2,
                         images=(("i", "e", 1.0),), targets=("t",))
        with pytest.raises(ge.IngestionError, match="target"):
            CaseManifest(prompt_id="p", width=1, height=1,
                         images=(("i", "e", 1.0),), targets=())


class TestBuildCase:
    def test_resolves_refs(self):
        rng = np.random.default_rng(67)
        store = {e.id: e for e in _embeddings(rng, n=4)}
        manifest = CaseManifest(
            prompt_id="p", width=2, height=1,
            images=(("i0", "e000", 0.5), ("i1", "e001", 2.0)),
            targets=("e002", "e003"),
        )
        case = build_case(manifest, store)
        assert case.size == 2
        assert case.images[0].saliency == 0.5
        assert case.images[1].embedding is store["e001"]
        assert case.targets == (store["e002"], store["e003"])

    def test_missing_ref(self):
        manifest = CaseManifest(
            prompt_id="p", width=1, height=1,
            images=(("i0", "ghost", 1.0),), targets=("ghost",),
        )
        with pytest.raises(ge.IngestionError, match="ghost"):
            build_case(manifest, {})

    def test_build_cases_on_bundled_fixtures(self, fixtures_dir):
        store = load_embeddings(fixtures_dir / "embeddings.jsonl")
        manifests = load_manifests(fixtures_dir / "manifest_x.json")
        cases = build_cases(manifests, store)
        assert sorted(c.prompt_id for c in cases) == ["p1", "p2", "p3"]
        shapes = {c.prompt_id: (c.width, c.height) for c in cases}
        assert shapes == {"p1": (2, 2), "p2": (3, 1), "p3": (3, 2)}


class TestAnnotations:
    def test_roundtrip(self, tmp_path):
        records = [
            ge.AnnotationRecord(prompt_id="p1", system_x="sx", system_y="sy",
                                ratings=(1, 2, 3)),
            ge.AnnotationRecord(prompt_id="p2", system_x="sx", system_y="sy",
                                ratings=(5, 5, 4)),
        ]
        path = tmp_path / "ann.csv"
        save_annotations(path, records)
        assert load_annotations(path) == records

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("prompt,sysx,sysy,a,b,c\np1,x,y,1,2,3\n")
        with pytest.raises(ge.IngestionError, match="header"):
            load_annotations(path)

    def test_field_count_named_by_line(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text(",".join(ANNOTATION_HEADER) + "\np1,x,y,1,2\n")
        with pytest.raises(ge.IngestionError, match="line 2"):
            load_annotations(path)

    def test_bad_rating_named_by_line(self, tmp_path):
        path = tmp_path / "badval.csv"
        path.write_text(
            ",".join(ANNOTATION_HEADER) + "\np1,x,y,1,2,3\np2,x,y,1,2,nine\n"
        )
        with pytest.raises(ge.IngestionError, match="line 3"):
            load_annotations(path)
        path.write_text(",".join(ANNOTATION_HEADER) + "\np1,x,y,0,2,3\n")
        with pytest.raises(ge.IngestionError, match="line 2"):
            load_annotations(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ge.IngestionError, match="empty"):
            load_annotations(path)

    def test_bundled_fixture(self, fixtures_dir):
        records = load_annotations(fixtures_dir / "annotations.csv")
        assert [r.prompt_id for r in records] == ["p1", "p2", "p3"]
        assert all(r.system_x == "sysX" and r.system_y == "sysY"
                   for r in records)


class TestWriteReport:
    def test_trailing_newline_and_ascii(self, tmp_path):
        path = tmp_path / "r.json"
        write_report(path, {"value": 0.5, "name": "café"})
        raw = path.read_bytes()
        assert raw.endswith(b"\n")
        assert raw == b'{"name":"caf\\u00e9","value":0.5}\n'

    def test_rejects_nan(self, tmp_path):
        with pytest.raises(ge.InvalidInputError):
            write_report(tmp_path / "r.json", {"x": float("nan")})
