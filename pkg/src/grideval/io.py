"""Interchange formats: embedding stores, case manifests, annotation
CSVs, and canonical report serialization.

All writers emit canonical JSON: keys sorted, floats printed with 17
significant digits (enough to round-trip IEEE doubles), ASCII-only
strings, non-finite values rejected. Save -> load -> save is therefore
byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IngestionError, InvalidInputError
from .stats import AnnotationRecord
from .types import Embedding, GridCase, GridImage

SCHEMA_VERSION = "1"

ANNOTATION_HEADER = ("prompt_id", "system_x", "system_y", "r1", "r2", "r3")

SIDECAR_SUFFIX = ".f32"


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise InvalidInputError(f"non-finite value {x!r} cannot be serialized")
    text = format(x, ".17g")
    if not any(c in text for c in ".eE"):
        # keep the literal float-typed so parsers round-trip it (and the
        # sign of -0.0) instead of collapsing it to an integer
        text += ".0"
    return text


def _write_canonical(obj, emit) -> None:
    if obj is None:
        emit("null")
    elif obj is True:
        emit("true")
    elif obj is False:
        emit("false")
    elif isinstance(obj, str):
        emit(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, (int, np.integer)):
        emit(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        emit(_fmt_float(float(obj)))
    elif isinstance(obj, dict):
        emit("{")
        for pos, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise InvalidInputError(f"object keys must be strings, got {key!r}")
            if pos:
                emit(",")
            emit(json.dumps(key, ensure_ascii=True))
            emit(":")
            _write_canonical(obj[key], emit)
        emit("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        emit("[")
        for pos, item in enumerate(obj):
            if pos:
                emit(",")
            _write_canonical(item, emit)
        emit("]")
    else:
        raise InvalidInputError(f"cannot serialize {type(obj).__name__}")


def dumps_canonical(obj) -> str:
    """Serialize to canonical JSON (sorted keys, 17-digit floats)."""
    parts = []
    _write_canonical(obj, parts.append)
    return "".join(parts)


def write_report(path, report) -> None:
    Path(path).write_text(dumps_canonical(report) + "\n", encoding="ascii")


def sidecar_path(path) -> Path:
    return Path(str(path) + SIDECAR_SUFFIX)


def save_embeddings(path, embeddings, sidecar: bool = False) -> None:
    """Write embeddings as line-delimited JSON, sorted by id.

    Inline records carry {dim, id, values}. With sidecar=True the float
    data goes to a raw little-endian float32 file next to the main one
    and records carry a byte offset instead; that path quantizes values
    to float32.
    """
    if isinstance(embeddings, dict):
        embeddings = embeddings.values()
    ordered = sorted(embeddings, key=lambda e: e.id)
    ids = [e.id for e in ordered]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("duplicate embedding ids")
    lines = []
    blob = bytearray()
    for emb in ordered:
        if sidecar:
            record = {"dim": emb.dim, "id": emb.id, "offset": len(blob)}
            blob.extend(emb.vector.astype("<f4").tobytes())
        else:
            record = {"dim": emb.dim, "id": emb.id,
                      "values": [float(v) for v in emb.vector]}
        lines.append(dumps_canonical(record))
    Path(path).write_text("".join(line + "\n" for line in lines),
                          encoding="ascii")
    if sidecar:
        sidecar_path(path).write_bytes(bytes(blob))


def load_embeddings(path):
    """Read an embedding store back as an id -> Embedding map.

    Enforces the embedding invariants at load time: finite values,
    nonzero norm, one dimension across the whole file, unique ids.
    Malformed input raises with the offending line number.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read embeddings {path}: {exc}") from exc
    blob = None
    result = {}
    first_id = None
    first_dim = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        where = f"{path}: line {lineno}"
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestionError(f"{where}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise IngestionError(f"{where}: record must be an object")
        image_id = record.get("id")
        dim = record.get("dim")
        if not isinstance(image_id, str) or not isinstance(dim, int):
            raise IngestionError(f"{where}: need string 'id' and integer 'dim'")
        if image_id in result:
            raise IngestionError(f"{where}: duplicate id {image_id!r}")
        has_values = "values" in record
        has_offset = "offset" in record
        if has_values == has_offset:
            raise IngestionError(
                f"{where}: record needs exactly one of 'values' or 'offset'"
            )
        if has_values:
            values = record["values"]
            if not isinstance(values, list) or len(values) != dim:
                raise IngestionError(
                    f"{where}: 'values' must be a list of length {dim}"
                )
            vector = np.asarray(values, dtype=np.float64)
        else:
            if blob is None:
                side = sidecar_path(path)
                try:
                    blob = side.read_bytes()
                except OSError as exc:
                    raise IngestionError(
                        f"{where}: record references sidecar {side} "
                        f"which cannot be read: {exc}"
                    ) from exc
            offset = record["offset"]
            end = offset + 4 * dim if isinstance(offset, int) else None
            if not isinstance(offset, int) or offset < 0 or end > len(blob):
                raise IngestionError(
                    f"{where}: offset {offset!r} outside sidecar bounds"
                )
            vector = np.frombuffer(blob[offset:end], dtype="<f4").astype(np.float64)
        if first_dim is not None and dim != first_dim:
            raise IngestionError(
                f"{where}: id {image_id!r} has dim {dim} but id {first_id!r} "
                f"loaded earlier has dim {first_dim}"
            )
        try:
            emb = Embedding(id=image_id, vector=vector)
        except InvalidInputError as exc:
            raise IngestionError(f"{where}: {exc}") from exc
        if first_dim is None:
            first_id, first_dim = image_id, dim
        result[image_id] = emb
    return result


@dataclass(frozen=True)
class CaseManifest:
    """On-disk description of one grid: shape, per-image embedding
    references with saliency, and target references."""

    prompt_id: str
    width: int
    height: int
    images: tuple  # of (image_id, embedding_ref, saliency)
    targets: tuple  # of embedding_ref
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(tuple(i) for i in self.images))
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(self.images) != int(self.width) * int(self.height):
            raise IngestionError(
                f"case {self.prompt_id!r}: {self.width}x{self.height} grid "
                f"with {len(self.images)} image entries"
            )
        if not self.targets:
            raise IngestionError(f"case {self.prompt_id!r}: no targets")


def _parse_manifest_case(entry, index: int) -> CaseManifest:
    where = f"case #{index}"
    if not isinstance(entry, dict):
        raise IngestionError(f"{where}: must be an object")
    try:
        prompt_id = entry["prompt_id"]
        width = int(entry["width"])
        height = int(entry["height"])
        images = [
            (img["image_id"], img["embedding_ref"], float(img.get("saliency", 1.0)))
            for img in entry["images"]
        ]
        targets = [t["embedding_ref"] for t in entry["targets"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestionError(f"{where}: {exc!r}") from exc
    return CaseManifest(
        prompt_id=prompt_id, width=width, height=height,
        images=tuple(images), targets=tuple(targets),
    )


def load_manifests(path):
    """Read a manifest file: {schema_version, cases: [...]}."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestionError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "cases" not in doc:
        raise IngestionError(f"{path}: manifest must be an object with 'cases'")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise IngestionError(
            f"{path}: unsupported schema_version {version!r} "
            f"(expected {SCHEMA_VERSION!r})"
        )
    return [_parse_manifest_case(c, i) for i, c in enumerate(doc["cases"])]


def save_manifests(path, manifests) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "cases": [
            {
                "prompt_id": m.prompt_id,
                "width": m.width,
                "height": m.height,
                "images": [
                    {"image_id": i, "embedding_ref": r, "saliency": s}
                    for (i, r, s) in m.images
                ],
                "targets": [{"embedding_ref": r} for r in m.targets],
            }
            for m in manifests
        ],
    }
    Path(path).write_text(dumps_canonical(doc) + "\n", encoding="ascii")


def build_case(manifest: CaseManifest, embeddings) -> GridCase:
    """Resolve a manifest's embedding references into a GridCase."""
    def resolve(ref):
        try:
            return embeddings[ref]
        except KeyError:
            raise IngestionError(
                f"case {manifest.prompt_id!r}: embedding_ref {ref!r} not found"
            ) from None

    images = tuple(
        GridImage(image_id=image_id, embedding=resolve(ref), saliency=saliency)
        for (image_id, ref, saliency) in manifest.images
    )
    targets = tuple(resolve(ref) for ref in manifest.targets)
    return GridCase(
        prompt_id=manifest.prompt_id,
        width=manifest.width,
        height=manifest.height,
        images=images,
        targets=targets,
    )


def build_cases(manifests, embeddings):
    return [build_case(m, embeddings) for m in manifests]


def load_annotations(path):
    """Read annotation CSV: prompt_id,system_x,system_y,r1,r2,r3."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise IngestionError(f"{path}: empty annotation file") from None
            if tuple(h.strip() for h in header) != ANNOTATION_HEADER:
                raise IngestionError(
                    f"{path}: header must be {','.join(ANNOTATION_HEADER)}"
                )
            records = []
            for lineno, row in enumerate(reader, 2):
                if not row:
                    continue
                if len(row) != 6:
                    raise IngestionError(
                        f"{path}: line {lineno}: expected 6 fields, got {len(row)}"
                    )
                try:
                    ratings = tuple(int(v) for v in row[3:6])
                    record = AnnotationRecord(
                        prompt_id=row[0], system_x=row[1], system_y=row[2],
                        ratings=ratings,
                    )
                except (ValueError, IngestionError) as exc:
                    raise IngestionError(f"{path}: line {lineno}: {exc}") from exc
                records.append(record)
    except OSError as exc:
        raise IngestionError(f"cannot read annotations {path}: {exc}") from exc
    return records


def save_annotations(path, records) -> None:
    with Path(path).open("w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(ANNOTATION_HEADER)
        for rec in records:
            writer.writerow(
                [rec.prompt_id, rec.system_x, rec.system_y, *rec.ratings]
            )
