"""File formats: keypoint CSV, dataset manifests, model archives, external
AU matrices, curve tables and interpretability label files.

Matrix archive layout (UTF-8 text)::

    # dfecs archive
    format_version: 1
    kind: "ffm_model"
    layout: "interleaved-xy-68"
    <key>: <JSON value>
    ---
    matrix <name> <rows> <cols> sha256=<hex digest of the row lines>
    <row of repr floats separated by single spaces>
    ...
    end

Header values are JSON. Floats are written with ``repr`` so loading is
bit-exact.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .errors import (
    ArchiveInconsistent,
    ChecksumMismatch,
    IncompleteLabels,
    ParseError,
    SchemaError,
    ShapeError,
    VersionUnsupported,
)
from .evaluation import InterpretabilityRecord, VarianceCurve
from .ffm import FullFaceModel
from .geometry import N_KEYPOINTS, RawFrame, StandardizedFrame, Template
from .kpm import LAYOUT_TAG, N_ROWS, FacePartition

PathLike = Union[str, os.PathLike]

CSV_HEADER = ["subject", "frame", "is_neutral"] + [
    f"{axis}{i}" for i in range(N_KEYPOINTS) for axis in ("x", "y")]
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)
MAGIC = "# dfecs archive"

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


# ---------------------------------------------------------------- keypoints

@dataclass(frozen=True)
class DatasetManifest:
    """Subjects and their keypoint files; ``neutral`` maps subject to the
    designated neutral frame index (overrides the CSV flag)."""

    name: str
    files: Mapping[str, Tuple[str, ...]]
    neutral: Mapping[str, int] = field(default_factory=dict)
    template_id: str = "68-point"
    frame_rate: Optional[float] = None
    root: str = "."

    def __post_init__(self):
        empty = [s for s, f in self.files.items() if not f]
        if empty:
            raise SchemaError(f"subjects without frame files: {empty}")
        if self.template_id != "68-point":
            raise SchemaError(f"unsupported keypoint template {self.template_id!r}")

    def paths(self) -> List[Path]:
        out = []
        for files in self.files.values():
            for f in files:
                p = Path(self.root) / f
                if p not in out:
                    out.append(p)
        return out


def load_manifest(path: PathLike) -> DatasetManifest:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc.msg}", row=exc.lineno) from None
    if not isinstance(d, dict) or "subjects" not in d:
        raise SchemaError("manifest needs a 'subjects' object")
    layout = d.get("layout", LAYOUT_TAG)
    if layout != LAYOUT_TAG:
        raise SchemaError(f"manifest layout {layout!r} is not {LAYOUT_TAG!r}")
    files, neutral = {}, {}
    for subject, entry in d["subjects"].items():
        fl = entry.get("files", [])
        files[subject] = tuple([fl] if isinstance(fl, str) else fl)
        if entry.get("neutral_frame") is not None:
            neutral[subject] = int(entry["neutral_frame"])
    return DatasetManifest(d.get("name", path.stem), files, neutral,
                           d.get("template_id", "68-point"), d.get("frame_rate"),
                           str(path.parent))


def _read_comments(lines):
    meta, body = {}, []
    in_header = True
    for line in lines:
        if in_header and line.startswith("#"):
            key, _, value = line[1:].partition(":")
            if _:
                meta[key.strip()] = value.strip()
            continue
        in_header = False
        body.append(line)
    return meta, body


def _parse_bool(text, row, col):
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ParseError(f"is_neutral must be 0/1 or true/false, got {text!r}", row, col)


def load_keypoints(path: PathLike, manifest: Optional[DatasetManifest] = None) -> List[RawFrame]:
    """Frames from one CSV file.

    Raw files: empty, NaN or (0, 0) coordinates mark a missing keypoint.
    Files written by :func:`write_standardized` (``# kind: standardized``)
    load as StandardizedFrame and only empty cells mark missing keypoints.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 ({exc.reason})") from None
    lines = text.splitlines()
    meta, body = _read_comments(lines)
    n_comment = len(lines) - len(body)
    if meta.get("layout", LAYOUT_TAG) != LAYOUT_TAG:
        raise SchemaError(f"{path}: layout {meta['layout']!r} is not {LAYOUT_TAG!r}")
    standardized = meta.get("kind") == "standardized"
    rows = list(csv.reader(body))
    if not rows:
        raise SchemaError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    if len(header) != len(CSV_HEADER):
        raise SchemaError(f"{path}: expected {len(CSV_HEADER)} columns, header has {len(header)}")
    if header != CSV_HEADER:
        bad = next(i for i, (a, b) in enumerate(zip(header, CSV_HEADER)) if a != b)
        raise SchemaError(f"{path}: header column {bad + 1} is {header[bad]!r}, expected {CSV_HEADER[bad]!r}")

    frames = []
    for r, row in enumerate(rows[1:], start=n_comment + 2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise SchemaError(f"{path}: row {r} has {len(row)} columns, expected {len(CSV_HEADER)}")
        subject = row[0].strip()
        if not subject:
            raise ParseError("empty subject id", r, 1)
        try:
            frame_index = int(row[1])
        except ValueError:
            raise ParseError(f"frame index {row[1]!r} is not an integer", r, 2) from None
        if frame_index < 0:
            raise ParseError("frame index must be nonnegative", r, 2)
        is_neutral = _parse_bool(row[2], r, 3)
        coords = np.zeros((N_KEYPOINTS, 2))
        valid = np.ones(N_KEYPOINTS, dtype=bool)
        for i in range(N_KEYPOINTS):
            cells = row[3 + 2 * i], row[4 + 2 * i]
            for a, cell in enumerate(cells):
                c = cell.strip()
                if not c:
                    valid[i] = False
                    continue
                try:
                    val = float(c)
                except ValueError:
                    raise ParseError(f"coordinate {c!r} is not a number", r, 4 + 2 * i + a) from None
                if math.isnan(val):
                    if standardized:
                        raise ParseError("NaN in a standardized file", r, 4 + 2 * i + a)
                    valid[i] = False
                elif math.isinf(val):
                    raise ParseError("infinite coordinate", r, 4 + 2 * i + a)
                else:
                    coords[i, a] = val
            if not standardized and valid[i] and coords[i, 0] == 0.0 and coords[i, 1] == 0.0:
                valid[i] = False
        if manifest is not None and subject in manifest.neutral:
            is_neutral = frame_index == manifest.neutral[subject]
        cls = StandardizedFrame if standardized else RawFrame
        frames.append(cls(subject, frame_index, is_neutral, coords, valid))
    return frames


def load_dataset(manifest: Union[DatasetManifest, PathLike]) -> List[RawFrame]:
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    frames = []
    for p in manifest.paths():
        frames.extend(load_keypoints(p, manifest))
    return frames


def _fmt(x: float) -> str:
    return repr(float(x))


def write_keypoints(frames: Sequence[RawFrame], path: PathLike, *, kind: Optional[str] = None) -> None:
    """CSV with missing keypoints as empty cells."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if kind:
            fh.write(f"# kind: {kind}\n")
        fh.write(f"# layout: {LAYOUT_TAG}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for f in frames:
            cells = [f.subject_id, str(f.frame_index), "1" if f.is_neutral else "0"]
            for i in range(N_KEYPOINTS):
                if f.validity[i]:
                    cells += [_fmt(f.coords[i, 0]), _fmt(f.coords[i, 1])]
                else:
                    cells += ["", ""]
            w.writerow(cells)


def write_standardized(frames: Sequence[StandardizedFrame], path: PathLike) -> None:
    write_keypoints(frames, path, kind="standardized")


# ---------------------------------------------------------------- archives

def _block_lines(M: np.ndarray) -> List[str]:
    return [" ".join(_fmt(x) for x in row) for row in M]


def _digest(lines: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def write_archive(path: PathLike, kind: str, header: Mapping, matrices: Mapping[str, np.ndarray]) -> None:
    out = [MAGIC, f"format_version: {FORMAT_VERSION}", f"kind: {json.dumps(kind)}",
           f"layout: {json.dumps(LAYOUT_TAG)}"]
    for key, value in header.items():
        if key in ("format_version", "kind", "layout"):
            raise ValueError(f"reserved header key {key!r}")
        out.append(f"{key}: {json.dumps(value, sort_keys=True)}")
    out.append("---")
    for name, M in matrices.items():
        M = np.atleast_2d(np.asarray(M, dtype=float))
        lines = _block_lines(M)
        out.append(f"matrix {name} {M.shape[0]} {M.shape[1]} sha256={_digest(lines)}")
        out.extend(lines)
        out.append("end")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def read_archive(path: PathLike, kind: Optional[str] = None):
    """Return ``(header, matrices)`` after version, layout and checksum checks."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ParseError(f"{path}: not a dfecs archive", row=1)
    header: Dict[str, object] = {}
    i = 1
    while i < len(lines) and lines[i].strip() != "---":
        key, sep, value = lines[i].partition(":")
        if not sep:
            raise ParseError(f"{path}: malformed header line", row=i + 1)
        try:
            header[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            raise ParseError(f"{path}: header value for {key.strip()!r} is not JSON", row=i + 1) from None
        i += 1
    if i == len(lines):
        raise ParseError(f"{path}: header terminator '---' missing")
    version = header.get("format_version")
    if version not in SUPPORTED_VERSIONS:
        raise VersionUnsupported(f"{path}: archive format version {version!r} is not supported "
                                 f"(supported: {SUPPORTED_VERSIONS})")
    if header.get("layout") != LAYOUT_TAG:
        raise SchemaError(f"{path}: layout tag {header.get('layout')!r} is not {LAYOUT_TAG!r}")
    if kind is not None and header.get("kind") != kind:
        raise SchemaError(f"{path}: archive kind is {header.get('kind')!r}, expected {kind!r}")
    i += 1
    matrices = {}
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        parts = line.split()
        if len(parts) != 5 or parts[0] != "matrix" or not parts[4].startswith("sha256="):
            raise ParseError(f"{path}: bad matrix block header", row=i + 1)
        name = parts[1]
        try:
            rows, cols = int(parts[2]), int(parts[3])
        except ValueError:
            raise ParseError(f"{path}: bad matrix dimensions", row=i + 1) from None
        block = lines[i + 1:i + 1 + rows]
        end = i + 1 + rows
        if len(block) != rows or end >= len(lines) or lines[end].strip() != "end":
            raise ChecksumMismatch(f"{path}: matrix {name!r} is truncated")
        if _digest(block) != parts[4][len("sha256="):]:
            raise ChecksumMismatch(f"{path}: checksum of matrix {name!r} does not match")
        try:
            M = np.array([[float(x) for x in row.split()] for row in block], dtype=float).reshape(rows, cols)
        except ValueError:
            raise ParseError(f"{path}: matrix {name!r} has malformed rows", row=i + 2) from None
        matrices[name] = M
        i = end + 1
    return header, matrices


def save_model(model: FullFaceModel, path: PathLike) -> None:
    header = {
        "software_version": __version__,
        "beta": model.beta,
        "partition": model.partition.to_dict(),
        "parts": list(model.parts),
        "hierarchy": model.hierarchy,
        "ve_train": model.ve_train,
        "metadata": model.metadata,
        "template_subject": None if model.template is None else model.template.subject_id,
    }
    mats = {"U": model.U, "A": model.A, "B": model.B, "U_prime": model.U_prime}
    if model.template is not None:
        mats["template_coords"] = model.template.coords
        mats["template_validity"] = model.template.validity.astype(float)[:, None]
    write_archive(path, "ffm_model", header, mats)


def load_model(path: PathLike) -> FullFaceModel:
    header, mats = read_archive(path, kind="ffm_model")
    missing = [k for k in ("U", "A", "B", "U_prime") if k not in mats]
    if missing:
        raise SchemaError(f"{path}: archive lacks matrices {missing}")
    U, A = mats["U"], mats["A"]
    if U.shape[0] != N_ROWS:
        raise ShapeError(f"{path}: U has {U.shape[0]} rows, expected {N_ROWS}")
    if U.shape[1] != A.shape[0] or A.shape[1] != mats["B"].shape[0]:
        raise ShapeError(f"{path}: U, A, B shapes do not chain")
    recomputed = U @ A
    stored = mats["U_prime"]
    tol = 1e-12 * max(1.0, float(np.abs(recomputed).max(initial=0.0)))
    if stored.shape != recomputed.shape or np.abs(stored - recomputed).max(initial=0.0) > tol:
        raise ArchiveInconsistent(f"{path}: stored U' differs from U A")
    template = None
    if "template_coords" in mats:
        template = Template(mats["template_coords"], mats["template_validity"][:, 0] > 0.5,
                            header.get("template_subject") or "")
    model = FullFaceModel(U, A, mats["B"], float(header["beta"]),
                          FacePartition.from_dict(header["partition"]), tuple(header["parts"]),
                          header["hierarchy"], float(header["ve_train"]), template,
                          header.get("metadata") or {})
    return model


@dataclass(frozen=True, eq=False)
class AuMatrix:
    matrix: np.ndarray  # 136 x n
    provenance: str
    names: Tuple[str, ...] = ()


def save_au_matrix(U, path: PathLike, provenance: str = "external",
                   names: Sequence[str] = ()) -> None:
    U = np.asarray(U, dtype=float)
    write_archive(path, "au_matrix", {"provenance": provenance, "names": list(names)}, {"U": U})


def load_external_au_matrix(path: PathLike) -> AuMatrix:
    """AU matrix file in the archive format; rows must be 136."""
    header, mats = read_archive(path)
    if header.get("kind") == "ffm_model":
        return AuMatrix(load_model(path).U_prime, "dfecs")
    if "U" not in mats:
        raise SchemaError(f"{path}: no matrix named 'U'")
    U = mats["U"]
    if U.shape[0] != N_ROWS:
        raise ShapeError(f"{path}: AU matrix has {U.shape[0]} rows, expected {N_ROWS}")
    names = tuple(header.get("names") or ())
    if names and len(names) != U.shape[1]:
        raise SchemaError(f"{path}: {len(names)} names for {U.shape[1]} columns")
    return AuMatrix(U, str(header.get("provenance", "external")), names)


# ---------------------------------------------------------------- curves, labels

def write_curve(curve: VarianceCurve, path: PathLike) -> None:
    lines = [f"# axis: {curve.axis}", f"# label: {curve.label}",
             f"# excluded_zero_samples: {curve.n_excluded}",
             "\t".join([curve.axis, "mean_ve", "pooled_ve", "n_samples"])]
    for v, mean, pooled, n in curve.rows():
        lines.append("\t".join([_fmt(v), _fmt(mean), _fmt(pooled), str(n)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_curve(path: PathLike) -> dict:
    meta, body = _read_comments(Path(path).read_text(encoding="utf-8").splitlines())
    rows = [line.split("\t") for line in body[1:] if line.strip()]
    try:
        arr = np.array([[float(c) for c in r[:3]] for r in rows]).reshape(-1, 3)
        n = int(rows[0][3]) if rows else 0
    except (ValueError, IndexError):
        raise ParseError(f"{path}: malformed curve file") from None
    return {"axis": meta.get("axis", ""), "label": meta.get("label", ""),
            "values": arr[:, 0], "mean_ve": arr[:, 1], "pooled_ve": arr[:, 2], "n_samples": n}


_NI = {"non-interpretable", "noninterpretable", "x", "×", "1", "true", "ni"}
_OK = {"interpretable", "ok", "✓", "0", "false", "i"}


def load_labels(path: PathLike) -> InterpretabilityRecord:
    """``au,rater1,rater2,rater3`` rows; a cell says interpretable or
    non-interpretable (also accepted: ✓ / ×, 0 / 1)."""
    with open(path, encoding="utf-8-sig", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise IncompleteLabels(f"{path}: no labels")
    start = 1 if rows[0][0].strip().lower() in ("au", "component") else 0
    labels = {}
    for r, row in enumerate(rows[start:], start=start + 1):
        au, votes = row[0].strip(), [c.strip().lower() for c in row[1:] if c.strip()]
        if len(votes) != 3:
            raise IncompleteLabels(f"{path}: AU {au!r} has {len(votes)} labels, expected 3")
        parsed = []
        for c, v in enumerate(votes):
            if v in _NI:
                parsed.append(True)
            elif v in _OK:
                parsed.append(False)
            else:
                raise ParseError(f"unknown label {v!r}", r, c + 2)
        if au in labels:
            raise ParseError(f"duplicate AU {au!r}", r, 1)
        labels[au] = tuple(parsed)
    return InterpretabilityRecord(labels)


def write_labels(record: InterpretabilityRecord, path: PathLike) -> None:
    lines = ["au,rater1,rater2,rater3"]
    for au, votes in record.labels.items():
        lines.append(",".join([au] + ["non-interpretable" if v else "interpretable" for v in votes]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
