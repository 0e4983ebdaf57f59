"""JSON and CSV interchange.

Complex entries are ``[re, im]`` pairs and matrices are row-major nested
lists.  Floats are written with ``repr`` precision, so a save/load round
trip is bit-faithful.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .cascade import GilbertRealization, Realization
from .errors import InputError
from .estimation import SpectrumDataset
from .identification import IdentificationResult
from .model import GaussianInput, QlsParams

SYSTEM_KEYS = {"modes", "channels", "omega_minus", "omega_plus", "c_minus", "c_plus"}
SYSTEM_OPTIONAL = {"input", "kind", "diagnostics"}
DATASET_KEYS = {"omegas", "samples", "shots", "seed"}
REALIZATION_KEYS = {"a", "b", "c", "d"}


def encode_matrix(z) -> list:
    z = np.asarray(z, dtype=complex)
    if z.ndim == 0:
        return [float(z.real), float(z.imag)]
    return [encode_matrix(row) for row in z]


def decode_matrix(obj, what: str, ndim: int = 2) -> np.ndarray:
    """Nested ``[re, im]`` lists to a complex array with ``ndim`` dimensions."""
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{what}: expected nested [re, im] pairs") from exc
    if arr.ndim != ndim + 1 or arr.shape[-1] != 2:
        # Empty matrices have no pair axis.
        if arr.size == 0:
            return np.zeros((0,) * ndim, dtype=complex)
        raise InputError(f"{what}: expected {ndim}-d array of [re, im] pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{what}: non-finite entries")
    # Assign parts directly; re + 1j * im would lose the sign of -0.0.
    out = np.empty(arr.shape[:-1], dtype=complex)
    out.real = arr[..., 0]
    out.imag = arr[..., 1]
    return out


def _require(doc: dict, keys: set, what: str) -> None:
    if not isinstance(doc, dict):
        raise InputError(f"{what}: expected a JSON object")
    missing = keys - doc.keys()
    if missing:
        raise InputError(f"{what}: missing fields {sorted(missing)}")


def _reject_unknown(doc: dict, allowed: set, what: str) -> None:
    unknown = doc.keys() - allowed
    if unknown:
        raise InputError(f"{what}: unknown fields {sorted(unknown)}")


def input_to_json(inp: GaussianInput) -> dict:
    return {"n_mat": encode_matrix(inp.n_mat), "m_mat": encode_matrix(inp.m_mat)}


def input_from_json(doc: dict) -> GaussianInput:
    _require(doc, {"n_mat", "m_mat"}, "input")
    _reject_unknown(doc, {"n_mat", "m_mat"}, "input")
    return GaussianInput(decode_matrix(doc["n_mat"], "n_mat"), decode_matrix(doc["m_mat"], "m_mat"))


def system_to_json(params: QlsParams, inp: GaussianInput | None = None, **extra) -> dict:
    doc = {
        "modes": params.modes,
        "channels": params.channels,
        "omega_minus": encode_matrix(params.omega_minus),
        "omega_plus": encode_matrix(params.omega_plus),
        "c_minus": encode_matrix(params.c_minus),
        "c_plus": encode_matrix(params.c_plus),
    }
    if inp is not None:
        doc["input"] = input_to_json(inp)
    doc.update(extra)
    return doc


def system_from_json(doc: dict) -> tuple[QlsParams, GaussianInput | None]:
    _require(doc, SYSTEM_KEYS, "system")
    _reject_unknown(doc, SYSTEM_KEYS | SYSTEM_OPTIONAL, "system")
    params = QlsParams(
        decode_matrix(doc["omega_minus"], "omega_minus"),
        decode_matrix(doc["omega_plus"], "omega_plus"),
        decode_matrix(doc["c_minus"], "c_minus"),
        decode_matrix(doc["c_plus"], "c_plus"),
    )
    if params.modes != doc["modes"] or params.channels != doc["channels"]:
        raise InputError(
            f"declared size (modes {doc['modes']}, channels {doc['channels']}) does not match "
            f"matrices ({params.modes}, {params.channels})"
        )
    inp = input_from_json(doc["input"]) if doc.get("input") is not None else None
    if inp is not None and inp.channels != params.channels:
        raise InputError("input channel count does not match the system")
    return params, inp


def dataset_to_json(data: SpectrumDataset) -> dict:
    doc = {
        "kind": "dataset",
        "omegas": [float(w) for w in data.omegas],
        "samples": encode_matrix(data.samples),
        "shots": data.shots,
        "seed": data.seed,
    }
    if data.input is not None:
        doc["input"] = input_to_json(data.input)
    return doc


def dataset_from_json(doc: dict) -> SpectrumDataset:
    _require(doc, DATASET_KEYS, "dataset")
    _reject_unknown(doc, DATASET_KEYS | {"kind", "input"}, "dataset")
    inp = input_from_json(doc["input"]) if doc.get("input") is not None else None
    return SpectrumDataset(
        np.asarray(doc["omegas"], dtype=float),
        decode_matrix(doc["samples"], "samples", ndim=3),
        doc["shots"],
        doc["seed"],
        inp,
    )


def realization_to_json(real: Realization) -> dict:
    return {
        "kind": "realization",
        "a": encode_matrix(real.a),
        "b": encode_matrix(real.b),
        "c": encode_matrix(real.c),
        "d": encode_matrix(real.d),
    }


def realization_from_json(doc: dict) -> Realization:
    _require(doc, REALIZATION_KEYS, "realization")
    _reject_unknown(doc, REALIZATION_KEYS | {"kind"}, "realization")
    d = decode_matrix(doc["d"], "d")
    k = len(doc["a"])
    if k == 0:
        p = d.shape[0]
        return Realization(np.zeros((0, 0)), np.zeros((0, p)), np.zeros((p, 0)), d)
    return Realization(decode_matrix(doc["a"], "a"), decode_matrix(doc["b"], "b"), decode_matrix(doc["c"], "c"), d)


def gilbert_to_json(g: GilbertRealization) -> dict:
    return {
        "kind": "gilbert",
        "poles": encode_matrix(g.poles),
        "residues": encode_matrix(g.residues),
        "a": encode_matrix(g.a0_tilde),
        "b": encode_matrix(g.b0),
        "c": encode_matrix(g.c0),
        "d": encode_matrix(g.d),
        "b1": encode_matrix(g.b1),
        "c2": encode_matrix(g.c2),
    }


def identification_to_json(
    result: IdentificationResult, params: QlsParams, inp: GaussianInput | None = None, extra: dict | None = None
) -> dict:
    """System document for ``params`` with a ``diagnostics`` object.

    ``extra`` holds additional named residuals (merged into ``residuals``).
    """
    residuals = {k: float(v) for k, v in result.residuals.items()}
    residuals.update({k: float(v) for k, v in (extra or {}).items()})
    diag = {
        "residuals": residuals,
        "gram_min_singular_values": {
            "w3": float(result.residuals.get("gram_w3_min_sv", np.nan)),
            "w1_inv": float(result.residuals.get("gram_w1_inv_min_sv", np.nan)),
        },
        "relating_symplectic": encode_matrix(result.relating_symplectic),
        "t1": encode_matrix(result.t1),
        "t3": encode_matrix(result.t3),
    }
    if result.t2 is not None:
        diag["t2"] = encode_matrix(result.t2)
    return system_to_json(params, inp, kind="system", diagnostics=diag)


def document_kind(doc: dict) -> str:
    """``system``, ``dataset``, ``realization`` or ``gilbert`` from ``kind`` or the key set."""
    if not isinstance(doc, dict):
        raise InputError("expected a JSON object")
    kind = doc.get("kind")
    if kind in {"system", "dataset", "realization", "gilbert"}:
        return kind
    if kind is not None:
        raise InputError(f"unknown document kind {kind!r}")
    if SYSTEM_KEYS <= doc.keys():
        return "system"
    if DATASET_KEYS <= doc.keys():
        return "dataset"
    if REALIZATION_KEYS <= doc.keys():
        return "realization"
    raise InputError("cannot tell the document type from its fields")


def gilbert_from_json(doc: dict) -> Realization:
    """A Gilbert export read back as a diagonal realization."""
    _require(doc, REALIZATION_KEYS, "gilbert")
    _reject_unknown(doc, REALIZATION_KEYS | {"kind", "poles", "residues", "b1", "c2"}, "gilbert")
    return Realization(
        decode_matrix(doc["a"], "a"), decode_matrix(doc["b"], "b"), decode_matrix(doc["c"], "c"), decode_matrix(doc["d"], "d")
    )


def read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1) + "\n"


def _fmt(x: float, digits: int) -> str:
    s = f"{x:.{digits}f}"
    # Rounding can leave "-0.000"; print it as zero so equal data gives equal bytes.
    if float(s) == 0.0:
        s = f"{0.0:.{digits}f}"
    return s


def sweep_csv(omegas, mats, name: str, digits: int = 10) -> str:
    """CSV with an ``omega`` column and ``<name>_<i>_<j>_re`` / ``_im`` columns (1-based)."""
    mats = np.asarray(mats)
    p = mats.shape[1] if mats.ndim == 3 else 0
    header = ["omega"]
    for i in range(p):
        for j in range(p):
            header += [f"{name}_{i + 1}_{j + 1}_re", f"{name}_{i + 1}_{j + 1}_im"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for w, z in zip(omegas, mats):
        row = [_fmt(float(w), digits)]
        for v in z.ravel():
            row += [_fmt(v.real, digits), _fmt(v.imag, digits)]
        writer.writerow(row)
    return buf.getvalue()

