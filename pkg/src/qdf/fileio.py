"""JSON matrix files and canonical report emission.

Complex scalars are ``[re, im]`` pairs and matrices are row-major nested
lists. Canonical output sorts keys and prints floats with 17 significant
digits, so ``emit(parse(emit(x)))`` reproduces the same bytes.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .channels import Channel
from .control import ControlProblem, gell_mann_basis
from .errors import ParseError
from .linalg import DensityOperator, UnitaryOperator
from .majorization import ConvexCombinationSpec, StochasticUnitarySpec

KINDS = ("kraus", "choi", "state", "unitary", "problem", "split-config", "fbdd-config",
         "stochastic-spec", "convex-spec")


# -- canonical emission ------------------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot emit non-finite number {x}")
    s = format(x, ".17g")
    return s


def _scalar(x) -> str | None:
    if x is None:
        return "null"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return _fmt_float(float(x))
    if isinstance(x, str):
        return json.dumps(x)
    return None


def to_jsonable(obj):
    """Numpy arrays to nested lists; complex entries become ``[re, im]``."""
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return to_jsonable(np.stack([obj.real, obj.imag], axis=-1))
        return obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _emit(obj, indent: int) -> str:
    s = _scalar(obj)
    if s is not None:
        return s
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_emit(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_emit(v, 0) for v in obj) + "]"
        if all(isinstance(v, list) and all(not isinstance(w, (dict, list)) for w in v) for v in obj):
            # rows of [re, im] pairs or short numeric vectors stay on one line
            return "[" + ", ".join(_emit(v, 0) for v in obj) + "]"
        items = [pad + _emit(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + "  " * indent + "]"
    raise TypeError(f"cannot emit {type(obj).__name__}")


def emit(obj) -> str:
    return _emit(to_jsonable(obj), 0) + "\n"


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- decoding -----------------------------------------------------------------


def decode_matrix(data, name: str = "matrix") -> np.ndarray:
    try:
        a = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{name}: not a numeric array ({exc})") from None
    if a.ndim < 2 or a.shape[-1] != 2:
        raise ParseError(f"{name}: expected complex entries encoded as [re, im] pairs")
    m = a[..., 0] + 1j * a[..., 1]
    return m


def decode_square(data, name: str, dim: int | None = None) -> np.ndarray:
    m = decode_matrix(data, name)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParseError(f"{name}: expected a square matrix of [re, im] pairs, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise ParseError(f"{name}: expected dimension {dim}, got {m.shape[0]}")
    return m


def decode_vector(data, name: str = "vector") -> np.ndarray:
    m = decode_matrix(data, name)
    if m.ndim != 1:
        raise ParseError(f"{name}: expected a vector of [re, im] pairs")
    return m


def _get(doc: dict, key: str, kind: str):
    if key not in doc:
        raise ParseError(f"{kind} file is missing field '{key}'")
    return doc[key]


@dataclass(frozen=True, eq=False)
class SplitFile:
    d_S: int
    projector: np.ndarray
    inputs: tuple


@dataclass(frozen=True, eq=False)
class FbddFile:
    config: Any
    rho_B: np.ndarray


def _parse_kraus_ops(doc, kind):
    dim = int(_get(doc, "dim", kind))
    ops = [decode_square(o, f"Kraus operator {i}", dim) for i, o in enumerate(_get(doc, "ops", kind))]
    return Channel.from_kraus(ops)


def parse_document(doc: dict):
    """Validated object for an already-loaded JSON document."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ParseError("top-level object with a 'kind' field expected")
    kind = doc["kind"]
    if kind == "kraus":
        return _parse_kraus_ops(doc, kind)
    if kind == "choi":
        dim = int(_get(doc, "dim", kind))
        return Channel.from_choi(decode_square(_get(doc, "matrix", kind), "Choi matrix", dim * dim))
    if kind == "state":
        dim = int(_get(doc, "dim", kind))
        return DensityOperator(decode_square(_get(doc, "matrix", kind), "state", dim))
    if kind == "unitary":
        dim = int(_get(doc, "dim", kind))
        return UnitaryOperator(decode_square(_get(doc, "matrix", kind), "unitary", dim))
    if kind == "stochastic-spec":
        us = [decode_square(u, f"unitary {i}") for i, u in enumerate(_get(doc, "unitaries", kind))]
        return StochasticUnitarySpec(tuple(us), [float(w) for w in _get(doc, "weights", kind)])
    if kind == "convex-spec":
        comps = []
        for i, c in enumerate(_get(doc, "components", kind)):
            ch = Channel.from_kraus([decode_square(o, f"component {i} operator") for o in c["ops"]])
            comps.append((float(c["weight"]), ch))
        return ConvexCombinationSpec(tuple(comps))
    if kind == "problem":
        d_S, d_E = int(_get(doc, "d_S", kind)), int(_get(doc, "d_E", kind))
        n = d_S * d_E
        ctrl = _get(doc, "controls", kind)
        gens = gell_mann_basis(n)[1:] if ctrl == "full" else [decode_square(h, "control", n) for h in ctrl]
        h0 = decode_square(doc["H0"], "H0", n) if "H0" in doc else np.zeros((n, n))
        return ControlProblem(d_S, d_E, h0, tuple(gens), float(_get(doc, "T", kind)),
                              int(_get(doc, "n_steps", kind)),
                              decode_square(_get(doc, "rho_E", kind), "rho_E", d_E),
                              u_max=doc.get("u_max"))
    if kind == "split-config":
        d_S = int(_get(doc, "d_S", kind))
        pi = decode_square(_get(doc, "projector", kind), "projector", d_S)
        inputs = tuple(DensityOperator(decode_square(s, "input state", d_S)).mat for s in doc.get("inputs", []))
        return SplitFile(d_S, pi, inputs)
    if kind == "fbdd-config":
        from .protocols.feedback_dd import FbddConfig

        d_S, d_B = int(_get(doc, "d_S", kind)), int(_get(doc, "d_B", kind))
        cfg = FbddConfig(
            d_S, d_B,
            decode_square(_get(doc, "H_S", kind), "H_S", d_S),
            decode_square(_get(doc, "H_B", kind), "H_B", d_B),
            decode_square(_get(doc, "S0", kind), "S0", d_S),
            decode_square(_get(doc, "B0", kind), "B0", d_B),
            float(_get(doc, "T", kind)),
            decode_vector(_get(doc, "psi", kind), "psi"),
            decode_square(doc["U_S"], "U_S", d_S) if "U_S" in doc else None,
        )
        return FbddFile(cfg, DensityOperator(decode_square(_get(doc, "rho_B", kind), "rho_B", d_B)).mat)
    raise ParseError(f"unknown file kind {kind!r}")


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ParseError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def parse_matrix_file(path, expect: str | tuple | None = None):
    doc = load_json(path)
    if expect is not None:
        allowed = (expect,) if isinstance(expect, str) else expect
        if doc.get("kind") not in allowed:
            raise ParseError(f"{path}: expected kind {' or '.join(allowed)}, got {doc.get('kind')!r}")
    return parse_document(doc)


# -- encoding -------------------------------------------------------------------


def channel_document(ch: Channel, as_choi: bool = False) -> dict:
    if as_choi:
        return {"kind": "choi", "dim": ch.d, "matrix": ch.choi}
    return {"kind": "kraus", "dim": ch.d, "ops": list(ch.kraus)}


def state_document(rho) -> dict:
    rho = np.asarray(rho)
    return {"kind": "state", "dim": rho.shape[0], "matrix": rho.astype(np.complex128)}


def unitary_document(u) -> dict:
    u = np.asarray(u)
    return {"kind": "unitary", "dim": u.shape[0], "matrix": u.astype(np.complex128)}


def emit_channel(ch: Channel, as_choi: bool = False) -> str:
    return emit(channel_document(ch, as_choi))
