"""Solution files: a JSON header with base64-packed float64 coefficients.

Coefficients are stored in the packed real layout of
:func:`~gravvortex.sphere_spectral.pack`, so a write/read cycle is
bit-for-bit lossless.
"""

import base64
import json
import math
from pathlib import Path

import numpy as np

from .divisor import Divisor
from .errors import ArgumentError
from .sphere_spectral import ScalarField, make_grid, pack, packed_size, unpack
from .state import SolutionState

FORMAT = "gravvortex-solution"
VERSION = 1


def _encode(arr):
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _decode(text, n):
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except (ValueError, AttributeError) as exc:
        raise ArgumentError(f"bad coefficient payload: {exc}") from exc
    arr = np.frombuffer(raw, dtype="<f8")
    if arr.size != n:
        raise ArgumentError(f"coefficient payload has {arr.size} entries, expected {n}")
    return arr.astype(float)


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def state_to_dict(state, extra=None):
    """JSON-ready dict of ``state``; ``extra`` is stored under ``"meta"``."""
    d = {
        "format": FORMAT,
        "version": VERSION,
        "L": int(state.L),
        "alpha": float(state.alpha),
        "tau": float(state.tau),
        "divisor": {
            **state.divisor.to_json(),
            "xyz": [list(p) for p in state.divisor.points],
        },
        "converged": bool(state.converged),
        "iterations": int(state.iterations),
        "residual_norms": [_num(r) for r in state.residual_norms],
        "sigma_min": _num(state.sigma_min),
        "encoding": "packed-real-float64-le-base64",
        "phi": _encode(pack(state.phi.coeffs)),
        "v": _encode(pack(state.v.coeffs)),
    }
    if extra:
        d["meta"] = extra
    return d


def state_from_dict(d):
    """Inverse of :func:`state_to_dict`; schema problems raise :class:`ArgumentError`."""
    if not isinstance(d, dict) or d.get("format") != FORMAT:
        raise ArgumentError("not a gravvortex solution file")
    if d.get("version") != VERSION:
        raise ArgumentError(f"unsupported solution file version {d.get('version')!r}")
    try:
        L = int(d["L"])
        alpha = float(d["alpha"])
        tau = float(d["tau"])
        div = d["divisor"]
        D = Divisor(tuple(tuple(p) for p in div["xyz"]), tuple(div["mults"])) if "xyz" in div else Divisor.from_json(div)
        n = packed_size(L)
        phi_c = unpack(_decode(d["phi"], n), L)
        v_c = unpack(_decode(d["v"], n), L)
        norms = tuple(float("nan") if r is None else float(r) for r in d.get("residual_norms", (None, None)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ArgumentError(f"malformed solution file: {exc}") from exc
    grid = make_grid(L)
    return SolutionState(
        ScalarField(grid, coeffs=phi_c),
        ScalarField(grid, coeffs=v_c),
        alpha,
        tau,
        D,
        converged=bool(d.get("converged", False)),
        residual_norms=norms,
        iterations=int(d.get("iterations", 0)),
        sigma_min=d.get("sigma_min"),
    )


def save_state(state, path, extra=None):
    path = Path(path)
    path.write_text(json.dumps(state_to_dict(state, extra), indent=1))
    return path


def load_state(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ArgumentError(f"cannot read {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{path} is not JSON: {exc}") from exc
    return state_from_dict(d)


def load_divisor(source):
    """Divisor from a JSON file path, an inline JSON string, or a parsed dict."""
    if isinstance(source, dict):
        return Divisor.from_json(source)
    text = str(source)
    if not text.lstrip().startswith("{"):
        try:
            text = Path(text).read_text()
        except OSError as exc:
            raise ArgumentError(f"cannot read divisor file {source}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"malformed divisor JSON: {exc}") from exc
    return Divisor.from_json(data)
