"""Model-spec JSON files: schema validation with path-anchored
diagnostics, and construction of the in-memory objects.

Top-level document shape:

    {
      "model":  {"n": int,
                 "profile": {"constant": [[...]]}
                          | {"sampled": [[u, [[...]]], ...], "order": 5},
                 "F": [[...]],            # optional, antisymmetric
                 "K": [[[...]], ...]},    # optional, orthogonal generators
      "gamma":  {"gamma_hat": {"t_H": f, "t_L": f, "k": [[...]],
                               "x": {"alpha": [...], "beta": [...], "z": f}},
                 "gamma0": [{"alpha": [...], "beta": [...], "z": f}, ...]},
      "checks": {"tolerances": {...}, "grid": [t0, t1, count],
                 "samples": int, "seed": int}
    }

``gamma`` and ``checks`` are optional.  Unknown keys are rejected
anywhere in the document.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .geometry import ConstantProfile, ModelSpec, SampledProfile
from .lie_core import ConfGroupElement, HeisElement
from .quotient_lab import GammaSpec

__all__ = ["SpecFileError", "validate_document", "load_spec_file", "build_from_document"]


class SpecFileError(ValueError):
    """Validation failure; ``errors`` lists path-anchored messages."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


class _Checker:
    def __init__(self):
        self.errors = []

    def fail(self, path: str, msg: str):
        self.errors.append(f"{path}: {msg}")

    def known_keys(self, obj: dict, path: str, allowed, required=()):
        for key in obj:
            if key not in allowed:
                self.fail(f"{path}.{key}", "unknown key")
        for key in required:
            if key not in obj:
                self.fail(path, f"missing required key {key!r}")

    def matrix(self, m, path: str, n: Optional[int] = None) -> bool:
        if not isinstance(m, list) or not m:
            self.fail(path, "must be a nonempty list of rows")
            return False
        width = None
        for i, row in enumerate(m):
            if not isinstance(row, list):
                self.fail(f"{path}[{i}]", "row must be a list of numbers")
                return False
            if width is None:
                width = len(row)
            elif len(row) != width:
                self.fail(f"{path}[{i}]", "ragged row")
                return False
            for j, v in enumerate(row):
                if not _is_number(v):
                    self.fail(f"{path}[{i}][{j}]", "not a number")
                    return False
        if len(m) != width:
            self.fail(path, f"must be square, got {len(m)} x {width}")
            return False
        if n is not None and width != n:
            self.fail(path, f"must be {n} x {n}, got {width} x {width}")
            return False
        return True

    def symmetric(self, m, path: str):
        a = np.array(m, dtype=float)
        d = np.abs(a - a.T)
        if d.size and np.max(d) > 1e-9:
            i, j = np.unravel_index(int(np.argmax(d)), d.shape)
            self.fail(
                f"{path}[{i}][{j}]",
                f"not symmetric: {a[i, j]} != {a[j, i]} at ({i},{j})",
            )

    def vector(self, v, path: str, n: int) -> bool:
        if not isinstance(v, list) or len(v) != n or not all(_is_number(x) for x in v):
            self.fail(path, f"must be a list of {n} numbers")
            return False
        return True


def validate_document(doc) -> list:
    """Return a list of path-anchored error strings (empty when valid)."""
    c = _Checker()
    if not isinstance(doc, dict):
        return ["$: document must be a JSON object"]
    c.known_keys(doc, "$", {"model", "gamma", "checks"}, required=("model",))
    model = doc.get("model")
    n = None
    if isinstance(model, dict):
        c.known_keys(model, "model", {"n", "profile", "F", "K"}, required=("n", "profile"))
        n = model.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            c.fail("model.n", "must be an integer >= 1")
            n = None
        prof = model.get("profile")
        if isinstance(prof, dict):
            kinds = [k for k in ("constant", "sampled") if k in prof]
            c.known_keys(prof, "model.profile", {"constant", "sampled", "order"})
            if len(kinds) != 1:
                c.fail("model.profile", "needs exactly one of 'constant' or 'sampled'")
            elif kinds[0] == "constant":
                if "order" in prof:
                    c.fail("model.profile.order", "only meaningful for sampled profiles")
                if c.matrix(prof["constant"], "model.profile.constant", n):
                    c.symmetric(prof["constant"], "model.profile.constant")
            else:
                rows = prof["sampled"]
                order = prof.get("order", 5)
                if not isinstance(order, int) or not 1 <= order <= 5:
                    c.fail("model.profile.order", "must be an integer in [1, 5]")
                if not isinstance(rows, list) or len(rows) < 2:
                    c.fail("model.profile.sampled", "must be a list of [u, S] pairs")
                else:
                    for i, pair in enumerate(rows):
                        p = f"model.profile.sampled[{i}]"
                        if not isinstance(pair, list) or len(pair) != 2 or not _is_number(pair[0]):
                            c.fail(p, "must be [u, S-matrix]")
                            continue
                        if c.matrix(pair[1], f"{p}[1]", n):
                            c.symmetric(pair[1], f"{p}[1]")
        elif prof is not None:
            c.fail("model.profile", "must be an object")
        if "F" in model and c.matrix(model["F"], "model.F", n):
            a = np.array(model["F"], dtype=float)
            if np.max(np.abs(a + a.T)) > 1e-9:
                c.fail("model.F", "must be antisymmetric")
        if "K" in model:
            ks = model["K"]
            if not isinstance(ks, list):
                c.fail("model.K", "must be a list of matrices")
            else:
                for i, k in enumerate(ks):
                    if c.matrix(k, f"model.K[{i}]", n):
                        a = np.array(k, dtype=float)
                        if np.max(np.abs(a.T @ a - np.eye(len(a)))) > 1e-9:
                            c.fail(f"model.K[{i}]", "must be orthogonal")
    elif model is not None:
        c.fail("model", "must be an object")

    if "gamma" in doc:
        gamma = doc["gamma"]
        if not isinstance(gamma, dict):
            c.fail("gamma", "must be an object")
        else:
            c.known_keys(gamma, "gamma", {"gamma_hat", "gamma0"}, required=("gamma_hat", "gamma0"))
            gh = gamma.get("gamma_hat")
            if isinstance(gh, dict):
                c.known_keys(gh, "gamma.gamma_hat", {"t_H", "t_L", "k", "x"}, required=("t_H", "t_L", "k", "x"))
                for key in ("t_H", "t_L"):
                    if key in gh and not _is_number(gh[key]):
                        c.fail(f"gamma.gamma_hat.{key}", "must be a number")
                if "k" in gh:
                    c.matrix(gh["k"], "gamma.gamma_hat.k", n)
                if "x" in gh:
                    _heis_element_ok(c, gh["x"], "gamma.gamma_hat.x", n)
            elif gh is not None:
                c.fail("gamma.gamma_hat", "must be an object")
            g0 = gamma.get("gamma0")
            if isinstance(g0, list):
                for i, h in enumerate(g0):
                    _heis_element_ok(c, h, f"gamma.gamma0[{i}]", n)
            elif g0 is not None:
                c.fail("gamma.gamma0", "must be a list")

    if "checks" in doc:
        checks = doc["checks"]
        if not isinstance(checks, dict):
            c.fail("checks", "must be an object")
        else:
            c.known_keys(checks, "checks", {"tolerances", "grid", "samples", "seed"})
            tols = checks.get("tolerances")
            if tols is not None:
                if not isinstance(tols, dict) or not all(
                    isinstance(k, str) and _is_number(v) for k, v in tols.items()
                ):
                    c.fail("checks.tolerances", "must map names to numbers")
            grid = checks.get("grid")
            if grid is not None:
                ok = (
                    isinstance(grid, list)
                    and len(grid) == 3
                    and _is_number(grid[0])
                    and _is_number(grid[1])
                    and isinstance(grid[2], int)
                    and grid[2] >= 2
                )
                if not ok:
                    c.fail("checks.grid", "must be [t_min, t_max, count>=2]")
            for key in ("samples", "seed"):
                v = checks.get(key)
                if v is not None and (not isinstance(v, int) or isinstance(v, bool)):
                    c.fail(f"checks.{key}", "must be an integer")
    return c.errors


def _heis_element_ok(c: _Checker, h, path: str, n: Optional[int]):
    if not isinstance(h, dict):
        c.fail(path, "must be an object")
        return
    c.known_keys(h, path, {"alpha", "beta", "z"}, required=("alpha", "beta", "z"))
    if n is not None:
        if "alpha" in h:
            c.vector(h["alpha"], f"{path}.alpha", n)
        if "beta" in h:
            c.vector(h["beta"], f"{path}.beta", n)
    if "z" in h and not _is_number(h["z"]):
        c.fail(f"{path}.z", "must be a number")


def load_spec_file(path: str) -> dict:
    """Parse and validate; raises OSError (I/O), SpecFileError (content)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecFileError([f"line {e.lineno}, column {e.colno}: {e.msg}"]) from e
    errors = validate_document(doc)
    if errors:
        raise SpecFileError(errors)
    return doc


def build_from_document(doc: dict):
    """Turn a validated document into (ModelSpec, GammaSpec | None, checks).

    Semantic invariants not expressible structurally (profile symmetry at
    interpolated nodes, K-invariance, Gamma_0 commutativity and
    normalization) are enforced by the constructors; their messages are
    re-anchored to the document section that produced them.
    """
    m = doc["model"]
    n = m["n"]
    prof = m["profile"]
    try:
        if "constant" in prof:
            profile = ConstantProfile(np.array(prof["constant"], dtype=float))
        else:
            rows = sorted(prof["sampled"], key=lambda r: r[0])
            us = np.array([r[0] for r in rows], dtype=float)
            vals = np.array([r[1] for r in rows], dtype=float)
            profile = SampledProfile(us, vals, order=prof.get("order", 5))
        model = ModelSpec(n, profile, m.get("F"), tuple(m.get("K", ())))
    except ValueError as e:
        raise SpecFileError([f"model: {e}"]) from e

    gamma = None
    if "gamma" in doc:
        if not model.profile.is_constant:
            raise SpecFileError(
                ["gamma: quotient data requires a constant profile"]
            )
        g = doc["gamma"]
        gh = g["gamma_hat"]
        try:
            deriv = model.derivation()
            gamma_hat = ConfGroupElement(
                gh["t_H"],
                gh["t_L"],
                np.array(gh["k"], dtype=float),
                _heis_from(gh["x"]),
                deriv,
            )
            gens = tuple(_heis_from(h) for h in g["gamma0"])
            gamma = GammaSpec(gamma_hat, gens, model)
        except ValueError as e:
            raise SpecFileError([f"gamma: {e}"]) from e
    checks = dict(doc.get("checks", {}))
    return model, gamma, checks


def _heis_from(h: dict) -> HeisElement:
    return HeisElement(
        np.array(h["alpha"], dtype=float), np.array(h["beta"], dtype=float), h["z"]
    )
