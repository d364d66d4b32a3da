"""Discrete design model for weighted estimands.

A weighted estimand averages conditional average treatment effects (CATEs)
with a weight function a(X) over a base subpopulation W0:

    mu(a, tau) = E[a(X) w0(X) tau(X)] / E[a(X) w0(X)],

where w0(x) = P(W0=1 | X=x).  This module represents such designs on a
finite covariate support as a :class:`CellTable` and provides the estimand
functional, the implied one-sum weights, and utilities to profile or
physically realize candidate subpopulations.
"""

from __future__ import annotations

import csv
import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateWeights,
    DimensionMismatch,
    EmptySubpopulation,
    InvalidDesign,
    MissingTau,
    ParseError,
    SchemaError,
)

MASS_TOL = 1e-9  # absolute tolerance for probability-sum invariants

_CSV_HEADER = ["label", "p", "a", "w0", "tau"]


def rng_stream(seed, *path):
    """Return an independent, reproducible generator for (seed, *path).

    Streams are derived from a counter-based seed sequence, so the same
    (seed, path) pair always yields the same stream regardless of how many
    other streams were created before it.  Path components may be ints or
    strings.
    """
    key = tuple(
        int(p) if not isinstance(p, str) else zlib.crc32(p.encode("utf-8"))
        for p in path
    )
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _as_float_array(values, name, k=None):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidDesign(f"{name} must be one-dimensional")
    if k is not None and arr.shape[0] != k:
        raise InvalidDesign(f"{name} has length {arr.shape[0]}, expected {k}")
    return arr


@dataclass(frozen=True)
class CellTable:
    """A discrete design: per-cell mass, weight, base-subpopulation
    probability, and (optionally) a CATE value.

    Fields
    ------
    labels : tuple of str
        Opaque cell identifiers.
    p : ndarray
        Cell masses, strictly positive, summing to one.
    a : ndarray
        Weight values; may be negative.
    w0 : ndarray
        P(W0=1 | X = x_k), each in [0, 1]; the W0 population must have
        positive total mass.
    tau : ndarray or None
        Optional per-cell CATEs; NaN marks a missing value.  Cells with
        w0 = 0 never need tau (their contribution is defined as zero).
    x : ndarray or None
        Optional numeric labels, shape (K,) or (K, d); only the convex-hull
        existence check requires them.
    """

    labels: tuple
    p: np.ndarray
    a: np.ndarray
    w0: np.ndarray
    tau: np.ndarray | None = None
    x: np.ndarray | None = None

    def __post_init__(self):
        labels = tuple(str(l) for l in self.labels)
        k = len(labels)
        if k == 0:
            raise InvalidDesign("a design needs at least one cell")
        p = _as_float_array(self.p, "p", k)
        a = _as_float_array(self.a, "a", k)
        w0 = _as_float_array(self.w0, "w0", k)
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise InvalidDesign("every cell mass must be finite and > 0")
        if abs(p.sum() - 1.0) > MASS_TOL:
            raise InvalidDesign(f"cell masses sum to {p.sum()!r}, not 1")
        if not np.all(np.isfinite(a)):
            raise InvalidDesign("weights must be finite")
        if np.any(w0 < -MASS_TOL) or np.any(w0 > 1 + MASS_TOL):
            raise InvalidDesign("w0 values must lie in [0, 1]")
        w0 = np.clip(w0, 0.0, 1.0)
        if w0 @ p <= 0:
            raise InvalidDesign("the W0 population has zero mass")
        tau = self.tau
        if tau is not None:
            tau = _as_float_array(tau, "tau", k)
            if np.all(np.isnan(tau)):
                tau = None
        x = self.x
        if x is not None:
            x = np.asarray(x, dtype=float)
            if x.ndim not in (1, 2) or x.shape[0] != k:
                raise InvalidDesign("numeric labels must be (K,) or (K, d)")
            x.setflags(write=False)
        for arr in (p, a, w0) + ((tau,) if tau is not None else ()):
            arr.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "x", x)

    # -- basic derived quantities -------------------------------------

    @property
    def k(self):
        return len(self.labels)

    @property
    def w0_mass(self):
        """Per-cell mass of the W0 population, w0_k * p_k."""
        return self.w0 * self.p

    @property
    def pop_w0(self):
        """P(W0 = 1)."""
        return float(self.w0_mass.sum())

    @property
    def mean_a_given_w0(self):
        """E[a(X) | W0 = 1]."""
        m = self.w0_mass
        return float((self.a * m).sum() / m.sum())

    def with_a(self, a):
        return CellTable(self.labels, self.p, a, self.w0, self.tau, self.x)

    def with_tau(self, tau):
        return CellTable(self.labels, self.p, self.a, self.w0, tau, self.x)

    # -- serialization --------------------------------------------------

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_HEADER)
            for i, label in enumerate(self.labels):
                tau = ""
                if self.tau is not None and not math.isnan(self.tau[i]):
                    tau = repr(float(self.tau[i]))
                writer.writerow(
                    [label, repr(float(self.p[i])), repr(float(self.a[i])),
                     repr(float(self.w0[i])), tau]
                )

    @classmethod
    def from_csv(cls, path):
        rows = _read_csv_rows(path, _CSV_HEADER)
        labels, p, a, w0, tau = [], [], [], [], []
        for lineno, row in rows:
            labels.append(row["label"])
            p.append(_parse_float(row["p"], "p", lineno))
            a.append(_parse_float(row["a"], "a", lineno))
            w0.append(_parse_float(row["w0"], "w0", lineno))
            t = row.get("tau", "")
            tau.append(math.nan if t in ("", None) else _parse_float(t, "tau", lineno))
        tau_arr = None if all(math.isnan(t) for t in tau) else tau
        return cls(tuple(labels), p, a, w0, tau_arr, _infer_numeric_labels(labels))

    def to_json_dict(self):
        cells = []
        for i, label in enumerate(self.labels):
            cell = {
                "label": label,
                "p": float(self.p[i]),
                "a": float(self.a[i]),
                "w0": float(self.w0[i]),
                "tau": None
                if self.tau is None or math.isnan(self.tau[i])
                else float(self.tau[i]),
            }
            if self.x is not None:
                cell["x"] = np.atleast_1d(self.x[i]).tolist()
            cells.append(cell)
        return {"cells": cells}

    @classmethod
    def from_json_dict(cls, payload):
        try:
            cells = payload["cells"]
            labels = tuple(str(c["label"]) for c in cells)
            p = [float(c["p"]) for c in cells]
            a = [float(c["a"]) for c in cells]
            w0 = [float(c.get("w0", 1.0)) for c in cells]
            tau = [
                math.nan if c.get("tau") is None else float(c["tau"]) for c in cells
            ]
            x = [c["x"] for c in cells] if all("x" in c for c in cells) else None
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed design payload: {exc}") from exc
        tau_arr = None if all(math.isnan(t) for t in tau) else tau
        if x is None:
            x = _infer_numeric_labels(labels)
        else:
            x = np.squeeze(np.asarray(x, dtype=float))
        return cls(labels, p, a, w0, tau_arr, x)


def cell_table(labels, p, a, w0=None, tau=None, x=None):
    """Convenience constructor; w0 defaults to 1 in every cell and numeric
    labels are inferred from the label strings when x is not given."""
    labels = tuple(labels)
    if w0 is None:
        w0 = np.ones(len(labels))
    if x is None:
        x = _infer_numeric_labels(labels)
    return CellTable(labels, p, a, w0, tau, x)


@dataclass(frozen=True)
class SubpopulationRule:
    """Per-cell inclusion probabilities w*(x) plus the seed used to realize
    the latent inclusion draws."""

    inclusion: np.ndarray
    seed: int = 0

    def __post_init__(self):
        inc = _as_float_array(self.inclusion, "inclusion")
        if np.any(inc < -MASS_TOL) or np.any(inc > 1 + MASS_TOL):
            raise InvalidDesign("inclusion probabilities must lie in [0, 1]")
        inc = np.clip(inc, 0.0, 1.0)
        inc.setflags(write=False)
        object.__setattr__(self, "inclusion", inc)


@dataclass(frozen=True)
class MomentSummary:
    """First moments of a design: the estimand (when tau is known), the mean
    weight on W0, P(W0=1), and the benchmark ATE E0 = E[tau | W0=1]."""

    mu: float | None
    mean_a_given_w0: float
    pop_w0: float
    e0: float | None


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _degenerate_tol(design):
    m = design.w0_mass
    scale = float((np.abs(design.a) * m).sum() / m.sum())
    return 1e-12 * max(1.0, scale)


def normalize_sign(design):
    """Flip the sign of a(.) if E[a|W0=1] < 0 (a pure sign normalization —
    mu is invariant).  Raises DegenerateWeights when E[a|W0=1] = 0."""
    mean_a = design.mean_a_given_w0
    if abs(mean_a) <= _degenerate_tol(design):
        raise DegenerateWeights("E[a|W0=1] = 0; the estimand is undefined")
    if mean_a < 0:
        return design.with_a(-design.a)
    return design


def _tau_checked(design, contributing):
    """tau values with NaN allowed only on non-contributing cells."""
    if design.tau is None:
        if np.any(contributing):
            raise MissingTau("tau is required on cells with a*w0*p != 0")
        return np.zeros(design.k)
    missing = np.isnan(design.tau) & contributing
    if np.any(missing):
        cells = [design.labels[i] for i in np.flatnonzero(missing)]
        raise MissingTau(f"tau missing on contributing cells: {cells}")
    return np.where(np.isnan(design.tau), 0.0, design.tau)


def mu(design):
    """The weighted estimand mu(a, tau) = E[a w0 tau] / E[a w0].

    Invariant to rescaling a by any nonzero constant.  Cells with w0 = 0
    contribute nothing and may omit tau.
    """
    m = design.w0_mass
    den = float((design.a * m).sum())
    if abs(den) <= _degenerate_tol(design) * m.sum():
        raise DegenerateWeights("E[a|W0=1] = 0; the estimand is undefined")
    tau = _tau_checked(design, design.a * m != 0)
    return float((design.a * m * tau).sum() / den)


def discrete_weights(design):
    """One-sum weights omega_k = a_k p_k / sum_l a_l p_l.

    Only defined on full-population designs (w0 identically 1); weights may
    be negative but always sum to one.
    """
    if np.any(np.abs(design.w0 - 1.0) > 1e-12):
        raise InvalidDesign("one-sum weights are defined for w0 = 1 designs")
    den = float(design.a @ design.p)
    if abs(den) <= _degenerate_tol(design):
        raise DegenerateWeights("E[a] = 0; weights are undefined")
    return design.a * design.p / den


def subpop_profile(design, rule, g):
    """Average of a per-cell statistic over the subpopulation W*=1:
    E[g(X) | W*=1] = sum_k g_k incl_k w0_k p_k / sum_k incl_k w0_k p_k."""
    inc = np.asarray(rule.inclusion, dtype=float)
    if inc.shape[0] != design.k:
        raise DimensionMismatch("inclusion length does not match the design")
    g = _as_float_array(g, "g", design.k)
    mass = inc * design.w0_mass
    total = float(mass.sum())
    if total <= 0:
        raise EmptySubpopulation("the rule selects a zero-mass subpopulation")
    return float((g * mass).sum() / total)


def realize_subpop(design, rule, n):
    """Draw n i.i.d. units: a cell, a W0 indicator, and the subpopulation
    indicator W* = 1(U <= inclusion(x)) * W0.  Reproducible under the
    rule's seed."""
    inc = np.asarray(rule.inclusion, dtype=float)
    if inc.shape[0] != design.k:
        raise DimensionMismatch("inclusion length does not match the design")
    if n < 1:
        raise InvalidDesign("n must be at least 1")
    rng = rng_stream(rule.seed, "realize-subpop")
    cells = rng.choice(design.k, size=n, p=design.p)
    w0 = (rng.random(n) < design.w0[cells]).astype(np.int8)
    u = rng.random(n)
    w_star = ((u <= inc[cells]) & (w0 == 1)).astype(np.int8)
    out = np.zeros(n, dtype=[("cell", "i8"), ("w0", "i1"), ("w_star", "i1")])
    out["cell"] = cells
    out["w0"] = w0
    out["w_star"] = w_star
    return out


def moment_summary(design):
    """Collect mu, E[a|W0=1], P(W0=1) and E0 = E[tau|W0=1]; mu and e0 are
    None when the needed tau values are absent."""
    m = design.w0_mass
    mean_a = design.mean_a_given_w0
    pop = design.pop_w0
    value = None
    e0 = None
    if design.tau is not None:
        tau_ok_mu = not np.any(np.isnan(design.tau) & (design.a * m != 0))
        tau_ok_e0 = not np.any(np.isnan(design.tau) & (m > 0))
        tau = np.where(np.isnan(design.tau), 0.0, design.tau)
        if tau_ok_mu and abs((design.a * m).sum()) > _degenerate_tol(design) * m.sum():
            value = float((design.a * m * tau).sum() / (design.a * m).sum())
        if tau_ok_e0:
            e0 = float((m * tau).sum() / m.sum())
    return MomentSummary(mu=value, mean_a_given_w0=mean_a, pop_w0=pop, e0=e0)


# ---------------------------------------------------------------------------
# CSV plumbing shared by the table types
# ---------------------------------------------------------------------------


def _read_csv_raw(path):
    """Header and (lineno, fields) rows of a CSV file; leading '#' comment
    lines are skipped and blank rows dropped."""
    with open(path, newline="") as fh:
        lines = fh.readlines()
    start = 0
    while start < len(lines) and lines[start].lstrip().startswith("#"):
        start += 1
    if start >= len(lines):
        raise SchemaError(f"{path}: no header row found")
    reader = csv.reader(lines[start:])
    header = [h.strip() for h in next(reader)]
    rows = []
    for offset, row in enumerate(reader):
        lineno = start + 2 + offset
        if not row or all(not f.strip() for f in row):
            continue
        rows.append((lineno, [f.strip() for f in row]))
    return header, rows


def _read_csv_rows(path, header):
    """(lineno, row-dict) pairs from a CSV with exactly the given header."""
    got, raw = _read_csv_raw(path)
    if got != list(header):
        raise SchemaError(
            f"{path}: expected header {','.join(header)!r}, got {','.join(got)!r}"
        )
    rows = []
    for lineno, row in raw:
        if len(row) > len(header):
            raise ParseError(f"{path}:{lineno}: too many fields")
        row = row + [""] * (len(header) - len(row))
        rows.append((lineno, dict(zip(header, row))))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _parse_float(text, name, lineno):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"line {lineno}: bad {name} value {text!r}") from None


def _infer_numeric_labels(labels):
    """Numeric labels when every label parses as a float (or a ';'-separated
    float vector of common length); otherwise None."""
    try:
        return np.asarray([float(l) for l in labels])
    except ValueError:
        pass
    try:
        vecs = [[float(part) for part in str(l).split(";")] for l in labels]
    except ValueError:
        return None
    if len({len(v) for v in vecs}) != 1 or len(vecs[0]) < 2:
        return None
    return np.asarray(vecs)
