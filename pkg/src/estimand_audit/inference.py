"""Plug-in estimation and directional bootstrap for the maximal
representable share.

The share of the population that a weighted estimand can be said to
represent is, at the cell level, a smooth function of the observed
frequencies except at one point: its normalising constant is a *maximum*
over cell weights, which has a kink wherever two cells are tied for the
top.  A naive bootstrap of the share is inconsistent exactly there, so
one-sided confidence statements are built from the functional's
directional derivative instead: resampled cell frequencies are mapped to
perturbation vectors, the derivative is evaluated on each, and its lower
quantile widens the interval precisely when the maximum is nearly tied.

Estimation trims cells whose estimated target-population membership
falls below a threshold ``c_n = c0 * n**(-1/3)``; the near-maximizer set
that feeds the kink term uses a second threshold ``xi_n`` of the same
order.  Both vanish asymptotically, so nothing is trimmed in the limit.
"""

import dataclasses
import math

import numpy as np

from .cells import CellTable, cell_table, rng_stream
from .errors import (
    AllCellsTrimmed,
    DegenerateWeights,
    DimensionMismatch,
    EmptyCellArm,
    InvalidDesign,
    NoCompliers,
    ResampleDegenerate,
    SchemaError,
)
from .validity import check_uniform_existence

FAMILIES = ("ols_ate", "ols_att", "ols_atu", "iv", "tsls")

_MAX_REDRAW_ROUNDS = 50


@dataclasses.dataclass(frozen=True)
class BootstrapConfig:
    """Tuning constants for estimation and bootstrap.

    Parameters
    ----------
    b : int
        Number of bootstrap replications.
    alpha : float
        One minus the nominal coverage of the one-sided interval.
    c0, xi0 : float
        Scale constants for the trimming threshold ``c_n`` and the
        near-maximizer threshold ``xi_n``, both of order ``n**(-1/3)``.
    seed : int
        Root seed for the resampling stream.
    """

    b: int = 400
    alpha: float = 0.05
    c0: float = 0.5
    xi0: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 1:
            raise ValueError("b must be a positive integer")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self.c0 <= 0 or self.xi0 <= 0:
            raise ValueError("c0 and xi0 must be positive")

    def c_n(self, n):
        """Trimming threshold at sample size `n`."""
        return self.c0 * float(n) ** (-1.0 / 3.0)

    def xi_n(self, n):
        """Near-maximizer threshold at sample size `n`."""
        return self.xi0 * float(n) ** (-1.0 / 3.0)


@dataclasses.dataclass(frozen=True)
class EstimatedDesign:
    """A cell table estimated from micro data, with its count statistics.

    `joint` keeps the per-cell arm counts the estimate was computed
    from — shape ``(k, 2)`` indexed by treatment for the regression
    families, ``(k, 2, 2)`` indexed by (instrument, treatment) for the
    instrumented ones.  The bootstrap resamples these counts directly.
    """

    design: CellTable
    counts: np.ndarray
    joint: np.ndarray
    n: int
    family: str

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        joint = np.asarray(self.joint, dtype=np.int64)
        counts.setflags(write=False)
        joint.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "joint", joint)
        if int(counts.sum()) != self.n or int(joint.sum()) != self.n:
            raise InvalidDesign("cell counts do not add up to the sample size")


@dataclasses.dataclass(frozen=True)
class LimitFunctional:
    """Directional derivative of the estimated share.

    Acts on a perturbation ``z`` of shape ``(3, k)`` whose rows perturb
    the cell weights, the membership indicators, and the cell masses, in
    that order.  Linear in all coordinates except the weight coordinates
    of the near-maximizer cells in `psi_set`, which enter through a max.
    """

    coef_a: np.ndarray
    coef_w0: np.ndarray
    coef_p: np.ndarray
    coef_max: float
    psi_set: tuple

    def __post_init__(self):
        for name in ("coef_a", "coef_w0", "coef_p"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "psi_set", tuple(int(i) for i in self.psi_set))
        if not self.psi_set:
            raise InvalidDesign("near-maximizer set is empty")

    @property
    def k(self):
        return self.coef_a.shape[0]


@dataclasses.dataclass(frozen=True)
class BootstrapResult:
    """One-sided interval for the representable share.

    `p_hat` is the raw plug-in value (it may exceed 1 when the largest
    weight sits in a trimmed cell); `p_hat_clipped` is the reporting
    version.  `ci` is ``(0, upper)`` after clipping to the unit interval.
    """

    p_hat: float
    draws: np.ndarray
    q_alpha: float
    ci: tuple
    diagnostics: dict
    status: str = "ok"

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)

    @property
    def p_hat_clipped(self):
        return min(max(self.p_hat, 0.0), 1.0)

    def to_json_dict(self):
        return {
            "p_hat": self.p_hat,
            "p_hat_clipped": self.p_hat_clipped,
            "q_alpha": None if math.isnan(self.q_alpha) else self.q_alpha,
            "ci": {"lo": self.ci[0], "hi": self.ci[1]},
            "n_draws": int(self.draws.shape[0]),
            "status": self.status,
            "diagnostics": self.diagnostics,
        }


def _theta_regression(joint, n, family):
    """Cell frequencies -> (p, a, w0, ok_a, ok_w0) for the OLS families.

    `joint` has shape ``(..., k, 2)``; leading axes vectorize over
    bootstrap replications.  Coordinates whose within-cell frequencies
    are undefined (an empty cell or arm) are flagged in the masks and
    left at arbitrary finite values.
    """
    joint = np.asarray(joint, dtype=float)
    rows = joint.sum(axis=-1)
    p = rows / n
    px = joint[..., 1] / np.maximum(rows, 1.0)
    ok = (joint > 0).all(axis=-1)
    if family == "ols_ate":
        a = px * (1.0 - px)
        w0 = np.ones_like(p)
        ok_w0 = np.ones(ok.shape, dtype=bool)
        return p, a, w0, ok, ok_w0
    if family == "ols_att":
        return p, 1.0 - px, px, ok, ok
    return p, px, 1.0 - px, ok, ok


def _theta_instrumented(joint, n, family):
    """Cell frequencies -> estimates for the instrumented families.

    `joint` has shape ``(..., k, 2, 2)`` indexed by (z, d).  The
    membership estimate is the first-stage difference
    ``P(D=1|Z=1) - P(D=1|Z=0)``, clipped at zero when sampling noise
    turns it negative.
    """
    joint = np.asarray(joint, dtype=float)
    nz = joint.sum(axis=-1)
    rows = nz.sum(axis=-1)
    p = rows / n
    safe_rows = np.maximum(rows, 1.0)
    pd1 = joint[..., 1, 1] / np.maximum(nz[..., 1], 1.0)
    pd0 = joint[..., 0, 1] / np.maximum(nz[..., 0], 1.0)
    w0 = np.clip(pd1 - pd0, 0.0, 1.0)
    ok_w0 = (nz > 0).all(axis=-1)
    ok_a = rows > 0
    if family == "iv":
        pz = nz[..., 1] / safe_rows
        a = pz * (1.0 - pz)
    else:
        d_tot = joint[..., :, 1].sum(axis=-1)
        cov = joint[..., 1, 1] / safe_rows - (d_tot / safe_rows) * (
            nz[..., 1] / safe_rows
        )
        a = np.abs(cov)
    return p, a, w0, ok_a, ok_w0


def _theta(joint, n, family):
    if family in ("iv", "tsls"):
        return _theta_instrumented(joint, n, family)
    return _theta_regression(joint, n, family)


def estimate_design(sample, family):
    """Estimate the weighted-design cell table from micro data.

    Cells are the distinct covariate labels, ordered lexicographically.
    Every cell must contain both treatment arms (both instrument arms
    for the instrumented families); otherwise the within-cell
    frequencies the weights are built from are undefined.

    Parameters
    ----------
    sample : MicroSample
        Rows with covariate label `x`, treatment `d`, and — for the
        ``iv`` / ``tsls`` families — instrument `z`.
    family : str
        One of ``ols_ate``, ``ols_att``, ``ols_atu``, ``iv``, ``tsls``.

    Returns
    -------
    EstimatedDesign

    Raises
    ------
    EmptyCellArm
        If some cell lacks an arm the family's weights condition on.
    SchemaError
        If the instrumented families are requested without a `z` column.
    NoCompliers
        If every cell's estimated complier share is zero.
    """
    if family not in FAMILIES:
        raise ValueError(
            "unknown family %r; expected one of %s" % (family, ", ".join(FAMILIES))
        )
    labels, inv = np.unique(np.asarray(sample.x), return_inverse=True)
    k = labels.shape[0]
    n = sample.n
    d = np.asarray(sample.d, dtype=np.int64)
    if family in ("iv", "tsls"):
        if sample.z is None:
            raise SchemaError("family %r requires an instrument column z" % family)
        z = np.asarray(sample.z, dtype=np.int64)
        joint = np.zeros((k, 2, 2), dtype=np.int64)
        np.add.at(joint, (inv, z, d), 1)
        arm_counts = joint.sum(axis=-1)
        bad = np.flatnonzero((arm_counts == 0).any(axis=-1))
        if bad.size:
            raise EmptyCellArm(
                "cell %r has rows for only one instrument arm" % str(labels[bad[0]])
            )
    else:
        joint = np.zeros((k, 2), dtype=np.int64)
        np.add.at(joint, (inv, d), 1)
        bad = np.flatnonzero((joint == 0).any(axis=-1))
        if bad.size:
            raise EmptyCellArm(
                "cell %r has rows for only one treatment arm" % str(labels[bad[0]])
            )
    p, a, w0, ok_a, ok_w0 = _theta(joint, n, family)
    assert bool(ok_a.all()) and bool(ok_w0.all())
    try:
        design = cell_table([str(v) for v in labels], p, a, w0=w0)
    except InvalidDesign:
        if family in ("iv", "tsls"):
            raise NoCompliers(
                "estimated complier share is zero in every cell"
            ) from None
        raise
    counts = joint.reshape(k, -1).sum(axis=1)
    return EstimatedDesign(design=design, counts=counts, joint=joint, n=n, family=family)


def _untrimmed(ed, cfg):
    keep = ed.design.w0 > cfg.c_n(ed.n)
    if not keep.any():
        raise AllCellsTrimmed(
            "every cell's estimated membership is at or below the trimming "
            "threshold %.4g" % cfg.c_n(ed.n)
        )
    return keep


def estimate_uniform_validity(ed, cfg):
    """Plug-in estimate of the maximal representable share.

    The ratio ``E[a w0] / (E[w0] * max a)`` is evaluated at the
    estimated cell table, with the max restricted to cells whose
    membership estimate clears the trimming threshold.  The returned
    value is *raw*: it can exceed 1 when the globally largest weight
    sits in a trimmed cell.  Clip for reporting.

    Raises
    ------
    AllCellsTrimmed
        If no cell clears the trimming threshold.
    """
    keep = _untrimmed(ed, cfg)
    d = ed.design
    a_max = float(d.a[keep].max())
    if a_max <= 0.0:
        raise DegenerateWeights("largest untrimmed weight is not positive")
    num = float(np.sum(d.p * d.a * d.w0))
    den = float(np.sum(d.p * d.w0))
    return num / (den * a_max)


def psi_hat_build(ed, cfg):
    """Build the estimated directional derivative of the share.

    The derivative of ``E[a w0] / (E[w0] * max a)`` in a direction
    ``(z_a, z_w0, z_p)`` is linear except through the max, whose
    directional derivative is the max of ``z_a`` over the near-maximizer
    cells ``psi_set`` — untrimmed cells whose weight comes within
    ``xi_n`` of the untrimmed maximum.  Restricting the set to untrimmed
    cells matches the trimmed max used by the point estimate.
    """
    keep = _untrimmed(ed, cfg)
    d = ed.design
    a_max = float(d.a[keep].max())
    if a_max <= 0.0:
        raise DegenerateWeights("largest untrimmed weight is not positive")
    den = float(np.sum(d.p * d.w0))
    e_a = float(np.sum(d.p * d.a * d.w0)) / den
    scale = den * a_max
    coef_a = d.w0 * d.p / scale
    coef_w0 = (d.a - e_a) * d.p / scale
    coef_p = (d.a - e_a) * d.w0 / scale
    psi_set = np.flatnonzero(keep & (d.a >= a_max - cfg.xi_n(ed.n)))
    return LimitFunctional(
        coef_a=coef_a,
        coef_w0=coef_w0,
        coef_p=coef_p,
        coef_max=e_a / a_max**2,
        psi_set=tuple(psi_set),
    )


def psi_apply(lf, z):
    """Evaluate the directional derivative at a perturbation.

    Parameters
    ----------
    lf : LimitFunctional
    z : array_like, shape (3, k)
        Rows perturb the weights, the membership indicators, and the
        cell masses, in that order.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (3, lf.k):
        raise DimensionMismatch(
            "expected a perturbation of shape (3, %d), got %s" % (lf.k, z.shape)
        )
    za, zw, zp = z
    kink = float(za[list(lf.psi_set)].max())
    return float(za @ lf.coef_a - lf.coef_max * kink + zw @ lf.coef_w0 + zp @ lf.coef_p)


def bootstrap_ci(sample, family, cfg):
    """One-sided bootstrap interval ``[0, upper]`` for the share.

    Resamples the joint cell/arm counts (a multinomial redraw of the
    rows), maps each replicate to the perturbation ``sqrt(n) * (theta* -
    theta_hat)``, evaluates the directional derivative on it, and
    subtracts the alpha-quantile of those draws from the plug-in value.

    Replicates that lose a cell or an arm keep the point estimate in the
    affected coordinates (a zero perturbation there); how often that
    happened is reported in the diagnostics.  A replicate in which *no*
    cell clears the trimming threshold is discarded and redrawn; if
    redraws keep failing the resampling scheme itself is degenerate and
    `ResampleDegenerate` is raised.

    Returns
    -------
    BootstrapResult
        With fields `p_hat` (raw plug-in value), `draws` (derivative
        evaluations), `q_alpha`, `ci`, and `diagnostics` containing
        `trimmed_cells`, `fallback_coordinates`, `degenerate_redraws`,
        and `max_cell_instability` (share of replicates whose untrimmed
        argmax left the near-maximizer set).
    """
    ed = estimate_design(sample, family)
    if not check_uniform_existence(ed.design):
        # unreachable for the built-in families (their weights are
        # nonnegative by construction) but kept for safety: with
        # negative weights no subpopulation is represented and the
        # share's bootstrap limit is degenerate at zero
        return BootstrapResult(
            p_hat=0.0,
            draws=np.empty(0),
            q_alpha=float("nan"),
            ci=(0.0, 0.0),
            diagnostics={},
            status="no_representation",
        )
    p_hat = estimate_uniform_validity(ed, cfg)
    lf = psi_hat_build(ed, cfg)
    n = ed.n
    c = cfg.c_n(n)
    keep = ed.design.w0 > c
    p0, a0, w00 = ed.design.p, ed.design.a, ed.design.w0
    psi_idx = list(lf.psi_set)
    in_psi = np.zeros(ed.design.k, dtype=bool)
    in_psi[psi_idx] = True

    rng = rng_stream(cfg.seed, "bootstrap", family)
    pvals = ed.joint.ravel() / n
    root_n = math.sqrt(n)

    draws = np.empty(cfg.b)
    pending = np.arange(cfg.b)
    fallback = 0
    redraws = 0
    unstable = 0
    for _ in range(_MAX_REDRAW_ROUNDS):
        m = pending.shape[0]
        cnt = rng.multinomial(n, pvals, size=m).reshape((m,) + ed.joint.shape)
        p, a, w0, ok_a, ok_w0 = _theta(cnt, n, family)
        a = np.where(ok_a, a, a0)
        w0 = np.where(ok_w0, w0, w00)
        untrimmed = w0 > c
        good = untrimmed.any(axis=1)
        if good.any():
            za = root_n * (a[good] - a0)
            zw = root_n * (w0[good] - w00)
            zp = root_n * (p[good] - p0)
            kink = za[:, psi_idx].max(axis=1)
            draws[pending[good]] = (
                za @ lf.coef_a
                - lf.coef_max * kink
                + zw @ lf.coef_w0
                + zp @ lf.coef_p
            )
            fallback += int((~ok_a[good]).sum() + (~ok_w0[good]).sum())
            masked = np.where(untrimmed[good], a[good], -np.inf)
            unstable += int((~in_psi[masked.argmax(axis=1)]).sum())
        redraws += int((~good).sum())
        pending = pending[~good]
        if pending.shape[0] == 0:
            break
    else:
        raise ResampleDegenerate(
            "resampling kept losing every untrimmed cell after %d rounds"
            % _MAX_REDRAW_ROUNDS
        )

    q_alpha = float(np.quantile(draws, cfg.alpha))
    upper = min(1.0, max(0.0, p_hat - q_alpha / root_n))
    diagnostics = {
        "trimmed_cells": [ed.design.labels[i] for i in np.flatnonzero(~keep)],
        "fallback_coordinates": fallback,
        "degenerate_redraws": redraws,
        "max_cell_instability": unstable / cfg.b,
    }
    return BootstrapResult(
        p_hat=p_hat,
        draws=draws,
        q_alpha=q_alpha,
        ci=(0.0, upper),
        diagnostics=diagnostics,
    )
