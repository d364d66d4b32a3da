"""Shared helpers for the test suite: canonical designs and random generators."""

import numpy as np

from estimand_audit.cells import CellTable, cell_table


def binary_design(tau=None):
    """Two-cell design with masses (0.2, 0.8) and weights (0.24, 0.09).

    This is the canonical worked example used throughout the suite: the
    weights arise from a full-population OLS design with within-cell
    treatment probabilities (0.4, 0.1).
    """
    return cell_table(
        labels=("1", "2"),
        p=(0.2, 0.8),
        a=(0.24, 0.09),
        w0=(1.0, 1.0),
        tau=tau,
    )


def random_design(
    rng,
    k_max=8,
    *,
    allow_negative_a=False,
    with_tau=False,
    random_w0=False,
    integer_tau=False,
):
    """Draw a random valid CellTable (sign-normalized).

    ``integer_tau`` draws CATEs from a small integer grid so ties (atoms)
    occur with high probability.
    """
    k = int(rng.integers(1, k_max + 1))
    p = rng.dirichlet(np.ones(k) * rng.uniform(0.4, 3.0))
    # Keep masses bounded away from zero so conditional moments are stable.
    p = (p + 0.01) / np.sum(p + 0.01)
    if allow_negative_a:
        a = rng.normal(0.5, 1.0, size=k)
    else:
        a = rng.uniform(0.05, 1.0, size=k)
    if random_w0:
        w0 = rng.uniform(0.0, 1.0, size=k)
        w0[rng.random(k) < 0.25] = 1.0
        if not np.any(w0 * p > 0):
            w0[int(rng.integers(k))] = 1.0
    else:
        w0 = np.ones(k)
    tau = None
    if with_tau:
        if integer_tau:
            tau = rng.integers(-2, 3, size=k).astype(float)
        else:
            tau = rng.normal(0.0, 2.0, size=k)
    mean_a = float(np.sum(a * w0 * p) / np.sum(w0 * p))
    if abs(mean_a) < 1e-6:
        a = a + 0.5  # nudge away from the degenerate boundary
        mean_a = float(np.sum(a * w0 * p) / np.sum(w0 * p))
    if mean_a < 0:
        a = -a
    return cell_table(
        labels=tuple(str(i) for i in range(k)), p=p, a=a, w0=w0, tau=tau
    )


def random_group_distribution(rng, t_max=10):
    """Random staggered-adoption group distribution with T in {2..t_max}.

    Always keeps at least one finite adoption group; some groups may be
    dropped entirely so sparse supports get exercised too.
    """
    import math

    t = int(rng.integers(2, t_max + 1))
    groups = list(range(2, t + 1)) + [math.inf]
    shares = rng.dirichlet(np.ones(len(groups)))
    if len(groups) > 2:
        drop = rng.random(len(groups)) < 0.25
        drop[int(rng.integers(0, len(groups) - 1))] = False
        shares = np.where(drop, 0.0, shares)
        shares = shares / shares.sum()
    from estimand_audit.designs import GroupDistribution

    return GroupDistribution(
        t, {g: float(s) for g, s in zip(groups, shares) if s > 0}
    )
