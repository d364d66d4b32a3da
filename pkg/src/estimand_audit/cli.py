"""Command line front end for design audits, bounds, estimation, the
bootstrap, simulation, and figure-data emission.

Exit codes: 0 on success, 1 for domain errors (bad input data, missing
tau where one is needed), 2 for usage errors.  A design for which no
causal representation exists is *not* an error — the finding is reported
in the ``exists`` field and the share rows are zero.

JSON reports carry a ``schema_version`` field; the human-readable audit
table has one column for the uniform analysis and one for the fixed-tau
analysis, with rows for the representable share of the population and of
the target subpopulation.
"""

import argparse
import json
import sys

import numpy as np

from .bounds import (
    SupportBounds,
    ate_bounds_from_validity,
    ate_bounds_general,
    decompose_negative_weights,
)
from .cells import CellTable, moment_summary, normalize_sign
from .data_io import DgpSpec, load_micro, load_panel, panel_to_group_distribution, simulate
from .designs import (
    GroupDistribution,
    IvCellTable,
    PropensityTable,
    iv_design,
    ols_ate_design,
    ols_att_design,
    ols_atu_design,
    tsls_design,
    twfe_cdh_design,
    twfe_h_design,
)
from .errors import AuditError, InfeasibleProgram, InvalidDesign, MissingTau
from .inference import (
    BootstrapConfig,
    bootstrap_ci,
    estimate_design,
    estimate_uniform_validity,
)
from .validity import (
    fixed_tau_bruteforce,
    fixed_tau_internal_validity,
    fixed_tau_lp,
    uniform_internal_validity,
)

SCHEMA_VERSION = 1

MICRO_FAMILIES = ("ols_ate", "ols_att", "ols_atu", "iv", "tsls")
PANEL_FAMILIES = ("twfe_cdh", "twfe_h")
SOLVER_TOL = 1e-9
_BRUTE_FORCE_LIMIT = 12

_PROPENSITY_BUILDERS = {
    "ols_ate": ols_ate_design,
    "ols_att": ols_att_design,
    "ols_atu": ols_atu_design,
}
_IV_BUILDERS = {"iv": iv_design, "tsls": tsls_design}


def _design_flags(sub):
    sub.add_argument("--design", metavar="CSV",
                     help="cell table CSV (label,p,a,w0,tau)")
    sub.add_argument("--family",
                     choices=MICRO_FAMILIES + PANEL_FAMILIES,
                     help="build the design for this estimand family")
    sub.add_argument("--propensities", metavar="CSV",
                     help="propensity table for the ols_* families")
    sub.add_argument("--iv-cells", metavar="CSV",
                     help="instrument cell table for iv/tsls")
    sub.add_argument("--groups", metavar="CSV",
                     help="adoption-group distribution for the twfe_* families")
    sub.add_argument("--panel", metavar="CSV",
                     help="wide panel (unit,g,y1..yT); groups are counted from it")
    sub.add_argument("--tau", metavar="V1,V2,...",
                     help="attach per-cell effect values, in cell order")


def _parse_tau(text, k):
    tokens = [t.strip() for t in text.split(",")]
    if len(tokens) != k:
        raise InvalidDesign(
            "--tau lists %d values but the design has %d cells" % (len(tokens), k)
        )
    return np.array(
        [float("nan") if t in ("", "nan") else float(t) for t in tokens]
    )


def _build_design(args, parser):
    """Resolve the design input flags into (family, CellTable)."""
    if (args.design is None) == (args.family is None):
        parser.error("give exactly one of --design or --family")
    if args.design is not None:
        family, design = "design", CellTable.from_csv(args.design)
    else:
        family = args.family
        if family in _PROPENSITY_BUILDERS:
            if args.propensities is None:
                parser.error("--family %s requires --propensities" % family)
            design = _PROPENSITY_BUILDERS[family](
                PropensityTable.from_csv(args.propensities)
            )
        elif family in _IV_BUILDERS:
            if args.iv_cells is None:
                parser.error("--family %s requires --iv-cells" % family)
            design = _IV_BUILDERS[family](IvCellTable.from_csv(args.iv_cells))
        else:
            if (args.groups is None) == (args.panel is None):
                parser.error(
                    "--family %s requires exactly one of --groups or --panel"
                    % family
                )
            if args.groups is not None:
                gd = GroupDistribution.from_csv(args.groups)
            else:
                gd = panel_to_group_distribution(load_panel(args.panel))
            builder = twfe_cdh_design if family == "twfe_cdh" else twfe_h_design
            design = builder(gd)
    if args.tau is not None:
        design = design.with_tau(_parse_tau(args.tau, design.k))
    return family, design


def _emit(args, payload, lines):
    if args.json is not None:
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    if not args.quiet and lines:
        sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _num(value, fmt="%.6g"):
    return "-" if value is None else fmt % value


def _moments_payload(summary):
    return {
        "mu": summary.mu,
        "mean_a_given_w0": summary.mean_a_given_w0,
        "pop_w0": summary.pop_w0,
        "e0": summary.e0,
    }


def _fixed_tau_payload(design, mu0, warnings):
    report, trim = fixed_tau_internal_validity(design, mu0)
    solvers = {"closed_form": trim.kept_mass}
    try:
        solvers["mass_reduction"] = fixed_tau_lp(design, mu0)
    except InfeasibleProgram:
        solvers["mass_reduction"] = 0.0
        warnings.append("mu0 lies outside the range of the supplied tau values")
    if design.k <= _BRUTE_FORCE_LIMIT:
        solvers["brute_force"] = fixed_tau_bruteforce(design, mu0)
    else:
        solvers["brute_force"] = None
        warnings.append(
            "brute-force cross-check skipped: design has more than %d cells"
            % _BRUTE_FORCE_LIMIT
        )
    values = [v for v in solvers.values() if v is not None]
    agreement = max(values) - min(values) <= SOLVER_TOL
    if not agreement:
        warnings.append("fixed-tau solvers disagree beyond %g" % SOLVER_TOL)
    return {
        "mu0": float(mu0),
        "report": report.to_json_dict(),
        "trim": trim.to_json_dict(),
        "solvers": solvers,
        "agreement": agreement,
    }, report, trim


def _audit_table(family, design, summary, uniform, fixed):
    lines = ["audit: family=%s cells=%d" % (family, design.k)]
    lines.append(
        "mu = %s | E[a|W0=1] = %s | P(W0=1) = %s"
        % (_num(summary.mu), _num(summary.mean_a_given_w0), _num(summary.pop_w0))
    )
    header = "%-22s%20s%16s" % ("", "uniformly in tau0", "given tau0")
    rows = [
        ("exists", "yes" if uniform.exists else "no",
         "-" if fixed is None else ("yes" if fixed[0].exists else "no")),
        ("P(W*=1)", _num(uniform.p_representative),
         "-" if fixed is None else _num(fixed[0].p_representative)),
        ("P(W*=1 | W0=1)", _num(uniform.p_internal),
         "-" if fixed is None else _num(fixed[0].p_internal)),
    ]
    lines.append(header)
    for label, u, f in rows:
        lines.append("%-22s%20s%16s" % (label, u, f))
    if fixed is not None:
        trim = fixed[1]
        lines.append(
            "trim: direction=%s alpha=%s atom_fraction=%s"
            % (trim.direction, _num(None if np.isnan(trim.alpha) else trim.alpha),
               _num(trim.atom_fraction))
        )
    return lines


def cmd_audit(args, parser):
    family, design = _build_design(args, parser)
    if (args.b_lo is None) != (args.b_hi is None):
        parser.error("--b-lo and --b-hi must be given together")
    warnings = []
    summary = moment_summary(design)
    uniform = uniform_internal_validity(design)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "family": family,
        "moments": _moments_payload(summary),
        "uniform": uniform.to_json_dict(),
        "fixed_tau": None,
        "bounds": None,
        "diagnostics": {"warnings": warnings},
    }
    fixed = None
    if design.tau is not None:
        mu0 = args.mu0 if args.mu0 is not None else summary.mu
        ft_payload, report, trim = _fixed_tau_payload(design, mu0, warnings)
        payload["fixed_tau"] = ft_payload
        fixed = (report, trim)
    elif args.mu0 is not None:
        raise MissingTau("--mu0 is only meaningful for designs with tau values")
    lines = _audit_table(family, design, summary, uniform, fixed)
    if args.b_lo is not None:
        if summary.mu is None:
            raise MissingTau(
                "bounds need the estimand value; supply tau in the design"
            )
        sb = SupportBounds(args.b_lo, args.b_hi)
        interval = ate_bounds_from_validity(
            summary.mu, uniform.p_representative, sb
        )
        payload["bounds"] = {
            "support": {"lo": sb.b_lo, "hi": sb.b_hi},
            "ate": interval.to_json_dict(),
        }
        lines.append(
            "ATE in [%.6g, %.6g] (width %.6g)"
            % (interval.lo, interval.hi, interval.width)
        )
    return _emit(args, payload, lines)


def cmd_bounds(args, parser):
    family, design = _build_design(args, parser)
    summary = moment_summary(design)
    uniform = uniform_internal_validity(design)
    mu_value = args.mu if args.mu is not None else summary.mu
    if mu_value is None:
        raise MissingTau(
            "the estimand value is unknown: supply tau in the design or --mu"
        )
    sb = SupportBounds(args.b_lo, args.b_hi)
    interval = ate_bounds_from_validity(mu_value, uniform.p_representative, sb)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "family": family,
        "mu": float(mu_value),
        "p_internal": uniform.p_internal,
        "p_representative": uniform.p_representative,
        "support": {"lo": sb.b_lo, "hi": sb.b_hi},
        "ate": interval.to_json_dict(),
        "decomposition": None,
        "general": None,
    }
    lines = [
        "bounds: family=%s mu=%.6g P(W*=1)=%.6g" % (family, mu_value,
                                                    uniform.p_representative),
        "ATE in [%.6g, %.6g] (width %.6g)" % (interval.lo, interval.hi,
                                              interval.width),
    ]
    if np.all(np.abs(design.w0 - 1.0) <= 1e-12):
        decomposition = decompose_negative_weights(design)
        general = ate_bounds_general(design, mu_value, sb)
        payload["decomposition"] = decomposition.to_json_dict()
        payload["general"] = general.to_json_dict()
        lines.append(
            "sign split: omega+ = %.6g, omega- = %.6g; any-sign ATE in "
            "[%.6g, %.6g]" % (decomposition.omega_plus,
                              decomposition.omega_minus, general.lo, general.hi)
        )
    return _emit(args, payload, lines)


def cmd_estimate(args, parser):
    sample = load_micro(args.data)
    ed = estimate_design(sample, args.family)
    cfg = BootstrapConfig(b=1, c0=args.c0, xi0=args.xi0)
    p_hat = estimate_uniform_validity(ed, cfg)
    c_n = cfg.c_n(ed.n)
    trimmed = [
        ed.design.labels[i]
        for i in np.flatnonzero(~(ed.design.w0 > c_n))
    ]
    cells = [
        {
            "label": ed.design.labels[i],
            "count": int(ed.counts[i]),
            "p": float(ed.design.p[i]),
            "a": float(ed.design.a[i]),
            "w0": float(ed.design.w0[i]),
        }
        for i in range(ed.design.k)
    ]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "family": args.family,
        "n": ed.n,
        "c_n": c_n,
        "cells": cells,
        "p_hat": float(p_hat),
        "p_hat_clipped": min(max(float(p_hat), 0.0), 1.0),
        "trimmed_cells": trimmed,
    }
    lines = [
        "estimate: family=%s n=%d cells=%d" % (args.family, ed.n, ed.design.k),
        "P_hat(W*=1 | W0=1) = %.6g (clipped %.6g); %d cell(s) trimmed"
        % (p_hat, payload["p_hat_clipped"], len(trimmed)),
    ]
    return _emit(args, payload, lines)


def cmd_bootstrap(args, parser):
    sample = load_micro(args.data)
    cfg = BootstrapConfig(
        b=args.B,
        alpha=args.alpha,
        c0=args.c0,
        xi0=args.xi0,
        seed=args.seed if args.seed is not None else 0,
    )
    result = bootstrap_ci(sample, args.family, cfg)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "family": args.family,
        "n": sample.n,
        "alpha": cfg.alpha,
        "draws": [float(v) for v in result.draws],
    }
    payload.update(result.to_json_dict())
    lines = [
        "bootstrap: family=%s n=%d B=%d" % (args.family, sample.n, cfg.b),
        "P_hat = %.6g; one-sided %g%% CI = [0, %.6g] (%s)"
        % (result.p_hat_clipped, 100 * (1 - cfg.alpha), result.ci[1],
           result.status),
    ]
    return _emit(args, payload, lines)


def cmd_simulate(args, parser):
    with open(args.spec) as fh:
        spec = DgpSpec.from_json_dict(json.load(fh))
    data = simulate(spec, args.n, seed=args.seed)
    if args.out is not None:
        data.to_csv(args.out)
    else:
        data.to_csv(sys.stdout)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "family": spec.family,
        "n": args.n,
        "seed": args.seed if args.seed is not None else spec.seed,
    }
    if args.json is not None:
        with open(args.json, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _figure_rows(args, parser):
    family, design = _build_design(args, parser)
    sub = design.w0_mass > 0
    q = design.w0_mass[sub] / design.pop_w0
    if args.which == "fig1":
        design = normalize_sign(design)
        a = design.a[sub]
        a_max = float(a.max())
        if design.x is not None and design.x.ndim == 1:
            xs = [repr(float(v)) for v in np.asarray(design.x)[sub]]
        else:
            xs = [design.labels[i] for i in np.flatnonzero(sub)]
        header = "x,f_X,a_f_X_over_a_max"
        rows = [
            (xs[j], repr(float(q[j])), repr(float(a[j] * q[j] / a_max)))
            for j in range(len(q))
        ]
        return header, rows
    if design.tau is None:
        raise MissingTau("fig2 needs tau values in the design")
    mu0 = args.mu0 if args.mu0 is not None else moment_summary(design).mu
    report, trim = fixed_tau_internal_validity(design, mu0)
    taus = design.tau[sub]
    kept = (report.inclusion.inclusion[sub]
            if report.inclusion is not None else np.zeros(q.shape))
    alpha = "" if np.isnan(trim.alpha) else repr(float(trim.alpha))
    order = np.argsort(taus, kind="stable")
    header = "tau,mass,kept,alpha"
    rows = [
        (repr(float(taus[j])), repr(float(q[j])), repr(float(kept[j])), alpha)
        for j in order
    ]
    return header, rows


def cmd_figure_data(args, parser):
    header, rows = _figure_rows(args, parser)
    text = header + "\n" + "".join(",".join(r) + "\n" for r in rows)
    if args.out is not None:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.json is not None:
        cols = header.split(",")
        payload = {
            "schema_version": SCHEMA_VERSION,
            "which": args.which,
            "rows": [dict(zip(cols, r)) for r in rows],
        }
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="root seed for anything random")
    common.add_argument("--json", metavar="PATH", default=None,
                        help="also write the report as JSON")
    common.add_argument("--quiet", action="store_true",
                        help="suppress the human-readable output")

    parser = argparse.ArgumentParser(
        prog="estimand-audit",
        description="Audit weighted causal estimands: implied weights, "
                    "representation existence, representable shares, ATE "
                    "bounds, and estimation from micro data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_audit = sub.add_parser("audit", parents=[common],
                             help="full design audit")
    _design_flags(p_audit)
    p_audit.add_argument("--mu0", type=float, default=None,
                         help="estimand value for the fixed-tau audit "
                              "(default: the design's own estimand)")
    p_audit.add_argument("--b-lo", type=float, default=None,
                         help="lower support bound for ATE bounds")
    p_audit.add_argument("--b-hi", type=float, default=None,
                         help="upper support bound for ATE bounds")
    p_audit.set_defaults(func=cmd_audit)

    p_bounds = sub.add_parser("bounds", parents=[common],
                              help="ATE bounds from the representable share")
    _design_flags(p_bounds)
    p_bounds.add_argument("--mu", type=float, default=None,
                          help="estimand value, if the design carries no tau")
    p_bounds.add_argument("--b-lo", type=float, required=True,
                          help="lower support bound for the effects")
    p_bounds.add_argument("--b-hi", type=float, required=True,
                          help="upper support bound for the effects")
    p_bounds.set_defaults(func=cmd_bounds)

    p_estimate = sub.add_parser("estimate", parents=[common],
                                help="estimate the design and the share "
                                     "from micro data")
    p_estimate.add_argument("--data", required=True, metavar="CSV",
                            help="micro sample (x,d[,z][,y])")
    p_estimate.add_argument("--family", required=True, choices=MICRO_FAMILIES)
    p_estimate.add_argument("--c0", type=float, default=0.5,
                            help="trimming scale constant")
    p_estimate.add_argument("--xi0", type=float, default=0.5,
                            help="near-maximizer scale constant")
    p_estimate.set_defaults(func=cmd_estimate)

    p_boot = sub.add_parser("bootstrap", parents=[common],
                            help="one-sided bootstrap CI for the share")
    p_boot.add_argument("--data", required=True, metavar="CSV")
    p_boot.add_argument("--family", required=True, choices=MICRO_FAMILIES)
    p_boot.add_argument("--B", type=int, default=400,
                        help="bootstrap replications")
    p_boot.add_argument("--alpha", type=float, default=0.05)
    p_boot.add_argument("--c0", type=float, default=0.5)
    p_boot.add_argument("--xi0", type=float, default=0.5)
    p_boot.set_defaults(func=cmd_bootstrap)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="draw a synthetic sample from a DGP spec")
    p_sim.add_argument("--spec", required=True, metavar="JSON")
    p_sim.add_argument("--n", required=True, type=int)
    p_sim.add_argument("--out", metavar="CSV", default=None,
                       help="write here instead of stdout")
    p_sim.set_defaults(func=cmd_simulate)

    p_fig = sub.add_parser("figure-data", parents=[common],
                           help="emit plot-ready CSV columns")
    _design_flags(p_fig)
    p_fig.add_argument("--which", required=True, choices=("fig1", "fig2"),
                       help="fig1: weight profile; fig2: trimmed tau region")
    p_fig.add_argument("--mu0", type=float, default=None,
                       help="estimand value for fig2")
    p_fig.add_argument("--out", metavar="CSV", default=None)
    p_fig.set_defaults(func=cmd_figure_data)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except AuditError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
