"""Command-line front end.

Every experiment and diagnostic is exposed as a subcommand writing JSON and
CSV reports into an output directory.  A flat ``key = value`` config file
can seed any flag; explicit flags override the file.  Numeric flags accept
exact rationals like ``1/64``.  Exit codes: 0 success, 1 assertion or
validation failure, 2 usage or config-schema error.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .conjugate import ConjugationContext, commutator_coeffs, commutator_form, \
    antisym_apply, conjugate_apply, sym_apply
from .experiments import (
    SweepConfig,
    caccioppoli_sweep,
    carleman_sweep,
    coarsen_check,
    localization_diagnostic,
    log_convexity_scan,
    singular_potential_experiment,
    three_balls_experiment,
)
from .lattice import AnnularRegion, LatticeSpec, inner_product, l2_norm
from .reports import ExperimentReport, FittedConstant
from .solver import (
    DirichletProblem,
    SolverError,
    dirichlet_solve,
    harmonic_polynomial,
    random_bump,
    residual,
)
from .symbols import FrozenPoint, SymbolGrid, lower_bound_margin, scan_table
from .weight import WeightParams, admissibility_check


def parse_number(text: str) -> float:
    """Float or exact rational like '1/64'."""
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def parse_number_list(text: str):
    return tuple(parse_number(t) for t in text.split(",") if t.strip())


def parse_int_list(text: str):
    return tuple(int(t) for t in text.split(",") if t.strip())


def parse_bool(text: str) -> bool:
    val = text.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_KINDS = {
    "float": parse_number,
    "float_list": parse_number_list,
    "int": int,
    "int_list": parse_int_list,
    "str": str,
    "bool": parse_bool,
}

# flag name -> (kind, default, help); shared across subcommands
_COMMON = {
    "out": ("str", "carlat-out", "output directory for report files"),
    "seed": ("int", 0, "root seed for all randomness"),
    "d": ("int", 2, "lattice dimension"),
    "c-ps": ("float", 0.01, "convexification strength of the weight"),
    "tau0": ("float", 5.0, "lower end of the admissible tau window"),
    "delta0": ("float", 0.1, "tau window upper end is delta0/h"),
    "strict": ("bool", False, "exit 1 on warnings or failed assertions"),
    "jobs": ("int", 1, "parallel sweep jobs"),
}

_SUBCOMMANDS = {
    "carleman-sweep": {
        "h": ("float_list", (1 / 32, 1 / 64), "spacing sweep, descending"),
        "tau": ("float", None, "fixed tau (switches tau-rule to fixed)"),
        "tau-rule": ("str", "fraction", "fixed | fraction | grid"),
        "tau-fraction": ("float", 0.5, "tau = fraction * delta0 / h"),
        "tau-grid": ("float_list", (), "tau grid for tau-rule=grid"),
        "samples": ("int", 8, "seeded bumps per (h, tau) cell"),
        "growth-cap": ("float", 2.0, "max allowed ratio growth per h step"),
        "ds-mode": ("str", "symmetric", "difference in the energy: symmetric|forward|backward"),
    },
    "log-convexity": {
        "h": ("float", 1 / 64, "lattice spacing"),
        "input": ("str", "mixed_jk", "harmonic input: const|linear_j|mixed_jk|diff_squares|deg3|solve"),
        "tau-grid": ("float_list", (), "tau grid (default: 12 points in the window)"),
    },
    "three-balls": {
        "h": ("float_list", (1 / 32, 1 / 64), "spacing sweep, descending"),
        "input": ("str", "mixed_jk", "harmonic input kind or 'solve'"),
        "bound-constant": ("float", 10.0, "bound C above which the correction fit activates"),
    },
    "symbol-scan": {
        "h": ("float", 1 / 128, "lattice spacing"),
        "tau": ("float", 20.0, "large parameter"),
        "c0": ("float", 0.0025, "commutator coupling in the margin"),
        "x-bar": ("float_list", (), "base point (default 1,0,...)"),
        "resolution": ("int_list", (128, 256, 512), "grid resolutions per axis"),
        "gamma0": ("float", 0.05, "characteristic neighborhood radius, in units of tau"),
        "grid-csv": ("bool", True, "emit the per-frequency table at the first resolution"),
    },
    "commutator-check": {
        "h": ("float", 1 / 32, "lattice spacing"),
        "tau": ("float", 1.5, "large parameter"),
        "samples": ("int", 5, "seeded bump inputs"),
        "tol": ("float", 1e-11, "relative tolerance for the identities"),
        "coeff-sites": ("int", 200, "random sites for the coefficient identity"),
    },
    "caccioppoli": {
        "h": ("float_list", (1 / 32, 1 / 64), "spacing sweep, descending"),
        "input": ("str", "mixed_jk", "harmonic polynomial kind"),
        "r1": ("float", 1.0, "inner radius"),
        "r2": ("float", 2.0, "outer radius"),
    },
    "coarsen-check": {
        "h": ("float", 1 / 64, "lattice spacing"),
        "input": ("str", "mixed_jk", "harmonic input kind or 'solve'"),
        "m": ("int_list", (2, 3, 4), "coarsening factors"),
        "tol": ("float", 1e-12, "relative residual tolerance"),
    },
    "localize": {
        "h": ("float", 1 / 32, "lattice spacing"),
        "tau": ("float", 8.0, "large parameter"),
        "eps0": ("float", 0.25, "localization scale is 1/(eps0 sqrt(tau))"),
    },
    "singular-potential": {
        "h": ("float_list", (1 / 16, 1 / 32), "spacing sweep, descending"),
        "mu0": ("float", 0.05, "field strength: |V| <= mu0 h^-3/2, |B| <= mu0 h^-1/2"),
        "tau-fraction": ("float", 0.5, "tau = fraction * delta0 / h"),
        "solve-tol": ("float", 1e-8, "Dirichlet residual tolerance"),
    },
}


def _flag_specs(sub: str) -> dict:
    specs = dict(_COMMON)
    specs.update(_SUBCOMMANDS[sub])
    return specs


def build_parser():
    parser = argparse.ArgumentParser(
        prog="carlat",
        description="Lattice Schrodinger operators: weighted estimates and sweeps")
    parser.add_argument("--config", default=None, help="flat key = value config file")
    subs = parser.add_subparsers(dest="subcommand", required=True)
    subparsers = {}
    for name, extra in _SUBCOMMANDS.items():
        sp = subs.add_parser(name, description=f"run the {name} experiment")
        sp.add_argument("--config", default=None, help="flat key = value config file")
        for flag, (kind, default, help_text) in {**_COMMON, **extra}.items():
            sp.add_argument(f"--{flag}", dest=flag.replace("-", "_"),
                            type=_KINDS[kind], default=default, help=help_text)
        subparsers[name] = sp
    return parser, subparsers


def load_config(path: str, sub: str) -> dict:
    """Parse and type-check a flat config file against the subcommand schema."""
    specs = _flag_specs(sub)
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        raw_key = key.strip()
        key = raw_key.replace("_", "-")
        if key == "subcommand":
            continue
        if key not in specs:
            raise ConfigError(f"{path}:{lineno}: unknown config field '{raw_key}'")
        kind = specs[key][0]
        try:
            values[key.replace("-", "_")] = _KINDS[kind](val.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for '{raw_key}': {exc}") from exc
    return values


class ConfigError(Exception):
    pass


_RUNTIME_ONLY = ("out", "jobs", "strict")


def _manifest(args, sub: str) -> dict:
    """Resolved configuration identifying the run.

    Runtime-only knobs (output directory, job count, strictness) do not
    change results, so they stay out of the echo and of the config hash:
    identical manifests give byte-identical data files wherever written.
    """
    specs = _flag_specs(sub)
    resolved = {flag: getattr(args, flag.replace("-", "_"))
                for flag in specs if flag not in _RUNTIME_ONLY}
    resolved["subcommand"] = sub
    return resolved


def _checked_weight(args) -> None:
    report = admissibility_check(WeightParams(max(args.tau0, 1.0) + 1e-9, args.c_ps))
    report.raise_if_failed()


def _finish(report: ExperimentReport, args, extra_files=()) -> int:
    paths = report.write(args.out)
    for p in list(paths) + list(extra_files):
        print(p)
    if args.strict and (report.warnings or report.passed is False):
        return 1
    return 0


def _harmonic_input(spec: LatticeSpec, kind: str, solve_tol: float = 1e-10):
    if kind == "solve":
        data = harmonic_polynomial(spec, "deg3" if spec.d >= 2 else "linear_j")
        problem = DirichletProblem.on_ball(spec, 4.0, data)
        u = dirichlet_solve(problem, tol=solve_tol)
        return u, residual(problem, u)
    u = harmonic_polynomial(spec, kind)
    return u, 0.0


# -- handlers ---------------------------------------------------------------

def cmd_carleman_sweep(args) -> int:
    _checked_weight(args)
    rule = args.tau_rule
    if args.tau is not None:
        rule = "fixed"
    cfg = SweepConfig(d=args.d, h_grid=args.h, tau_rule=rule,
                      tau_value=args.tau if args.tau is not None else 8.0,
                      tau_fraction=args.tau_fraction, tau_grid=args.tau_grid,
                      tau0=args.tau0, delta0=args.delta0, c_ps=args.c_ps,
                      seed=args.seed, n_samples=args.samples,
                      growth_cap=args.growth_cap, ds_mode=args.ds_mode)
    report = carleman_sweep(cfg, jobs=args.jobs)
    report.config.update(_manifest(args, "carleman-sweep"))
    return _finish(report, args)


def cmd_log_convexity(args) -> int:
    _checked_weight(args)
    h = args.h
    spec = LatticeSpec.ball_box(args.d, h, 4.0, pad_sites=2)
    u, res = _harmonic_input(spec, args.input)
    taus = args.tau_grid
    if not taus:
        lo, hi = args.tau0 * 1.01, args.delta0 / h * 0.99
        taus = tuple(np.geomspace(lo, hi, 12)) if hi > lo else (lo,)
    report = log_convexity_scan(u, taus, c_ps=args.c_ps,
                                tau0=args.tau0, delta0=args.delta0)
    report.config.update(_manifest(args, "log-convexity"))
    report.config["input_residual"] = res
    return _finish(report, args)


def cmd_three_balls(args) -> int:
    _checked_weight(args)
    solutions = []
    residuals = []
    for h in args.h:
        spec = LatticeSpec.ball_box(args.d, h, 4.0, pad_sites=2)
        u, res = _harmonic_input(spec, args.input)
        solutions.append(u)
        residuals.append(res)
    report = three_balls_experiment(solutions, c_ps=args.c_ps,
                                    bound_constant=args.bound_constant)
    report.config.update(_manifest(args, "three-balls"))
    report.config["input_residuals"] = residuals
    return _finish(report, args)


def cmd_symbol_scan(args) -> int:
    _checked_weight(args)
    x_bar = args.x_bar or ((1.0,) + (0.0,) * (args.d - 1))
    if len(x_bar) != args.d:
        raise ConfigError("x-bar must have d components")
    tau = args.tau
    fp = FrozenPoint.from_weight(x_bar, WeightParams(tau, args.c_ps), args.h)
    report = ExperimentReport("symbol_scan", {
        **_manifest(args, "symbol-scan"), "x_bar": list(x_bar),
    })
    scans = []
    for res in args.resolution:
        scan = lower_bound_margin(fp, args.c0, SymbolGrid(args.d, args.h, res),
                                  gamma0=args.gamma0)
        scans.append(scan)
        row = {"resolution": res, "min_margin": scan.min_margin,
               "c1_split": scan.c1_split}
        for key, stat in scan.regions.items():
            row[f"min_{key}"] = stat.min_margin
            row[f"count_{key}"] = stat.count
        report.add_row(**row)
    report.fit("min_margin", FittedConstant(scans[-1].min_margin, n=len(scans)))
    if len(scans) >= 2:
        a, b = scans[-2].min_margin, scans[-1].min_margin
        agree = abs(a - b) / max(abs(a), abs(b), 1e-300) <= 0.05
        report.fit("refinement_agreement",
                   FittedConstant(abs(a - b) / max(abs(a), abs(b), 1e-300), n=2))
        report.passed = bool(agree and scans[-1].min_margin > 0)
    extra = []
    if args.grid_csv:
        table = scan_table(fp, SymbolGrid(args.d, args.h, args.resolution[0]), args.c0)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"symbol_scan_{report.config_hash}_grid.csv"
        with open(path, "w") as fh:
            fh.write(",".join(f"xi_{a+1}" for a in range(args.d))
                     + ",p_r,p_i,q,margin\n")
            cols = [table["xi"][a] for a in range(args.d)]
            cols += [table["p_r"], table["p_i"], table["q"], table["margin"]]
            for row in zip(*cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        extra.append(path)
    return _finish(report, args, extra)


def cmd_commutator_check(args) -> int:
    _checked_weight(args)
    h, tau = args.h, args.tau
    spec = LatticeSpec.ball_box(args.d, h, 2.0, pad_sites=4)
    ctx = ConjugationContext.from_weight(spec, WeightParams(tau, args.c_ps))
    annulus = AnnularRegion.origin(args.d, 0.5, 2.0)
    report = ExperimentReport("commutator_check", _manifest(args, "commutator-check"))
    worst = {"split": 0.0, "energy": 0.0, "two_path": 0.0}
    for s in range(args.samples):
        f = random_bump(spec, annulus, seed=args.seed * 7919 + s)
        sf, af, lf = sym_apply(f, ctx), antisym_apply(f, ctx), conjugate_apply(f, ctx)
        split = float(np.abs(sf.values + af.values - lf.values).max()
                      / max(np.abs(lf.values).max(), 1e-300))
        comm = commutator_form(f, ctx, "expansion")
        comp = commutator_form(f, ctx, "composition")
        two_path = abs(comm - comp) / max(abs(comm), abs(comp), 1e-300)
        lhs = inner_product(lf, lf)
        rhs = l2_norm(sf) ** 2 + l2_norm(af) ** 2 + comm
        energy = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
        report.add_row(seed=s, split_rel=split, energy_rel=energy,
                       two_path_rel=two_path)
        worst = {"split": max(worst["split"], split),
                 "energy": max(worst["energy"], energy),
                 "two_path": max(worst["two_path"], two_path)}
    rng = np.random.default_rng(args.seed)
    coeff_worst = 0.0
    sites = 0
    while sites < args.coeff_sites:
        n = rng.integers(np.add(spec.lo, 2), np.add(spec.hi, -1))
        if not 0.45 < np.linalg.norm(np.asarray(n) * h) < 2.1:
            continue
        j, k = (int(v) for v in rng.integers(1, args.d + 1, size=2))
        c = commutator_coeffs(n, j, k, ctx)
        err = float(np.max(np.abs(c.raw - c.simplified)))
        scale = max(float(np.max(np.abs(c.simplified))), 1e-3)
        coeff_worst = max(coeff_worst, err / scale)
        sites += 1
    for key, val in worst.items():
        report.fit(f"max_{key}_rel", FittedConstant(val, n=args.samples))
    report.fit("max_coeff_rel", FittedConstant(coeff_worst, n=sites))
    report.passed = bool(max(worst.values()) <= args.tol and coeff_worst <= 1e-11)
    return _finish(report, args)


def cmd_caccioppoli(args) -> int:
    report = caccioppoli_sweep(args.input, args.d, args.h, args.r1, args.r2)
    report.config.update(_manifest(args, "caccioppoli"))
    return _finish(report, args)


def cmd_coarsen_check(args) -> int:
    spec = LatticeSpec.ball_box(args.d, args.h, 4.0, pad_sites=2)
    u, res = _harmonic_input(spec, args.input)
    radius = 4.0 if args.input == "solve" else None
    report = coarsen_check(u, factors=args.m, tol=args.tol, radius=radius)
    report.config.update(_manifest(args, "coarsen-check"))
    report.config["input_residual"] = res
    return _finish(report, args)


def cmd_localize(args) -> int:
    _checked_weight(args)
    spec = LatticeSpec.ball_box(args.d, args.h, 2.0, pad_sites=4)
    ctx = ConjugationContext.from_weight(spec, WeightParams(args.tau, args.c_ps))
    f = random_bump(spec, AnnularRegion.origin(args.d, 0.5, 2.0), seed=args.seed)
    report = localization_diagnostic(f, ctx, args.eps0)
    report.config.update(_manifest(args, "localize"))
    return _finish(report, args)


def cmd_singular_potential(args) -> int:
    _checked_weight(args)
    cfg = SweepConfig(d=args.d, h_grid=args.h, tau_rule="fraction",
                      tau_fraction=args.tau_fraction, tau0=args.tau0,
                      delta0=args.delta0, c_ps=args.c_ps, seed=args.seed)
    report = singular_potential_experiment(args.mu0, cfg, solve_tol=args.solve_tol)
    report.config.update(_manifest(args, "singular-potential"))
    return _finish(report, args)


_HANDLERS = {
    "carleman-sweep": cmd_carleman_sweep,
    "log-convexity": cmd_log_convexity,
    "three-balls": cmd_three_balls,
    "symbol-scan": cmd_symbol_scan,
    "commutator-check": cmd_commutator_check,
    "caccioppoli": cmd_caccioppoli,
    "coarsen-check": cmd_coarsen_check,
    "localize": cmd_localize,
    "singular-potential": cmd_singular_potential,
}


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    sub = args.subcommand
    try:
        if args.config:
            # config values become subcommand defaults; explicit flags win
            defaults = load_config(args.config, sub)
            subparsers[sub].set_defaults(**defaults)
            args = parser.parse_args(argv)
        return _HANDLERS[sub](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, AssertionError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
