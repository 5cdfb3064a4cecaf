"""Command-line front end: ``dualtune <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bounds as B
from .config import PROFILES, default_tolerances
from .errors import DegenerateError, DualtuneError, InputError, SolveError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _tol(args):
    if getattr(args, "tol_profile", None):
        return PROFILES[args.tol_profile]
    return default_tolerances()


def _outdir(args, names):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    targets = [out / n for n in names]
    clash = [str(t) for t in targets if t.exists()]
    if clash and not args.force:
        raise InputError(f"refusing to overwrite {', '.join(clash)} (use --force)")
    return targets


def _outfile(args, default):
    path = Path(args.out) if args.out else Path(default)
    if path.exists() and not args.force:
        raise InputError(f"refusing to overwrite {path} (use --force)")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _load(path):
    from .landscape import load_landscape

    p = Path(path)
    if not p.exists():
        raise InputError(f"no such file: {p}")
    return load_landscape(p)


def _regularity_probe(l):
    """Stationarity-system checks at points on each boundary, for degeneracy reports."""
    from .envelope import check_regularity

    if l.d != 1 or not l.boundaries:
        return {"regular": None, "points": []}
    sols = []
    for j, h in enumerate(l.boundaries):
        for a in np.linspace(*l.domain.float_alpha(), 5):
            coeffs = [float(c) for c in h.substitute(0, Fraction(a)).univariate_coeffs(1)]
            if len(coeffs) < 2 or not any(coeffs[1:]):
                continue
            for r in np.roots(coeffs[::-1]):
                lo, hi = l.domain.float_w()[0]
                if abs(r.imag) < 1e-9 and lo <= r.real <= hi:
                    sols.append({"alpha": float(a), "w": [float(r.real)], "active": [j]})
    return check_regularity(l, sols) if sols else {"regular": None, "points": []}


def cmd_envelope(args) -> int:
    from .envelope import (
        trace_envelope,
        trace_envelope_numeric,
        write_breakpoints_csv,
        write_envelope_csv,
        write_localmaxima_csv,
    )
    from .oscillation import count_oscillations

    l = _load(args.landscape)
    names = ["envelope.csv", "breakpoints.csv", "localmaxima.csv", "oscillation.json"]
    env, bps, lms, osc = _outdir(args, names)
    tol = _tol(args)
    try:
        if args.method == "numeric":
            prof = trace_envelope_numeric(l, tol, seed=args.seed)
        else:
            prof = trace_envelope(l, tol)
    except (DegenerateError, SolveError) as exc:
        print(f"tracer degeneracy: {exc}", file=sys.stderr)
        print(json.dumps(_regularity_probe(l), indent=2), file=sys.stderr)
        return 2
    write_envelope_csv(prof, env)
    write_breakpoints_csv(prof, bps)
    write_localmaxima_csv(prof, lms)
    rep = count_oscillations(prof)
    rep.to_json(osc)
    print(json.dumps({**prof.summary(), **rep.to_dict()}, indent=2))
    return 0


def cmd_oracle(args) -> int:
    from .envelope import grid_oracle

    l = _load(args.landscape)
    (path,) = _outdir(args, ["oracle.csv"])
    a, v = grid_oracle(l, args.resolution, tol=_tol(args))
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["alpha", "ustar"])
        for x, y in zip(a, v):
            wr.writerow([repr(float(x)), repr(float(y))])
    print(json.dumps({"points": int(a.size), "max": float(np.max(v)), "min": float(np.min(v))}))
    return 0


def _read_samples(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    try:
        col = header.index(args_value_column(header))
        return np.array([float(r[col]) for r in body])
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: cannot read values ({exc})") from None


def args_value_column(header):
    for name in ("ustar", "value", "u"):
        if name in header:
            return name
    return header[-1]


def cmd_oscillation(args) -> int:
    from .oscillation import count_oscillations, pdim_upper

    src = Path(args.input)
    if not src.exists():
        raise InputError(f"no such file: {src}")
    if src.suffix == ".json":
        from .envelope import trace_envelope

        rep = count_oscillations(trace_envelope(_load(src), _tol(args)))
    else:
        rep = count_oscillations(_read_samples(src))
    out = rep.to_dict()
    out["pdim_upper"] = pdim_upper(rep, args.c)
    text = json.dumps(out, indent=2)
    if args.out:
        path = _outfile(args, args.out)
        path.write_text(text + "\n")
    print(text)
    return 0


def cmd_bounds(args) -> int:
    if args.warren:
        deg, n = args.warren
        print(json.dumps({"warren_components": B.warren_components(deg, n), "formula_id": "warren"}))
        return 0
    if args.lemma51 is not None:
        print(json.dumps(B.lemma51_bounds(args.lemma51).to_dict(), indent=2))
        return 0
    if len(args.values) != 4:
        raise InputError("usage: dualtune bounds N M d DELTA | --lemma51 DELTA_P | --warren DEGREE NVARS")
    N, M, d, delta = args.values
    print(json.dumps(B.theorem55_bounds(N, M, d, delta).to_dict(), indent=2))
    return 0


def _family(name):
    from .datadriven import InstanceDistribution
    from .families import Degree3Family

    if name == "synthetic-poly":
        return InstanceDistribution.from_family(Degree3Family(), name)
    if name == "activation":
        from .apps.activation import ActivationFamily

        return InstanceDistribution.from_family(ActivationFamily(), name)
    if name == "gcn":
        from .apps.gcn import GcnFamily

        return InstanceDistribution.from_family(GcnFamily(), name)
    raise InputError(f"unknown family {name!r}; known: synthetic-poly, activation, gcn")


def cmd_tune(args) -> int:
    from .datadriven import gap_curve

    dist = _family(args.family)
    tuning, gap = _outdir(args, ["tuning.json", "gapcurve.csv"])
    curve = gap_curve(dist, args.m, trials=args.trials, seed=args.seed, grid=args.grid)
    doc = {
        "family": args.family,
        "seed": args.seed,
        "m": curve.m,
        "trials": args.trials,
        "alpha_star": curve.alpha_star,
        "heldout_size": curve.heldout_size,
        "heldout_noise": curve.heldout_noise,
        "slope_fit": None if np.isnan(curve.slope) else curve.slope,
        "mean_gap": curve.mean_gap,
        "std_gap": curve.std_gap,
        "reports": [r.to_dict() for r in curve.reports],
    }
    tuning.write_text(json.dumps(doc, indent=2) + "\n")
    with open(gap, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["m", "mean_gap", "std_gap", "slope_fit"])
        for row in curve.rows():
            wr.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
    print(json.dumps({k: doc[k] for k in ("family", "m", "mean_gap", "slope_fit", "alpha_star")}, indent=2))
    return 0


def cmd_shatter(args) -> int:
    from .datadriven import EnvelopeBank, shattering_search
    from .oscillation import count_oscillations, pdim_upper

    dist = _family(args.family)
    insts = dist.draw(args.pool, [args.seed, 3])
    bank = EnvelopeBank(insts)
    alphas = np.linspace(*dist.alpha_range, args.grid)
    U = bank.values(alphas)[bank.valid]
    res = shattering_search(U, args.max_size, budget=args.budget)
    osc = max(count_oscillations(row).oscillations for row in U)
    out = {
        "family": args.family,
        "lower_bound": res.size,
        "exhaustive": res.exhaustive,
        "witness": list(res.witness),
        "max_oscillations": osc,
        "pdim_upper": pdim_upper(osc),
    }
    if not res.exhaustive:
        out["note"] = "search budget exhausted: lower bound only"
    print(json.dumps(out, indent=2))
    return 0


def cmd_gen_activation(args) -> int:
    from .apps.activation import build_activation_landscape, random_activation_spec
    from .landscape import landscape_to_dict

    spec = random_activation_spec(np.random.default_rng(args.seed), args.T, args.o1, args.o2)
    path = _outfile(args, "activation.json")
    doc = {"spec": spec.to_dict(), "landscape": landscape_to_dict(build_activation_landscape(spec))}
    path.write_text(json.dumps(doc, indent=2) + "\n")
    print(str(path))
    return 0


def cmd_gen_gcn(args) -> int:
    from .apps.gcn import random_gcn_instance

    inst = random_gcn_instance(args.seed, n=args.n, Delta=args.Delta, task=args.task)
    path = _outfile(args, "gcn.json")
    path.write_text(inst.to_json() + "\n")
    print(str(path))
    return 0


def cmd_perturb(args) -> int:
    from .landscape import perturb_landscape, save_landscape

    l = _load(args.landscape)
    pl, bound = perturb_landscape(l, args.tau)
    path = _outfile(args, "perturbed.json")
    path.write_text(save_landscape(pl) + "\n")
    print(json.dumps({"out": str(path), "tau": args.tau, "drift_bound": str(bound), "drift_bound_float": float(bound)}))
    return 0


def cmd_surrogate(args) -> int:
    from .landscape import flatness_surrogate, save_landscape

    l = _load(args.landscape)
    path = _outfile(args, "surrogate.json")
    path.write_text(save_landscape(flatness_surrogate(l, args.eta)) + "\n")
    print(str(path))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dualtune", description="Envelopes, oscillation counts and tuning for parameterized dual utilities.")
    p.add_argument("--tol-profile", choices=sorted(PROFILES), help="tolerance profile (default from DUALTUNE_TOL_PROFILE)")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp, out_default=".", seed=False):
        sp.add_argument("--out", default=out_default)
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")
        if seed:
            sp.add_argument("--seed", type=int, required=True)

    sp = sub.add_parser("envelope", help="trace u* and write CSV/JSON artifacts")
    sp.add_argument("landscape")
    sp.add_argument("--method", choices=["auto", "numeric"], default="auto")
    sp.add_argument("--seed", type=int, default=0, help="multistart seed for the numeric tracer")
    common(sp)
    sp.set_defaults(fn=cmd_envelope)

    sp = sub.add_parser("oracle", help="brute-force grid maximum")
    sp.add_argument("landscape")
    sp.add_argument("--resolution", type=int, default=201)
    common(sp)
    sp.set_defaults(fn=cmd_oracle)

    sp = sub.add_parser("oscillation", help="oscillation report for a landscape (.json) or samples (.csv)")
    sp.add_argument("input")
    sp.add_argument("--c", type=float, default=2.0)
    common(sp, out_default=None)
    sp.set_defaults(fn=cmd_oscillation)

    sp = sub.add_parser("bounds", help="closed-form bound figures")
    sp.add_argument("values", nargs="*", type=int, metavar="N M d DELTA")
    sp.add_argument("--lemma51", type=int, metavar="DELTA_P")
    sp.add_argument("--warren", type=int, nargs=2, metavar=("DEGREE", "NVARS"))
    sp.set_defaults(fn=cmd_bounds)

    sp = sub.add_parser("tune", help="ERM gap curve for a registered family")
    sp.add_argument("family")
    sp.add_argument("--m", type=int, nargs="+", default=[4, 16, 64, 256])
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--grid", type=int, default=2001)
    common(sp, seed=True)
    sp.set_defaults(fn=cmd_tune)

    sp = sub.add_parser("shatter", help="empirical pseudo-dimension lower bound")
    sp.add_argument("family")
    sp.add_argument("--pool", type=int, default=12)
    sp.add_argument("--max-size", type=int, default=4)
    sp.add_argument("--grid", type=int, default=201)
    sp.add_argument("--budget", type=int, default=200_000)
    sp.add_argument("--seed", type=int, required=True)
    sp.set_defaults(fn=cmd_shatter)

    sp = sub.add_parser("gen-activation", help="random single-neuron activation instance")
    sp.add_argument("--T", type=int, default=4)
    sp.add_argument("--o1", default="relu")
    sp.add_argument("--o2", default="identity")
    common(sp, out_default=None, seed=True)
    sp.set_defaults(fn=cmd_gen_activation)

    sp = sub.add_parser("gen-gcn", help="random tiny GCN instance")
    sp.add_argument("--n", type=int)
    sp.add_argument("--Delta", type=int)
    sp.add_argument("--task", choices=["classification", "regression"], default="classification")
    common(sp, out_default=None, seed=True)
    sp.set_defaults(fn=cmd_gen_gcn)

    sp = sub.add_parser("perturb", help="add tau*(a + sum w) to every piece")
    sp.add_argument("landscape")
    sp.add_argument("--tau", required=True)
    common(sp, out_default=None)
    sp.set_defaults(fn=cmd_perturb)

    sp = sub.add_parser("surrogate", help="flatness-penalized landscape")
    sp.add_argument("landscape")
    sp.add_argument("--eta", required=True)
    common(sp, out_default=None)
    sp.set_defaults(fn=cmd_surrogate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DualtuneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
