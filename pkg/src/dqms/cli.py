"""Command-line interface: ``dqms analyze | bounds | verify | convergence``.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 certification
failure.
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import capacities, protocols, spectral, structure, zoo
from .channels import from_json
from .exceptions import (
    ChannelValidationError,
    DimensionError,
    EigenConvergenceError,
    SolverError,
    StructureError,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_CERT = 0, 2, 3, 4
CSV_COLUMNS = ("n", "epsilon", "kind", "lower", "upper", "delta_used", "delta_source")


class InputError(Exception):
    pass


def parse_n_range(text):
    """``"A..B"`` (inclusive) or a comma-separated list of positive integers."""
    try:
        if ".." in text:
            a, b = text.split("..")
            ns = list(range(int(a), int(b) + 1))
        else:
            ns = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InputError(f"bad n range {text!r}") from exc
    if not ns or min(ns) < 1:
        raise InputError(f"n range {text!r} must contain positive integers")
    return ns


def parse_epsilons(text):
    try:
        eps = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InputError(f"bad epsilon list {text!r}") from exc
    if not eps or any(not 0 <= e < 1 for e in eps):
        raise InputError("epsilon values must lie in [0, 1)")
    return eps


def parse_iid(text):
    if text is None:
        return 1
    key, _, val = text.partition("=")
    if key.strip() != "m" or not val.strip().isdigit() or int(val) < 1:
        raise InputError(f"--iid expects m=INT, got {text!r}")
    return int(val)


def load_channel(args):
    if args.zoo and args.channel:
        raise InputError("give either --zoo or a channel file, not both")
    if args.zoo:
        try:
            return zoo.make(args.zoo, dim=args.dim, gamma=args.gamma, seed=args.seed)
        except DimensionError as exc:
            raise InputError(str(exc)) from exc
    if not args.channel:
        raise InputError("no channel given (use --zoo NAME or a JSON file)")
    try:
        with open(args.channel, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {args.channel}: {exc}") from exc
    try:
        return from_json(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc}") from exc


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _complex_list(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _pipeline(phi, seed):
    asym = spectral.asymptotic_part(phi)
    decomp = structure.block_decompose(asym, seed=seed)
    action = structure.recover_action(phi, decomp)
    mu = spectral.spectral_gap_mu(phi, asym)
    return asym, decomp, action, mu


def cmd_analyze(args, out):
    phi = load_channel(args)
    asym, decomp, action, mu = _pipeline(phi, args.seed)
    rep = asym.report
    doc = {
        "schema": 1,
        "dim": phi.dim_in,
        "dim_h0": decomp.dim_h0,
        "K": len(decomp.blocks),
        "d": decomp.ds,
        "m": decomp.ms,
        "delta": [_complex_list(b.delta) for b in decomp.blocks],
        "u": [_complex_list(u) for u in action.unitaries],
        "pi": action.pi,
        "pi_cycle_type": list(decomp.cycle_type),
        "pi_non_unique": action.non_unique,
        "mu": mu,
        "peripheral_eigenvalues": [[float(z.real), float(z.imag)] for z in rep.peripheral_values],
        "ambiguous_eigenvalues": [[float(z.real), float(z.imag)] for z in rep.ambiguous],
        "projector_method": asym.method,
        "action_residual": action.residual,
    }
    if args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("k", "d", "m", "pi", "delta_diagonal"))
        for k, b in enumerate(decomp.blocks):
            w.writerow((k, b.d, b.m, action.pi[k], " ".join(_fmt(float(x)) for x in np.diag(b.delta).real)))
    else:
        out.write(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def _kappa_fit(phi, asym, mu, ns=range(1, 13)):
    return spectral.fit_kappa(phi, asym, ns, mu=mu)


def cmd_bounds(args, out):
    phi = load_channel(args)
    asym, decomp, _, mu = _pipeline(phi, args.seed)
    ns = parse_n_range(args.n_range or "1..20")
    eps = parse_epsilons(args.epsilon or "0,0.05,0.1")
    if args.delta is not None:
        if args.delta < 0:
            raise InputError("--delta must be nonnegative")
        reports = capacities.bounds_table(decomp, ns, eps, lambda n: args.delta)
    else:
        need_env = args.delta_source == "envelope" or (
            args.delta_source is None and max(ns) > capacities.SDP_MAX_N
        )
        fit = _kappa_fit(phi, asym, mu) if need_env else None
        delta_of_n, source_of_n = capacities.delta_function(phi, asym, fit, args.delta_source)
        reports = capacities.bounds_table(decomp, ns, eps, delta_of_n, source_of_n)
    rows = [r for rep in reports for r in rep.rows()]
    if args.format == "json":
        doc = {"schema": 1, "columns": list(CSV_COLUMNS), "rows": [list(r) for r in rows]}
        out.write(json.dumps(doc, indent=2, default=lambda x: None) + "\n")
    else:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return EXIT_OK


def cmd_verify(args, out):
    phi = load_channel(args)
    asym, decomp, _, _ = _pipeline(phi, args.seed)
    ns = parse_n_range(args.n_range or "1,5,25")
    reports = protocols.verify_all(phi, decomp, asym, ns=ns, sabotage=args.sabotage_decoder)
    failed = [r for r in reports if not r.passed]
    if args.bundle:
        doc = protocols.protocol_bundle(phi, decomp, asym, max(ns))
        try:
            with open(args.bundle, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(doc, fh)
        except OSError as exc:
            raise InputError(f"cannot write {args.bundle}: {exc}") from exc
    if args.format == "json":
        doc = {
            "schema": 1,
            "passed": not failed,
            "reports": [
                {
                    "family": r.family,
                    "n": r.n,
                    "rate": r.rate,
                    "error": r.error,
                    "env_fidelity": r.env_fidelity,
                    "passed": r.passed,
                }
                for r in reports
            ],
        }
        out.write(json.dumps(doc, indent=2) + "\n")
    else:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("family", "n", "rate", "error", "env_fidelity", "passed"))
        for r in reports:
            w.writerow((r.family, r.n, _fmt(r.rate), _fmt(r.error), _fmt(r.env_fidelity), r.passed))
    if failed:
        for r in failed:
            print(f"FAILED {r.family} n={r.n} error={r.error:.3e}", file=sys.stderr)
        return EXIT_CERT
    return EXIT_OK


def cmd_convergence(args, out):
    phi = load_channel(args)
    asym, _, _, mu = _pipeline(phi, args.seed)
    if mu >= 1:
        raise InputError("no spectral gap: mu >= 1")
    ns = parse_n_range(args.n_range or "1..12")
    m = parse_iid(args.iid)
    fit = _kappa_fit(phi, asym, mu, ns)
    env = fit.envelope(fit.ns, copies=m)
    rows = []
    for n, dn, e in zip(fit.ns, fit.deltas, env):
        ratio = dn / e if e > 0 else (0.0 if dn == 0 else math.inf)
        rows.append((int(n), float(dn), float(e), float(ratio)))
    summary = {
        "kappa": fit.kappa,
        "mu": fit.mu,
        "slope": None if math.isnan(fit.slope) else fit.slope,
        "slope_target": math.log(mu) if mu > 0 else None,
        "slope_ok": fit.slope_ok,
        "exact_convergence": fit.exact,
        "copies": m,
    }
    if args.format == "json":
        doc = {"schema": 1, "columns": ["n", "delta_n", "envelope", "ratio"], "rows": rows, **summary}
        out.write(json.dumps(doc, indent=2) + "\n")
    else:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("n", "delta_n", "envelope", "ratio"))
        for r in rows:
            w.writerow([_fmt(x) for x in r])
        for k, v in summary.items():
            out.write(f"# {k}={_fmt(v)}\n")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="dqms", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    commands = {
        "analyze": cmd_analyze,
        "bounds": cmd_bounds,
        "verify": cmd_verify,
        "convergence": cmd_convergence,
    }
    for name, fn in commands.items():
        s = sub.add_parser(name)
        s.set_defaults(func=fn)
        s.add_argument("channel", nargs="?", help="channel JSON file")
        s.add_argument("--zoo", help="named channel, e.g. ad-0.75 or shift-dephase-3")
        s.add_argument("--dim", type=int)
        s.add_argument("--gamma", type=float)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", help="output path (default stdout)")
        s.add_argument("--format", choices=("csv", "json"), default="json" if name == "analyze" else "csv")
        s.add_argument("--n-range")
        if name == "bounds":
            s.add_argument("--epsilon", help="comma-separated list in [0, 1)")
            s.add_argument("--delta-source", choices=("sdp", "envelope"))
            s.add_argument("--delta", type=float, help="fixed delta for every n")
        if name == "verify":
            s.add_argument("--sabotage-decoder", action="store_true")
            s.add_argument("--bundle", help="write the codes at the largest n as JSON")
        if name == "convergence":
            s.add_argument("--iid", help="m=INT copies; scales the envelope by m")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    buf = io.StringIO()
    try:
        code = args.func(args, buf)
    except (InputError, DimensionError, ChannelValidationError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, EigenConvergenceError, StructureError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
