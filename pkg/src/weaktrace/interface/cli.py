"""``weaktrace`` command line.

Exit status: 0 on success, 2 on bad input, 3 when the requested
postselection is orthogonal to the preparation.
"""

from __future__ import annotations

import argparse
import ast
import sys
from pathlib import Path

import numpy as np

from weaktrace import __version__
from weaktrace.circuit import BasisMismatchError, LayerIndexError, NonUnitaryError, UnknownDetectorError
from weaktrace.ensemble import EnsembleConfig, run as run_ensemble
from weaktrace.fringe import NotNestedError, default_theta_grid, dv_inequality_sweep
from weaktrace.hilbert import projector
from weaktrace.interface.dsl import DSLError, document_to_scenario, format_scenario, parse_scenario, \
    scenario_to_document
from weaktrace.interface.serialize import ResultEnvelope, UnsupportedFormatError, emit
from weaktrace.pointer import NoClickError, pointer_sweep
from weaktrace.scenarios import Scenario, UnknownScenarioError, build_scenario, scenario_names
from weaktrace.weakvalue import (
    OrthogonalPostselection,
    UnknownSegmentError,
    compound_weak_value,
    segment_trace_map,
    two_state_at_cut,
)

EXIT_OK, EXIT_INPUT, EXIT_ORTHOGONAL = 0, 2, 3

INPUT_ERRORS = (DSLError, UnknownScenarioError, UnknownDetectorError, UnknownSegmentError, BasisMismatchError,
                LayerIndexError, NonUnitaryError, NotNestedError, UnsupportedFormatError, OSError, ValueError,
                KeyError)


class InputError(ValueError):
    pass


def _param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, ast.literal_eval(v)
    except (ValueError, SyntaxError):
        return k, v


def load_scenario(ref: str, params: dict | None = None) -> Scenario:
    """A ``.wv`` file path, or a built-in name (optionally with builder parameters)."""
    path = Path(ref)
    if path.suffix == ".wv" or path.exists():
        if params:
            raise InputError("--param applies only to built-in scenarios")
        return document_to_scenario(parse_scenario(path.read_text(encoding="utf-8")))
    return build_scenario(ref, **(params or {}))


def _segment_projector(sc: Scenario, name: str):
    try:
        seg = sc.circuit.segments[name]
    except KeyError:
        raise UnknownSegmentError(f"unknown segment {name!r}; known: {sorted(sc.circuit.segments)}") from None
    return seg, projector(seg.modes, sc.basis)


def _need(value, flag: str):
    if value is None:
        raise InputError(f"{flag} is required")
    return value


def _envelope(args, sc: Scenario, analysis: str, payload, seed=None, notes=()) -> ResultEnvelope:
    return ResultEnvelope(__version__, sc.name, analysis, payload, seed, tuple(notes))


def cmd_weakvalue(args, sc: Scenario):
    det = _need(args.detector, "--detector")
    if args.modes:
        region, cut = args.modes.split(","), args.cut
    else:
        names = _need(args.segments, "--segments or --modes").split(",")
        segs = [_segment_projector(sc, n)[0] for n in names]
        cuts = {s.cut for s in segs}
        if len(cuts) != 1:
            raise InputError(f"segments {names} lie on different cuts {sorted(cuts)}")
        region, cut = [m for s in segs for m in s.modes], cuts.pop()
        if args.cut is not None and args.cut != cut:
            raise InputError(f"--cut {args.cut} disagrees with the segments' cut {cut}")
    if args.property is None:
        wv = two_state_at_cut(sc, det, cut).weak_value(projector(region, sc.basis))
    else:
        wv = compound_weak_value(args.property, region, sc, det, cut)
    payload = {
        "value": wv.value, "numerator": wv.numerator, "denominator": wv.denominator,
        "postselection_probability": wv.postselection_probability,
    }
    return _envelope(args, sc, "weakvalue", payload,
                     notes=[f"detector={det}", f"region={','.join(region)}",
                            f"cut={sc.default_cut if cut is None else cut}",
                            f"property={args.property or 'identity'}"])


def cmd_trace_map(args, sc: Scenario):
    det = _need(args.detector, "--detector")
    tm = segment_trace_map(sc, det)
    rows = [{"segment": t.name, "cut": t.cut, "weak_value": t.weak_value, "conditional": t.conditional,
             "sign": t.sign} for t in tm.traces.values()]
    return _envelope(args, sc, "trace-map", {"rows": rows}, notes=[f"detector={det}"])


def _lambda_grid(args) -> list[float]:
    if args.lam is not None:
        return [float(x) for x in args.lam.split(",")]
    return list(np.logspace(np.log10(args.lambda_min), np.log10(args.lambda_max), args.points))


def cmd_pointer_sweep(args, sc: Scenario):
    det = _need(args.detector, "--detector")
    seg, op = _segment_projector(sc, _need(args.segment, "--segment"))
    tsv = two_state_at_cut(sc, det, seg.cut)
    lams = [lam * args.sigma for lam in _lambda_grid(args)]
    rows = pointer_sweep(tsv.forward, tsv.backward, op, lams, args.sigma)
    return _envelope(args, sc, "pointer-sweep", {"rows": rows},
                     notes=[f"detector={det}", f"segment={args.segment}", f"sigma={args.sigma!r}"])


def cmd_ensemble(args, sc: Scenario):
    det = _need(args.detector, "--detector")
    seg, op = _segment_projector(sc, _need(args.segment, "--segment"))
    lam = float(_need(args.lam, "--lambda"))
    cfg = EnsembleConfig(sc, op, lam, args.n, args.seed, args.sigma, det, seg.cut)
    res = run_ensemble(cfg)
    notes = [f"detector={det}", f"segment={args.segment}", f"lambda={lam!r}", f"sigma={args.sigma!r}",
             "rng=numpy PCG64"]
    if args.histogram:
        if res.empty:
            raise InputError("no particle passed the postselection; nothing to histogram")
        counts, edges = res.histogram(args.bins)
        rows = [{"bin_lo": float(lo), "bin_hi": float(hi), "count": int(c)}
                for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
        return _envelope(args, sc, "ensemble-histogram", {"rows": rows}, seed=args.seed, notes=notes)
    payload = {
        "n_particles": res.n_particles, "n_postselected": res.n_postselected, "estimate": res.estimate,
        "stderr": res.stderr, "target": res.target, "success_probability": res.success_probability,
    }
    return _envelope(args, sc, "ensemble", payload, seed=args.seed, notes=notes)


def cmd_fringe_sweep(args, sc: Scenario):
    reports = dv_inequality_sweep(default_theta_grid(args.points), sc)
    rows = [{"theta_b": r.theta_b, "theta_c": r.theta_c, "D": r.distinguishability, "V": r.visibility,
             "leak": r.leak_probability, "dv_sum": r.dv_sum} for r in reports]
    return _envelope(args, sc, "fringe-sweep", {"rows": rows})


COMMANDS = {
    "weakvalue": cmd_weakvalue,
    "trace-map": cmd_trace_map,
    "pointer-sweep": cmd_pointer_sweep,
    "ensemble": cmd_ensemble,
    "fringe-sweep": cmd_fringe_sweep,
}


def _common(p: argparse.ArgumentParser, scenario_default: str | None = None) -> None:
    p.add_argument("--scenario", default=scenario_default, required=scenario_default is None,
                   help="built-in scenario name or path to a .wv file")
    p.add_argument("--param", type=_param, action="append", default=[],
                   help="builder parameter key=value for built-in scenarios")
    p.add_argument("--detector")
    p.add_argument("--lambda", dest="lam", help="coupling strength (pointer-sweep: comma list, in units of sigma)")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--plot", help="also render a figure to this path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weaktrace", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weakvalue", help="weak value of a segment projector, optionally times a property")
    _common(p)
    p.add_argument("--segments", help="comma-separated segment names (same cut)")
    p.add_argument("--modes", help="comma-separated mode references, read at --cut")
    p.add_argument("--cut", type=int)
    p.add_argument("--property", choices=("sx", "sy", "sz"))

    p = sub.add_parser("trace-map", help="weak value of every segment projector")
    _common(p)

    p = sub.add_parser("pointer-sweep", help="exact vs first-order pointer shift over a lambda grid")
    _common(p)
    p.add_argument("--segment")
    p.add_argument("--lambda-min", type=float, default=1e-4)
    p.add_argument("--lambda-max", type=float, default=1e-2)
    p.add_argument("--points", type=int, default=10)

    p = sub.add_parser("ensemble", help="Monte Carlo of weak measurement with postselection")
    _common(p)
    p.add_argument("--segment")
    p.add_argument("--histogram", action="store_true", help="emit readout histogram rows")
    p.add_argument("--bins", type=int, default=60)

    p = sub.add_parser("fringe-sweep", help="distinguishability, visibility and leak over a tag-angle grid")
    _common(p, scenario_default="nested")
    p.add_argument("--points", type=int, default=50)

    p = sub.add_parser("scenario", help="list or show scenarios")
    ssub = p.add_subparsers(dest="action", required=True)
    sp = ssub.add_parser("list")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--out")
    sp = ssub.add_parser("show", help="print a scenario in the description language")
    sp.add_argument("name")
    sp.add_argument("--param", type=_param, action="append", default=[])
    sp.add_argument("--out")
    return ap


def _write(data: bytes, out: str | None) -> None:
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _dispatch(args) -> None:
    if args.command == "scenario":
        if args.action == "list":
            rows = [{"name": n, "description": build_scenario(n).description} for n in scenario_names()]
            env = ResultEnvelope(__version__, "", "scenario-list", {"rows": rows})
            _write(emit(env, args.format), args.out)
        else:
            sc = load_scenario(args.name, dict(args.param))
            _write(format_scenario(scenario_to_document(sc)).encode("utf-8"), args.out)
        return
    sc = load_scenario(args.scenario, dict(args.param))
    env = COMMANDS[args.command](args, sc)
    data = emit(env, args.format)
    if args.plot:
        from weaktrace.interface.plotting import PLOTTERS

        if env.analysis not in PLOTTERS:
            raise InputError(f"no figure for {env.analysis}")
        PLOTTERS[env.analysis](env.payload["rows"], args.plot)
    _write(data, args.out)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except (OrthogonalPostselection, NoClickError) as exc:
        print(f"weaktrace: orthogonal postselection: {exc}", file=sys.stderr)
        return EXIT_ORTHOGONAL
    except INPUT_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"weaktrace: error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
