"""Command line entry point: simulate, analytic and sweep.

Exit codes: 0 on success, 2 for parse, validation or domain errors, 3 when a
simulation fails at run time or its output cannot be written.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from . import csvio
from .analysis import reno_fast_share_bound, reno_vegas_share_band, reverse_decay_curve
from .engine import run
from .errors import DcaError, ParseError, ValidationError
from .model import ScenarioSpec
from .remedies import pause_feasibility_bound
from .scenario_file import build_spec, override, parse_scenario, read_sections, spec_hash
from .svg import line_chart

log = logging.getLogger("dcasim")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3

DEFAULT_RHO_GRID = tuple(i / 20 for i in range(19))  # 0 .. 0.9


class AnalyticKind(Enum):
    FIG1 = "fig1"
    BOUND14 = "bound14"
    EQ15 = "eq15"


@dataclass
class RunManifest:
    scenario: Optional[str]
    out_dir: str
    files: list = field(default_factory=list)
    spec_hash: Optional[str] = None
    seed: Optional[int] = None

    def write(self) -> Path:
        path = Path(self.out_dir) / "manifest.json"
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def _emit(manifest: RunManifest, name: str, text: str) -> None:
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    manifest.files.append(name)


# --- subcommands ---------------------------------------------------------

def cmd_simulate(spec: ScenarioSpec, out_dir, scenario: Optional[str] = None, svg: bool = False) -> RunManifest:
    result = run(spec)
    m = RunManifest(str(scenario) if scenario else None, str(out_dir), spec_hash=spec_hash(spec), seed=spec.seed)
    _emit(m, "trace.csv", csvio.trace_csv(result.trace, spec))
    if result.report is not None:
        _emit(m, "report.csv", csvio.report_csv(result.report))
    else:
        log.warning("no samples in the measurement window, report.csv skipped")
    if svg:
        series = {f"flow {f.id}": [(r.t, r.flows[i].x) for r in result.trace] for i, f in enumerate(spec.flows)}
        _emit(m, "plot.svg", line_chart(series, "t (s)", "rate (pkt/s)", "per-flow sending rate"))
    m.write()
    return m


def analytic_rows(kind: AnalyticKind, params: dict) -> tuple:
    """Columns and rows of one closed-form curve family."""
    if kind is AnalyticKind.FIG1:
        alpha, q_f = params["alpha"], params["q_f"]
        rows = []
        for k in params["k"]:
            rows += [(k, rho, x) for rho, x in reverse_decay_curve(alpha, q_f, k, params.get("rho", DEFAULT_RHO_GRID))]
        return ("k", "rho", "x_star"), rows
    if kind is AnalyticKind.BOUND14:
        return ("n", "d_min"), [(n, pause_feasibility_bound(n, params["alpha"], params["capacity"])) for n in params["n"]]
    k = params["k"]
    k_hi = params.get("k_hi")
    if k_hi is None:
        return ("B", "ratio"), [(B, reno_fast_share_bound(B, k)) for B in params["buffer"]]
    return ("B", "ratio", "ratio_hi_k"), [(B, *reno_vegas_share_band(B, k, k_hi)) for B in params["buffer"]]


def cmd_analytic(kind: AnalyticKind, params: dict, out_dir, svg: bool = False) -> RunManifest:
    cols, rows = analytic_rows(kind, params)
    m = RunManifest(None, str(out_dir))
    _emit(m, "curves.csv", csvio.curves_csv(cols, rows))
    if svg:
        series: dict = {}
        if kind is AnalyticKind.FIG1:
            for k, rho, x in rows:
                series.setdefault(f"k={k:g}", []).append((rho, x))
        else:
            for i, name in enumerate(cols[1:], start=1):
                series[name] = [(r[0], r[i]) for r in rows]
        _emit(m, "plot.svg", line_chart(series, cols[0], cols[1], kind.value))
    m.write()
    return m


def _sweep_point(sections: list, axis: str, raw: str) -> tuple:
    try:
        spec = build_spec(override(sections, axis, raw))
    except (ParseError, ValidationError) as exc:
        return None, exc.code
    try:
        res = run(spec)
    except DcaError as exc:
        return None, exc.code
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        return None, type(exc).__name__
    return res.report, "" if res.report is not None else "EMPTY_WINDOW"


def cmd_sweep(
    text: str,
    axis: str,
    values: Sequence[str],
    out_dir,
    scenario: Optional[str] = None,
    jobs: int = 1,
    svg: bool = False,
) -> RunManifest:
    sections = read_sections(text)
    template = build_spec(sections)
    override(sections, axis, values[0])  # fail fast on a bad axis name
    try:
        order = sorted(values, key=float)
    except ValueError:
        raise ParseError(None, f"sweep values must be numeric, got {list(values)}") from None
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_sweep_point, [sections] * len(order), [axis] * len(order), order))
    else:
        outs = [_sweep_point(sections, axis, v) for v in order]
    results = [(float(v), rep, err) for v, (rep, err) in zip(order, outs)]
    for v, _, err in results:
        if err:
            log.warning("%s=%g failed: %s", axis, v, err)

    m = RunManifest(str(scenario) if scenario else None, str(out_dir), spec_hash=spec_hash(template), seed=template.seed)
    _emit(m, "report.csv", csvio.sweep_csv(axis, results))
    if svg:
        series = {
            "last_to_first": [(v, r.last_to_first_ratio) for v, r, _ in results if r is not None],
            "jain": [(v, r.jain_index) for v, r, _ in results if r is not None],
        }
        if any(r is not None and r.reno_to_fast_ratio is not None for _, r, _ in results):
            series["reno_to_fast"] = [(v, r.reno_to_fast_ratio) for v, r, _ in results if r is not None]
        _emit(m, "plot.svg", line_chart(series, axis, "ratio", "sweep"))
    m.write()
    return m


# --- argument handling ---------------------------------------------------

def _floats(raw: str) -> list:
    try:
        return [float(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {raw!r}") from None


def _ints(raw: str) -> list:
    vals = _floats(raw)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {raw!r}")
    return [int(v) for v in vals]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcasim", description="Fluid simulator for delay-based congestion avoidance.")
    p.add_argument("-v", "--verbose", action="store_true", help="log remedy events")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario file")
    s.add_argument("scenario", type=Path)
    s.add_argument("-o", "--out", type=Path, required=True)
    s.add_argument("--seed", type=int, default=None, help="override the file's seed")
    s.add_argument("--svg", action="store_true", help="also write plot.svg")

    a = sub.add_parser("analytic", help="emit closed-form curves")
    a.add_argument("kind", choices=[k.value for k in AnalyticKind])
    a.add_argument("-o", "--out", type=Path, required=True)
    a.add_argument("--alpha", type=float, default=200.0)
    a.add_argument("--q-f", type=float, default=0.05, help="forward queuing delay (fig1)")
    a.add_argument("--k", type=_floats, default=[0.0, 1.0, 10.0], help="d/q_f ratios (fig1) or DCA backlog (eq15)")
    a.add_argument("--rho", type=_floats, default=list(DEFAULT_RHO_GRID))
    a.add_argument("--n", type=_ints, default=[1, 2, 4, 8, 16])
    a.add_argument("--capacity", type=float, default=10000.0)
    a.add_argument("--buffer", type=_floats, default=None, help="buffer sizes (eq15)")
    a.add_argument("--k-hi", type=float, default=None, help="upper backlog of a Vegas band (eq15)")
    a.add_argument("--svg", action="store_true")

    w = sub.add_parser("sweep", help="run a scenario once per axis value")
    w.add_argument("scenario", type=Path)
    w.add_argument("--axis", required=True, help="section.key, e.g. fwd_link.buffer")
    w.add_argument("--values", required=True, help="comma separated values")
    w.add_argument("-o", "--out", type=Path, required=True)
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--svg", action="store_true")
    return p


def _analytic_params(args) -> dict:
    kind = AnalyticKind(args.kind)
    if kind is AnalyticKind.FIG1:
        return {"alpha": args.alpha, "q_f": args.q_f, "k": args.k, "rho": args.rho}
    if kind is AnalyticKind.BOUND14:
        return {"alpha": args.alpha, "capacity": args.capacity, "n": args.n}
    if len(args.k) != 1:
        raise ValueError("eq15 takes a single --k")
    k = args.k[0]
    buffers = args.buffer if args.buffer is not None else [3 * k, 5 * k, 9 * k]
    return {"k": k, "k_hi": args.k_hi, "buffer": buffers}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "analytic":
            m = cmd_analytic(AnalyticKind(args.kind), _analytic_params(args), args.out, args.svg)
        else:
            text = args.scenario.read_text()
            if args.command == "simulate":
                spec = parse_scenario(text)
                if args.seed is not None:
                    spec = dataclasses.replace(spec, seed=args.seed)
                m = cmd_simulate(spec, args.out, args.scenario, args.svg)
            else:
                m = cmd_sweep(text, args.axis, args.values.split(","), args.out, args.scenario, args.jobs, args.svg)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DcaError as exc:
        if isinstance(exc, ValueError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, RuntimeError, ArithmeticError) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print("\n".join(str(Path(m.out_dir) / f) for f in m.files))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
