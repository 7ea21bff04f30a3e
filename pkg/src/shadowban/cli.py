"""Command-line entry point: ``shadowban {generate,simulate,sweep,analyze}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import engine, network
from .engine import ConfigError, SimulationConfig, SimulationError, SweepGrid
from .metrics import PartisanSplit, polarity_from_edges
from .objectives import ObjectiveKind

log = logging.getLogger("shadowban")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

REPORT_HEADER = ("day", "ban_rate_low", "ban_rate_high", "banned_users_low", "banned_users_high",
                 "upward_banned", "downward_banned", "neutral_banned",
                 "upward_mass", "downward_mass", "neutral_mass")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _matrix(text: str) -> list[list[float]]:
    return [list(_floats(row)) for row in text.split(";")]


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# -- generate -----------------------------------------------------------------

def _network_paths(args) -> tuple[Path, Path]:
    out = Path(args.out)
    return Path(args.edges or out / "edges.csv"), Path(args.nodes or out / "nodes.csv")


def cmd_generate(args) -> int:
    try:
        if args.kind == "path":
            net, theta = network.generate_path(args.n)
        elif args.kind == "sbm":
            net, theta = network.generate_sbm(args.sizes, args.p, args.opinions, args.seed)
        elif args.kind == "er":
            net = network.generate_er(args.n, args.p, args.seed)
            theta = np.random.default_rng([args.seed, 1]).random(net.vertex_count)
        else:
            net, theta = network.generate_standin(args.n, args.target_edges, args.seed)
    except ValueError as exc:
        raise UsageError(f"generate {args.kind}: {exc}") from None
    edges_path, nodes_path = _network_paths(args)
    edges_path.parent.mkdir(parents=True, exist_ok=True)
    nodes_path.parent.mkdir(parents=True, exist_ok=True)
    network.save_network(net, theta, edges_path, nodes_path)
    print(f"vertices={net.vertex_count} edges={net.edge_count} edges_file={edges_path} nodes_file={nodes_path}")
    return EXIT_OK


# -- config resolution --------------------------------------------------------

_DYNAMICS_FLAGS = ("omega", "epsilon", "dt_max")
_BUDGET_FLAGS = ("s_network", "s_edge")
_TOP_FLAGS = ("horizon_days", "policy_interval_days", "record_interval_days", "objective", "seed",
              "baseline")


def resolve_config(args, skip=()) -> SimulationConfig:
    """Config file values overridden by any flag given on the command line."""
    config = engine.read_config(args.config) if args.config else SimulationConfig()
    top = {k: getattr(args, k) for k in _TOP_FLAGS if k not in skip and getattr(args, k) is not None}
    dyn = {k: getattr(args, k) for k in _DYNAMICS_FLAGS if k not in skip and getattr(args, k) is not None}
    bud = {k: getattr(args, k) for k in _BUDGET_FLAGS if k not in skip and getattr(args, k) is not None}
    try:
        return replace(config, **top, dynamics=replace(config.dynamics, **dyn),
                       budget=replace(config.budget, **bud))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _load(args):
    if args.network_dir:
        base = Path(args.network_dir)
        edges_path, nodes_path = base / "edges.csv", base / "nodes.csv"
    else:
        if not (args.edges and args.nodes):
            raise UsageError("need --edges and --nodes (or --network-dir)")
        edges_path, nodes_path = Path(args.edges), Path(args.nodes)
    return network.load_network(edges_path, nodes_path)


def _summary_line(opinions, mean_ban: float) -> str:
    var = float(np.var(opinions, ddof=1)) if len(opinions) > 1 else 0.0
    return f"terminal_mean={float(np.mean(opinions))!r} terminal_variance={var!r} mean_ban={mean_ban!r}"


def cmd_simulate(args) -> int:
    config = resolve_config(args)
    net, theta = _load(args)
    run_dir = Path(args.out)
    engine.write_config(config, run_dir)
    if net.node_ids is not None:
        network.write_id_map(net, run_dir / "id_map.csv")
    result = engine.run_to_directory(config, net, theta, run_dir,
                                     policy_snapshots=not args.no_policy_snapshots,
                                     split=PartisanSplit(args.threshold),
                                     histogram_bins=args.bins)
    last = result.frames[-1]
    log.info("wrote %d frames to %s", len(result.frames), run_dir)
    print(_summary_line(result.final_opinions, last.mean_ban_strength))
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid_values = {a: getattr(args, a) for a in engine.SWEEP_AXES}
    try:
        grid = SweepGrid(**grid_values)
    except ConfigError as exc:
        raise UsageError(f"{exc}; give at least one of --s-network, --s-edge, --epsilon, --omega") from None
    config = resolve_config(args, skip=engine.SWEEP_AXES)
    net, theta = _load(args)
    out = Path(args.out)
    engine.write_config(config, out)
    (out / "grid.json").write_text(json.dumps({a: list(getattr(grid, a)) for a in grid.axes}, indent=2) + "\n")
    rows = engine.sweep(config, grid, net, theta, workers=args.workers)
    engine.write_sweep(out / "sweep.csv", rows)
    for r in rows:
        point = " ".join(f"{k}={v!r}" for k, v in r.point.items())
        print(f"{point} relative_objective={r.relative_objective!r} status={r.status}")
    return EXIT_OK if all(r.status.startswith("ok") for r in rows) else EXIT_RUNTIME


# -- analyze ------------------------------------------------------------------

def _read_csv(path: Path, header: tuple[str, ...]):
    with open(path, newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if line_no == 1:
                if tuple(c.strip() for c in row) != header:
                    raise network.NetworkFormatError(f"{path}:1: expected header {','.join(header)}")
                continue
            if not row:
                continue
            if len(row) != len(header):
                raise network.NetworkFormatError(f"{path}:{line_no}: expected {len(header)} fields")
            yield line_no, [c.strip() for c in row]


def _read_opinion_file(path: Path) -> dict[str, float]:
    out = {}
    for line_no, (node, op) in _read_csv(path, ("node", "opinion")):
        try:
            out[node] = float(op)
        except ValueError:
            raise network.NetworkFormatError(f"{path}:{line_no}: bad opinion {op!r}") from None
    return out


def analyze_day(policy_path: Path, opinions_path: Path, split: PartisanSplit) -> list:
    opinions = _read_opinion_file(opinions_path)
    src_op, tgt_op, u, banned_users = [], [], [], set()
    for line_no, (s, t, val) in _read_csv(policy_path, ("source", "target", "u")):
        try:
            strength = float(val)
        except ValueError:
            raise network.NetworkFormatError(f"{policy_path}:{line_no}: bad ban strength {val!r}") from None
        if s not in opinions or t not in opinions:
            raise network.NetworkFormatError(f"{policy_path}:{line_no}: unknown node in edge {s}->{t}")
        src_op.append(opinions[s])
        tgt_op.append(opinions[t])
        u.append(strength)
        if strength > 0:
            banned_users.add(s)
    ops = np.array(list(opinions.values()))
    high = split.high_mask(ops)
    n_high, n_low = int(high.sum()), int((~high).sum())
    b_high = sum(1 for s in banned_users if opinions[s] > split.threshold)
    b_low = len(banned_users) - b_high
    stats = polarity_from_edges(src_op, tgt_op, u)
    return [b_low / n_low if n_low else "", b_high / n_high if n_high else "", b_low, b_high,
            stats.upward_count, stats.downward_count, stats.neutral_count,
            stats.upward_mass, stats.downward_mass, stats.neutral_mass]


def cmd_analyze(args) -> int:
    run_dir = Path(args.run_dir)
    config = engine.read_config(run_dir / "config.json")
    split = PartisanSplit(args.threshold)
    traj = run_dir / "trajectory.csv"
    if not traj.exists():
        raise UsageError(f"{run_dir} has no trajectory.csv; is it a simulate output directory?")
    days = []
    with open(traj, newline="") as fh:
        days = [float(row["day"]) for row in csv.DictReader(fh)]
    expected = [] if config.baseline else [engine.day_label(d) for d in days]
    missing = [f for d in expected for f in (f"policy_day_{d}.csv", f"opinions_day_{d}.csv")
               if not (run_dir / f).exists()]
    if missing:
        raise UsageError(f"{run_dir}: missing policy snapshots: {', '.join(missing)} "
                         "(re-run simulate without --no-policy-snapshots)")
    out = Path(args.report) if args.report else run_dir / "bias_report.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_HEADER)
        for label in expected:
            row = analyze_day(run_dir / f"policy_day_{label}.csv", run_dir / f"opinions_day_{label}.csv", split)
            w.writerow([label, *(x if isinstance(x, (str, int)) else repr(float(x)) for x in row)])
    print(f"report={out} days={len(expected)}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_network_args(p):
    p.add_argument("--edges", help="edge CSV (source,target,rate)")
    p.add_argument("--nodes", help="node CSV (node,opinion)")
    p.add_argument("--network-dir", help="directory holding edges.csv and nodes.csv")


def _add_config_args(p, axes_as_lists: bool = False):
    p.add_argument("--config", help="JSON config; flags override its values")
    p.add_argument("--horizon-days", type=float)
    p.add_argument("--policy-interval-days", type=float)
    p.add_argument("--record-interval-days", type=float)
    p.add_argument("--objective", type=ObjectiveKind.parse, help="max-mean, min-var or max-var")
    p.add_argument("--dt-max", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--baseline", action=argparse.BooleanOptionalAction, default=None,
                   help="force the zero policy")
    axis_type = _floats if axes_as_lists else float
    for flag in ("--s-network", "--s-edge", "--omega", "--epsilon"):
        p.add_argument(flag, type=axis_type)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shadowban", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic network as CSV files")
    gk = g.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for name in ("path", "sbm", "er", "standin"):
        k = gk.add_parser(name)
        k.add_argument("--out", default=".", help="output directory (default: .)")
        k.add_argument("--edges")
        k.add_argument("--nodes")
        if name in ("sbm", "er", "standin"):
            k.add_argument("--seed", type=int, default=0)
    gk.choices["path"].add_argument("--n", type=int, required=True)
    sbm = gk.choices["sbm"]
    sbm.add_argument("--sizes", type=_ints, required=True, help="cluster sizes, e.g. 5,5")
    sbm.add_argument("--p", type=_matrix, required=True, help="rows split by ';', e.g. '1,0.05;0.05,1'")
    sbm.add_argument("--opinions", type=_floats, required=True, help="one opinion per cluster")
    er = gk.choices["er"]
    er.add_argument("--n", type=int, required=True)
    er.add_argument("--p", type=float, required=True)
    st = gk.choices["standin"]
    st.add_argument("--n", type=int, default=30_000)
    st.add_argument("--target-edges", type=int, default=1_000_000)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="run the controlled dynamics and write a run directory")
    _add_network_args(s)
    _add_config_args(s)
    s.add_argument("--out", required=True, help="run directory")
    s.add_argument("--threshold", type=float, default=0.5, help="partisan split threshold")
    s.add_argument("--bins", type=int, default=50, help="histogram bins")
    s.add_argument("--no-policy-snapshots", action="store_true")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="relative terminal objective over a parameter grid")
    _add_network_args(w)
    _add_config_args(w, axes_as_lists=True)
    w.add_argument("--out", required=True, help="output directory for sweep.csv")
    w.add_argument("--workers", type=int, default=1)
    w.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", help="node-level vs edge-polarity bias report from a run")
    a.add_argument("run_dir")
    a.add_argument("--threshold", type=float, default=0.5)
    a.add_argument("--report", help="output CSV (default: <run_dir>/bias_report.csv)")
    a.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"shadowban: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except network.NetworkFormatError as exc:
        print(f"shadowban: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimulationError, OSError, ValueError) as exc:
        print(f"shadowban: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
