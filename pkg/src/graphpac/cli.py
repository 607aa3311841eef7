"""Command-line driver: split, synth, cluster, sweep and bound.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 the optimizer hit its iteration cap (outputs are still written).
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bound import BoundInputs, BoundReport, default_quantization, evaluate_bound
from .data import (
    SCALE_METHODS,
    DataError,
    EdgeDataset,
    ParseOptions,
    read_edge_list,
    split_manifest,
    write_edge_list,
)
from .model import ClusterModel, empirical_loss, format_model, mutual_information
from .optimizer import OptimizerConfig, OptimizerTrace, optimize
from .synth import PlantedPartitionSpec, exact_expected_loss, format_labels, generate, parse_labels

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ITER_CAP = 0, 1, 2, 3
DEFAULT_FRACTIONS = "0.7,0.1,0.2"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _fractions(text: str) -> list[float]:
    vals = _float_list(text)
    if len(vals) != 3 or any(v < 0 for v in vals) or abs(sum(vals) - 1.0) > 1e-9:
        raise argparse.ArgumentTypeError(f"fractions must be three nonnegative shares summing to 1: {text!r}")
    return vals


def _int_list(text: str) -> list[int]:
    """Comma-separated integers; ``a-b`` expands to an inclusive range."""
    out = []
    try:
        for tok in text.split(","):
            tok = tok.strip()
            if not tok:
                continue
            if "-" in tok:
                lo, hi = (int(v) for v in tok.split("-", 1))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(tok))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def default_beta_grid(sample_size: int) -> list[float]:
    """beta * N on the powers of two from 1 to 4096."""
    return [2.0 ** k / sample_size for k in range(13)]


# --- shared argument groups -------------------------------------------------

def _add_input(p):
    p.add_argument("--input", required=True, help="tab-separated src, dst, weight file")
    p.add_argument("--symmetric", action="store_true", help="treat edges as undirected pairs")
    p.add_argument("--self-loops", action="store_true", help="allow i == j edges")
    p.add_argument("--scale", choices=SCALE_METHODS, default="none",
                   help="map raw weights into [0, 1] (default: weights must already be in range)")


def _add_bound(p):
    p.add_argument("--delta", type=float, default=0.05, help="confidence parameter (default 0.05)")
    p.add_argument("--quantization", type=float, default=None,
                   help="weight grid step; default 5|C|^2/N")
    p.add_argument("--alphabet-size", type=int, default=None,
                   help="use the finite-alphabet bound for weights from |W| values instead")


def _add_optimizer(p):
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--anneal", action=argparse.BooleanOptionalAction, default=True,
                   help="anneal beta upward from 1/N in two-fold steps (default on)")
    p.add_argument("--iters-per-beta", type=int, default=5)
    p.add_argument("--noise", type=float, default=1e-2, dest="noise_scale",
                   help="assignment noise injected between annealing levels")
    p.add_argument("--max-iters", type=int, default=100_000,
                   help="cap on alternating steps over all restarts")
    p.add_argument("--no-safeguard", action="store_true",
                   help="take plain alternating steps without objective backtracking")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="root seed for splits and restarts")
    p.add_argument("--out-dir", default=".", help="directory for output files")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphpac", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cluster", help="train one model and bound its expected loss")
    _add_input(p)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--fractions", type=_fractions, default=None,
                   help="train,cv,test shares; train on the train share and report the others")
    p.add_argument("--labels", default=None, help="ground-truth `node label` file for ARI")
    p.add_argument("--plot", action="store_true", help="also write trace.png")
    _add_optimizer(p)
    _add_bound(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="train over a beta grid or a cluster-count grid")
    _add_input(p)
    grid = p.add_mutually_exclusive_group()
    grid.add_argument("--beta-grid", type=_float_list, default=None)
    grid.add_argument("--cluster-grid", type=_int_list, default=None)
    p.add_argument("--clusters", type=int, default=None, help="fixed |C| for a beta sweep")
    p.add_argument("--beta", type=float, default=1.0, help="fixed beta for a cluster sweep")
    p.add_argument("--fractions", type=_fractions, default=_fractions(DEFAULT_FRACTIONS))
    p.add_argument("--plot", action="store_true", help="also write sweep.png")
    _add_optimizer(p)
    _add_bound(p)
    _add_common(p)

    p = sub.add_parser("split", help="random train/cv/test split of an edge list")
    _add_input(p)
    p.add_argument("--fractions", type=_fractions, default=_fractions(DEFAULT_FRACTIONS))
    _add_common(p)

    p = sub.add_parser("synth", help="write a planted-partition dataset and its labels")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--intra", type=float, required=True, help="mean weight inside blocks")
    p.add_argument("--inter", type=float, required=True, help="mean weight across blocks")
    p.add_argument("--noise", type=float, default=0.0, help="half-width of uniform weight noise")
    p.add_argument("--rate", type=float, default=1.0, help="probability that a pair is observed")
    p.add_argument("--weight-model", choices=("uniform", "bernoulli"), default="uniform")
    _add_common(p)

    p = sub.add_parser("bound", help="evaluate the generalization bound from summary numbers")
    p.add_argument("--loss", type=float, required=True, help="empirical loss")
    p.add_argument("--mi", type=float, required=True, help="mutual information in nats")
    p.add_argument("--nodes", type=int, required=True, help="|X|")
    p.add_argument("--clusters", type=int, required=True, help="|C|")
    p.add_argument("--edges", type=int, required=True, help="sample size N")
    _add_bound(p)
    return parser


# --- helpers -----------------------------------------------------------------

def _load(args) -> EdgeDataset:
    options = ParseOptions(symmetric=args.symmetric, allow_self_loops=args.self_loops)
    return read_edge_list(args.input, options, scale=args.scale)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _optimizer_config(args, beta: float, clusters: int) -> OptimizerConfig:
    return OptimizerConfig(beta=beta, num_clusters=clusters, anneal=args.anneal,
                           iters_per_beta=args.iters_per_beta, noise_scale=args.noise_scale,
                           restarts=args.restarts, seed=args.seed, max_total_iters=args.max_iters,
                           safeguard=not args.no_safeguard)


def bound_for(model: ClusterModel, train: EdgeDataset, args) -> BoundReport:
    k, n = model.num_clusters, train.num_edges
    if args.alphabet_size is None:
        quant = args.quantization if args.quantization is not None else default_quantization(k, n)
    else:
        quant = None
    mi = min(mutual_information(model.assignment), math.log(k))
    loss = min(1.0, empirical_loss(model, train))
    return evaluate_bound(BoundInputs(loss, mi, train.num_nodes, k, n, args.delta,
                                      alphabet_size=args.alphabet_size, quantization=quant))


def _loss_or_nan(model: ClusterModel, data: EdgeDataset) -> float:
    return empirical_loss(model, data) if data.num_edges else math.nan


def _split(data: EdgeDataset, fractions, seed: int):
    if fractions is None:
        return data, data.subset(np.array([], dtype=np.int64)), data.subset(np.array([], dtype=np.int64))
    return split_manifest(data, fractions, seed).apply(data)


def _ari(model: ClusterModel, data: EdgeDataset, labels_path: str) -> float:
    from sklearn.metrics import adjusted_rand_score

    truth = parse_labels(Path(labels_path).read_text(encoding="utf-8"))
    pred = model.assignment.labels()
    names = [data.nodes.label(x) for x in range(data.num_nodes)]
    missing = [n for n in names if n not in truth]
    if missing:
        raise DataError(f"labels file has no entry for node {missing[0]!r}")
    return float(adjusted_rand_score([truth[n] for n in names], pred))


def _header(command: str, seed: int) -> str:
    return f"# graphpac {__version__} {command} seed={seed}"


def _write_trace(trace: OptimizerTrace, path: Path, header: str) -> None:
    path.write_text(header + "\n" + trace.to_csv(), encoding="utf-8")


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.10g}"


# --- subcommands ---------------------------------------------------------------

def cmd_cluster(args) -> int:
    data = _load(args)
    train, cv, test = _split(data, args.fractions, args.seed)
    model, trace = optimize(train, _optimizer_config(args, args.beta, args.clusters))
    report = bound_for(model, train, args)
    out = _out_dir(args)
    header = _header("cluster", args.seed)
    (out / "model.txt").write_text(header + "\n" + format_model(model, data.symmetric), encoding="utf-8")
    _write_trace(trace, out / "trace.csv", header)
    (out / "bound.txt").write_text(header + "\n" + report.format(), encoding="utf-8")

    lines = [header,
             f"train_edges={train.num_edges}",
             f"loss={_fmt(report.inputs.empirical_loss)}",
             f"mi={_fmt(report.inputs.mutual_info)}",
             f"bound={_fmt(report.expected_loss_bound)}",
             f"cv_loss={_fmt(_loss_or_nan(model, cv))}",
             f"test_loss={_fmt(_loss_or_nan(model, test))}"]
    if args.labels:
        lines.append(f"ari={_fmt(_ari(model, data, args.labels))}")
    if args.plot:
        from .plotting import plot_trace
        plot_trace(trace, out / "trace.png")
    print("\n".join(lines))
    if trace.hit_iteration_cap:
        print("warning: iteration cap reached; model is the best found so far", file=sys.stderr)
        return EXIT_ITER_CAP
    return EXIT_OK


SWEEP_COLUMNS = ("param", "train_loss", "cv_loss", "test_loss", "mi", "bound", "best")


def cmd_sweep(args) -> int:
    data = _load(args)
    train, cv, test = _split(data, args.fractions, args.seed)
    if args.cluster_grid is not None:
        name, grid = "clusters", args.cluster_grid
        configs = [_optimizer_config(args, args.beta, k) for k in grid]
    else:
        if args.clusters is None:
            raise UsageError("a beta sweep needs --clusters")
        name = "beta"
        grid = args.beta_grid if args.beta_grid is not None else default_beta_grid(train.num_edges)
        configs = [_optimizer_config(args, b, args.clusters) for b in grid]

    rows, capped = [], False
    for value, config in zip(grid, configs):
        model, trace = optimize(train, config)
        capped |= trace.hit_iteration_cap
        report = bound_for(model, train, args)
        rows.append([value, report.inputs.empirical_loss, _loss_or_nan(model, cv),
                     _loss_or_nan(model, test), report.inputs.mutual_info, report.expected_loss_bound])
    bounds = [r[5] for r in rows]
    best = int(np.argmin(bounds))

    out = _out_dir(args)
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(_header("sweep", args.seed) + f" sweep={name}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for idx, row in enumerate(rows):
            param = str(row[0]) if name == "clusters" else f"{row[0]:.10g}"
            writer.writerow([param] + [_fmt(v) for v in row[1:]] + ["*" if idx == best else ""])
    if args.plot:
        from .plotting import plot_sweep
        curves = {"train": [r[1] for r in rows], "cv": [r[2] for r in rows],
                  "test": [r[3] for r in rows], "bound": bounds}
        plot_sweep(name, grid, curves, best, out / "sweep.png", log_x=name == "beta")
    print(f"best {name}={grid[best]} bound={_fmt(bounds[best])}")
    return EXIT_ITER_CAP if capped else EXIT_OK


def cmd_split(args) -> int:
    data = _load(args)
    manifest = split_manifest(data, args.fractions, args.seed)
    out = _out_dir(args)
    header = [f"graphpac {__version__} split seed={args.seed}"]
    for name, part in zip(("train", "cv", "test"), manifest.apply(data)):
        write_edge_list(part, out / f"{name}.tsv", header + [f"share={name} edges={part.num_edges}"])
    (out / "manifest.json").write_text(manifest.to_json() + "\n", encoding="utf-8")
    print(f"train={len(manifest.train)} cv={len(manifest.cv)} test={len(manifest.test)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = PlantedPartitionSpec(args.nodes, args.blocks, args.intra, args.inter, args.noise,
                                args.rate, args.seed, args.weight_model)
    data, labels, truth = generate(spec)
    out = _out_dir(args)
    header = [f"graphpac {__version__} synth seed={args.seed} symmetric=1"]
    write_edge_list(data, out / "data.tsv", header)
    (out / "labels.tsv").write_text(f"# {header[0]}\n" + format_labels(labels, data.nodes), encoding="utf-8")
    floor = exact_expected_loss(truth.ground_truth_model(), truth)
    print(f"edges={data.num_edges} ground_truth_expected_loss={_fmt(floor)}")
    return EXIT_OK


def cmd_bound(args) -> int:
    quant = args.quantization
    if args.alphabet_size is None and quant is None:
        quant = default_quantization(args.clusters, args.edges)
    report = evaluate_bound(BoundInputs(args.loss, args.mi, args.nodes, args.clusters, args.edges,
                                        args.delta, alphabet_size=args.alphabet_size, quantization=quant))
    print(report.format(), end="")
    return EXIT_OK


COMMANDS = {"cluster": cmd_cluster, "sweep": cmd_sweep, "split": cmd_split,
            "synth": cmd_synth, "bound": cmd_bound}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"cannot read or write file: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
