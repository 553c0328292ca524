"""Command-line interface: ``nestedhyp {generate,reduce,sweep,gcn,plot,selftest}``.

Reports are JSON lines on stdout, tables are CSV. Exit status is 0 on
success, 1 when a command fails and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import io as nio
from .config import TOL, set_tolerances
from .errors import HyperbolicError, ParseError
from .optim import OptimizerConfig

DEFAULT_SIGMAS = (0.2, 0.6, 1.0, 1.4, 1.8, 2.0)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Settings read from ``--config``; command-line flags take precedence.

    ``options`` maps a command name to defaults for its flags (flag names with
    dashes replaced by underscores); ``optimizer`` holds OptimizerConfig fields
    and ``tolerances`` fields of :data:`nestedhyp.config.TOL`.
    """

    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ParseError(f"invalid JSON: {err.msg}", line=err.lineno) from None
        if not isinstance(data, dict):
            raise ParseError("config must be a JSON object", line=1)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ParseError(f"unknown config keys: {sorted(unknown)}", line=1)
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                return cls.from_json(fh.read())
            except ParseError as err:
                raise ParseError(str(err), path=path) from None

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    def optimizer_config(self, **base) -> OptimizerConfig:
        merged = dict(base)
        merged.update(self.optimizer)
        try:
            return OptimizerConfig(**merged)
        except TypeError as err:
            raise UsageError(f"bad optimizer settings: {err}") from None


class _Out:
    def __init__(self, quiet):
        self.quiet = quiet

    def __call__(self, text=""):
        if not self.quiet:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _csv_floats(text):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _csv_ints(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_globals(p, default):
    p.add_argument("--seed", type=int, default=default, help="random seed (default 0)")
    p.add_argument("--config", default=default, help="JSON run configuration")
    p.add_argument("--tol", type=float, default=default,
                   help="point, tangent and group tolerance (default 1e-9)")
    p.add_argument("--quiet", action="store_true",
                   default=False if default is None else default, help="suppress stdout output")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nestedhyp", description=__doc__.splitlines()[0])
    _add_globals(p, None)
    # global flags also work after the subcommand; SUPPRESS keeps the top-level value
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    g = add("generate", help="write a synthetic dataset")
    g.add_argument("kind", choices=["wrapped-normal", "offset-curve", "tree", "two-community"])
    g.add_argument("--out", help="output file (point clouds) or directory (graphs)")
    g.add_argument("--dim", type=int, default=None, help="hyperbolic dimension")
    g.add_argument("--sigma", type=float, default=None, help="noise / spread")
    g.add_argument("--count", type=int, default=None, help="number of points")
    g.add_argument("--r0", type=float, default=0.5, help="offset of the curve")
    g.add_argument("--branching", type=int, default=2)
    g.add_argument("--depth", type=int, default=5)
    g.add_argument("--removals", type=int, default=0, help="subtrees removed from the tree")
    g.add_argument("--scale", type=float, default=1.0, help="tree embedding distance scale")
    g.add_argument("--size", type=int, default=40, help="nodes per community")
    g.add_argument("--p-in", type=float, default=0.3)
    g.add_argument("--p-out", type=float, default=0.02)
    g.add_argument("--noise", type=float, default=0.5, help="feature noise")

    r = add("reduce", help="fit (or evaluate) a reduction model")
    r.add_argument("--input", required=True, help="point-cloud CSV")
    r.add_argument("--method", choices=["nh", "tpca"], default="nh")
    r.add_argument("--target-dim", type=int, default=2)
    r.add_argument("--model-out", help="write the fitted model here")
    r.add_argument("--eval-model", help="evaluate this model file instead of fitting")
    r.add_argument("--report", help="append the JSON report line to this file")
    r.add_argument("--restarts", type=int, default=None)
    r.add_argument("--repeats", type=int, default=1)
    r.add_argument("--no-joint", action="store_true", help="skip the joint refinement")

    s = add("sweep", help="NH vs tangent PCA over wrapped-normal spreads")
    s.add_argument("--dim", type=int, default=10)
    s.add_argument("--target-dim", type=int, default=2)
    s.add_argument("--sigmas", type=_csv_floats, default=list(DEFAULT_SIGMAS))
    s.add_argument("--count", type=int, default=200)
    s.add_argument("--seeds", type=int, default=3, help="number of seeds (seed, seed+1, ...)")
    s.add_argument("--restarts", type=int, default=None)
    s.add_argument("--out", help="CSV output (stdout by default)")
    s.add_argument("--timing", action="store_true",
                   help="fill the seconds column (makes output run-dependent)")

    c = add("gcn", help="train or evaluate the graph network")
    c.add_argument("action", choices=["train", "eval"])
    c.add_argument("--graph", required=True, help="graph bundle directory")
    c.add_argument("--task", choices=["nc", "lp"], default="nc")
    c.add_argument("--dims", type=_csv_ints, default=[2, 2], help="output dimension per layer")
    c.add_argument("--checkpoint", default="gcn_model.txt")
    c.add_argument("--trace", help="CSV of (step, loss, metric)")
    c.add_argument("--max-iter", type=int, default=200)
    c.add_argument("--split", choices=["train", "val", "test"], default="test")

    pl = add("plot", help="Poincare-disk coordinates (CSV, optional SVG)")
    pl.add_argument("--points", required=True)
    pl.add_argument("--model", help="model file; adds reconstructions or the fitted curve")
    pl.add_argument("--out", required=True, help="Poincare CSV")
    pl.add_argument("--svg", help="SVG output (2-dimensional data only)")
    pl.add_argument("--samples", type=int, default=200, help="curve samples for 1-d stacks")

    add("selftest", help="run the invariant checks")
    return p


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    opts = cfg.options.get(args.command, {})
    if opts:
        sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
        known = {a.dest for a in sub._actions}  # noqa: SLF001
        bad = set(opts) - known
        if bad:
            raise UsageError(f"unknown options for {args.command}: {sorted(bad)}")
        sub.set_defaults(**opts)
        args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = int(cfg.seed)
    return args, cfg


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args, cfg, out):
    from . import datasets
    from .lorentz import origin, sample_wrapped_normal

    manifest = []
    if args.kind in ("wrapped-normal", "offset-curve"):
        if args.kind == "wrapped-normal":
            dim, sigma, count = args.dim or 10, 0.5 if args.sigma is None else args.sigma, args.count or 200
            if dim < 1 or count < 1 or not sigma > 0:
                raise UsageError("need --dim >= 1, --count >= 1 and --sigma > 0")
            X = sample_wrapped_normal(origin(dim), sigma, count, args.seed)
        else:
            sigma, count = 0.02 if args.sigma is None else args.sigma, args.count or 100
            if count < 2 or sigma < 0:
                raise UsageError("need --count >= 2 and --sigma >= 0")
            X = datasets.toy_offset_curve(count, sigma, args.r0, args.seed)
        path = args.out or f"{args.kind.replace('-', '_')}.csv"
        nio.write_points(path, X)
        manifest.append({"path": path, "rows": int(X.shape[0]), "columns": int(X.shape[1])})
    elif args.kind == "tree":
        dim = args.dim or 10
        if dim < 1 or args.branching < 1 or args.depth < 0 or args.removals < 0:
            raise UsageError("need --dim >= 1, --branching >= 1, --depth >= 0, --removals >= 0")
        spec = datasets.TreeSpec.balanced(args.branching, args.depth)
        if args.removals:
            spec = datasets.TreeSpec.edge_removed(spec, args.seed, args.removals)
        tree = datasets.build_tree(spec)
        emb = datasets.embed_tree(tree, dim, datasets.EmbedConfig(scale=args.scale, seed=args.seed))
        outdir = args.out or "tree"
        os.makedirs(outdir, exist_ok=True)
        epath, ppath = os.path.join(outdir, "edges.tsv"), os.path.join(outdir, "points.csv")
        nio.write_edges(epath, tree.edges)
        nio.write_points(ppath, emb.points)
        manifest.append({"path": epath, "rows": int(len(tree.edges))})
        manifest.append({"path": ppath, "rows": int(tree.num_nodes), "stress": emb.stress,
                         "mean_distortion": emb.mean_distortion})
    else:
        if not 0 <= args.p_out < args.p_in <= 1 or args.size < 2 or args.noise < 0:
            raise UsageError("need 0 <= --p-out < --p-in <= 1, --size >= 2, --noise >= 0")
        graph = datasets.two_community_graph(args.size, args.p_in, args.p_out, args.noise, args.seed)
        for path in nio.write_graph(args.out or "two_community", graph):
            manifest.append({"path": path})
    for entry in manifest:
        out(json.dumps(entry, sort_keys=True))
    return 0


def _reduction_config(args, cfg):
    from .reduction import ReductionConfig

    rc = ReductionConfig(seed=args.seed)
    base = dataclasses.asdict(rc.optimizer)
    rc.optimizer = cfg.optimizer_config(**base)
    if args.restarts is not None:
        if args.restarts < 0:
            raise UsageError("--restarts must be >= 0")
        rc.restarts = args.restarts
    if getattr(args, "no_joint", False):
        rc.joint = False
    return rc


def cmd_reduce(args, cfg, out):
    from . import reduction
    from .lorentz import check_point

    X = check_point(nio.read_points(args.input), what=args.input)
    if args.eval_model:
        model = nio.read_model(args.eval_model)
        t0 = time.perf_counter()
        res = reduction.evaluate(model, X)
        seconds = time.perf_counter() - t0
        method = res.method
        target = model.target_dim
        mean, std = res.mean_squared_error, 0.0
    else:
        if args.repeats < 1:
            raise UsageError("--repeats must be >= 1")
        summary = reduction.evaluate_method(args.method, X, args.target_dim,
                                            _reduction_config(args, cfg), args.repeats)
        method, target = args.method, args.target_dim
        mean, std, seconds = summary.mean_error, summary.std_error, summary.seconds
        model = summary.results[0].model
        if args.model_out:
            nio.write_model(args.model_out, model)
    report = {"method": method, "target_dim": int(target), "mean_error": mean,
              "std_error": std, "seconds": seconds, "seed": args.seed}
    line = json.dumps(report, sort_keys=True)
    if args.report:
        with open(args.report, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
    out(line)
    return 0


def cmd_sweep(args, cfg, out):
    from . import reduction

    if not args.dim > args.target_dim >= 1 or args.count < 2 or args.seeds < 1:
        raise UsageError("need --dim > --target-dim >= 1, --count >= 2, --seeds >= 1")
    if not args.sigmas or min(args.sigmas) <= 0:
        raise UsageError("--sigmas must be positive")
    seeds = [args.seed + k for k in range(args.seeds)]
    rows = reduction.variance_sweep(args.dim, args.target_dim, args.sigmas, args.count, seeds,
                                    _reduction_config(args, cfg))
    lines = [",".join(reduction.SWEEP_HEADER)]
    for row in rows:
        secs = repr(row.seconds) if args.timing else ""
        lines.append(f"{row.sigma!r},{row.method},{row.mean_error!r},{row.std_error!r},{secs}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out(text)
    return 0


def cmd_gcn(args, cfg, out):
    from . import nhgcn

    graph = nio.read_graph(args.graph)
    if args.task == "nc" and (graph.labels is None or graph.node_split is None):
        raise UsageError("task nc needs labels.csv and masks.csv in the graph directory")
    if args.task == "lp" and graph.edge_samples is None:
        raise UsageError("task lp needs edge_samples.tsv in the graph directory")
    if args.action == "train":
        if args.max_iter < 1 or not args.dims or min(args.dims) < 1:
            raise UsageError("need --max-iter >= 1 and positive --dims")
        opt = cfg.optimizer_config(**dataclasses.asdict(nhgcn.TrainConfig().optimizer))
        opt = dataclasses.replace(opt, max_iter=args.max_iter)
        tc = nhgcn.TrainConfig(task=args.task, dims=args.dims, optimizer=opt, seed=args.seed)
        result = nhgcn.train(graph, tc)
        nio.write_model(args.checkpoint, result.model)
        if args.trace:
            with open(args.trace, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(result.trace_csv())
        report = {"task": args.task, "checkpoint": args.checkpoint, "metrics": result.metrics,
                  "max_constraint_residual": result.max_constraint_residual,
                  "max_point_residual": result.max_point_residual, "steps": len(result.trace)}
    else:
        model = nio.read_model(args.checkpoint)
        if not isinstance(model, nhgcn.GCNModel):
            raise UsageError(f"{args.checkpoint} is not a graph-network checkpoint")
        if model.task != args.task:
            raise UsageError(f"checkpoint was trained for task {model.task!r}")
        report = {"task": model.task, "split": args.split,
                  "metrics": nhgcn.evaluate(model, graph, args.split)}
    out(json.dumps(report, sort_keys=True))
    return 0


def cmd_plot(args, cfg, out):
    from .lorentz import check_point, lift, to_poincare
    from .nested import NestingStack, stack_embed, stack_project
    from .reduction import reconstruct

    X = check_point(nio.read_points(args.points), what=args.points)
    P = [to_poincare(X)]
    labels = None
    polylines = []
    if args.model:
        model = nio.read_model(args.model)
        if not hasattr(model, "ambient_dim"):
            raise UsageError(f"{args.model} is not a reduction model")
        if model.ambient_dim != X.shape[1] - 1:
            raise UsageError("model and points live in different dimensions")
        labels = ["data"] * X.shape[0]
        if isinstance(model, NestingStack) and model.target_dim == 1:
            if args.samples < 2:
                raise UsageError("--samples must be >= 2")
            t = np.arcsinh(stack_project(model, X)[:, 1])
            ts = np.linspace(t.min(), t.max(), args.samples)
            curve = to_poincare(stack_embed(model, lift(ts[:, None])))
            P.append(curve)
            labels += ["curve"] * len(ts)
            polylines.append(curve)
        else:
            P.append(to_poincare(reconstruct(model, X)))
            labels += ["reconstruction"] * X.shape[0]
    P = np.vstack(P)
    nio.write_poincare_csv(args.out, P, labels)
    manifest = [{"path": args.out, "rows": int(P.shape[0])}]
    if args.svg:
        if P.shape[1] != 2:
            raise UsageError("SVG output needs points in L^2")
        pts = P if labels is None else P[[lab != "curve" for lab in labels]]
        pl = labels if labels is None else [lab for lab in labels if lab != "curve"]
        with open(args.svg, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(nio.poincare_svg(pts, pl, polylines))
        manifest.append({"path": args.svg})
    for entry in manifest:
        out(json.dumps(entry, sort_keys=True))
    return 0


def cmd_selftest(args, cfg, out):
    from . import selftest

    results = selftest.run(args.seed)
    out(selftest.format_table(results))
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {"generate": cmd_generate, "reduce": cmd_reduce, "sweep": cmd_sweep, "gcn": cmd_gcn,
            "plot": cmd_plot, "selftest": cmd_selftest}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args, cfg = _apply_config(parser, argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    except (UsageError, ParseError, OSError) as err:
        sys.stderr.write(f"nestedhyp: error: {err}\n")
        return 2
    saved = TOL.as_dict()
    try:
        if cfg.tolerances:
            set_tolerances(**cfg.tolerances)
        if args.tol is not None:
            if not args.tol > 0:
                raise UsageError("--tol must be positive")
            set_tolerances(point=args.tol, tangent=args.tol, group=args.tol)
        return COMMANDS[args.command](args, cfg, _Out(args.quiet))
    except UsageError as err:
        sys.stderr.write(f"nestedhyp {args.command}: usage error: {err}\n")
        return 2
    except KeyError as err:
        sys.stderr.write(f"nestedhyp: error: {err}\n")
        return 2
    except (HyperbolicError, OSError) as err:
        sys.stderr.write(f"nestedhyp {args.command}: error: {err}\n")
        return 1
    finally:
        set_tolerances(**saved)


if __name__ == "__main__":
    sys.exit(main())
