"""
Command-line interface for advlayout.

Commands follow the pipeline: gen-data -> baseline -> collect -> train -> draw
-> eval, plus render for single layouts. Failures print a human line and a
machine-readable JSON line on stderr and exit with a code per error family.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from .baselines import BASELINE_NAMES
from .collection import LayoutCollection
from .criteria import load_criterion
from .dataset import INIT_PMDS, INIT_RANDOM, graph_format
from .errors import EXIT_RUNTIME, AdvLayoutError, ArgumentError, ValidationError
from .evaluation import write_report
from .geometry import load_layout
from .graph import load_graph
from .neural import ArchConfig, load_checkpoint
from .pipeline import (
    INIT_PROVIDED,
    Config,
    collect,
    compare,
    draw,
    generate_dataset,
    load_samples,
    load_train_config,
    run_baseline,
    train_model,
    write_layout_dir,
)
from .render import RenderOptions, render_svg
from .trainer import BOOTSTRAP_COLLECTION, BOOTSTRAP_SELF, COLLECTION_FILE, TrainConfig
from .utils import atomic_write_text, default_logger

EXIT_USAGE = 2
EXIT_INTERRUPTED = 130


def setup_logging(verbose: bool = False):
    """Set up logging for CLI usage."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(levelname)s: %(message)s'
    )
    default_logger.setLevel(level)
    default_logger.propagate = False


def _config(args, seed: Optional[int] = None, init: str = INIT_PMDS) -> Config:
    if seed is None:
        seed = args.seed if args.seed is not None else 0
    return Config(seed=seed, workers=args.workers, init=init)


def cmd_gen_data(args):
    """Generate a synthetic dataset of connected graphs."""
    config = _config(args)
    graphs = generate_dataset(args.count, args.n_min, args.n_max, args.extra_frac, args.out, config)
    print(f"✅ Generated {len(graphs)} graphs in {args.out}")


def cmd_baseline(args):
    """Lay out every graph with a classical method."""
    config = _config(args, init=args.init_method)
    samples = load_samples(args.graphs, config=config)
    layouts = run_baseline(args.method, samples, config)
    write_layout_dir(layouts, args.out)
    print(f"✅ {args.method}: wrote {len(layouts)} layouts to {args.out}")


def cmd_collect(args):
    """Build a good-layout collection from several methods."""
    config = _config(args, init=args.init_method)
    spec = load_criterion(args.criterion)
    samples = load_samples(args.graphs, config=config)
    collection = collect(samples, args.layouts, spec, config)
    collection.save(args.out)
    print(f"✅ Collection of {len(collection)} layouts under {spec.label} -> {args.out}")
    for method, share in collection.composition().items():
        print(f"   • {method}: {share:.2f}%")


def cmd_train(args):
    """Train a generator, optionally resuming from a checkpoint."""
    if args.config:
        arch, train_cfg = load_train_config(args.config)
    else:
        arch, train_cfg = ArchConfig(), TrainConfig()
    data = train_cfg.to_dict()
    if args.criterion:
        data["criterion"] = load_criterion(args.criterion).to_dict()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.epochs is not None:
        data["epochs"] = args.epochs
    if args.bootstrap:
        data["bootstrap"] = args.bootstrap
    if args.no_self_challenge:
        data["self_challenge"] = False
    train_cfg = TrainConfig.from_dict(data)

    config = _config(args, seed=train_cfg.seed, init=train_cfg.init)
    samples = load_samples(args.graphs, config=config)

    state = load_checkpoint(args.resume) if args.resume else None
    collection_path = args.collection
    if state is not None:
        saved = os.path.join(os.path.dirname(os.path.abspath(args.resume)), COLLECTION_FILE)
        if os.path.exists(saved):
            collection_path = saved
        elif not collection_path:
            raise ArgumentError(f"--resume needs {saved} or --collection")
    elif train_cfg.bootstrap == BOOTSTRAP_COLLECTION and not collection_path:
        raise ArgumentError("train needs --collection unless --bootstrap self is given")
    elif train_cfg.bootstrap == BOOTSTRAP_SELF:
        collection_path = None

    collection = None
    if collection_path:
        collection = LayoutCollection.load(collection_path, samples=samples, logger=config.log)
        if collection.spec != train_cfg.criterion:
            raise ValidationError(
                f"collection criterion {collection.spec.label} differs from training criterion "
                f"{train_cfg.criterion.label}")

    result = train_model(samples, train_cfg, arch=arch, collection=collection, state=state,
                         checkpoint_dir=args.out, config=config)
    final = result.history[-1]
    print(f"✅ Trained to epoch {result.state.epoch}; checkpoint in {args.out}")
    print(f"   • mean collection value: {final['mean_collection_value']}")
    print(f"   • mean generated value: {final['mean_generated_value']}")


def cmd_draw(args):
    """Lay out graphs with a trained generator."""
    state = load_checkpoint(args.checkpoint)
    trained = state.train_config
    seed = args.seed if args.seed is not None else int(trained.get("seed", 0))
    init = args.init_method or trained.get("init", INIT_PMDS)
    config = _config(args, seed=seed, init=init)
    samples = load_samples(args.graphs, init_dir=args.init, config=config)
    layouts = draw(state, samples)
    write_layout_dir(layouts, args.out)
    print(f"✅ Drew {len(layouts)} graphs to {args.out}")


def cmd_eval(args):
    """Compare models against benchmarks by average SPC."""
    config = _config(args, init=args.init_method or INIT_PMDS)
    config.model_seed = args.seed
    config.model_init = INIT_PROVIDED if args.init else args.init_method
    samples = load_samples(args.graphs, init_dir=args.init, config=config)
    criteria = [load_criterion(token) for token in args.criteria]
    report = compare(args.models, args.benchmarks, samples, criteria, config)
    write_report(report, args.out, heatmap=not args.no_heatmap, logger=config.log)
    for criterion in report.criteria:
        print(f"Average SPC ({criterion}), rows = benchmarks, columns = models:")
        print("   " + "\t".join(["", *report.models]))
        for benchmark, row in zip(report.benchmarks, report.matrix(criterion)):
            cells = ["n/a" if v is None else f"{v:.2f}%" for v in row]
            print("   " + "\t".join([benchmark, *cells]))
    flagged = report.flagged_cells()
    if flagged:
        print(f"⚠️  {len(flagged)} cells exceed the failure threshold; see {os.path.join(args.out, 'report.json')}")
    print(f"✅ Report written to {args.out}")


def cmd_render(args):
    """Render one layout as SVG."""
    graph = load_graph(args.graph, graph_format(args.graph))
    layout = load_layout(args.layout)
    opts = RenderOptions(width_px=args.width, node_radius=args.node_radius,
                         edge_width=args.edge_width, margin=args.margin)
    atomic_write_text(args.out, render_svg(layout, graph, opts))
    print(f"✅ Rendered {args.out}")


def _add_init_method(parser, default: Optional[str] = INIT_PMDS):
    parser.add_argument(
        "--init-method",
        choices=[INIT_PMDS, INIT_RANDOM],
        default=default,
        help="Generator input layout (default: %(default)s)"
    )


def create_parser():
    """Create the argument parser."""
    parser = argparse.ArgumentParser(
        description="Graph layouts from a self-challenging adversarial generator",
        prog="advlayout"
    )

    parser.add_argument(
        "-v", "--verbose",
        action="store_true",
        help="Enable verbose logging"
    )
    parser.add_argument(
        "--workers",
        type=int,
        default=4,
        help="Concurrent layout jobs during eval (default: 4)"
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Run seed; every random choice derives from it (default: 0)"
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    gen_parser = subparsers.add_parser("gen-data", parents=[common], help="Generate synthetic graphs")
    gen_parser.add_argument("--count", type=int, default=30, help="Number of graphs (default: 30)")
    gen_parser.add_argument("--n-min", type=int, default=10, help="Minimum node count (default: 10)")
    gen_parser.add_argument("--n-max", type=int, default=20, help="Maximum node count (default: 20)")
    gen_parser.add_argument("--extra-frac", type=float, default=0.35,
                            help="Extra edges as a fraction of N-1 (default: 0.35)")
    gen_parser.add_argument("--out", required=True, help="Output graph directory")
    gen_parser.set_defaults(func=cmd_gen_data)

    baseline_parser = subparsers.add_parser("baseline", parents=[common], help="Run a classical layout method")
    baseline_parser.add_argument("--method", choices=list(BASELINE_NAMES), required=True)
    baseline_parser.add_argument("--graphs", required=True, help="Graph directory")
    baseline_parser.add_argument("--out", required=True, help="Output layout directory")
    _add_init_method(baseline_parser)
    baseline_parser.set_defaults(func=cmd_baseline)

    collect_parser = subparsers.add_parser("collect", parents=[common], help="Build a good-layout collection")
    collect_parser.add_argument("--graphs", required=True, help="Graph directory")
    collect_parser.add_argument("--layouts", nargs="+", required=True,
                                help="Layout directories and/or baseline names")
    collect_parser.add_argument("--criterion", default="stress",
                                help="Criterion id, 'combined', or a spec JSON file (default: stress)")
    collect_parser.add_argument("--out", required=True, help="Collection manifest path")
    _add_init_method(collect_parser)
    collect_parser.set_defaults(func=cmd_collect)

    train_parser = subparsers.add_parser("train", parents=[common], help="Train the layout generator")
    train_parser.add_argument("--graphs", required=True, help="Graph directory")
    train_parser.add_argument("--collection", help="Initial collection manifest")
    train_parser.add_argument("--bootstrap", choices=[BOOTSTRAP_COLLECTION, BOOTSTRAP_SELF],
                              help="Where the initial good layouts come from")
    train_parser.add_argument("--criterion", help="Criterion id, 'combined', or a spec JSON file")
    train_parser.add_argument("--config", help="train.json with 'arch' and 'train' sections")
    train_parser.add_argument("--epochs", type=int, help="Override the configured epoch count")
    train_parser.add_argument("--no-self-challenge", action="store_true",
                              help="Keep the collection fixed (plain conditional RGAN)")
    train_parser.add_argument("--resume", help="Checkpoint to continue from")
    train_parser.add_argument("--out", required=True, help="Checkpoint directory")
    train_parser.set_defaults(func=cmd_train)

    draw_parser = subparsers.add_parser("draw", parents=[common], help="Lay out graphs with a trained generator")
    draw_parser.add_argument("--checkpoint", required=True, help="Checkpoint file")
    draw_parser.add_argument("--graphs", required=True, help="Graph directory")
    draw_parser.add_argument("--init", help="Directory of initial layouts (default: recompute)")
    draw_parser.add_argument("--out", required=True, help="Output layout directory")
    _add_init_method(draw_parser, default=None)
    draw_parser.set_defaults(func=cmd_draw)

    eval_parser = subparsers.add_parser("eval", parents=[common], help="Compare methods by average SPC")
    eval_parser.add_argument("--models", nargs="+", required=True,
                             help="Checkpoints, layout directories or baseline names ([name=]target)")
    eval_parser.add_argument("--benchmarks", nargs="+", required=True,
                             help="Checkpoints, layout directories or baseline names ([name=]target)")
    eval_parser.add_argument("--graphs", required=True, help="Test graph directory")
    eval_parser.add_argument("--criteria", nargs="+", default=["stress"],
                             help="Criterion ids, 'combined', or spec JSON files (default: stress)")
    eval_parser.add_argument("--init", help="Directory of initial layouts (default: recompute)")
    eval_parser.add_argument("--no-heatmap", action="store_true", help="Skip SVG heatmaps")
    eval_parser.add_argument("--out", required=True, help="Report directory")
    _add_init_method(eval_parser, default=None)
    eval_parser.set_defaults(func=cmd_eval)

    render_parser = subparsers.add_parser("render", help="Render a layout as SVG")
    render_parser.add_argument("--layout", required=True, help="Layout file (text or JSON)")
    render_parser.add_argument("--graph", required=True, help="Graph file (edge list or GraphML)")
    render_parser.add_argument("--out", required=True, help="Output SVG path")
    render_parser.add_argument("--width", type=int, default=600, help="Viewport width in px (default: 600)")
    render_parser.add_argument("--node-radius", type=float, default=4.0)
    render_parser.add_argument("--edge-width", type=float, default=1.0)
    render_parser.add_argument("--margin", type=float, default=20.0)
    render_parser.set_defaults(func=cmd_render, seed=None)

    return parser


def _report_error(kind: str, message: str, exit_code: int) -> None:
    print(f"❌ Error: {message}", file=sys.stderr)
    print(json.dumps({"error": kind, "message": message, "exit_code": exit_code}, sort_keys=True), file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = create_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    setup_logging(args.verbose)
    try:
        args.func(args)
        return 0
    except KeyboardInterrupt:
        print("\n❌ Operation cancelled", file=sys.stderr)
        return EXIT_INTERRUPTED
    except AdvLayoutError as e:
        _report_error(e.kind, str(e), e.exit_code)
        return e.exit_code
    except Exception as e:
        _report_error("InternalError", str(e), EXIT_RUNTIME)
        if args.verbose:
            import traceback
            traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
