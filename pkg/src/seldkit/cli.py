"""Command-line entry point: prior, loss, grad-check, eval and bench.

Exit codes: 0 on success, 1 on validation/usage errors, 2 when an internal
check fails (grad-check exceeding its tolerance). JSON goes to stdout with
fixed key order; informational notes go to stderr unless --quiet.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from seldkit import bench as bench_mod
from seldkit import data, gradcheck, losses, metrics, priors

_LOG_BASE = {"e": "natural", "10": "base10"}


class CliError(Exception):
    """Usage problem; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2)
        raise CliError(message)


def _fmt(x: float) -> str:
    return repr(float(x))


def _note(args, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--log-base", choices=("e", "10"), default="e",
                        help="log base of the rarity exponent (default: e)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument("--quiet", action="store_true",
                        help="suppress informational messages on stderr")

    parser = _Parser(prog="seldkit",
                     description="geometry- and rarity-aware ACCDOA loss toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("prior", parents=[common],
                       help="build the rarity-prior table from a count file")
    p.add_argument("--counts", required=True, help="count CSV (class,name,count)")
    p.add_argument("--json", dest="json_path", default=None,
                   help="also write the table as JSON to this path")
    p.set_defaults(func=cmd_prior)

    p = sub.add_parser("loss", parents=[common],
                       help="evaluate one loss variant over a frames file")
    p.add_argument("--variant", required=True, choices=losses.VARIANTS)
    p.add_argument("--frames", required=True, help="frames file (see --layout)")
    p.add_argument("--layout", choices=data.LAYOUTS, default="csv")
    p.add_argument("--counts", default=None,
                   help="count CSV for the priors; defaults to counts derived from the frames")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("grad-check", parents=[common],
                       help="verify analytic gradients against finite differences")
    p.add_argument("--cells", type=int, default=1000)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--variants", default=None,
                   help="comma-separated subset (default: all)")
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("eval", parents=[common],
                       help="score predictions against reference activity")
    p.add_argument("--frames", required=True)
    p.add_argument("--layout", choices=data.LAYOUTS, default="csv")
    p.add_argument("--threshold-deg", type=float, default=20.0)
    p.add_argument("--activity-threshold", type=float, default=0.5)
    p.add_argument("--report", default=None, help="write the per-class CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common],
                       help="train the variant ladder on a synthetic long-tail set")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--frames", type=int, default=2000)
    p.add_argument("--ir", type=float, default=100.0, help="imbalance ratio")
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.3)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--hidden", type=int, default=0, help="hidden width (0 = linear)")
    p.add_argument("--doa-noise-deg", type=float, default=10.0)
    p.add_argument("--feature-dim", type=int, default=24)
    p.add_argument("--feature-noise", type=float, default=0.06)
    p.add_argument("--variants", default=None,
                   help="comma-separated subset (default: all)")
    p.add_argument("--out", default=None, help="directory for result files")
    p.set_defaults(func=cmd_bench)

    return parser


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_prior(args) -> int:
    names, counts = data.load_counts(args.counts)
    table = priors.build_priors(counts, _LOG_BASE[args.log_base])
    print(f"IR = {_fmt(table.ir)}")
    print(f"gamma = {_fmt(table.gamma)} (log base: {table.log_base})")
    print(f"{'class':>5} {'name':<20} {'count':>8} {'pi':>12} {'w':>12}")
    for c, name in enumerate(names):
        print(f"{c:>5} {name:<20} {int(table.counts[c]):>8} "
              f"{table.pi[c]:>12.6f} {table.w[c]:>12.6f}")
    if args.json_path:
        payload = {
            "ir": float(table.ir),
            "gamma": float(table.gamma),
            "log_base": table.log_base,
            "classes": [
                {"index": c, "name": names[c], "count": int(table.counts[c]),
                 "pi": float(table.pi[c]), "w": float(table.w[c])}
                for c in range(table.num_classes)
            ],
        }
        Path(args.json_path).write_text(json.dumps(payload, indent=2) + "\n")
        _note(args, f"wrote {args.json_path}")
    return 0


def cmd_loss(args) -> int:
    dataset = data.load_frames(args.frames, args.layout)
    if args.counts:
        _, counts = data.load_counts(args.counts)
    else:
        counts = dataset.frame_counts
    table = priors.build_priors(counts, _LOG_BASE[args.log_base])
    config = losses.LossConfig.from_variant(args.variant, _LOG_BASE[args.log_base])
    breakdown = losses.total_loss(dataset, table, config)
    payload = {"variant": config.variant, "log_base": config.log_base,
               **breakdown.to_dict()}
    print(json.dumps(payload, indent=2))
    return 0


def cmd_grad_check(args) -> int:
    variants = args.variants.split(",") if args.variants else None
    results = gradcheck.run_grad_check(variants=variants, cells=args.cells,
                                       step=args.step, tol=args.tol, seed=args.seed)
    failed = False
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{res.variant:<3} max_rel_error={res.max_rel_error:.3e} "
              f"tol={res.tol:.1e} {status}")
        failed = failed or not res.passed
    return 2 if failed else 0


def cmd_eval(args) -> int:
    dataset = data.load_frames(args.frames, args.layout)
    scored = metrics.evaluate(dataset, threshold_deg=args.threshold_deg,
                              activity_threshold=args.activity_threshold)
    print(json.dumps(scored.to_dict(class_names=dataset.class_names), indent=2))
    if args.report:
        data.save_report(scored, args.report, dataset.class_names)
        _note(args, f"wrote {args.report}")
    return 0


def cmd_bench(args) -> int:
    config = bench_mod.SynthConfig(
        num_classes=args.classes, frames=args.frames, imbalance_ratio=args.ir,
        doa_noise_deg=args.doa_noise_deg, feature_dim=args.feature_dim,
        seed=args.seed, feature_noise=args.feature_noise,
    )
    variants = args.variants.split(",") if args.variants else None
    _note(args, f"training {len(variants or losses.VARIANTS)} variants "
                f"({config.frames} frames, {config.num_classes} classes, "
                f"IR {config.imbalance_ratio:g}, seed {config.seed})")
    results = bench_mod.run_ladder(config, epochs=args.epochs, lr=args.lr,
                                   variants=variants, momentum=args.momentum,
                                   hidden=args.hidden,
                                   log_base=_LOG_BASE[args.log_base])
    print(f"{'variant':<8} {'ER20':>8} {'F20':>8} {'LE_CD':>8} {'LR_CD':>8} {'E_SELD':>8}")
    for res in results:
        m = res.metrics
        print(f"{res.variant.variant:<8} {m.er20:>8.4f} {m.f20:>8.4f} "
              f"{m.le_cd:>8.2f} {m.lr_cd:>8.4f} {m.e_seld:>8.4f}")
    if args.out:
        _write_bench_outputs(args.out, results)
        _note(args, f"wrote result files to {args.out}")
    return 0


def _write_bench_outputs(out_dir, results) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for res in results:
        path = out / f"result_{res.variant.variant}.json"
        path.write_text(json.dumps(res.to_dict(), indent=2) + "\n")

    lines = ["variant,ER20,F20,LE_CD,LR_CD,E_SELD"]
    for res in results:
        m = res.metrics
        lines.append(",".join([res.variant.variant, _fmt(m.er20), _fmt(m.f20),
                               _fmt(m.le_cd), _fmt(m.lr_cd), _fmt(m.e_seld)]))
    (out / "ladder.csv").write_text("\n".join(lines) + "\n")

    names = [res.variant.variant for res in results]
    num_classes = len(results[0].per_class_recall)
    lines = ["class," + ",".join(names)]
    for c in range(num_classes):
        row = [str(c)] + [_fmt(res.per_class_recall[c]) for res in results]
        lines.append(",".join(row))
    (out / "per_class_recall.csv").write_text("\n".join(lines) + "\n")


def dispatch(argv) -> int:
    """Route argv to a subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValueError, IndexError, OSError, bench_mod.TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
