"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 bad data (unreadable or malformed
files, wrong shapes, invalid state), 3 verification failure. Results go to
stdout, diagnostics to stderr. count, verify, and eval accept --format kv
for machine-readable one-key=value-per-line output.
"""

import argparse
import sys

import numpy as np

from .imageio import normalize, read_image, read_pgm, write_pgm_mask
from .losses import dice_score, iou
from .model import COMBINATIONS, build, forward, load_model, save_model
from .reparam import count_flops, count_params, to_deploy
from .schedule import METHODS, ScheduleSpec, slope
from .tensor_ops import sigmoid


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_model_args(p, with_mode=False):
    p.add_argument("--combination", choices=sorted(COMBINATIONS), default="II")
    p.add_argument("--series", type=int, default=1, metavar="N",
                   help="series activation radius n (default 1)")
    p.add_argument("--classes", type=int, default=1)
    p.add_argument("--skip", choices=("add", "concat"), default="add")
    if with_mode:
        p.add_argument("--mode", choices=("train", "deploy"), default="train")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lvunet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a container with fresh random weights")
    _add_model_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("count", help="parameter and multiply-accumulate counts")
    _add_model_args(p, with_mode=True)
    p.add_argument("--size", type=int, default=256, help="input height and width")
    p.add_argument("--format", choices=("text", "kv"), default="text")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("deploy", help="fold train-mode weights into deploy form")
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--combination", choices=sorted(COMBINATIONS),
                   help="cross-check against the container (optional)")
    p.add_argument("--series", type=int, metavar="N",
                   help="cross-check against the container (optional)")
    p.set_defaults(func=cmd_deploy)

    p = sub.add_parser("infer", help="segment one image into a P5 mask")
    p.add_argument("--weights", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("train", "deploy"),
                   help="cross-check against the container (optional)")
    p.add_argument("--slope", type=float, default=1.0,
                   help="leaky-ReLU slope for train-mode weights (ignored in deploy)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("verify", help="check train/deploy forward equivalence")
    _add_model_args(p)
    p.add_argument("--weights", help="train-mode container (default: fresh random models)")
    p.add_argument("--deploy-weights", help="deployed container to compare against")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--format", choices=("text", "kv"), default="text")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval", help="overlap metrics between two P5 masks")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--format", choices=("text", "kv"), default="text")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("schedule", help="print the slope schedule")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--method", choices=METHODS, default="cosine")
    p.add_argument("--epoch", type=int, help="print one epoch instead of the table")
    p.set_defaults(func=cmd_schedule)

    return parser


def cmd_init(args) -> int:
    model = build(args.combination, args.series, args.classes, args.skip, seed=args.seed)
    save_model(model, args.out)
    total, _ = count_params(model)
    print(f"wrote {args.out} (combination {args.combination}, {total} parameters)")
    return 0


def cmd_count(args) -> int:
    if args.size % 128:
        raise ValueError(f"size {args.size} must be divisible by 128")
    model = build(args.combination, args.series, args.classes, args.skip, mode=args.mode)
    params_total, params = count_params(model)
    flops_total, flops = count_flops(model, args.size, args.size)
    if args.format == "kv":
        print(f"params_total={params_total}")
        print(f"flops_total={flops_total}")
        for key in params:
            print(f"params.{key}={params[key]}")
            print(f"flops.{key}={flops[key]}")
    else:
        print(f"combination {args.combination} mode {args.mode} "
              f"input {args.size}x{args.size}")
        print(f"{'module':<12}{'params':>12}{'flops':>16}")
        for key in params:
            print(f"{key:<12}{params[key]:>12}{flops[key]:>16}")
        print(f"{'total':<12}{params_total:>12}{flops_total:>16}")
    return 0


def cmd_deploy(args) -> int:
    model = load_model(args.weights)
    if args.combination and args.combination != model.combination:
        raise ValueError(f"container holds combination {model.combination}, "
                         f"not {args.combination}")
    if args.series is not None and args.series != model.series_n:
        raise ValueError(f"container holds series n={model.series_n}, not {args.series}")
    deployed, report = to_deploy(model)
    save_model(deployed, args.out)
    for b in report.blocks:
        print(f"{b.name}: {b.original_params} -> {b.fused_params} params, "
              f"max gap {b.max_discrepancy:.3e}")
    print(f"total {report.original_params} -> {report.fused_params} params")
    print(f"wrote {args.out}")
    return 0


def cmd_infer(args) -> int:
    model = load_model(args.weights)
    if args.mode and args.mode != model.mode:
        raise ValueError(f"container holds {model.mode}-mode weights, not {args.mode}")
    if model.num_classes != 1:
        raise ValueError("infer writes a binary mask; weights have "
                         f"{model.num_classes} classes")
    x = read_image(args.image)
    if x.shape[1] == 1:
        x = np.repeat(x, 3, axis=1)  # grayscale: replicate to RGB
    x = normalize(x)
    logits = forward(model, x, slope=args.slope)
    prob = sigmoid(logits)
    mask = prob[0, 0] > args.threshold
    write_pgm_mask(mask, args.out)
    frac = float(mask.mean())
    print(f"wrote {args.out} ({mask.shape[1]}x{mask.shape[0]}, "
          f"{100.0 * frac:.1f}% foreground)")
    return 0


def cmd_verify(args) -> int:
    if args.size % 128:
        raise ValueError(f"size {args.size} must be divisible by 128")
    pairs = []
    if args.weights:
        model = load_model(args.weights)
        if args.deploy_weights:
            deployed = load_model(args.deploy_weights)
            if deployed.mode != "deploy":
                raise ValueError("--deploy-weights container is not in deploy mode")
        else:
            deployed, _ = to_deploy(model)
        pairs.append((model, deployed))
    else:
        for seed in range(args.seeds):
            model = build(args.combination, args.series, args.classes, args.skip, seed=seed)
            deployed, _ = to_deploy(model)
            pairs.append((model, deployed))

    kv = args.format == "kv"
    worst = 0.0
    for i, (model, deployed) in enumerate(pairs):
        rng = np.random.default_rng(1000 + i)
        x = rng.uniform(0.0, 1.0, size=(1, 3, args.size, args.size)).astype(np.float32)
        a = forward(model, x, slope=1.0)
        b = forward(deployed, x)
        gap = float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64))))
        worst = max(worst, gap)
        if kv:
            print(f"seed_{i}={gap:.6e}")
        else:
            print(f"seed {i}: max |train - deploy| = {gap:.6e}")
    ok = worst <= args.tolerance
    if kv:
        print(f"max_gap={worst:.6e}")
        print(f"tolerance={args.tolerance:.6e}")
        print(f"status={'pass' if ok else 'fail'}")
    else:
        print(f"max gap {worst:.6e} vs tolerance {args.tolerance:.6e}: "
              f"{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 3


def cmd_eval(args) -> int:
    pred = read_pgm(args.pred) > 0.5
    truth = read_pgm(args.truth) > 0.5
    i = iou(pred, truth)
    d = dice_score(pred, truth)
    if args.format == "kv":
        print(f"iou={i:.6f}")
        print(f"dice={d:.6f}")
    else:
        print(f"IoU {i:.6f}  Dice {d:.6f}")
    return 0


def cmd_schedule(args) -> int:
    spec = ScheduleSpec(args.method, args.epochs)
    if args.epoch is not None:
        print(f"{slope(spec, args.epoch):.10f}")
        return 0
    for e in range(args.epochs + 1):
        print(f"{e} {slope(spec, e):.10f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
