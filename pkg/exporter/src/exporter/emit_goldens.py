"""Emit golden input/expected pairs as an LVWT container.

    python3 -m exporter.emit_goldens --out goldens.lvw [--seed 0]

Cases, all computed with torch and stored as float32:

    case.conv.{x,weight,bias,stride,padding,y}   strided padded conv2d
    case.bn.{x,gamma,beta,mean,var,eps,y}        inference batch norm
    case.hswish.{x,y}                            hard-swish
    case.se.{x,fc1.*,fc2.*,y}                    squeeze-excitation gate
    case.prefix.x                                1x3x64x64 input in [0,1]
    case.stem.y, case.r1.y ... case.r9.y         every block boundary of
                                                 the combination-II prefix

Block goldens use the same seeded reference network as export_backbone,
so a backbone.lvw and a goldens.lvw produced with one seed describe the
same weights. Re-running with the same seed is byte-identical.
"""

import argparse
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .container import write_lvwt
from .reference import build_reference, to_numpy

PREFIX_BLOCKS = 9


def _uniform(gen, lo, hi, *shape):
    return torch.empty(shape).uniform_(lo, hi, generator=gen)


def conv_case(entries, gen):
    x = _uniform(gen, -1, 1, 2, 4, 9, 9)
    fan_in = 4 * 3 * 3
    w = _uniform(gen, -((6.0 / fan_in) ** 0.5), (6.0 / fan_in) ** 0.5, 5, 4, 3, 3)
    b = _uniform(gen, -0.5, 0.5, 5)
    y = F.conv2d(x, w, b, stride=2, padding=1)
    entries += [
        ("case.conv.x", to_numpy(x)),
        ("case.conv.weight", to_numpy(w)),
        ("case.conv.bias", to_numpy(b)),
        ("case.conv.stride", np.array([2.0], np.float32)),
        ("case.conv.padding", np.array([1.0], np.float32)),
        ("case.conv.y", to_numpy(y)),
    ]


def bn_case(entries, gen):
    x = _uniform(gen, -2, 2, 1, 6, 5, 5)
    gamma = _uniform(gen, 0.5, 1.5, 6)
    beta = _uniform(gen, -0.5, 0.5, 6)
    mean = _uniform(gen, -0.5, 0.5, 6)
    var = _uniform(gen, 0.3, 1.7, 6)
    eps = 1e-3
    y = F.batch_norm(x, mean, var, gamma, beta, training=False, eps=eps)
    entries += [
        ("case.bn.x", to_numpy(x)),
        ("case.bn.gamma", to_numpy(gamma)),
        ("case.bn.beta", to_numpy(beta)),
        ("case.bn.mean", to_numpy(mean)),
        ("case.bn.var", to_numpy(var)),
        ("case.bn.eps", np.array([eps], np.float32)),
        ("case.bn.y", to_numpy(y)),
    ]


def hswish_case(entries, gen):
    x = _uniform(gen, -4, 4, 1, 3, 7, 7)  # spans both breakpoints at +-3
    entries += [
        ("case.hswish.x", to_numpy(x)),
        ("case.hswish.y", to_numpy(F.hardswish(x))),
    ]


def se_case(entries, gen):
    channels, reduced = 16, 8
    x = _uniform(gen, -1, 1, 1, channels, 6, 6)
    w1 = _uniform(gen, -0.25, 0.25, reduced, channels, 1, 1)
    b1 = _uniform(gen, -0.5, 0.5, reduced)
    w2 = _uniform(gen, -0.25, 0.25, channels, reduced, 1, 1)
    b2 = _uniform(gen, -0.5, 0.5, channels)
    gate = F.adaptive_avg_pool2d(x, 1)
    gate = F.relu(F.conv2d(gate, w1, b1))
    gate = F.hardsigmoid(F.conv2d(gate, w2, b2))
    entries += [
        ("case.se.x", to_numpy(x)),
        ("case.se.fc1.weight", to_numpy(w1)),
        ("case.se.fc1.bias", to_numpy(b1)),
        ("case.se.fc2.weight", to_numpy(w2)),
        ("case.se.fc2.bias", to_numpy(b2)),
        ("case.se.y", to_numpy(x * gate)),
    ]


def prefix_cases(entries, gen, seed):
    model = build_reference(seed)
    x = _uniform(gen, 0, 1, 1, 3, 64, 64)
    entries.append(("case.prefix.x", to_numpy(x)))
    with torch.no_grad():
        h = model.features[0](x)
        entries.append(("case.stem.y", to_numpy(h)))
        for k in range(1, PREFIX_BLOCKS + 1):
            h = model.features[k](h)
            entries.append((f"case.r{k}.y", to_numpy(h)))


def emit(out_path, seed=0):
    torch.set_num_threads(1)
    gen = torch.Generator().manual_seed(int(seed) + 1)  # distinct from weight stream
    entries = []
    conv_case(entries, gen)
    bn_case(entries, gen)
    hswish_case(entries, gen)
    se_case(entries, gen)
    prefix_cases(entries, gen, seed)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_lvwt(entries, out_path)
    return entries


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    entries = emit(args.out, args.seed)
    print(f"wrote {args.out}: {len(entries)} tensors, seed {args.seed}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
