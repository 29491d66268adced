"""Reference model construction and the tensor-name mapping.

Weights come from torchvision's MobileNetV3-Large graph. The published
checkpoint is not fetchable in offline environments, so the weights are
drawn from a seeded generator instead: architecture, layer shapes, BN
epsilons, and every operator are still torchvision's, which is what the
conformance tests exercise. The draw is deterministic per seed, so both
export scripts called with the same seed describe the same network.

Exported names follow the engine's convention:

    backbone.init.{conv.weight, bn.gamma, bn.beta, bn.mean, bn.var, bn.eps}
    backbone.rK.expand.*        (absent when the block has no expansion)
    backbone.rK.dw.*
    backbone.rK.se.fc1.conv.{weight,bias}, ...fc2...   (SE blocks only)
    backbone.rK.project.*

for K = 1..14, counting torchvision's features[1..14].
"""

import numpy as np
import torch
from torchvision.models import mobilenet_v3_large
from torchvision.ops.misc import Conv2dNormActivation, SqueezeExcitation

BLOCK_COUNT = 14


def build_reference(seed):
    """MobileNetV3-Large in eval mode with seeded deterministic weights."""
    torch.set_num_threads(1)
    torch.manual_seed(int(seed))  # constructor init (classifier etc.) draws globally
    model = mobilenet_v3_large(weights=None)
    gen = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for _, module in model.named_modules():
            if isinstance(module, torch.nn.Conv2d):
                fan_in = module.weight.shape[1] * module.weight.shape[2] * module.weight.shape[3]
                bound = (6.0 / fan_in) ** 0.5
                module.weight.uniform_(-bound, bound, generator=gen)
                if module.bias is not None:
                    module.bias.uniform_(-0.5, 0.5, generator=gen)
            elif isinstance(module, torch.nn.BatchNorm2d):
                module.weight.uniform_(0.8, 1.2, generator=gen)
                module.bias.uniform_(-0.1, 0.1, generator=gen)
                module.running_mean.uniform_(-0.2, 0.2, generator=gen)
                module.running_var.uniform_(0.5, 1.5, generator=gen)
    model.eval()
    return model


def to_numpy(tensor):
    return tensor.detach().cpu().numpy().astype(np.float32)


def block_parts(block):
    """Split one inverted residual into (expand, depthwise, se, project)."""
    cnas = [m for m in block.block if isinstance(m, Conv2dNormActivation)]
    ses = [m for m in block.block if isinstance(m, SqueezeExcitation)]
    depthwise = next(m for m in cnas if m[0].groups > 1)
    project = cnas[-1]
    expand = cnas[0] if cnas[0] is not depthwise else None
    se = ses[0] if ses else None
    return expand, depthwise, se, project


def _conv_entries(entries, prefix, conv):
    entries.append((f"{prefix}.weight", to_numpy(conv.weight)))
    if conv.bias is not None:
        entries.append((f"{prefix}.bias", to_numpy(conv.bias)))


def _conv_bn_entries(entries, prefix, cna):
    conv, bn = cna[0], cna[1]
    _conv_entries(entries, f"{prefix}.conv", conv)
    entries.append((f"{prefix}.bn.gamma", to_numpy(bn.weight)))
    entries.append((f"{prefix}.bn.beta", to_numpy(bn.bias)))
    entries.append((f"{prefix}.bn.mean", to_numpy(bn.running_mean)))
    entries.append((f"{prefix}.bn.var", to_numpy(bn.running_var)))
    entries.append((f"{prefix}.bn.eps", np.array([bn.eps], dtype=np.float32)))


def backbone_entries(model):
    """Every prefix tensor as (name, array), initial conv through r14."""
    entries = []
    _conv_bn_entries(entries, "backbone.init", model.features[0])
    for k in range(1, BLOCK_COUNT + 1):
        expand, depthwise, se, project = block_parts(model.features[k])
        name = f"backbone.r{k}"
        if expand is not None:
            _conv_bn_entries(entries, f"{name}.expand", expand)
        _conv_bn_entries(entries, f"{name}.dw", depthwise)
        if se is not None:
            _conv_entries(entries, f"{name}.se.fc1.conv", se.fc1)
            _conv_entries(entries, f"{name}.se.fc2.conv", se.fc2)
        _conv_bn_entries(entries, f"{name}.project", project)
    return entries
