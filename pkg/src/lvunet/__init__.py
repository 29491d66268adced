"""CPU inference engine and re-parametrization toolkit for LV-UNet models."""

from .backbone import (
    MOBILENETV3_LARGE_BLOCKS,
    BackbonePrefix,
    BlockConfig,
    ConvBN,
    InvertedResidual,
    SqueezeExcite,
    backbone_forward,
)
from .container import FormatError, WeightContainer, read_container, write_container
from .imageio import normalize, read_image, read_pgm, read_ppm, write_pgm_mask
from .losses import bce_loss, dice_loss, dice_score, iou, mixed_loss
from .model import (
    COMBINATIONS,
    FusibleBlock,
    LVUNet,
    build,
    forward,
    fusible_forward,
    load_backbone,
    load_model,
    named_tensors,
    save_model,
)
from .reparam import (
    FusionReport,
    count_flops,
    count_params,
    fuse_conv_bn,
    merge_conv1x1,
    to_deploy,
)
from .schedule import ScheduleSpec, slope
from .series_act import SeriesActivationParams, series_act
from .tensor_ops import (
    BatchNormParams,
    ConvSpec,
    add,
    batch_norm_infer,
    conv2d,
    global_avg_pool,
    hard_sigmoid,
    hard_swish,
    im2col,
    im2col_matmul_conv,
    leaky_relu,
    max_pool2d,
    relu,
    relu6,
    run_conv,
    sigmoid,
    upsample_bilinear2x,
)

__version__ = "0.1.0"
