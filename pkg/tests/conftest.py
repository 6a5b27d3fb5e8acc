"""Shared test fixtures: tiny enumerable search spaces and the published
cost reference rows."""
import numpy as np
import pytest

from autobss.cost import Constraint, CostModel
from autobss.space import (DimensionSpec, Family, FamilyLayout, Role,
                           SearchSpace)

# (preset, preset kwargs, published code, flops, params,
#  flops tolerance, params tolerance)
PUBLISHED_ROWS = [
    ("resnet18", {}, (64, 128, 256, 512, 2, 2, 2, 2),
     1.81e9, 11.69e6, 0.02, 0.01),
    ("resnet18", {}, (32, 64, 128, 512, 1, 2, 8, 5),
     1.74e9, 24.87e6, 0.02, 0.01),
    ("resnet18", {}, (32, 32, 128, 1024, 4, 14, 14, 1),
     1.81e9, 16.15e6, 0.02, 0.01),
    ("resnet50", {}, (256, 512, 1024, 2048, 3, 4, 6, 3, 64, 128, 256, 512),
     4.09e9, 25.55e6, 0.02, 0.01),
    ("resnet50", {}, (128, 640, 1024, 3072, 8, 7, 4, 3, 48, 80, 256, 384),
     3.69e9, 23.00e6, 0.02, 0.01),
    ("resnet50", {}, (128, 256, 768, 2048, 9, 6, 9, 3, 48, 128, 192, 512),
     4.03e9, 23.73e6, 0.02, 0.01),
    ("mobilenetv2", {},
     (24, 32, 64, 96, 160, 320, 2, 3, 4, 3, 3, 1, 6, 6, 6, 6, 6, 6),
     300e6, 3.50e6, 0.02, 0.01),
    ("mobilenetv2", {},
     (20, 48, 80, 144, 200, 480, 2, 4, 3, 2, 5, 1, 3, 3, 3, 6, 3, 3),
     298e6, 4.00e6, 0.02, 0.01),
    ("mobilenetv2", {},
     (24, 40, 64, 96, 120, 240, 4, 3, 2, 3, 6, 2, 3, 6, 6, 3, 6, 6),
     296e6, 3.92e6, 0.02, 0.01),
    ("mobilenetv2", {"fixed_stage_scale": 2 / 3},
     (16, 20, 40, 56, 96, 192, 2, 3, 4, 3, 3, 1, 6, 6, 6, 6, 6, 6),
     130e6, 2.2e6, 0.02, 0.01),
    ("mobilenetv2", {"fixed_stage_scale": 2 / 3},
     (16, 20, 40, 56, 96, 288, 1, 4, 6, 1, 6, 1, 3, 6, 6, 3, 6, 6),
     130e6, 2.7e6, 0.02, 0.01),
    ("efficientnet_b0", {},
     (24, 40, 80, 112, 192, 320, 2, 2, 3, 3, 4, 1, 6, 6, 6, 6, 6, 6),
     385e6, 5.29e6, 0.03, 0.02),
    ("efficientnet_b0", {},
     (24, 40, 96, 112, 192, 640, 1, 2, 1, 2, 6, 1, 6, 6, 6, 3, 6, 6),
     356e6, 6.67e6, 0.03, 0.02),
    ("efficientnet_b0", {},
     (28, 48, 80, 140, 144, 240, 3, 1, 4, 2, 6, 3, 3, 3, 6, 3, 6, 6),
     381e6, 6.39e6, 0.03, 0.02),
    ("efficientnet_b1", {},
     (24, 40, 80, 112, 192, 320, 3, 3, 4, 4, 5, 2, 6, 6, 6, 6, 6, 6),
     685e6, 7.79e6, 0.03, 0.02),
    ("efficientnet_b1", {},
     (16, 24, 128, 140, 240, 400, 4, 6, 2, 4, 5, 2, 3, 3, 3, 3, 6, 6),
     673e6, 10.19e6, 0.03, 0.02),
    ("efficientnet_b1", {},
     (24, 64, 96, 112, 192, 240, 3, 1, 3, 4, 7, 5, 6, 3, 3, 3, 6, 6),
     684e6, 10.17e6, 0.03, 0.02),
]


def make_basic_space(c2=(8, 16), c3=(16, 32, 64), l2=(1, 2, 3), l3=(1, 2),
                     resolution=32, num_classes=10):
    """Two-stage basic-block space, small enough to enumerate."""
    dims = (
        DimensionSpec(Role.CHANNELS, 2, c2),
        DimensionSpec(Role.CHANNELS, 3, c3),
        DimensionSpec(Role.BLOCKS, 2, l2),
        DimensionSpec(Role.BLOCKS, 3, l3),
    )
    layout = FamilyLayout(
        block_kind="basic", stem_kernel=3, stem_stride=2,
        stem_channels=None, stem_pool=False, fixed_stages=(),
        stage_ids=(2, 3), strides=(1, 2), kernels=(3, 3), se_ratio=0.0,
        head_conv_channels=None)
    return SearchSpace(family=Family.RESNET_BASIC, dims=dims, layout=layout,
                       input_resolution=resolution, num_classes=num_classes)


def make_bottleneck_space_3d(c=(32, 64, 96, 128), l=(1, 2, 3),
                             b=(1, 2, 3, 4), resolution=32, num_classes=10):
    """One bottleneck stage: exactly three code dimensions (C, L, B)."""
    dims = (
        DimensionSpec(Role.CHANNELS, 2, c),
        DimensionSpec(Role.BLOCKS, 2, l),
        DimensionSpec(Role.BOTTLENECK, 2, b),
    )
    layout = FamilyLayout(
        block_kind="bottleneck", stem_kernel=3, stem_stride=2,
        stem_channels=16, stem_pool=False, fixed_stages=(),
        stage_ids=(2,), strides=(1,), kernels=(3,), se_ratio=0.0,
        head_conv_channels=None)
    return SearchSpace(family=Family.RESNET_BOTTLENECK, dims=dims,
                       layout=layout, input_resolution=resolution,
                       num_classes=num_classes)


def enumerate_feasible(space, constraint):
    """Brute-force list of feasible codes; the oracle for sampler tests."""
    model = CostModel(space)
    return [code for code in space.enumerate_codes()
            if model.metric_of(code, constraint.metric)
            <= constraint.threshold]


def median_constraint(space, metric="flops", quantile=0.5):
    """Constraint at a cost quantile of the enumerated space, so it binds
    without emptying the space."""
    model = CostModel(space)
    costs = sorted(model.metric_of(code, metric)
                   for code in space.enumerate_codes())
    return Constraint(metric, int(costs[int(len(costs) * quantile)]))


@pytest.fixture
def tiny_space():
    return make_basic_space()


@pytest.fixture
def tiny3_space():
    return make_bottleneck_space_3d()


@pytest.fixture
def rng():
    return np.random.default_rng(0)
