"""Search space definitions: code layouts, constraint grids, presets.

A block-stacking code is a fixed-length tuple of integers, one entry per
dimension of the search space.  Channel (C), block-count (L), expansion (T)
dimensions store their value directly; bottleneck (B) dimensions store the
ratio numerator in {1, 2, 3, 4}, meaning a bottleneck width of C*n/8, so
that every dimension has a code-independent value grid.  Published tuples
print absolute bottleneck widths; :func:`parse_code` / :func:`format_code`
convert between the two.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence, Tuple

import numpy as np

from .errors import CodeValidationError

Code = Tuple[int, ...]


class Role(enum.Enum):
    CHANNELS = "channels"
    BLOCKS = "blocks"
    BOTTLENECK = "bottleneck"
    EXPANSION = "expansion"


class Family(enum.Enum):
    RESNET_BASIC = "ResNetBasic"
    RESNET_BOTTLENECK = "ResNetBottleneck"
    MOBILENETV2 = "MobileNetV2Style"
    EFFICIENTNET = "EfficientNetStyle"


@dataclass(frozen=True)
class DimensionSpec:
    role: Role
    stage_index: int
    values: Tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if not vals:
            raise ValueError("empty value grid")
        if any(v <= 0 for v in vals):
            raise ValueError("non-positive value in grid")
        if any(a >= b for a, b in zip(vals, vals[1:])):
            raise ValueError("value grid must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @property
    def median(self) -> int:
        # upper median for even-sized grids
        return self.values[len(self.values) // 2]


@dataclass(frozen=True)
class FixedStage:
    """A stage whose configuration is not part of the code."""

    stage_id: int
    repeats: int
    out_channels: int
    expansion: int  # 1 means no expansion conv
    kernel: int
    stride: int


@dataclass(frozen=True)
class FamilyLayout:
    """Structural facts shared by every code of one network family."""

    block_kind: str  # basic | bottleneck | mbconv
    stem_kernel: int
    stem_stride: int
    stem_channels: Optional[int]  # None: stem width follows the first C dim
    stem_pool: bool
    fixed_stages: Tuple[FixedStage, ...]
    stage_ids: Tuple[int, ...]  # searched stages, in code order
    strides: Tuple[int, ...]  # first-block stride per searched stage
    kernels: Tuple[int, ...]
    se_ratio: float  # 0 disables squeeze-excitation
    head_conv_channels: Optional[int]


@dataclass(frozen=True)
class SearchSpace:
    family: Family
    dims: Tuple[DimensionSpec, ...]
    layout: FamilyLayout
    input_resolution: int = 224
    num_classes: int = 1000
    preset: str = ""

    @property
    def m(self) -> int:
        return len(self.dims)

    def dims_for(self, role: Role) -> Tuple[DimensionSpec, ...]:
        return tuple(d for d in self.dims if d.role == role)

    def dim_index(self, role: Role, stage_index: int) -> int:
        for i, d in enumerate(self.dims):
            if d.role == role and d.stage_index == stage_index:
                return i
        raise KeyError((role, stage_index))

    def size(self) -> int:
        n = 1
        for d in self.dims:
            n *= len(d.values)
        return n

    def enumerate_codes(self) -> Iterator[Code]:
        """Exhaustive enumeration; only sensible for tiny test spaces."""
        for combo in itertools.product(*(d.values for d in self.dims)):
            yield combo


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray  # 1.0 for constant dimensions
    constant: np.ndarray  # bool mask of flagged constant dimensions

    @classmethod
    def from_codes(cls, codes: Sequence[Code]) -> "StandardizationStats":
        arr = np.asarray(codes, dtype=float)
        mean = arr.mean(axis=0)
        std = arr.std(axis=0)  # population std over the candidate set
        constant = std == 0.0
        std = np.where(constant, 1.0, std)
        return cls(mean=mean, std=std, constant=constant)


def standardize(code: Code, stats: StandardizationStats) -> np.ndarray:
    return (np.asarray(code, dtype=float) - stats.mean) / stats.std


def standardize_all(codes: Sequence[Code], stats: StandardizationStats) -> np.ndarray:
    return (np.asarray(codes, dtype=float) - stats.mean) / stats.std


def destandardize(z: np.ndarray, stats: StandardizationStats) -> Code:
    """Inverse of :func:`standardize` for non-constant dimensions."""
    raw = np.asarray(z, dtype=float) * stats.std + stats.mean
    return tuple(int(round(v)) for v in raw)


def validate(code: Sequence[int], space: SearchSpace):
    """Return the list of (dimension index, offending value) violations.

    An arity mismatch is reported as a single (-1, actual_length) entry.
    """
    code = tuple(code)
    if len(code) != space.m:
        return [(-1, len(code))]
    return [
        (i, v)
        for i, (v, d) in enumerate(zip(code, space.dims))
        if v not in d.values
    ]


def check_valid(code: Sequence[int], space: SearchSpace) -> Code:
    violations = validate(code, space)
    if violations:
        raise CodeValidationError(violations)
    return tuple(code)


# --- network plans -----------------------------------------------------------


@dataclass(frozen=True)
class StemSpec:
    kernel: int
    stride: int
    out_channels: int
    maxpool: bool


@dataclass(frozen=True)
class StageSpec:
    stage_id: int
    kind: str  # basic | bottleneck | mbconv
    repeats: int
    in_channels: int
    out_channels: int
    inner: int  # bottleneck width, or expansion factor for mbconv; 0 for basic
    stride: int  # stride of the first block
    kernel: int
    se_ratio: float


@dataclass(frozen=True)
class HeadSpec:
    conv_channels: Optional[int]
    classifier_in: int
    classifier_out: int


@dataclass(frozen=True)
class NetworkPlan:
    stem: StemSpec
    stages: Tuple[StageSpec, ...]
    head: HeadSpec
    resolution: int


def _structural_check(code: Sequence[int], space: SearchSpace) -> Code:
    code = tuple(int(v) for v in code)
    if len(code) != space.m:
        raise CodeValidationError([(-1, len(code))])
    bad = [(i, v) for i, v in enumerate(code) if v <= 0]
    if bad:
        raise CodeValidationError(bad)
    return code


def decode(code: Sequence[int], space: SearchSpace) -> NetworkPlan:
    """Resolve a code into a concrete per-stage network plan.

    Only structural validity (arity, positivity) is required here; grid
    membership is checked separately by :func:`validate` so that plans can
    also be built for published off-grid reference codes.
    """
    code = _structural_check(code, space)
    lay = space.layout
    n_stages = len(lay.stage_ids)
    channels = code[0:n_stages]
    repeats = code[n_stages:2 * n_stages]

    stem_ch = lay.stem_channels if lay.stem_channels is not None else channels[0]
    stem = StemSpec(lay.stem_kernel, lay.stem_stride, stem_ch, lay.stem_pool)

    stages = []
    cin = stem_ch
    for fs in lay.fixed_stages:
        stages.append(StageSpec(
            stage_id=fs.stage_id, kind=lay.block_kind, repeats=fs.repeats,
            in_channels=cin, out_channels=fs.out_channels,
            inner=fs.expansion, stride=fs.stride, kernel=fs.kernel,
            se_ratio=lay.se_ratio,
        ))
        cin = fs.out_channels

    for i, sid in enumerate(lay.stage_ids):
        if lay.block_kind == "bottleneck":
            numer = code[2 * n_stages + i]
            inner = numer * channels[i] // 8
        elif lay.block_kind == "mbconv":
            inner = code[2 * n_stages + i]  # expansion factor
        else:
            inner = 0
        stages.append(StageSpec(
            stage_id=sid, kind=lay.block_kind, repeats=repeats[i],
            in_channels=cin, out_channels=channels[i], inner=inner,
            stride=lay.strides[i], kernel=lay.kernels[i],
            se_ratio=lay.se_ratio,
        ))
        cin = channels[i]

    classifier_in = lay.head_conv_channels if lay.head_conv_channels else cin
    head = HeadSpec(lay.head_conv_channels, classifier_in, space.num_classes)
    return NetworkPlan(stem=stem, stages=tuple(stages), head=head,
                       resolution=space.input_resolution)


# --- published constraint grids ---------------------------------------------


def _pow2_range(lo: int, hi: int) -> Tuple[int, ...]:
    vals = []
    v = lo
    while v <= hi:
        vals.append(v)
        v *= 2
    return tuple(vals)


def _mult_range(step: int, lo: int, hi: int) -> Tuple[int, ...]:
    return tuple(range(lo, hi + 1, step))


def _dims(role: Role, stage_ids, grids) -> list:
    return [DimensionSpec(role, s, g) for s, g in zip(stage_ids, grids)]


_RESNET_STAGES = (2, 3, 4, 5)
_MOBILE_STAGES = (3, 4, 5, 6, 7, 8)

# Original codes per preset, in internal encoding.
ORIGINAL_CODES = {
    "resnet18": (64, 128, 256, 512, 2, 2, 2, 2),
    "resnet50": (256, 512, 1024, 2048, 3, 4, 6, 3, 2, 2, 2, 2),
    "mobilenetv2": (24, 32, 64, 96, 160, 320, 2, 3, 4, 3, 3, 1,
                    6, 6, 6, 6, 6, 6),
    "efficientnet_b0": (24, 40, 80, 112, 192, 320, 2, 2, 3, 3, 4, 1,
                        6, 6, 6, 6, 6, 6),
    "efficientnet_b1": (24, 40, 80, 112, 192, 320, 3, 3, 4, 4, 5, 2,
                        6, 6, 6, 6, 6, 6),
}

PRESET_NAMES = tuple(ORIGINAL_CODES)


def _round4(x: float) -> int:
    return max(4, int(round(x / 4.0)) * 4)


def preset_space(name: str, input_resolution: Optional[int] = None,
                 fixed_stage_scale: float = 1.0) -> SearchSpace:
    """Build one of the published family search spaces.

    ``fixed_stage_scale`` shrinks the widths of the stages that are not
    covered by the code (stem and the first inverted-bottleneck stage of
    the MobileNetV2-style family, rounded to multiples of 4).  It exists
    for compression runs whose whole network, fixed stages included, is
    scaled down; the default leaves the published layout untouched.
    """
    key = name.strip().lower().replace("-", "_")
    if key in ("efficientnet", "efficientnetstyle"):
        key = "efficientnet_b0"
    if key == "resnetbasic":
        key = "resnet18"
    if key == "resnetbottleneck":
        key = "resnet50"
    if key == "mobilenetv2style":
        key = "mobilenetv2"
    if key not in PRESET_NAMES:
        raise ValueError(f"unknown family preset: {name!r}")

    if key == "resnet18":
        dims = _dims(Role.CHANNELS, _RESNET_STAGES, [
            _pow2_range(32, 256), _pow2_range(32, 1024),
            _pow2_range(64, 2048), _pow2_range(128, 2048)])
        dims += _dims(Role.BLOCKS, _RESNET_STAGES,
                      [tuple(range(1, 17))] * 4)
        layout = FamilyLayout(
            block_kind="basic", stem_kernel=7, stem_stride=2,
            stem_channels=None, stem_pool=True, fixed_stages=(),
            stage_ids=_RESNET_STAGES, strides=(1, 2, 2, 2),
            kernels=(3, 3, 3, 3), se_ratio=0.0, head_conv_channels=None)
        family, res = Family.RESNET_BASIC, 224
    elif key == "resnet50":
        dims = _dims(Role.CHANNELS, _RESNET_STAGES, [
            _mult_range(64, 64, 320), _mult_range(128, 128, 768),
            _mult_range(256, 256, 1536), _mult_range(512, 512, 3072)])
        dims += _dims(Role.BLOCKS, _RESNET_STAGES,
                      [tuple(range(1, 12))] * 4)
        dims += _dims(Role.BOTTLENECK, _RESNET_STAGES, [(1, 2, 3, 4)] * 4)
        layout = FamilyLayout(
            block_kind="bottleneck", stem_kernel=7, stem_stride=2,
            stem_channels=64, stem_pool=True, fixed_stages=(),
            stage_ids=_RESNET_STAGES, strides=(1, 2, 2, 2),
            kernels=(3, 3, 3, 3), se_ratio=0.0, head_conv_channels=None)
        family, res = Family.RESNET_BOTTLENECK, 224
    elif key == "mobilenetv2":
        dims = _dims(Role.CHANNELS, _MOBILE_STAGES, [
            _mult_range(4, 12, 32), _mult_range(8, 16, 64),
            _mult_range(16, 32, 128), _mult_range(24, 48, 192),
            _mult_range(40, 80, 320), _mult_range(80, 160, 640)])
        dims += _dims(Role.BLOCKS, _MOBILE_STAGES, [
            tuple(range(1, cap + 1)) for cap in (5, 6, 7, 6, 6, 4)])
        dims += _dims(Role.EXPANSION, _MOBILE_STAGES, [(3, 6)] * 6)
        stem = _round4(32 * fixed_stage_scale)
        mid = _round4(16 * fixed_stage_scale)
        layout = FamilyLayout(
            block_kind="mbconv", stem_kernel=3, stem_stride=2,
            stem_channels=stem, stem_pool=False,
            fixed_stages=(FixedStage(2, 1, mid, 1, 3, 1),),
            stage_ids=_MOBILE_STAGES, strides=(2, 2, 2, 1, 2, 1),
            kernels=(3, 3, 3, 3, 3, 3), se_ratio=0.0,
            head_conv_channels=1280)
        family, res = Family.MOBILENETV2, 224
    else:  # efficientnet_b0 / b1
        dims = _dims(Role.CHANNELS, _MOBILE_STAGES, [
            _mult_range(4, 16, 32), _mult_range(8, 24, 64),
            _mult_range(16, 48, 160), _mult_range(28, 56, 280),
            _mult_range(48, 144, 480), _mult_range(80, 160, 640)])
        dims += _dims(Role.BLOCKS, _MOBILE_STAGES, [
            tuple(range(1, cap + 1)) for cap in (6, 6, 7, 7, 8, 5)])
        dims += _dims(Role.EXPANSION, _MOBILE_STAGES, [(3, 6)] * 6)
        b1 = key.endswith("b1")
        layout = FamilyLayout(
            block_kind="mbconv", stem_kernel=3, stem_stride=2,
            stem_channels=32, stem_pool=False,
            fixed_stages=(FixedStage(2, 2 if b1 else 1, 16, 1, 3, 1),),
            stage_ids=_MOBILE_STAGES, strides=(2, 2, 2, 1, 2, 1),
            kernels=(3, 5, 3, 5, 5, 3), se_ratio=0.25,
            head_conv_channels=1280)
        family, res = Family.EFFICIENTNET, 240 if b1 else 224

    if input_resolution is not None:
        res = input_resolution
    return SearchSpace(family=family, dims=tuple(dims), layout=layout,
                       input_resolution=res, preset=key)


def original_code(space: SearchSpace) -> Code:
    return ORIGINAL_CODES[space.preset]


# --- published tuple rendering ----------------------------------------------


def to_external(code: Sequence[int], space: SearchSpace) -> Code:
    """Internal encoding -> published tuple (absolute bottleneck widths)."""
    code = tuple(code)
    if space.layout.block_kind != "bottleneck":
        return code
    n = len(space.layout.stage_ids)
    widths = tuple(code[2 * n + i] * code[i] // 8 for i in range(n))
    return code[:2 * n] + widths


def from_external(values: Sequence[int], space: SearchSpace) -> Code:
    """Published tuple -> internal encoding.

    Bottleneck widths must be expressible as C*n/8 with n in 1..4.
    """
    values = tuple(int(v) for v in values)
    if space.layout.block_kind != "bottleneck":
        return values
    if len(values) != space.m:
        raise CodeValidationError([(-1, len(values))])
    n = len(space.layout.stage_ids)
    numers = []
    for i in range(n):
        width, c = values[2 * n + i], values[i]
        numer = width * 8
        if c <= 0 or numer % c != 0 or not 1 <= numer // c <= 4:
            raise CodeValidationError([(2 * n + i, width)])
        numers.append(numer // c)
    return values[:2 * n] + tuple(numers)


def parse_code(text: str, space: SearchSpace) -> Code:
    try:
        values = tuple(int(tok) for tok in text.replace(" ", "").split(","))
    except ValueError as exc:
        raise CodeValidationError([(-1, text)]) from exc
    return from_external(values, space)


def format_code(code: Sequence[int], space: SearchSpace) -> str:
    return ",".join(str(v) for v in to_external(code, space))
