"""Window classifier: residual 1-D conv feature extractor, category matrix,
entropy/sparsity regularizers, and the guidance prediction head.

All learnable state lives in autodiff Tensors so the whole decision path,
including the Gram-matrix entropy term, is differentiable end to end.
Column j of the category matrix is the representation of wavelet j in the
bank ordering.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import (Tensor, add, conv1d, diag_part, l1_norm, log2, matmul, mul,
                       reciprocal, relu, reshape, sigmoid, stop_gradient_mask, tmean,
                       transpose, tsum)
from .autodiff import sqrt as tensor_sqrt
from .errors import (ConfigError, DegenerateMatrixError, EmptySelectionError,
                     InputError, RegularizerSaturationError, StructureError)
from .signals import Signal

ENTROPY_FLOOR = 1e-6
ENCODE_CEILING = 1e6


@dataclass(frozen=True)
class ModelConfig:
    in_channels: int = 6
    stem_channels: int = 32
    stem_kernel: int = 7
    stem_stride: int = 4
    blocks: int = 4
    block_kernel: int = 3
    feature_dim: int = 64
    activation: str = "relu"  # "identity" gives a linear network for analysis
    use_skips: bool = True
    min_window: int = 512
    head_channels: int = 24
    head_blocks: int = 2
    head_kernel: int = 7
    head_stride: int = 4
    # fixed input scaling keeping accel (m/s^2) and gyro (rad/s) both O(1)
    accel_scale: float = 0.1
    gyro_scale: float = 1.0

    def __post_init__(self):
        if self.activation not in ("relu", "identity"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        for name in ("in_channels", "stem_channels", "stem_kernel", "stem_stride",
                     "blocks", "block_kernel", "feature_dim", "min_window",
                     "head_channels", "head_blocks", "head_kernel", "head_stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.block_kernel % 2 == 0 or self.head_kernel % 2 == 0 or self.stem_kernel % 2 == 0:
            raise ConfigError("kernel sizes must be odd so padding preserves length")

    def conv_depth(self) -> int:
        """Number of conv layers on the extractor path (stem + 2 per block)."""
        return 1 + 2 * self.blocks


def _act(cfg_activation: str, t: Tensor) -> Tensor:
    return relu(t) if cfg_activation == "relu" else t


def _he_conv(rng: np.random.Generator, c_out: int, c_in: int, k: int) -> Tensor:
    std = math.sqrt(2.0 / (c_in * k))
    return Tensor(rng.normal(0.0, std, size=(c_out, c_in, k)), requires_grad=True)


def _zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


class _ConvTrunk:
    """Stem conv + residual blocks + global average pooling.

    Shared by the feature extractor and the guidance head; they differ
    only in width, depth, and what they bolt onto the pooled vector.
    """

    def __init__(self, config: ModelConfig, channels: int, blocks: int,
                 stem_kernel: int, stem_stride: int, rng: np.random.Generator,
                 prefix: str):
        self.config = config
        self.channels = channels
        self.stem_stride = stem_stride
        self.stem_kernel = stem_kernel
        self.prefix = prefix
        self._scale = input_scale_tensor(config)
        self.stem_w = _he_conv(rng, channels, config.in_channels, stem_kernel)
        self.stem_b = _zeros((channels, 1))
        self.block_params = []
        for _ in range(blocks):
            self.block_params.append((
                _he_conv(rng, channels, channels, config.block_kernel),
                _zeros((channels, 1)),
                _he_conv(rng, channels, channels, config.block_kernel),
                _zeros((channels, 1)),
            ))

    def forward(self, x: Tensor) -> Tensor:
        cfg = self.config
        x = mul(x, self._scale)
        h = conv1d(x, self.stem_w, stride=self.stem_stride,
                   padding=self.stem_kernel // 2)
        h = _act(cfg.activation, add(h, self.stem_b))
        pad = cfg.block_kernel // 2
        for w1, b1, w2, b2 in self.block_params:
            y = _act(cfg.activation, add(conv1d(h, w1, stride=1, padding=pad), b1))
            y = add(conv1d(y, w2, stride=1, padding=pad), b2)
            if cfg.use_skips:
                y = add(y, h)
            h = _act(cfg.activation, y)
        return tmean(h, axis=1)

    def parameters(self) -> list:
        out = [self.stem_w, self.stem_b]
        for quad in self.block_params:
            out.extend(quad)
        return out

    def named_parameters(self) -> list:
        out = [(f"{self.prefix}.stem.w", self.stem_w), (f"{self.prefix}.stem.b", self.stem_b)]
        for i, (w1, b1, w2, b2) in enumerate(self.block_params):
            out.extend([(f"{self.prefix}.block{i}.w1", w1), (f"{self.prefix}.block{i}.b1", b1),
                        (f"{self.prefix}.block{i}.w2", w2), (f"{self.prefix}.block{i}.b2", b2)])
        return out


def _window_array(window, config: ModelConfig, min_window: int | None = None) -> np.ndarray:
    data = window.data if isinstance(window, Signal) else np.asarray(window, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] != config.in_channels:
        raise InputError(
            f"window must have {config.in_channels} channels, got shape {data.shape}")
    lo = config.min_window if min_window is None else min_window
    if data.shape[1] < lo:
        raise InputError(
            f"window length {data.shape[1]} is below the configured minimum {lo}")
    return data


def input_scale_tensor(config: ModelConfig) -> Tensor:
    """Constant per-channel gain applied ahead of both conv trunks."""
    scale = np.empty((config.in_channels, 1))
    scale[:3] = config.accel_scale
    scale[3:] = config.gyro_scale
    return Tensor(scale)


class FeatureExtractor:
    """1-D residual conv network mapping a (6, L) window to a d-vector."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.trunk = _ConvTrunk(config, config.stem_channels, config.blocks,
                                config.stem_kernel, config.stem_stride, rng,
                                prefix="extractor")
        self.proj_w = Tensor(
            rng.normal(0.0, math.sqrt(1.0 / config.stem_channels),
                       size=(config.feature_dim, config.stem_channels)),
            requires_grad=True)
        self.proj_b = _zeros((config.feature_dim,))

    def forward(self, window) -> Tensor:
        x = Tensor(_window_array(window, self.config))
        pooled = self.trunk.forward(x)
        return add(matmul(self.proj_w, pooled), self.proj_b)

    def parameters(self) -> list:
        return self.trunk.parameters() + [self.proj_w, self.proj_b]

    def named_parameters(self) -> list:
        return self.trunk.named_parameters() + [("extractor.proj.w", self.proj_w),
                                                ("extractor.proj.b", self.proj_b)]


class GuidanceHead:
    """Small residual conv net with separate attitude and position readouts."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.trunk = _ConvTrunk(config, config.head_channels, config.head_blocks,
                                config.head_kernel, config.head_stride, rng,
                                prefix="head")
        std = math.sqrt(1.0 / config.head_channels)
        self.att_w = Tensor(rng.normal(0.0, std, size=(3, config.head_channels)),
                            requires_grad=True)
        self.att_b = _zeros((3,))
        self.pos_w = Tensor(rng.normal(0.0, std, size=(3, config.head_channels)),
                            requires_grad=True)
        self.pos_b = _zeros((3,))

    def forward_tensor(self, x: Tensor):
        pooled = self.trunk.forward(x)
        datt = add(matmul(self.att_w, pooled), self.att_b)
        dpos = add(matmul(self.pos_w, pooled), self.pos_b)
        return datt, dpos

    def forward(self, window):
        return self.forward_tensor(Tensor(_window_array(window, self.config)))

    def parameters(self) -> list:
        return self.trunk.parameters() + [self.att_w, self.att_b, self.pos_w, self.pos_b]

    def named_parameters(self) -> list:
        return self.trunk.named_parameters() + [
            ("head.att.w", self.att_w), ("head.att.b", self.att_b),
            ("head.pos.w", self.pos_w), ("head.pos.b", self.pos_b)]


def classify(h: Tensor, w: Tensor) -> Tensor:
    """Decision vector y_hat[j] = sigmoid(<h, column j of W>)."""
    if h.data.ndim != 1 or w.data.ndim != 2 or h.data.shape[0] != w.data.shape[0]:
        raise StructureError(
            f"classify expects h (d,) and W (d, C); got {h.data.shape} and {w.data.shape}")
    return sigmoid(matmul(h, w))


def gram(w: Tensor) -> Tensor:
    return matmul(transpose(w), w)


def normalized_gram(g: Tensor) -> Tensor:
    """G-tilde[i][j] = G[i][j] / (C * sqrt(G[i][i] G[j][j])); trace is 1."""
    if g.data.ndim != 2 or g.data.shape[0] != g.data.shape[1]:
        raise StructureError(f"normalized_gram expects a square matrix, got {g.data.shape}")
    c = g.data.shape[0]
    diag = diag_part(g)
    bad = np.nonzero(diag.data <= 0.0)[0]
    if bad.size:
        raise DegenerateMatrixError(
            f"Gram diagonal entry {bad[0]} is not positive (zero column {bad[0]} in W)")
    inv_root = reciprocal(tensor_sqrt(diag))
    outer = matmul(reshape(inv_root, (c, 1)), reshape(inv_root, (1, c)))
    return mul(mul(g, outer), Tensor(np.float64(1.0 / c)))



def renyi_entropy(w: Tensor, alpha: float = 2.0) -> Tensor:
    """S_2(W) = -log2(trace(G-tilde^2)), the alpha = 2 special case."""
    if alpha != 2.0:
        raise ConfigError("only alpha = 2 is supported")
    gt = normalized_gram(gram(w))
    trace_sq = tsum(mul(gt, gt))  # G-tilde is symmetric: tr(A^2) = sum A*A
    return mul(log2(trace_sq), Tensor(np.float64(-1.0)))


def r_encode(w: Tensor, entropy_floor: float = ENTROPY_FLOOR) -> Tensor:
    s2 = renyi_entropy(w)
    if s2.data <= entropy_floor:
        raise RegularizerSaturationError(
            f"S_2(W) = {float(s2.data):.3g} is at or below the floor {entropy_floor:g}; "
            "the category dictionary has collapsed")
    return reciprocal(s2)


def r_sparse(y_hat: Tensor) -> Tensor:
    return l1_norm(y_hat)


def truncated_selection_weights(y_hat: Tensor, epsilon: float) -> Tensor:
    """Mixing weights y_hat / sum(y_hat) with gradients gated by epsilon.

    Forward values ignore the mask entirely; entries with y_hat < epsilon
    only stop propagating gradient, so task losses never update category
    columns whose activation is negligible.
    """
    if not 0.0 <= epsilon < 1.0:
        raise InputError(f"epsilon must be in [0, 1), got {epsilon}")
    if y_hat.data.ndim != 1:
        raise StructureError(f"y_hat must be 1-D, got shape {y_hat.data.shape}")
    mask = (y_hat.data >= epsilon).astype(np.float64)
    if not mask.any():
        raise EmptySelectionError(
            f"all {y_hat.data.shape[0]} activations are below epsilon = {epsilon}; "
            "the classifier has collapsed")
    gated = stop_gradient_mask(y_hat, mask)
    return mul(gated, reciprocal(tsum(gated)))


def fsm_alignment_score(h: np.ndarray, w: np.ndarray, n: int) -> float:
    """Margin of the target category's inner product over the runner-up."""
    h = np.asarray(h, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or h.ndim != 1 or h.shape[0] != w.shape[0]:
        raise InputError(f"need h (d,) and W (d, C); got {h.shape} and {w.shape}")
    c = w.shape[1]
    if c < 2:
        raise InputError("alignment margin needs at least 2 categories")
    if not 0 <= n < c:
        raise InputError(f"class index {n} out of range for {c} categories")
    scores = h @ w
    others = np.delete(scores, n)
    return float(scores[n] - others.max())


@dataclass
class SelectorModel:
    """Bundle of everything trainable plus the bank ordering it selects from."""

    config: ModelConfig
    bank_names: tuple
    extractor: FeatureExtractor
    categories: Tensor  # (d, C), column j represents bank_names[j]
    head: GuidanceHead

    @staticmethod
    def build(config: ModelConfig, bank_names, seed: int) -> "SelectorModel":
        rng = np.random.default_rng(seed)
        extractor = FeatureExtractor(config, rng)
        cats = Tensor(rng.normal(0.0, math.sqrt(1.0 / config.feature_dim),
                                 size=(config.feature_dim, len(bank_names))),
                      requires_grad=True)
        head = GuidanceHead(config, rng)
        return SelectorModel(config=config, bank_names=tuple(bank_names),
                             extractor=extractor, categories=cats, head=head)

    @property
    def bank_size(self) -> int:
        return len(self.bank_names)

    def extract_features(self, window) -> Tensor:
        return self.extractor.forward(window)

    def classify_window(self, window) -> Tensor:
        return classify(self.extract_features(window), self.categories)

    def select_index(self, window) -> int:
        # np.argmax returns the lowest index on exact ties
        return int(np.argmax(self.classify_window(window).data))

    def guidance_predict(self, enhanced_window):
        datt, dpos = self.head.forward(enhanced_window)
        return datt.data.copy(), dpos.data.copy()

    def parameters(self) -> list:
        return self.extractor.parameters() + [self.categories] + self.head.parameters()

    def named_parameters(self) -> list:
        return (self.extractor.named_parameters() + [("categories", self.categories)]
                + self.head.named_parameters())

    def architecture(self) -> dict:
        """Canonical description used for checkpoint compatibility hashes."""
        return architecture_descriptor(self.config, self.bank_names)


def architecture_descriptor(config: ModelConfig, bank_names) -> dict:
    """Compatibility descriptor for a hypothetical model with these settings.

    Lets callers validate a checkpoint against a config without building
    the network first.
    """
    desc = {name: getattr(config, name) for name in (
        "in_channels", "stem_channels", "stem_kernel", "stem_stride", "blocks",
        "block_kernel", "feature_dim", "activation", "use_skips", "min_window",
        "head_channels", "head_blocks", "head_kernel", "head_stride",
        "accel_scale", "gyro_scale")}
    desc["bank_names"] = list(bank_names)
    return desc
