"""Training and enhancement orchestration.

Training runs the differentiable path: extract features from the noisy
window, classify into mixing weights over the wavelet bank, blend the
per-basis denoised windows (precomputed as constants), and supervise the
mixture through the guidance head's attitude/displacement losses plus the
sparsity and encoding regularizers.  Inference replaces the soft mixture
with a hard argmax. Everything is seed-deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model as M
from .autodiff import NonFiniteError, Tensor, add, backward, matmul, mul, reshape, sgd_step, tmean
from .errors import ConfigError, EmptySelectionError, InputError, RegularizerSaturationError, WdselError
from .signals import Signal
from .wavelets import DenoiseConfig, WaveletBasis, denoise, standard_bank

VALID_BANK_SIZES = (5, 10, 16)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 0.05
    lambda_disp: float = 1.0
    lambda_sparse: float = 0.01
    lambda_encode: float = 0.1
    # relative truncation: per-window epsilon = epsilon_truncation * max(y_hat)
    epsilon_truncation: float = 0.05
    bank_size: int = 16
    crm_enabled: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        for name in ("learning_rate", "lambda_disp", "lambda_sparse", "lambda_encode"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not 0.0 <= self.epsilon_truncation < 1.0:
            raise ConfigError("epsilon_truncation must be in [0, 1)")
        if self.bank_size not in VALID_BANK_SIZES:
            raise ConfigError(
                f"bank_size must be one of {VALID_BANK_SIZES}, got {self.bank_size}")


@dataclass
class TrainReport:
    """Per-epoch training telemetry; every list has one entry per epoch."""

    total_loss: list = field(default_factory=list)
    attitude_loss: list = field(default_factory=list)
    displacement_loss: list = field(default_factory=list)
    sparse_mean: list = field(default_factory=list)
    encode_value: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    top1_mass: list = field(default_factory=list)
    fsm_score: list = field(default_factory=list)

    FIELDS = ("total_loss", "attitude_loss", "displacement_loss", "sparse_mean",
              "encode_value", "entropy", "top1_mass", "fsm_score")

    def __len__(self) -> int:
        return len(self.total_loss)

    def rows(self):
        header = ("epoch",) + self.FIELDS
        body = [(i,) + tuple(getattr(self, f)[i] for f in self.FIELDS)
                for i in range(len(self))]
        return header, body


def _item_fields(item):
    """Accept (noisy, datt, dpos, ...) tuples or objects with named fields."""
    if hasattr(item, "noisy"):
        return item.noisy, item.delta_attitude, item.delta_position
    noisy, datt, dpos = item[0], item[-2], item[-1]
    return noisy, datt, dpos


def _window_data(window) -> np.ndarray:
    return window.data if isinstance(window, Signal) else np.asarray(window, dtype=np.float64)


def denoise_bank(window, bank, config: DenoiseConfig | None = None) -> np.ndarray:
    """Denoise one window with every basis; returns (C, 6, L)."""
    cfg = config or DenoiseConfig()
    if isinstance(window, Signal):
        sig = window
    else:
        raise InputError("denoise_bank expects a Signal window")
    return np.stack([denoise(sig, basis, cfg).data for basis in bank])


def _mean_tensors(items):
    total = items[0]
    for t in items[1:]:
        total = add(total, t)
    return mul(total, Tensor(np.float64(1.0 / len(items))))


def _mse(pred: Tensor, label: np.ndarray) -> Tensor:
    diff = add(pred, Tensor(-np.asarray(label, dtype=np.float64)))
    return tmean(mul(diff, diff))


def _clamped_encode(categories: Tensor):
    """R_encode with the documented saturation clamp instead of a crash."""
    try:
        term = M.r_encode(categories)
        if term.data > M.ENCODE_CEILING:
            return Tensor(np.float64(M.ENCODE_CEILING)), float(M.ENCODE_CEILING)
        return term, float(term.data)
    except RegularizerSaturationError:
        return Tensor(np.float64(M.ENCODE_CEILING)), float(M.ENCODE_CEILING)


def training_step(batch, net: M.SelectorModel, config: TrainConfig, *,
                  bank=None, denoise_config: DenoiseConfig | None = None,
                  precomputed=None) -> dict:
    """One SGD step on a batch of (noisy window, dAttitude, dPosition) items.

    precomputed, when given, carries the per-item (C, 6, L) denoised bank
    stacks so epochs do not re-run the wavelet transforms.
    """
    if not batch:
        raise InputError("training batch is empty")
    bank = bank if bank is not None else standard_bank(config.bank_size)
    if len(bank) != net.bank_size:
        raise ConfigError(f"bank has {len(bank)} bases but model expects {net.bank_size}")

    att_losses, disp_losses, sparse_terms = [], [], []
    top1, margins = [], []
    for i, item in enumerate(batch):
        noisy, datt_label, dpos_label = _item_fields(item)
        if not (np.isfinite(np.asarray(datt_label)).all()
                and np.isfinite(np.asarray(dpos_label)).all()):
            raise InputError(f"batch item {i} has non-finite labels")
        stack = precomputed[i] if precomputed is not None else denoise_bank(
            noisy, bank, denoise_config)

        h = net.extract_features(noisy)
        y_hat = M.classify(h, net.categories)
        eps = config.epsilon_truncation * float(y_hat.data.max())
        weights = M.truncated_selection_weights(y_hat, eps)

        c, ch, length = stack.shape
        mixed = reshape(matmul(weights, Tensor(stack.reshape(c, ch * length))),
                        (ch, length))
        datt_pred, dpos_pred = net.head.forward_tensor(mixed)

        att_losses.append(_mse(datt_pred, datt_label))
        disp_losses.append(_mse(dpos_pred, dpos_label))
        sparse_terms.append(M.r_sparse(y_hat))

        yd = y_hat.data
        top1.append(float(yd.max() / yd.sum()))
        margins.append(M.fsm_alignment_score(h.data, net.categories.data,
                                             int(np.argmax(yd))))

    components = {}
    try:
        l_att = _mean_tensors(att_losses)
        components["attitude"] = float(l_att.data)
        l_disp = _mean_tensors(disp_losses)
        components["displacement"] = float(l_disp.data)
        loss = add(l_att, mul(l_disp, Tensor(np.float64(config.lambda_disp))))
        if config.crm_enabled:
            r_s = _mean_tensors(sparse_terms)
            components["sparse"] = float(r_s.data)
            r_e, encode_value = _clamped_encode(net.categories)
            components["encode"] = encode_value
            loss = add(loss, add(mul(r_s, Tensor(np.float64(config.lambda_sparse))),
                                 mul(r_e, Tensor(np.float64(config.lambda_encode)))))
        else:
            components["sparse"] = float(_mean_tensors(sparse_terms).data)
            components["encode"] = 0.0
        components["total"] = float(loss.data)
    except NonFiniteError as exc:
        done = ", ".join(f"{k}={v:.3g}" for k, v in components.items())
        raise WdselError(
            f"loss became non-finite after components [{done}]: {exc}") from exc

    backward(loss)
    sgd_step(net.parameters(), config.learning_rate)

    components["entropy"] = float(M.renyi_entropy(net.categories).data)
    components["top1_mass"] = float(np.mean(top1))
    components["fsm_score"] = float(np.mean(margins))
    return components


def train(dataset, config: TrainConfig, *, model_config: M.ModelConfig | None = None,
          bank=None, denoise_config: DenoiseConfig | None = None):
    """Train a selector on labeled windows; deterministic under config.seed."""
    bank = bank if bank is not None else standard_bank(config.bank_size)
    mcfg = model_config or M.ModelConfig()
    net = M.SelectorModel.build(mcfg, tuple(b.name for b in bank), seed=config.seed)
    report = TrainReport()
    if config.epochs == 0:
        return net, report

    items = list(dataset)
    if not items:
        raise InputError("training dataset is empty")
    stacks = [denoise_bank(_item_signal(it), bank, denoise_config) for it in items]

    rng = np.random.default_rng(config.seed + 1)
    n = len(items)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        sums = {k: 0.0 for k in ("total", "attitude", "displacement", "sparse",
                                 "encode", "top1_mass", "fsm_score")}
        steps = 0
        last_entropy = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = [items[j] for j in idx]
            pre = [stacks[j] for j in idx]
            out = training_step(batch, net, config, bank=bank,
                                denoise_config=denoise_config, precomputed=pre)
            for k in sums:
                sums[k] += out[k]
            last_entropy = out["entropy"]
            steps += 1
        report.total_loss.append(sums["total"] / steps)
        report.attitude_loss.append(sums["attitude"] / steps)
        report.displacement_loss.append(sums["displacement"] / steps)
        report.sparse_mean.append(sums["sparse"] / steps)
        report.encode_value.append(sums["encode"] / steps)
        report.entropy.append(last_entropy)
        report.top1_mass.append(sums["top1_mass"] / steps)
        report.fsm_score.append(sums["fsm_score"] / steps)
    return net, report


def _item_signal(item) -> Signal:
    noisy, _, _ = _item_fields(item)
    if not isinstance(noisy, Signal):
        raise InputError("dataset items must carry Signal windows")
    return noisy


def enhance_soft(window: Signal, y_hat, bank, *, epsilon: float = 0.0,
                 denoise_config: DenoiseConfig | None = None) -> Signal:
    """Blend per-basis denoisings with weights y_hat / sum(y_hat).

    epsilon mirrors the training-time truncation precondition: if every
    activation falls below it the selection is empty and that error
    propagates (the forward weights themselves never depend on epsilon).
    """
    y = y_hat.data if isinstance(y_hat, Tensor) else np.asarray(y_hat, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != len(bank):
        raise InputError(f"y_hat length {y.shape} does not match bank size {len(bank)}")
    if not (y >= epsilon).any():
        raise EmptySelectionError(
            f"all activations below epsilon = {epsilon}; nothing to select")
    weights = y / y.sum()
    stack = denoise_bank(window, bank, denoise_config)
    blended = np.tensordot(weights, stack, axes=(0, 0))
    return Signal(data=blended, sample_rate=window.sample_rate)


def enhance_hard(window: Signal, net: M.SelectorModel, bank, *,
                 denoise_config: DenoiseConfig | None = None):
    """Denoise with the argmax basis; ties resolve to the lowest index."""
    if len(bank) != net.bank_size:
        raise ConfigError(f"bank has {len(bank)} bases but model expects {net.bank_size}")
    idx = net.select_index(window)
    cfg = denoise_config or DenoiseConfig()
    return denoise(window, bank[idx], cfg), idx


def evaluate_guidance(net: M.SelectorModel, samples, bank, *,
                      denoise_config: DenoiseConfig | None = None,
                      enhance: bool = True) -> dict:
    """Mean guidance-head errors over samples (MSE and MAE forms).

    With enhance=True the head sees the hard-selected denoised window,
    matching inference; otherwise it consumes the raw noisy window.
    """
    if not samples:
        raise InputError("no samples to evaluate")
    att_pred, pos_pred, att_true, pos_true = [], [], [], []
    for item in samples:
        noisy, datt, dpos = _item_fields(item)
        win = enhance_hard(noisy, net, bank, denoise_config=denoise_config)[0] \
            if enhance else noisy
        pa, pp = net.guidance_predict(win)
        att_pred.append(pa)
        pos_pred.append(pp)
        att_true.append(np.asarray(datt, dtype=np.float64))
        pos_true.append(np.asarray(dpos, dtype=np.float64))
    att_pred = np.stack(att_pred)
    pos_pred = np.stack(pos_pred)
    att_true = np.stack(att_true)
    pos_true = np.stack(pos_true)
    from .metrics import guidance_errors
    out = guidance_errors(att_pred, pos_pred, att_true, pos_true)
    out["attitude_mse"] = float(((att_pred - att_true) ** 2).mean())
    out["position_mse"] = float(((pos_pred - pos_true) ** 2).mean())
    return out
