"""Training losses over (N voxels x C classes) predictions with analytic logit gradients.

Losses consume probabilities; gradients consume logits so the softmax Jacobian
is folded in. Masked-out voxels are excluded from both the sums and N.
"""
from schemas.models import (
    ClassWeights,
    LogitVolume,
    LossConfig,
    ProbabilityVolume,
    TargetVolume,
    VoxelGrid,
)

from typing import Callable, Dict, Iterable, NamedTuple, Optional, Union
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

PerVoxel = Union[np.ndarray, VoxelGrid]


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax(logits: LogitVolume) -> ProbabilityVolume:
    """Row-wise softmax with the row max subtracted first."""
    return ProbabilityVolume(values=_softmax(logits.values))


def _reduce(terms: np.ndarray) -> float:
    # exactly rounded sum: independent of voxel order and thread count
    return math.fsum(terms.tolist())


def _check_targets(values: np.ndarray, targets: TargetVolume) -> None:
    n, c = values.shape
    if targets.labels.size != n:
        raise ValueError(f"{targets.labels.size} targets for {n} predicted voxels")
    if targets.labels.size and targets.labels.max() >= c:
        raise ValueError(f"target label {int(targets.labels.max())} out of range for {c} classes")


def _participating(targets: TargetVolume) -> np.ndarray:
    mask = targets.participating
    if not mask.any():
        raise ValueError("no participating voxels")
    return mask


def _per_voxel(values: Optional[PerVoxel], n: int, name: str) -> np.ndarray:
    if values is None:
        return np.ones(n)
    if isinstance(values, VoxelGrid):
        values = values.flat()
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size != n:
        raise ValueError(f"{name} has {values.size} entries for {n} voxels")
    if not np.isfinite(values).all() or (values < 0).any():
        raise ValueError(f"{name} must be finite and non-negative")
    return values


def _class_weights(weights: Optional[ClassWeights], c: int) -> np.ndarray:
    if weights is None:
        return np.ones(c)
    if len(weights.weights) != c:
        raise ValueError(f"{len(weights.weights)} class weights for {c} classes")
    return weights.array


def _true_class(p: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return p[np.arange(labels.size), labels]


def _onehot(labels: np.ndarray, c: int) -> np.ndarray:
    y = np.zeros((labels.size, c))
    y[np.arange(labels.size), labels] = 1.0
    return y


# Weighted cross-entropy kernel shared by PA-Loss and WCE
def _weighted_ce(p: np.ndarray, labels: np.ndarray, mask: np.ndarray, voxel_weights: np.ndarray, epsilon: float) -> float:
    terms = -voxel_weights * np.log(np.maximum(_true_class(p, labels), epsilon))
    return _reduce(terms[mask]) / int(mask.sum())


def _weighted_ce_grad(z: np.ndarray, labels: np.ndarray, mask: np.ndarray, voxel_weights: np.ndarray, epsilon: float) -> np.ndarray:
    p = _softmax(z)
    # the floor makes the log constant below epsilon
    active = mask & (_true_class(p, labels) >= epsilon)
    grad = (voxel_weights / int(mask.sum()))[:, None] * (p - _onehot(labels, p.shape[1]))
    grad[~active] = 0.0
    return grad


def _focal(p: np.ndarray, labels: np.ndarray, mask: np.ndarray, gamma: float, epsilon: float) -> float:
    pt = _true_class(p, labels)
    terms = -((1.0 - pt) ** gamma) * np.log(np.maximum(pt, epsilon))
    return _reduce(terms[mask]) / int(mask.sum())


def _focal_grad(z: np.ndarray, labels: np.ndarray, mask: np.ndarray, gamma: float, epsilon: float) -> np.ndarray:
    p = _softmax(z)
    pt = _true_class(p, labels)
    log_pt = np.log(np.maximum(pt, epsilon))
    with np.errstate(divide="ignore", invalid="ignore"):
        modulating_slope = np.where(
            (gamma > 0) & (pt < 1.0), gamma * (1.0 - pt) ** (gamma - 1.0) * log_pt, 0.0
        )
        log_slope = np.where(pt >= epsilon, (1.0 - pt) ** gamma / pt, 0.0)
    # d(term)/d(pt), then through the softmax: d(pt)/d(z_k) = pt * (onehot_k - p_k)
    dterm = modulating_slope - log_slope
    grad = (dterm * pt / int(mask.sum()))[:, None] * (_onehot(labels, p.shape[1]) - p)
    grad[~mask] = 0.0
    return grad


def _dice(p: np.ndarray, labels: np.ndarray, mask: np.ndarray, epsilon: float) -> float:
    y = _onehot(labels, p.shape[1])[mask]
    p = p[mask]
    total = []
    for c in range(p.shape[1]):
        intersection = _reduce(y[:, c] * p[:, c])
        denominator = _reduce(y[:, c] ** 2) + _reduce(p[:, c] ** 2) + epsilon
        total.append(1.0 - 2.0 * intersection / denominator)
    return math.fsum(total)


def _dice_grad(z: np.ndarray, labels: np.ndarray, mask: np.ndarray, epsilon: float) -> np.ndarray:
    p = _softmax(z)
    y = _onehot(labels, p.shape[1])
    ym, pm = y[mask], p[mask]
    intersection = (ym * pm).sum(axis=0)
    denominator = (ym ** 2).sum(axis=0) + (pm ** 2).sum(axis=0) + epsilon
    # dL/dp_nc
    dp = -2.0 * (y * denominator - 2.0 * p * intersection) / denominator ** 2
    grad = p * (dp - (dp * p).sum(axis=1, keepdims=True))
    grad[~mask] = 0.0
    return grad


def pa_loss(probs: ProbabilityVolume, targets: TargetVolume, importance: Optional[PerVoxel], epsilon: float = 1e-12) -> float:
    """Position-aware cross-entropy: -(1/N) sum_n I_n log p_n,true."""
    p = probs.values
    _check_targets(p, targets)
    mask = _participating(targets)
    weights = _per_voxel(importance, p.shape[0], "importance")
    return _weighted_ce(p, targets.labels, mask, weights, epsilon)


def pa_loss_grad(logits: LogitVolume, targets: TargetVolume, importance: Optional[PerVoxel], epsilon: float = 1e-12) -> np.ndarray:
    """(I_n / N) (softmax(z)_n - onehot_n) on participating voxels, zero rows elsewhere."""
    z = logits.values
    _check_targets(z, targets)
    mask = _participating(targets)
    weights = _per_voxel(importance, z.shape[0], "importance")
    return _weighted_ce_grad(z, targets.labels, mask, weights, epsilon)


def class_weights_from_frequency(labels: Iterable[Union[np.ndarray, VoxelGrid]], num_classes: int) -> ClassWeights:
    """Reciprocal class frequencies (empty voxels included), scaled so the largest weight is 1."""
    counts = np.zeros(num_classes, dtype=np.int64)
    for volume in labels:
        values = np.asarray(volume.data if isinstance(volume, VoxelGrid) else volume).reshape(-1)
        if values.size and (values.min() < 0 or values.max() >= num_classes):
            raise ValueError(f"label outside 0..{num_classes - 1}")
        counts += np.bincount(values.astype(np.int64), minlength=num_classes)
    unobserved = np.flatnonzero(counts == 0)
    if unobserved.size:
        raise ValueError(f"class {int(unobserved[0])} never observed in the training labels")
    # (1 / freq_c) / max_c (1 / freq_c) == min_count / count_c
    weights = counts.min() / counts
    logger.debug("Class counts %s -> weights %s", counts.tolist(), weights.tolist())
    return ClassWeights(weights=tuple(float(w) for w in weights))


def wce_loss(probs: ProbabilityVolume, targets: TargetVolume, weights: Optional[ClassWeights] = None, epsilon: float = 1e-12) -> float:
    """Class-weighted cross-entropy: -(1/N) sum_n w_c log p_n,c for the true class c."""
    p = probs.values
    _check_targets(p, targets)
    mask = _participating(targets)
    w = _class_weights(weights, p.shape[1])
    return _weighted_ce(p, targets.labels, mask, w[targets.labels], epsilon)


def wce_loss_grad(logits: LogitVolume, targets: TargetVolume, weights: Optional[ClassWeights] = None, epsilon: float = 1e-12) -> np.ndarray:
    z = logits.values
    _check_targets(z, targets)
    mask = _participating(targets)
    w = _class_weights(weights, z.shape[1])
    return _weighted_ce_grad(z, targets.labels, mask, w[targets.labels], epsilon)


def focal_loss(probs: ProbabilityVolume, targets: TargetVolume, gamma: float = 2.0, epsilon: float = 1e-12) -> float:
    """-(1/N) sum_n (1 - p_t)^gamma log p_t."""
    if gamma < 0:
        raise ValueError(f"focal gamma must be non-negative, got {gamma}")
    p = probs.values
    _check_targets(p, targets)
    return _focal(p, targets.labels, _participating(targets), gamma, epsilon)


def focal_loss_grad(logits: LogitVolume, targets: TargetVolume, gamma: float = 2.0, epsilon: float = 1e-12) -> np.ndarray:
    if gamma < 0:
        raise ValueError(f"focal gamma must be non-negative, got {gamma}")
    z = logits.values
    _check_targets(z, targets)
    return _focal_grad(z, targets.labels, _participating(targets), gamma, epsilon)


def dice_loss(probs: ProbabilityVolume, targets: TargetVolume, epsilon: float = 1e-12) -> float:
    """Multi-class dice: sum_c 1 - 2 sum_n y p / (sum_n y^2 + sum_n p^2 + eps).

    A class absent from the targets and predicted as exactly zero contributes 1.
    """
    p = probs.values
    _check_targets(p, targets)
    return _dice(p, targets.labels, _participating(targets), epsilon)


def dice_loss_grad(logits: LogitVolume, targets: TargetVolume, epsilon: float = 1e-12) -> np.ndarray:
    z = logits.values
    _check_targets(z, targets)
    return _dice_grad(z, targets.labels, _participating(targets), epsilon)


# Named losses
class NamedLoss(NamedTuple):
    value: Callable[..., float]
    grad: Callable[..., np.ndarray]


def _loss_kernels(name: str, labels: np.ndarray, mask: np.ndarray, c: int, config: LossConfig,
                  importance: Optional[PerVoxel], weights: Optional[ClassWeights]) -> NamedLoss:
    """Array-level value(p) and grad(z) closures for one named loss."""
    eps = config.epsilon
    if name == "pa":
        voxel_weights = _per_voxel(importance, labels.size, "importance")
        return NamedLoss(
            lambda p: _weighted_ce(p, labels, mask, voxel_weights, eps),
            lambda z: _weighted_ce_grad(z, labels, mask, voxel_weights, eps),
        )
    if name == "wce":
        voxel_weights = _class_weights(weights, c)[labels]
        return NamedLoss(
            lambda p: _weighted_ce(p, labels, mask, voxel_weights, eps),
            lambda z: _weighted_ce_grad(z, labels, mask, voxel_weights, eps),
        )
    if name == "focal":
        return NamedLoss(
            lambda p: _focal(p, labels, mask, config.gamma, eps),
            lambda z: _focal_grad(z, labels, mask, config.gamma, eps),
        )
    if name == "dice":
        return NamedLoss(
            lambda p: _dice(p, labels, mask, eps),
            lambda z: _dice_grad(z, labels, mask, eps),
        )
    raise ValueError(f"Unknown loss type: {name}")


def finite_diff_check(
    loss: str,
    logits: LogitVolume,
    targets: TargetVolume,
    step: float = 1e-4,
    *,
    config: Optional[LossConfig] = None,
    importance: Optional[PerVoxel] = None,
    weights: Optional[ClassWeights] = None,
    gradient: Optional[np.ndarray] = None,
    abs_floor: float = 1e-6,
) -> float:
    """Max relative error between the analytic gradient and central differences.

    ``gradient`` overrides the analytic gradient under test. Entries are compared
    relative to max(|analytic|, |numeric|, abs_floor).
    """
    if not step > 0:
        raise ValueError(f"finite-difference step must be positive, got {step}")
    config = config or LossConfig()
    z = logits.values.copy()
    _check_targets(z, targets)
    mask = _participating(targets)
    kernels = _loss_kernels(loss, targets.labels, mask, z.shape[1], config, importance, weights)

    analytic = kernels.grad(z) if gradient is None else np.asarray(gradient, dtype=np.float64)
    if analytic.shape != z.shape:
        raise ValueError(f"gradient shape {analytic.shape} does not match logits {z.shape}")

    numeric = np.zeros_like(z)
    for index in np.ndindex(*z.shape):
        original = z[index]
        z[index] = original + step
        upper = kernels.value(_softmax(z))
        z[index] = original - step
        lower = kernels.value(_softmax(z))
        z[index] = original
        numeric[index] = (upper - lower) / (2.0 * step)

    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), abs_floor)
    error = float(np.max(np.abs(analytic - numeric) / scale))
    logger.debug("Finite-difference check for %s: max relative error %.3e", loss, error)
    return error


def loss_report(
    probs: ProbabilityVolume,
    targets: TargetVolume,
    importance: Optional[PerVoxel] = None,
    weights: Optional[ClassWeights] = None,
    config: Optional[LossConfig] = None,
) -> Dict[str, float]:
    """All four losses on the same prediction."""
    config = config or LossConfig()
    return {
        "pa": pa_loss(probs, targets, importance, config.epsilon),
        "wce": wce_loss(probs, targets, weights, config.epsilon),
        "focal": focal_loss(probs, targets, config.gamma, config.epsilon),
        "dice": dice_loss(probs, targets, config.epsilon),
    }
