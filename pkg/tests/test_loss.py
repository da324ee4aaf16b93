from schemas.models import ClassWeights, GridGeometry, ImportanceGrid, LogitVolume, LossConfig, ProbabilityVolume, TargetVolume
from ssc.loss import (
    class_weights_from_frequency,
    dice_loss,
    dice_loss_grad,
    finite_diff_check,
    focal_loss,
    focal_loss_grad,
    loss_report,
    pa_loss,
    pa_loss_grad,
    softmax,
    wce_loss,
    wce_loss_grad,
)
from ssc.synth import oracle_loss

from hypothesis import given, settings, strategies as st
from pydantic import ValidationError
import math
import numpy as np
import pytest


def _instance(rng, n, c, masked=False):
    logits = LogitVolume(values=rng.normal(scale=2.0, size=(n, c)))
    labels = rng.integers(0, c, size=n)
    mask = None
    if masked:
        mask = rng.random(n) < 0.7
        mask[0] = True
    return logits, TargetVolume(labels=labels, mask=mask)


def _one_hot(labels, c):
    p = np.zeros((len(labels), c))
    p[np.arange(len(labels)), labels] = 1.0
    return ProbabilityVolume(values=p)


# softmax
def test_softmax_uniform_row():
    probs = softmax(LogitVolume(values=np.zeros((2, 5))))
    assert np.array_equal(probs.values, np.full((2, 5), 0.2))


def test_softmax_is_stable():
    probs = softmax(LogitVolume(values=[[1000.0, 0.0]]))
    assert probs.values[0, 0] == pytest.approx(1.0)
    assert probs.values[0, 1] == pytest.approx(0.0, abs=1e-300)


def test_softmax_shift_invariance():
    z = np.random.default_rng(1).normal(size=(4, 3))
    a = softmax(LogitVolume(values=z)).values
    b = softmax(LogitVolume(values=z + 7.0)).values
    assert np.allclose(a, b, rtol=0.0, atol=1e-12)


def test_volumes_validate_inputs():
    with pytest.raises(ValidationError):
        LogitVolume(values=[[0.0, float("inf")]])
    with pytest.raises(ValidationError):
        ProbabilityVolume(values=[[0.6, 0.6]])
    with pytest.raises(ValidationError):
        TargetVolume(labels=[0, 1], mask=[True])
    with pytest.raises(ValidationError):
        ClassWeights(weights=(0.0, 0.0))


# PA-Loss
def test_pa_perfect_prediction_is_zero():
    labels = np.array([0, 2, 1, 2])
    assert pa_loss(_one_hot(labels, 3), TargetVolume(labels=labels), np.full(4, 3.5)) == 0.0


@pytest.mark.parametrize("c", [2, 3, 12])
def test_pa_uniform_prediction_is_log_c(c):
    probs = ProbabilityVolume(values=np.full((6, c), 1.0 / c))
    targets = TargetVolume(labels=np.arange(6) % c)
    assert abs(pa_loss(probs, targets, None) - math.log(c)) < 1e-12


def test_pa_matches_scalar_evaluation():
    rng = np.random.default_rng(4)
    probs = softmax(LogitVolume(values=rng.normal(size=(4, 3))))
    labels = rng.integers(0, 3, size=4)
    importance = rng.uniform(1.0, 4.0, size=4)
    expected = oracle_loss("pa", probs.values.tolist(), labels.tolist(), importance=importance.tolist())
    assert pa_loss(probs, TargetVolume(labels=labels), importance) == pytest.approx(expected, rel=1e-12)


def test_pa_with_alpha_zero_is_cross_entropy():
    rng = np.random.default_rng(5)
    logits, targets = _instance(rng, 20, 4)
    probs = softmax(logits)
    assert pa_loss(probs, targets, np.ones(20)) == wce_loss(probs, targets)


def test_pa_excludes_masked_voxels():
    probs = ProbabilityVolume(values=[[0.5, 0.5], [0.01, 0.99]])
    targets = TargetVolume(labels=[0, 0], mask=[True, False])
    assert pa_loss(probs, targets, None) == pytest.approx(math.log(2.0))


def test_pa_shape_mismatch():
    probs = ProbabilityVolume(values=np.full((3, 2), 0.5))
    with pytest.raises(ValueError):
        pa_loss(probs, TargetVolume(labels=[0, 1]), None)
    with pytest.raises(ValueError):
        pa_loss(probs, TargetVolume(labels=[0, 1, 1]), np.ones(2))
    with pytest.raises(ValueError, match="out of range"):
        pa_loss(probs, TargetVolume(labels=[0, 1, 2]), None)


def test_pa_accepts_importance_grid():
    geometry = GridGeometry(dims=(2, 1, 1), voxel_size=0.02)
    importance = ImportanceGrid(geometry=geometry, data=[1.0, 3.0])
    probs = ProbabilityVolume(values=[[0.5, 0.5], [0.5, 0.5]])
    assert pa_loss(probs, TargetVolume(labels=[0, 1]), importance) == pytest.approx(2.0 * math.log(2.0))


def test_pa_gradient_direct_substitution():
    grad = pa_loss_grad(LogitVolume(values=[[0.0, 0.0]]), TargetVolume(labels=[0]), np.array([2.0]))
    assert grad.tolist() == [[-1.0, 1.0]]


def test_pa_gradient_vanishes_at_perfect_logits():
    grad = pa_loss_grad(LogitVolume(values=[[60.0, 0.0, 0.0]]), TargetVolume(labels=[0]), None)
    assert np.abs(grad).max() < 1e-20


def test_pa_gradient_zero_rows_for_masked_voxels():
    grad = pa_loss_grad(LogitVolume(values=np.zeros((3, 2))), TargetVolume(labels=[0, 1, 0], mask=[True, False, True]), None)
    assert grad[1].tolist() == [0.0, 0.0]
    assert grad[0].tolist() == [-0.25, 0.25]


def test_pa_gradient_matches_finite_differences():
    rng = np.random.default_rng(2024)
    for instance in range(100):
        n = int(rng.integers(1, 217))
        c = int(rng.integers(2, 13))
        logits, targets = _instance(rng, n, c, masked=instance % 2 == 1)
        importance = rng.uniform(1.0, 4.0, size=n)
        error = finite_diff_check("pa", logits, targets, 1e-4, importance=importance)
        assert error < 1e-5, f"instance {instance}: n={n} c={c} error={error}"


def test_corrupted_gradient_is_detected():
    rng = np.random.default_rng(7)
    logits, targets = _instance(rng, 3, 4)
    gradient = pa_loss_grad(logits, targets, None)
    gradient[1, 2] += 0.1
    assert finite_diff_check("pa", logits, targets, 1e-4, gradient=gradient) > 1e-3


def test_finite_diff_rejects_unknown_loss_and_bad_step():
    logits, targets = _instance(np.random.default_rng(8), 3, 4)
    with pytest.raises(ValueError, match="Unknown loss type"):
        finite_diff_check("hinge", logits, targets)
    with pytest.raises(ValueError, match="positive"):
        finite_diff_check("pa", logits, targets, 0.0)


@pytest.mark.parametrize("loss", ["wce", "focal", "dice"])
def test_other_gradients_match_finite_differences(loss):
    rng = np.random.default_rng(11)
    for instance in range(20):
        n = int(rng.integers(1, 40))
        c = int(rng.integers(2, 7))
        logits, targets = _instance(rng, n, c, masked=instance % 3 == 0)
        weights = ClassWeights(weights=tuple(rng.uniform(0.1, 1.0, size=c)))
        error = finite_diff_check(loss, logits, targets, 1e-4, weights=weights)
        assert error < 1e-5, f"{loss} instance {instance}: error={error}"


def test_named_gradients_agree_with_public_functions():
    rng = np.random.default_rng(12)
    logits, targets = _instance(rng, 10, 3)
    config = LossConfig(gamma=2.0)
    assert finite_diff_check("wce", logits, targets, gradient=wce_loss_grad(logits, targets)) < 1e-5
    assert finite_diff_check("focal", logits, targets, config=config, gradient=focal_loss_grad(logits, targets, 2.0)) < 1e-5
    assert finite_diff_check("dice", logits, targets, gradient=dice_loss_grad(logits, targets)) < 1e-5


# loss properties
def test_cross_entropy_variants_agree():
    rng = np.random.default_rng(13)
    for _ in range(20):
        logits, targets = _instance(rng, 50, 5, masked=True)
        probs = softmax(logits)
        pa = pa_loss(probs, targets, None)
        assert abs(pa - focal_loss(probs, targets, gamma=0.0)) < 1e-12
        assert abs(pa - wce_loss(probs, targets, ClassWeights(weights=(1.0,) * 5))) < 1e-12


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_losses_are_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    logits, targets = _instance(rng, 30, 4, masked=True)
    importance = rng.uniform(1.0, 4.0, size=30)
    order = rng.permutation(30)
    probs = softmax(logits)
    shuffled_probs = ProbabilityVolume(values=probs.values[order])
    shuffled = TargetVolume(labels=targets.labels[order], mask=targets.mask[order])
    before = loss_report(probs, targets, importance)
    after = loss_report(shuffled_probs, shuffled, importance[order])
    for name in before:
        assert before[name] == pytest.approx(after[name], rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("k", [2.0, 4.0, 0.5])
def test_importance_scaling(k):
    rng = np.random.default_rng(14)
    logits, targets = _instance(rng, 25, 6)
    importance = rng.uniform(1.0, 4.0, size=25)
    probs = softmax(logits)
    assert pa_loss(probs, targets, k * importance) == k * pa_loss(probs, targets, importance)
    assert np.array_equal(pa_loss_grad(logits, targets, k * importance), k * pa_loss_grad(logits, targets, importance))


def test_losses_are_non_negative():
    rng = np.random.default_rng(15)
    logits, targets = _instance(rng, 40, 5)
    assert all(value >= 0.0 for value in loss_report(softmax(logits), targets, rng.uniform(1, 4, 40)).values())


def test_cross_entropy_decreases_with_true_class_probability():
    targets = TargetVolume(labels=[0])
    values = [pa_loss(ProbabilityVolume(values=[[p, 1.0 - p]]), targets, None) for p in (0.2, 0.5, 0.9, 1.0)]
    assert values == sorted(values, reverse=True) and len(set(values)) == 4


# class weights
def test_class_weights_equal_counts():
    assert class_weights_from_frequency([np.array([0, 1, 0, 1])], 2).weights == (1.0, 1.0)


def test_class_weights_reciprocal_ratio():
    weights = class_weights_from_frequency([np.array([0] * 90 + [1] * 10)], 2).weights
    assert weights == pytest.approx((1 / 9, 1.0))


def test_class_weights_three_classes_across_volumes():
    volumes = [np.array([0] * 50 + [1] * 10), np.array([1] * 20 + [2] * 20)]
    assert class_weights_from_frequency(volumes, 3).weights == pytest.approx((0.4, 2 / 3, 1.0))


def test_class_weights_unobserved_class():
    with pytest.raises(ValueError, match="class 2 never observed"):
        class_weights_from_frequency([np.array([0, 1, 1])], 3)


# WCE, focal, dice
def test_wce_matches_scalar_evaluation():
    rng = np.random.default_rng(16)
    logits, targets = _instance(rng, 8, 4, masked=True)
    probs = softmax(logits)
    weights = (0.2, 1.0, 0.5, 0.7)
    expected = oracle_loss("wce", probs.values.tolist(), targets.labels.tolist(), mask=targets.mask.tolist(), weights=list(weights))
    assert wce_loss(probs, targets, ClassWeights(weights=weights)) == pytest.approx(expected, rel=1e-12)


def test_wce_perfect_prediction_is_zero():
    labels = np.array([1, 0, 1])
    assert wce_loss(_one_hot(labels, 2), TargetVolume(labels=labels), ClassWeights(weights=(0.3, 1.0))) == 0.0


def test_focal_single_voxel():
    value = focal_loss(ProbabilityVolume(values=[[0.9, 0.1]]), TargetVolume(labels=[0]), gamma=2.0)
    assert value == pytest.approx(-(0.1 ** 2) * math.log(0.9), rel=1e-9)
    assert value == pytest.approx(0.0010536, abs=1e-7)


def test_focal_perfect_prediction_and_negative_gamma():
    labels = np.array([2, 0])
    assert focal_loss(_one_hot(labels, 3), TargetVolume(labels=labels)) == 0.0
    with pytest.raises(ValueError, match="gamma"):
        focal_loss(_one_hot(labels, 3), TargetVolume(labels=labels), gamma=-1.0)


def test_focal_matches_scalar_evaluation():
    rng = np.random.default_rng(17)
    logits, targets = _instance(rng, 6, 3)
    probs = softmax(logits)
    expected = oracle_loss("focal", probs.values.tolist(), targets.labels.tolist(), gamma=2.0)
    assert focal_loss(probs, targets, 2.0) == pytest.approx(expected, rel=1e-12)


def test_dice_perfect_prediction():
    labels = np.array([0, 1, 2, 1, 0])
    assert abs(dice_loss(_one_hot(labels, 3), TargetVolume(labels=labels))) < 1e-12


def test_dice_absent_class_contributes_one():
    labels = np.array([0, 1, 1])
    assert dice_loss(_one_hot(labels, 3), TargetVolume(labels=labels)) == pytest.approx(1.0, abs=1e-12)


def test_dice_matches_scalar_evaluation():
    rng = np.random.default_rng(18)
    logits, targets = _instance(rng, 5, 3)
    probs = softmax(logits)
    expected = oracle_loss("dice", probs.values.tolist(), targets.labels.tolist())
    assert abs(dice_loss(probs, targets) - expected) < 1e-12


def test_dice_shape_mismatch():
    with pytest.raises(ValueError):
        dice_loss(ProbabilityVolume(values=np.full((2, 2), 0.5)), TargetVolume(labels=[0, 1, 1]))


def test_all_masked_out():
    with pytest.raises(ValueError, match="no participating voxels"):
        pa_loss(ProbabilityVolume(values=[[0.5, 0.5]]), TargetVolume(labels=[0], mask=[False]), None)
