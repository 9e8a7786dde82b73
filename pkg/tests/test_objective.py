import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lelsd import (
    LatentCode,
    LatentDirection,
    ObjectiveConfig,
    PartLabel,
    SegmentationMask,
    evaluate_objective,
    localization_score,
    localization_score_layer,
    objective_value_and_grad,
    regularizer,
)
from lelsd.errors import InvalidInput, ShapeMismatch
from lelsd.objective import regularizer_with_grad

PART = PartLabel("left", 0)
TINY_EPS = ObjectiveConfig(epsilon=1e-30)


def mask_of(values):
    return SegmentationMask(np.asarray(values, dtype=float), PART)


def test_hand_example_two_by_two():
    # d = [[4, 0], [0, 1]], masked numerator 4, denominator 5
    r = np.array([[[2.0, 0.0], [0.0, 1.0]]])
    r_edit = np.zeros((1, 2, 2))
    score = localization_score_layer(r, r_edit, mask_of([[1.0, 0.0], [0.0, 0.0]]), ObjectiveConfig(epsilon=1e-12))
    assert abs(score - 0.8) < 1e-9


def test_all_ones_mask_scores_one():
    rng = np.random.default_rng(0)
    r = rng.standard_normal((4, 6, 6))
    r_edit = r + rng.standard_normal((4, 6, 6))
    score = localization_score_layer(r, r_edit, mask_of(np.ones((6, 6))))
    assert 1.0 - score < 1e-6
    assert score <= 1.0


def test_all_zeros_mask_scores_zero():
    rng = np.random.default_rng(1)
    r = rng.standard_normal((4, 6, 6))
    score = localization_score_layer(r, r + 1.0, mask_of(np.zeros((6, 6))))
    assert score == 0.0


def test_identical_maps_score_zero():
    r = np.ones((2, 4, 4))
    assert localization_score_layer(r, r, mask_of(np.ones((4, 4)))) == 0.0


def test_layer_score_shape_checks():
    r = np.zeros((1, 4, 4))
    with pytest.raises(ShapeMismatch):
        localization_score_layer(r, np.zeros((1, 2, 2)), mask_of(np.ones((4, 4))))
    with pytest.raises(ShapeMismatch):
        localization_score_layer(r, r, mask_of(np.ones((2, 2))))
    with pytest.raises(InvalidInput):
        localization_score_layer(r, np.full((1, 4, 4), np.nan), mask_of(np.ones((4, 4))))


@given(st.floats(min_value=-3, max_value=3).filter(lambda s: abs(s) > 1e-3), st.randoms())
def test_scale_invariance(log_scale, rnd):
    scale = 10.0**log_scale
    rng = np.random.default_rng(rnd.randint(0, 2**31))
    r = rng.standard_normal((3, 4, 4))
    diff = rng.standard_normal((3, 4, 4))
    mask = mask_of(rng.uniform(0, 1, (4, 4)))
    base = localization_score_layer(r, r + diff, mask, TINY_EPS)
    scaled = localization_score_layer(r, r + scale * diff, mask, TINY_EPS)
    assert abs(base - scaled) <= 1e-9 * max(abs(base), 1e-12)


@given(st.randoms())
@settings(max_examples=50)
def test_layer_score_bounded(rnd):
    rng = np.random.default_rng(rnd.randint(0, 2**31))
    r = rng.standard_normal((2, 3, 3)) * rng.uniform(0.01, 100)
    r_edit = r + rng.standard_normal((2, 3, 3)) * rng.uniform(0, 10)
    mask = mask_of(rng.uniform(0, 1, (3, 3)))
    score = localization_score_layer(r, r_edit, mask)
    assert 0.0 <= score <= 1.0


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_regularizer_single_direction_is_zero():
    assert regularizer([unit([1.0, 2.0, 3.0])]) == 0.0


def test_regularizer_identical_pair():
    u = unit([1.0, -2.0, 0.5])
    assert abs(regularizer([u, u]) - (-np.sqrt(2) / 2)) < 1e-9


def test_regularizer_orthogonal_pair_exactly_zero():
    assert regularizer([np.array([1.0, 0.0]), np.array([0.0, 1.0])]) == 0.0


def test_regularizer_sign_symmetric():
    u = unit([0.3, 0.4, -0.5])
    assert abs(regularizer([u, -u]) - (-np.sqrt(2) / 2)) < 1e-9
    assert abs(regularizer([u, -u]) - regularizer([u, u])) < 1e-12


def test_regularizer_rejects_zero_vector():
    with pytest.raises(InvalidInput):
        regularizer([np.zeros(3), unit([1.0, 0.0, 0.0])])


def test_regularizer_pearson_mode_centers():
    # constant offset is uncorrelated after centering
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([5.0, 5.0, 5.0]) + np.array([3.0, 1.0, 2.0])
    cos_val = regularizer([a, b], "cosine")
    pearson_val = regularizer([a, b], "pearson")
    assert cos_val != pearson_val


@pytest.mark.parametrize("mode", ["cosine", "pearson"])
def test_regularizer_gradient_matches_finite_differences(mode):
    rng = np.random.default_rng(9)
    vectors = [rng.standard_normal(6) for _ in range(3)]
    for active in range(3):
        _, grad = regularizer_with_grad(vectors, active, mode)
        h = 1e-6
        fd = np.zeros(6)
        for i in range(6):
            up = [v.copy() for v in vectors]
            dn = [v.copy() for v in vectors]
            up[active][i] += h
            dn[active][i] -= h
            fd[i] = (regularizer(up, mode) - regularizer(dn, mode)) / (2 * h)
        assert np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12) < 1e-6


def axis_direction(space, i, part):
    v = np.zeros(space.total_dim)
    v[i] = 1.0
    return LatentDirection(space, v, part, (0, 0), name=f"axis{i}")


def test_alpha_zero_scores_zero(planted, segmenter, left, random_code):
    d = axis_direction(planted.space, 0, left)
    breakdown = localization_score(planted, segmenter, random_code, d, 0.0, left)
    assert breakdown.per_layer == (0.0, 0.0)
    assert breakdown.total == 0.0


def test_left_axis_localizes_left(planted, segmenter, left, random_code):
    for i in range(4):
        d = axis_direction(planted.space, i, left)
        breakdown = localization_score(planted, segmenter, random_code, d, 3.0, left)
        assert all(s >= 0.999 for s in breakdown.per_layer)


def test_left_axis_scores_nothing_on_right(planted, segmenter, left, right, random_code):
    d = axis_direction(planted.space, 0, left)
    breakdown = localization_score(planted, segmenter, random_code, d, 3.0, right)
    assert all(s <= 0.001 for s in breakdown.per_layer)


def test_axis_ranking_separates_halves(planted, segmenter, left, random_code):
    # every left-supported axis must beat every right-supported axis
    totals = []
    for i in range(8):
        d = axis_direction(planted.space, i, left)
        totals.append(localization_score(planted, segmenter, random_code, d, 3.0, left).total)
    assert min(totals[:4]) > max(totals[4:])


def test_evaluate_objective_single_direction_ignores_c(planted, segmenter, left):
    codes = [LatentCode(planted.space, r) for r in np.random.default_rng(3).standard_normal((2, 8))]
    d = axis_direction(planted.space, 1, left)
    for c in (0.0, 1.0, 10.0):
        breakdown = evaluate_objective(planted, segmenter, codes, [d], 3.0, left, c)
        assert breakdown.regularizer == 0.0
        assert breakdown.objective == breakdown.total
        assert breakdown.direction_totals == (breakdown.total,)


def test_evaluate_objective_identical_pair_penalty(planted, segmenter, left):
    codes = [LatentCode(planted.space, r) for r in np.random.default_rng(4).standard_normal((2, 8))]
    d = axis_direction(planted.space, 0, left)
    solo = evaluate_objective(planted, segmenter, codes, [d], 3.0, left, 0.0)
    pair = evaluate_objective(planted, segmenter, codes, [d, d], 3.0, left, 1.0)
    expected = 2 * solo.total - np.sqrt(2) / 2
    assert abs(pair.objective - expected) < 1e-9
    assert abs(pair.regularizer - (-np.sqrt(2) / 2)) < 1e-9


def test_evaluate_objective_c_zero_drops_regularizer(planted, segmenter, left):
    codes = [LatentCode(planted.space, r) for r in np.random.default_rng(5).standard_normal((2, 8))]
    d = axis_direction(planted.space, 0, left)
    pair = evaluate_objective(planted, segmenter, codes, [d, d], 3.0, left, 0.0)
    assert pair.objective == sum(pair.direction_totals)


def test_evaluate_objective_rejects_negative_c(planted, segmenter, left):
    codes = [LatentCode(planted.space, np.zeros(8))]
    d = axis_direction(planted.space, 0, left)
    with pytest.raises(InvalidInput):
        evaluate_objective(planted, segmenter, codes, [d], 3.0, left, -1.0)


def _fd_objective_grad(planted, segmenter, codes, vectors, active, alphas, part, c, h=1e-5):
    fd = np.zeros(8)
    for i in range(8):
        up = [v.copy() for v in vectors]
        dn = [v.copy() for v in vectors]
        up[active][i] += h
        dn[active][i] -= h
        fp = evaluate_objective(planted, segmenter, codes, up, alphas, part, c).objective
        fm = evaluate_objective(planted, segmenter, codes, dn, alphas, part, c).objective
        fd[i] = (fp - fm) / (2 * h)
    return fd


def test_objective_gradient_matches_finite_differences(planted, segmenter, left):
    rng = np.random.default_rng(77)
    for trial in range(10):
        u = rng.standard_normal(8)
        u /= np.linalg.norm(u)
        codes = [LatentCode(planted.space, r) for r in rng.standard_normal((2, 8))]
        alpha = 3.0 if trial % 2 == 0 else -3.0
        value, grad = objective_value_and_grad(planted, segmenter, codes, [u], 0, alpha, left, 0.0)
        fd = _fd_objective_grad(planted, segmenter, codes, [u], 0, alpha, left, 0.0)
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
        assert rel < 1e-4, f"trial {trial}: relative error {rel}"
        assert np.isfinite(value)


def test_objective_gradient_with_regularizer(planted, segmenter, left):
    rng = np.random.default_rng(78)
    vectors = [unit(rng.standard_normal(8)), unit(rng.standard_normal(8))]
    codes = [LatentCode(planted.space, r) for r in rng.standard_normal((2, 8))]
    for active in (0, 1):
        _, grad = objective_value_and_grad(planted, segmenter, codes, vectors, active, 3.0, left, 1.0)
        fd = _fd_objective_grad(planted, segmenter, codes, vectors, active, 3.0, left, 1.0)
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
        assert rel < 1e-4


def test_config_validation():
    with pytest.raises(InvalidInput):
        ObjectiveConfig(epsilon=0.0)
    with pytest.raises(InvalidInput):
        ObjectiveConfig(aggregation="mean")
    with pytest.raises(InvalidInput):
        ObjectiveConfig(corr_mode="kendall")
    with pytest.raises(InvalidInput):
        ObjectiveConfig(layer_weights=(1.0, -1.0))


def test_layer_weights_scale_total(planted, segmenter, left, random_code):
    d = axis_direction(planted.space, 0, left)
    cfg = ObjectiveConfig(layer_weights=(2.0, 0.0))
    breakdown = localization_score(planted, segmenter, random_code, d, 3.0, left, cfg)
    assert abs(breakdown.total - 2.0 * breakdown.per_layer[0]) < 1e-12
