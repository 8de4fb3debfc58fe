import numpy as np
import pytest

from conftest import nearby_box, random_offside_gt
from eciou.geometry import OrientedBoxBEV
from eciou.losses import (
    ALL_KINDS,
    LossKind,
    NonFiniteGradientError,
    loss_gradient,
    loss_value,
    regularizer,
)
from eciou.weighting import WeightConfig

CFG = WeightConfig(alpha=1)


def test_kind_names_round_trip():
    names = [k.name for k in ALL_KINDS]
    assert names == ["iou", "diou", "eiou", "ec-iou", "ec-diou", "ec-eiou"]
    for name in names:
        assert LossKind.from_name(name).name == name
    with pytest.raises(ValueError):
        LossKind.from_name("ciou")
    with pytest.raises(ValueError):
        LossKind(family="giou")


def test_loss_zero_at_identity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = random_offside_gt(rng)
        for kind in ALL_KINDS:
            assert loss_value(kind, g, g, CFG) == 0.0


def test_plain_iou_loss_disjoint_is_one():
    p = OrientedBoxBEV(0.0, 50.0, 2, 2, 0)
    g = OrientedBoxBEV(50.0, 0.0, 2, 2, 0)
    assert loss_value(LossKind("iou"), p, g, CFG) == 1.0


def test_diou_hand_case():
    p = OrientedBoxBEV(0, 0, 2, 2, 0)
    g = OrientedBoxBEV(3, 0, 2, 2, 0)
    # disjoint, center gap 3, enclosing box 5 x 2 -> R = 9 / 29
    assert loss_value(LossKind("diou"), p, g, CFG) == pytest.approx(1.0 + 9.0 / 29.0, rel=1e-12)


def test_eiou_hand_case():
    p = OrientedBoxBEV(0, 0, 2, 1, 0)
    g = OrientedBoxBEV(3, 0, 4, 2, 0)
    # enclosing box 6 x 2; dims penalty (2-4)^2/36 + (1-2)^2/4
    expected = 9.0 / 40.0 + 4.0 / 36.0 + 1.0 / 4.0
    assert regularizer(LossKind("eiou"), p, g) == pytest.approx(expected, rel=1e-12)
    assert loss_value(LossKind("eiou"), p, g, CFG) == pytest.approx(1.0 + expected, rel=1e-12)


def test_losses_nonnegative():
    rng = np.random.default_rng(11)
    for _ in range(100):
        g = random_offside_gt(rng)
        p = nearby_box(rng, g)
        for kind in ALL_KINDS:
            assert loss_value(kind, p, g, CFG) >= 0.0


def test_ego_centric_alpha_zero_matches_plain():
    rng = np.random.default_rng(13)
    cfg0 = WeightConfig(alpha=0.0)
    for _ in range(100):
        g = random_offside_gt(rng)
        p = nearby_box(rng, g)
        for family in ("iou", "diou", "eiou"):
            plain = loss_value(LossKind(family), p, g, cfg0)
            ego = loss_value(LossKind(family, ego_centric=True), p, g, cfg0)
            assert ego == pytest.approx(plain, abs=1e-9)


def test_diou_regularizer_bounded():
    rng = np.random.default_rng(17)
    kind = LossKind("diou")
    for _ in range(200):
        g = random_offside_gt(rng)
        p = nearby_box(rng, g, shift_scale=1.5)
        r = regularizer(kind, p, g)
        assert 0.0 <= r < 1.0


def test_gradient_symmetry_coaxial():
    p = OrientedBoxBEV(6, 0, 4, 2, 0)
    g = OrientedBoxBEV(9, 0, 4, 2, 0)
    grad = loss_gradient(LossKind("iou"), p, g, CFG)
    assert abs(grad.d_y) < 1e-8


def test_gradient_sign_pulls_toward_target():
    # p strictly left of g with overlap: moving right reduces the loss.
    p = OrientedBoxBEV(7, 0, 4, 2, 0)
    g = OrientedBoxBEV(9, 0, 4, 2, 0)
    for kind in ALL_KINDS:
        grad = loss_gradient(kind, p, g, CFG)
        assert grad.d_x < 0.0


def test_gradient_probe_failure_raises():
    p = OrientedBoxBEV(9, 0, 5e-5, 2, 0)  # l smaller than the probe step
    g = OrientedBoxBEV(9, 0, 4, 2, 0)
    with pytest.raises(NonFiniteGradientError):
        loss_gradient(LossKind("iou"), p, g, CFG, h=1e-4)
    with pytest.raises(ValueError):
        loss_gradient(LossKind("iou"), g, g, CFG, h=0.0)


def _smooth_at_probe_scale(kind, p, g, h, tol=1e-9):
    """Fourth-central-difference smoothness certificate on [x-h, x+h]."""
    params = [p.x, p.y, p.l, p.w, p.theta]
    for i in range(5):
        vals = []
        for off in (-h, -h / 2, 0.0, h / 2, h):
            q = list(params)
            q[i] += off
            vals.append(loss_value(kind, OrientedBoxBEV(*q), g, CFG))
        if abs(vals[0] - 4 * vals[1] + 6 * vals[2] - 4 * vals[3] + vals[4]) > tol:
            return False
    return True


def sample_smooth_config(rng, h):
    """Random overlapping pair whose loss is certified smooth at scale h
    and has measurable curvature (so the Richardson ratio is informative)."""
    while True:
        g = random_offside_gt(rng, dist_lo=6.0)
        p = nearby_box(rng, g, shift_scale=0.25)
        kind = ALL_KINDS[rng.integers(0, len(ALL_KINDS))]
        try:
            if not _smooth_at_probe_scale(kind, p, g, h):
                continue
            g1 = np.array(loss_gradient(kind, p, g, CFG, h=h).as_tuple())
            g2 = np.array(loss_gradient(kind, p, g, CFG, h=h / 2).as_tuple())
            g3 = np.array(loss_gradient(kind, p, g, CFG, h=h / 4).as_tuple())
        except NonFiniteGradientError:
            continue
        d2 = np.linalg.norm(g2 - g3)
        if d2 < 1e-7 * (1.0 + np.linalg.norm(g1)):
            continue
        return kind, p, g, g1, g2, g3


def test_richardson_order_two():
    rng = np.random.default_rng(20)
    h = 1e-3
    for _ in range(40):
        _, _, _, g1, g2, g3 = sample_smooth_config(rng, h)
        ratio = np.linalg.norm(g1 - g2) / np.linalg.norm(g2 - g3)
        assert 3.0 <= ratio <= 5.0


def test_descent_step_decreases_loss():
    rng = np.random.default_rng(23)
    wins = 0
    total = 1000
    done = 0
    while done < total:
        g = random_offside_gt(rng, dist_lo=6.0)
        p = nearby_box(rng, g, shift_scale=0.25)
        kind = ALL_KINDS[rng.integers(0, len(ALL_KINDS))]
        try:
            before = loss_value(kind, p, g, CFG)
            grad = np.array(loss_gradient(kind, p, g, CFG).as_tuple())
        except (NonFiniteGradientError, ValueError):
            continue
        norm = np.linalg.norm(grad)
        if norm < 1e-9:  # flat region (e.g. disjoint plain IoU)
            continue
        rate = 0.01 / max(norm, 1.0)
        params = np.array([p.x, p.y, p.l, p.w, p.theta]) - rate * grad
        try:
            after = loss_value(kind, OrientedBoxBEV(*params), g, CFG)
        except ValueError:
            continue
        done += 1
        wins += int(after < before)
    assert wins / total >= 0.95
