import numpy as np
import pytest

from conftest import driving_scale_gt, nearby_box, random_box, random_offside_gt
from eciou.geometry import Box3D, OrientedBoxBEV
from eciou.metrics import MetricScore, ec_iou_3d, ec_iou_bev, iou_3d, iou_bev, sweep_curve
from eciou.weighting import GEOMETRIC, MONTE_CARLO, DegenerateDistanceError, WeightConfig

G_REF = OrientedBoxBEV(10, 0, 4, 2, 0)


def test_metric_score_range_checked():
    with pytest.raises(ValueError):
        MetricScore(1.2)
    with pytest.raises(ValueError):
        MetricScore(-0.1)


def test_iou_identity_and_disjoint():
    assert iou_bev(G_REF, G_REF).value == 1.0
    far = OrientedBoxBEV(100, 0, 4, 2, 0)
    assert iou_bev(far, G_REF).value == 0.0
    assert iou_bev(G_REF, G_REF).clamped is False


def test_iou_hand_case():
    a = OrientedBoxBEV(0, 0, 2, 2, 0)
    b = OrientedBoxBEV(1, 0, 2, 2, 0)
    assert iou_bev(a, b).value == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_ec_iou_identity_exact():
    rng = np.random.default_rng(2)
    for _ in range(100):
        g = random_offside_gt(rng)
        cfg = WeightConfig(alpha=rng.uniform(0, 8), method=GEOMETRIC)
        assert ec_iou_bev(g, g, cfg).value == 1.0


def test_ec_iou_disjoint_zero():
    p = OrientedBoxBEV(100, 100, 4, 2, 0)
    assert ec_iou_bev(p, G_REF, WeightConfig(alpha=2)).value == 0.0


def test_ec_iou_degenerate_distance():
    g = OrientedBoxBEV(0.5, 0, 4, 2, 0)  # contains the origin
    with pytest.raises(DegenerateDistanceError):
        ec_iou_bev(g, OrientedBoxBEV(1e-10, 1e-10, 4, 2, 0), WeightConfig(alpha=1))


def test_ec_iou_prefers_near_prediction():
    near = OrientedBoxBEV(9, 0, 4, 2, 0)
    far = OrientedBoxBEV(11, 0, 4, 2, 0)
    cfg = WeightConfig(alpha=1)
    assert iou_bev(near, G_REF).value == pytest.approx(iou_bev(far, G_REF).value, abs=1e-12)
    assert ec_iou_bev(near, G_REF, cfg).value > ec_iou_bev(far, G_REF, cfg).value


def test_ec_iou_alpha_zero_matches_iou():
    rng = np.random.default_rng(19)
    cfg = WeightConfig(alpha=0.0)
    for _ in range(200):
        g = random_offside_gt(rng)
        p = nearby_box(rng, g) if rng.random() < 0.8 else random_box(rng)
        try:
            ec = ec_iou_bev(p, g, cfg).value
        except DegenerateDistanceError:
            continue
        assert ec == pytest.approx(iou_bev(p, g).value, abs=1e-9)


def test_ec_iou_bounds_random():
    # Bounds hold for arbitrary geometry; the clamp stays quiet at
    # driving-scale distances (see driving_scale_gt).
    rng = np.random.default_rng(43)
    for _ in range(500):
        g = random_offside_gt(rng)
        p = nearby_box(rng, g)
        score = ec_iou_bev(p, g, WeightConfig(alpha=rng.uniform(0, 8)))
        assert 0.0 <= score.value <= 1.0
    for _ in range(500):
        g = driving_scale_gt(rng)
        p = nearby_box(rng, g)
        score = ec_iou_bev(p, g, WeightConfig(alpha=rng.uniform(0, 8)))
        assert 0.0 <= score.value <= 1.0
        assert not score.clamped


def test_ec_iou_clamps_at_extreme_alpha():
    p = OrientedBoxBEV(6.5, 0, 4, 2, 0)
    score = ec_iou_bev(p, G_REF, WeightConfig(alpha=16))
    assert score.clamped
    assert score.value == 1.0


def test_ec_iou_geometric_tracks_monte_carlo():
    # Measured approximation error over the reference sweep: below 0.01 up
    # to alpha = 4; at alpha = 8 it peaks near 0.08 on the near-side hump.
    for alpha, bound in ((1, 0.02), (4, 0.02), (8, 0.1)):
        mc_cfg = WeightConfig(alpha=alpha, method=MONTE_CARLO, mc_samples=100_000, mc_seed=3)
        geo_cfg = WeightConfig(alpha=alpha, method=GEOMETRIC)
        for x in (6.5, 7.7, 8.0, 9.5, 11.0, 12.5):
            p = OrientedBoxBEV(x, 0, 4, 2, 0)
            geo = ec_iou_bev(p, G_REF, geo_cfg).value
            mc = ec_iou_bev(p, G_REF, mc_cfg).value
            assert abs(geo - mc) < bound


def test_iou_3d_examples():
    a = Box3D(x=10, y=0, l=4, w=2, theta=0, z=1, h=2)
    assert iou_3d(a, a).value == 1.0
    above = Box3D(x=10, y=0, l=4, w=2, theta=0, z=4, h=2)
    assert iou_3d(above, a).value == 0.0
    # Same footprint and height, vertical offset of h/2.
    half = Box3D(x=10, y=0, l=4, w=2, theta=0, z=2, h=2)
    assert iou_3d(half, a).value == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_ec_iou_3d_identity_and_alpha_zero():
    a = Box3D(x=10, y=0, l=4, w=2, theta=0, z=1, h=2)
    cfg = WeightConfig(alpha=4)
    assert ec_iou_3d(a, a, cfg).value == 1.0
    rng = np.random.default_rng(57)
    for _ in range(50):
        g2d = random_offside_gt(rng)
        g = Box3D(x=g2d.x, y=g2d.y, l=g2d.l, w=g2d.w, theta=g2d.theta,
                  z=rng.uniform(0, 2), h=rng.uniform(0.5, 3))
        p2d = nearby_box(rng, g2d)
        p = Box3D(x=p2d.x, y=p2d.y, l=p2d.l, w=p2d.w, theta=p2d.theta,
                  z=g.z + rng.uniform(-0.5, 0.5), h=g.h * rng.uniform(0.8, 1.2))
        assert ec_iou_3d(p, g, WeightConfig(alpha=0)).value == pytest.approx(
            iou_3d(p, g).value, abs=1e-9
        )


def test_ec_iou_3d_scales_with_vertical_overlap():
    g = Box3D(x=10, y=0, l=4, w=2, theta=0, z=0, h=2)
    p_full = Box3D(x=9, y=0, l=4, w=2, theta=0, z=0, h=2)
    p_half = Box3D(x=9, y=0, l=4, w=2, theta=0, z=1, h=2)
    cfg = WeightConfig(alpha=1)
    assert ec_iou_3d(p_full, g, cfg).value > ec_iou_3d(p_half, g, cfg).value


def test_sweep_row_count_and_identity_row():
    table = sweep_curve(G_REF, (5, 15), 0.1, alphas=(1, 2, 4, 8))
    assert len(table.rows) == 101
    center = min(table.rows, key=lambda r: abs(r.x - 10.0))
    assert center.iou == pytest.approx(1.0, abs=1e-12)
    assert all(v == pytest.approx(1.0, abs=1e-12) for v in center.ec_iou)


def test_sweep_iou_translation_symmetric():
    table = sweep_curve(G_REF, (5, 15), 0.5, alphas=(1,))
    by_x = {round(r.x, 6): r.iou for r in table.rows}
    for d in (0.5, 1.0, 2.0, 3.5):
        assert by_x[round(10 - d, 6)] == pytest.approx(by_x[round(10 + d, 6)], abs=1e-9)


def test_sweep_near_far_orderings():
    table = sweep_curve(G_REF, (5, 15), 0.1, alphas=(1, 2, 4, 8))
    for row in table.rows:
        for ec in row.ec_iou:
            if 6.0 < row.x < 10.0:
                assert ec > row.iou
            elif 10.0 < row.x < 14.0:
                assert ec < row.iou


def test_sweep_csv_format():
    table = sweep_curve(G_REF, (9, 11), 1.0, alphas=(1, 4))
    lines = table.to_csv().strip().split("\n")
    assert lines[0] == "x,iou,eciou_a1,eciou_a4"
    assert len(lines) == 4
    assert lines[2].startswith("10,1,1")


def test_sweep_rejects_bad_step():
    with pytest.raises(ValueError):
        sweep_curve(G_REF, (5, 15), 0.0)
