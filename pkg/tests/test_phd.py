import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_cfg
from ntype_phd.frames import DetectionFrame
from ntype_phd.phd import (
    IndependentGMPHD,
    NTypeGMPHD,
    TypedIntensity,
    birth_intensity,
    confusion_clutter_logintensity,
    extract_states,
    predict,
    prune_and_merge,
    step,
    update,
)
from ntype_phd.sim import preset_scenarios, simulate

M0 = np.array([100.0, 50, 0, 0, 20, 40])
P0 = np.diag([100.0, 100, 25, 25, 20, 20])
Z0 = np.array([[102.0, 51, 21, 39]])

# frozen from an independent scipy computation of the update weights
W_DETECT = 0.9991051477327834
W_DETECT_CONFUSED = 0.755585877001644  # same target, plus a type-1 twin confused at p = 0.3


def single(i, w=1.0, m=M0, P=P0):
    return TypedIntensity(i, np.array([w]), np.array([m]), np.array([P]))


def test_update_step_through(cfg1):
    post = update(single(0), DetectionFrame(0, 0, Z0), [single(0)], cfg1)
    assert len(post) == 2
    assert post.weights[0] == pytest.approx(0.07, abs=1e-15)
    assert post.weights[1] == pytest.approx(W_DETECT, abs=1e-12)
    np.testing.assert_allclose(post.means[0], M0)
    np.testing.assert_allclose(post.means[1], [101.47058824, 50.73529412, 0, 0, 20.35714286, 39.64285714], atol=1e-7)


def test_confusion_cross_check():
    cfg = make_cfg([[0.93, 0.1], [0.3, 0.9]])
    pred = [single(0), single(1)]
    post = update(pred[0], DetectionFrame(0, 0, Z0), pred, cfg)
    assert post.weights[1] == pytest.approx(W_DETECT_CONFUSED, abs=1e-12)
    # confusion clutter is p_D[1,0] times the type-1 predicted measurement density
    from scipy.stats import multivariate_normal

    H = cfg.H[1][0]
    expected = 0.3 * multivariate_normal.pdf(Z0[0], H @ M0, H @ P0 @ H.T + 36 * np.eye(4))
    assert np.exp(confusion_clutter_logintensity(Z0[0], 0, pred, cfg)) == pytest.approx(expected, rel=1e-12)


def test_no_confusion_term_without_other_types(cfg1):
    assert confusion_clutter_logintensity(Z0[0], 0, [single(0)], cfg1) == -np.inf


def test_update_component_count_and_layout(cfg1, rng):
    pred = TypedIntensity(0, rng.uniform(0.1, 1, 4), rng.normal(100, 20, (4, 6)), np.tile(P0, (4, 1, 1)))
    Z = rng.normal(100, 20, (3, 4))
    post = update(pred, DetectionFrame(0, 0, Z), [pred], cfg1)
    assert len(post) == (3 + 1) * 4
    np.testing.assert_allclose(post.weights[:4], 0.07 * pred.weights)
    # detection weights for each measurement never exceed 1 in total
    det = post.weights[4:].reshape(3, 4)
    assert np.all(det.sum(axis=1) <= 1 + 1e-12)


def test_update_rejects_wrong_detector(cfg1):
    with pytest.raises(ValueError):
        update(single(0), DetectionFrame(0, 1, Z0), [single(0)], cfg1)


def test_update_outside_box_is_all_signal(cfg1):
    # a measurement outside the clutter box has zero background clutter density
    z = np.array([[-10.0, 50, 20, 40]])
    post = update(single(0, m=np.array([-10.0, 50, 0, 0, 20, 40])), DetectionFrame(0, 0, z), [single(0)], cfg1)
    assert post.weights[1] == pytest.approx(1.0)


def test_birth_mean_is_measurement(cfg1):
    b = birth_intensity([[10.0, 20, 30, 40], [1.0, 2, 3, 4]], cfg1, 0)
    np.testing.assert_allclose(b.means, [[10, 20, 0, 0, 30, 40], [1, 2, 0, 0, 3, 4]])
    np.testing.assert_allclose(b.weights, [1e-4, 1e-4])
    np.testing.assert_allclose(b.covs[0], P0)


def test_predict_puts_births_first(cfg1):
    prior = single(0, w=0.8)
    births = birth_intensity(Z0, cfg1, 0)
    out = predict(prior, births, cfg1)
    assert out.weights.tolist() == pytest.approx([1e-4, 0.8 * 0.99])
    np.testing.assert_allclose(out.means[1], cfg1.F[0] @ M0)


@given(st.floats(0.0, 0.8), st.floats(0.0, 0.8))
def test_confusion_monotonically_suppresses(a, b):
    lo, hi = sorted((a, b))
    pred = [single(0, m=M0 + [3, -2, 0, 0, 1, 0]), single(1)]
    w = []
    for p in (lo, hi):
        cfg = make_cfg([[0.93, 0.1], [p, 0.95]])
        w.append(update(pred[0], DetectionFrame(0, 0, Z0), pred, cfg).weights[1])
    assert w[1] <= w[0] + 1e-15


def test_merge_1d_golden():
    cfg = make_cfg([[0.9]])
    it = TypedIntensity(0, np.array([0.6, 0.4]), np.array([[0.0], [1.0]]), np.ones((2, 1, 1)))
    out = prune_and_merge(it, cfg)
    assert len(out) == 1
    assert out.weights[0] == pytest.approx(1.0)
    assert out.means[0, 0] == pytest.approx(0.4, abs=1e-15)
    assert out.covs[0, 0, 0] == pytest.approx(1.24, abs=1e-15)


def test_merge_threshold_is_squared_distance():
    cfg = make_cfg([[0.9]])
    # distance^2 = 4 merges (<= U), 4.41 does not
    for d, n_out in ((2.0, 1), (2.1, 2)):
        it = TypedIntensity(0, np.array([0.6, 0.4]), np.array([[0.0], [d]]), np.ones((2, 1, 1)))
        assert len(prune_and_merge(it, cfg)) == n_out


def test_prune_drops_light_components():
    cfg = make_cfg([[0.9]])
    it = TypedIntensity(0, np.array([0.5, 9e-6]), np.array([[0.0], [100.0]]), np.ones((2, 1, 1)))
    out = prune_and_merge(it, cfg)
    assert out.weights.tolist() == [0.5]


def test_component_cap_keeps_heaviest():
    cfg = make_cfg([[0.9]], max_components=3)
    w = np.array([0.1, 0.5, 0.2, 0.9, 0.3])
    it = TypedIntensity(0, w, np.arange(5.0)[:, None] * 100, np.ones((5, 1, 1)))
    out = prune_and_merge(it, cfg)
    assert sorted(out.weights.tolist()) == [0.3, 0.5, 0.9]


@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_prune_merge_conserves_mass(seed, n):
    r = np.random.default_rng(seed)
    cfg = make_cfg([[0.9]])
    w = 10 ** r.uniform(-7, 0, n)
    means = r.normal(0, 10, (n, 6))
    A = r.normal(size=(n, 6, 6))
    covs = A @ np.swapaxes(A, 1, 2) + np.eye(6)
    out = prune_and_merge(TypedIntensity(0, w, means, covs), cfg)
    kept = w[w >= cfg.prune_T].sum()
    assert out.total_mass == pytest.approx(kept, rel=1e-12)
    assert len(out) <= max(1, int((w >= cfg.prune_T).sum()))
    for c in out.components:
        c.check(1e-8)


def test_extract_is_strict_and_sorted():
    cfg = make_cfg([[0.9]])
    it = TypedIntensity(0, np.array([0.5, 0.7, 1.8]), np.arange(3.0)[:, None] * np.ones((3, 6)), np.tile(P0, (3, 1, 1)))
    est = extract_states(it, cfg)
    assert [e.weight for e in est] == [1.8, 0.7]
    assert all(e.count == 2 for e in est)


def test_step_checks_frame_count():
    cfg = make_cfg([[0.9, 0.1], [0.1, 0.9]])
    with pytest.raises(ValueError):
        step([TypedIntensity.empty(0), TypedIntensity.empty(1)], [DetectionFrame(0, 0, Z0)], cfg)


def test_zero_confusion_matches_independent_filters():
    scn = preset_scenarios()["football3"]
    _, dets = simulate(scn)
    from ntype_phd.config import ModelParams

    cfg = ModelParams.from_scenario(scn).to_filter_config(confusion=False)
    a, b = NTypeGMPHD(cfg), IndependentGMPHD(cfg)
    for frames in dets[:40]:
        frames = [f.stripped() for f in frames]
        ea, eb = a.step(frames), b.step(frames)
        for i in range(3):
            assert len(ea[i]) == len(eb[i])
            for x, y in zip(ea[i], eb[i]):
                assert x.weight == y.weight
                np.testing.assert_array_equal(x.mean, y.mean)


def test_tracks_a_lone_target(cfg1):
    f = NTypeGMPHD(cfg1)
    for k in range(15):
        x = np.array([100.0 + 2 * k, 200.0, 30.0, 60.0])
        est = f.step([DetectionFrame(k, 0, x[None])])
    assert len(est[0]) == 1
    np.testing.assert_allclose(est[0][0].mean[[0, 1, 4, 5]], x, atol=2.0)
    assert est[0][0].mean[2] == pytest.approx(2.0, abs=0.5)
    assert f.expected_cardinality()[0] == pytest.approx(1.0, abs=0.1)
