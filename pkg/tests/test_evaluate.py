import numpy as np
import pytest

from advexplain.attacks import AttackConfig, masked_attack, pgd_l2
from advexplain.evaluate import (
    BandSpec, ablate_segments, ablation_study, alpha_distribution, band_accuracy,
    band_mask, reattack_alpha,
)
from advexplain.explainer import ExplainConfig, explain, threshold_diff
from advexplain.models import (
    Dense, DifferentiableModel, Flatten, LabeledDataset, accuracy, predict,
)
from advexplain.tensor import Tensor

from conftest import DESK_EPS, DESK_ITERS


def linear_model(w):
    w = np.asarray(w, dtype=np.float64)
    return DifferentiableModel([Dense(w, np.zeros(w.shape[0]))], class_count=w.shape[0])


def desk_cfg(iters=DESK_ITERS):
    return AttackConfig(epsilon=DESK_EPS, iterations=iters)


def grid_explain_cfg(rows=4, cols=4, k=10, eps=DESK_EPS):
    return ExplainConfig(attack=AttackConfig(epsilon=eps, iterations=DESK_ITERS),
                         alpha=15.0, k=k, segmenter="grid",
                         segmenter_params={"rows": rows, "cols": cols})


# ---------------------------------------------------------------------------
# band masks
# ---------------------------------------------------------------------------

def test_band_spec_validation():
    with pytest.raises(ValueError):
        BandSpec(30.0, 20.0, "middle")
    with pytest.raises(ValueError):
        BandSpec(10.0, 20.0, "sideways")
    assert BandSpec(15.0, 85.0, "tails").describe() == "0%-15% & 85%-100%"
    assert BandSpec(15.0, 85.0, "middle").describe() == "15%-85%"


def test_zero_width_middle_band_is_empty():
    diff = Tensor(np.random.default_rng(0).normal(size=40))
    assert not band_mask(diff, BandSpec(30.0, 30.0, "middle")).any()


def test_full_middle_band_selects_everything():
    diff = Tensor(np.random.default_rng(1).normal(size=40))
    assert band_mask(diff, BandSpec(0.0, 100.0, "middle")).all()


def test_extreme_tails_band_is_empty():
    diff = Tensor(np.random.default_rng(2).normal(size=40))
    assert not band_mask(diff, BandSpec(0.0, 100.0, "tails")).any()


def test_tails_band_matches_threshold_diff():
    diff = Tensor(np.random.default_rng(3).normal(size=200))
    mask = band_mask(diff, BandSpec(15.0, 85.0, "tails"))
    flags = threshold_diff(diff, 15.0).data.astype(bool)
    assert np.array_equal(mask, flags)


def test_middle_and_tails_cover_everything():
    diff = Tensor(np.random.default_rng(4).normal(size=100))
    middle = band_mask(diff, BandSpec(15.0, 85.0, "middle"))
    tails = band_mask(diff, BandSpec(15.0, 85.0, "tails"))
    assert np.all(middle | tails)


# ---------------------------------------------------------------------------
# re-attack threshold search
# ---------------------------------------------------------------------------

def test_reattack_alpha_zero_for_misclassified_input():
    model = linear_model([[1.0, 0.0], [0.0, 1.0]])
    x = Tensor([2.0, 0.0])  # predicted 0
    assert reattack_alpha(model, x, 1, AttackConfig(epsilon=0.5, iterations=5)) == 0


def test_reattack_alpha_noflip_for_input_invariant_model():
    model = linear_model(np.zeros((2, 4)))  # reads nothing, gradient is zero
    x = Tensor([0.1, 0.2, 0.3, 0.4])
    y = predict(model, x)
    assert reattack_alpha(model, x, y, AttackConfig(epsilon=1.0, iterations=5)) is None


def test_reattack_alpha_two_feature_trace():
    # only the dominant-gradient feature matters; the first grid point whose
    # tail mask contains it already flips the prediction
    model = linear_model([[4.0, 0.01], [-4.0, -0.01]])
    x = Tensor([0.2, 0.5])
    y = predict(model, x)
    alpha = reattack_alpha(model, x, y, AttackConfig(epsilon=3.0, iterations=10))
    assert alpha == 1


def test_reattack_alpha_is_minimal_on_grid(desk_model, desk_test):
    cfg = desk_cfg()
    checked = 0
    for x, y in zip(desk_test.inputs, desk_test.labels):
        alpha = reattack_alpha(desk_model, x, int(y), cfg)
        if alpha is None or alpha <= 1:
            continue
        base = pgd_l2(desk_model, x, int(y), cfg)
        flags = threshold_diff(base.x_diff, float(alpha - 1))
        prev = masked_attack(desk_model, x, int(y),
                             AttackConfig(epsilon=cfg.epsilon, iterations=cfg.iterations,
                                          mask=flags.data.astype(bool)))
        assert not prev.success
        checked += 1
        if checked == 5:
            break
    assert checked > 0


def test_alpha_distribution_counts_and_determinism(desk_model, desk_test):
    sub = desk_test.subset(range(12))
    a = alpha_distribution(desk_model, sub, desk_cfg())
    b = alpha_distribution(desk_model, sub, desk_cfg())
    assert a.alphas == b.alphas
    assert a.no_flip_count == b.no_flip_count
    assert len(a.alphas) + a.no_flip_count == 12
    assert all(0 <= v <= 50 for v in a.alphas)


def test_alpha_distribution_all_misclassified_gives_zeros():
    model = linear_model([[1.0, 0.0], [0.0, 1.0]])
    data = LabeledDataset([Tensor([2.0, 0.0]), Tensor([3.0, 0.1])], [1, 1])
    rep = alpha_distribution(model, data, AttackConfig(epsilon=0.5, iterations=3))
    assert rep.alphas == [0.0, 0.0]


# ---------------------------------------------------------------------------
# band accuracy
# ---------------------------------------------------------------------------

def test_zero_width_band_reproduces_clean_accuracy(desk_model, desk_test):
    sub = desk_test.subset(range(15))
    acc = band_accuracy(desk_model, sub, BandSpec(20.0, 20.0, "middle"), desk_cfg(iters=3))
    assert acc == accuracy(desk_model, sub)


def test_full_band_reproduces_unrestricted_attack(desk_model, desk_test):
    sub = desk_test.subset(range(15))
    cfg = desk_cfg(iters=5)
    acc_band = band_accuracy(desk_model, sub, BandSpec(0.0, 100.0, "middle"), cfg)
    hits = 0
    for x, y in zip(sub.inputs, sub.labels):
        out = pgd_l2(desk_model, x, int(y), cfg)
        pred = predict(desk_model, Tensor(out.x_adv.data))
        hits += pred == int(y)
    assert acc_band == hits / len(sub)


def test_band_accuracy_in_unit_interval(desk_model, desk_test):
    sub = desk_test.subset(range(10))
    for band in (BandSpec(15, 85, "tails"), BandSpec(15, 85, "middle")):
        acc = band_accuracy(desk_model, sub, band, desk_cfg(iters=5))
        assert 0.0 <= acc <= 1.0


def test_wider_tails_never_help_the_model(desk_model, desk_test):
    sub = desk_test.subset(range(40))
    cfg = desk_cfg()
    accs = [band_accuracy(desk_model, sub, BandSpec(lo, 100 - lo, "tails"), cfg)
            for lo in (2, 5, 8, 12, 15, 20, 30)]
    steps = [accs[i + 1] <= accs[i] + 1e-9 for i in range(len(accs) - 1)]
    assert np.mean(steps) >= 0.95


# ---------------------------------------------------------------------------
# ablation
# ---------------------------------------------------------------------------

def test_ablate_empty_rank_range_keeps_prediction(desk_model, desk_test):
    x = desk_test.inputs[0]
    expl = explain(desk_model, x, grid_explain_cfg())
    assert ablate_segments(desk_model, x, expl, range(1, 1)) == predict(desk_model, x)


def test_ablate_constant_segment_is_noop():
    w = np.zeros((2, 16))
    w[0, 5], w[1, 5] = 1.0, -1.0
    model = DifferentiableModel([Flatten(), Dense(w, np.zeros(2))], class_count=2)
    x = np.full((4, 4), 0.25)
    x[1, 1] = 0.9  # pixel 5 is the only informative one
    xt = Tensor(x)
    cfg = ExplainConfig(attack=AttackConfig(epsilon=0.5, iterations=5), alpha=15.0, k=4,
                        segmenter="grid", segmenter_params={"rows": 2, "cols": 2})
    expl = explain(model, xt, cfg)
    constant_ranks = [r + 1 for r, (sid, _) in enumerate(expl.ranked)
                      if sid != expl.segments.labels[1, 1]]
    assert ablate_segments(model, xt, expl, constant_ranks) == predict(model, xt)


def test_ablate_informative_pixel_flips_prediction():
    w = np.zeros((2, 16))
    w[0, 5], w[1, 5] = 3.0, -3.0
    # clean: z = (3.0, -1.4) -> class 0; mean-fill puts 0.25 in the pixel,
    # z = (0.75, 0.85) -> class 1
    model = DifferentiableModel([Flatten(), Dense(w, np.array([0.0, 1.6]))], class_count=2)
    x = np.zeros((4, 4))
    x[1, 1] = 1.0
    xt = Tensor(x)
    assert predict(model, xt) == 0
    cfg = ExplainConfig(attack=AttackConfig(epsilon=1.0, iterations=5), alpha=15.0, k=1,
                        segmenter="grid", segmenter_params={"rows": 2, "cols": 2})
    expl = explain(model, xt, cfg)
    assert expl.ranked[0][0] == expl.segments.labels[1, 1]
    assert ablate_segments(model, xt, expl, [1]) == 1  # mean-fill kills the evidence


def test_ablate_rank_out_of_range(desk_model, desk_test):
    expl = explain(desk_model, desk_test.inputs[0], grid_explain_cfg(k=3))
    with pytest.raises(ValueError, match="rank"):
        ablate_segments(desk_model, desk_test.inputs[0], expl, [4])


def test_ablation_fill_preserves_unselected_segments(desk_model, desk_test):
    from advexplain.evaluate import _fill_segments
    x = desk_test.inputs[0]
    expl = explain(desk_model, x, grid_explain_cfg())
    ids = [expl.ranked[0][0]]
    filled = _fill_segments(x.data, expl.segments.labels, ids)
    member = np.isin(expl.segments.labels, ids)
    assert filled.shape == x.shape
    assert np.array_equal(filled[0][~member], x.data[0][~member])
    assert np.allclose(filled[0][member], x.data[0][member].mean())


def test_ablation_study_deterministic(desk_model, desk_test):
    sub = desk_test.subset(range(8))
    a = ablation_study(desk_model, sub, grid_explain_cfg())
    b = ablation_study(desk_model, sub, grid_explain_cfg())
    assert (a.clean_accuracy, a.blur_top_accuracy, a.blur_next_accuracy) == \
           (b.clean_accuracy, b.blur_top_accuracy, b.blur_next_accuracy)


def test_ablation_study_on_input_blind_model():
    # a model that ignores its input cannot be hurt by any ablation
    model = linear_model(np.zeros((2, 4)))
    data = LabeledDataset([Tensor([0.1, 0.2, 0.3, 0.4]), Tensor([0.4, 0.3, 0.2, 0.1])], [0, 1])
    cfg = ExplainConfig(attack=AttackConfig(epsilon=1.0, iterations=3), alpha=15.0, k=2,
                        segmenter="tokens")
    rep = ablation_study(model, data, cfg)
    assert rep.blur_top_accuracy == rep.clean_accuracy
    assert rep.blur_next_accuracy == rep.clean_accuracy
