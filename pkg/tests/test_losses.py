import numpy as np
import pytest

from phasesep.complexspace import AngleMode, ComplexEmbedding, phase_delta
from phasesep.errors import CompositionError, NormalizationError
from phasesep.losses import (
    LossOutput,
    LossWeights,
    Temperatures,
    amplitude_penalty,
    angle_gradient_magnitude,
    angle_loss,
    cosine_gradient_magnitude,
    cosine_loss,
    ibn_loss,
    total_loss,
)
from phasesep.masking import (
    PairIndex,
    SemanticLabel,
    build_anticollision_mask,
    identity_mask,
)
from phasesep.numerics import RngStream, finite_difference_gradient


def L(aspect, pol):
    return SemanticLabel(aspect=aspect, polarity=pol)


def grads_vector(out, n, d):
    g = np.zeros(n * d)
    for i, gi in out.grads.items():
        g[i * d : (i + 1) * d] = gi
    return g


def fd_check(fn, embs, out, tol=1e-5):
    n, d = len(embs), embs[0].size
    fd = finite_difference_gradient(
        lambda v: fn([v[i * d : (i + 1) * d] for i in range(n)]).value,
        np.concatenate(embs),
    )
    an = grads_vector(out, n, d)
    denom = np.maximum(np.maximum(np.abs(an), np.abs(fd)), 1e-2)
    assert (np.abs(an - fd) / denom).max() < tol


class TestIbnLoss:
    def test_anchor_and_positive_only(self):
        embs = [np.array([1.0, 0.0]), np.array([0.6, 0.8])]
        pairs = [PairIndex(0, 1, [])]
        out = ibn_loss(embs, pairs, identity_mask(2), tau=20.0)
        assert out.value == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_softmax_ln2(self):
        # negative at the same similarity as the positive: L = ln 2, any tau
        embs = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])]
        pairs = [PairIndex(0, 1, [])]
        for tau in (1.0, 7.3, 20.0):
            out = ibn_loss(embs, pairs, identity_mask(3), tau=tau)
            assert out.value == pytest.approx(np.log(2.0), rel=1e-12)

    def test_mask_zeroes_bystander_value_and_gradient(self):
        # fixed 4-item batch: anchor, positive, negative, same-label bystander
        rng = RngStream(42)
        embs = [rng.normal(0, 1, 6) for _ in range(4)]
        labels = [L("a", "pos"), L("a", "pos"), L("a", "neg"), L("a", "pos")]
        pairs = [PairIndex(0, 1, [2])]
        masked = ibn_loss(embs, pairs, build_anticollision_mask(labels), 20.0)
        # computing "both ways": manually drop the bystander from the batch
        drop = ibn_loss(embs[:3], pairs, build_anticollision_mask(labels[:3]), 20.0)
        assert masked.value == pytest.approx(drop.value, rel=1e-12)
        assert np.all(masked.grads[3] == 0.0)

    def test_unmasked_bystander_changes_value(self):
        rng = RngStream(43)
        embs = [rng.normal(0, 1, 6) for _ in range(4)]
        labels = [L("a", "pos"), L("a", "pos"), L("a", "neg"), L("a", "pos")]
        pairs = [PairIndex(0, 1, [2])]
        masked = ibn_loss(embs, pairs, build_anticollision_mask(labels), 20.0)
        unmasked = ibn_loss(embs, pairs, identity_mask(4), 20.0)
        assert unmasked.value > masked.value
        assert np.any(unmasked.grads[3] != 0.0)

    def test_rescaling_invariance(self):
        rng = RngStream(44)
        embs = [rng.normal(0, 1, 8) for _ in range(4)]
        labels = [L("a", "pos"), L("a", "pos"), L("a", "neg"), L("b", "neg")]
        pairs = [PairIndex(0, 1, [2])]
        m = build_anticollision_mask(labels)
        base = ibn_loss(embs, pairs, m, 20.0).value
        scaled = [e * s for e, s in zip(embs, [0.2, 5.0, 1.7, 100.0])]
        assert ibn_loss(scaled, pairs, m, 20.0).value == pytest.approx(base, rel=1e-10)

    def test_zero_norm_rejected(self):
        embs = [np.zeros(4), np.ones(4)]
        with pytest.raises(NormalizationError):
            ibn_loss(embs, [PairIndex(0, 1, [])], identity_mask(2), 20.0)

    def test_gradient_matches_fd(self):
        rng = RngStream(45)
        labels = [L("a", "pos"), L("a", "pos"), L("a", "neg"), L("a", "pos"), L("b", "neg")]
        m = build_anticollision_mask(labels)
        pairs = [PairIndex(0, 1, [2])]
        for _ in range(10):
            embs = [rng.normal(0, 1, 8) for _ in range(5)]
            out = ibn_loss(embs, pairs, m, 20.0)
            fd_check(lambda es: ibn_loss(es, pairs, m, 20.0), embs, out)


class TestAngleLoss:
    def _cembs(self, embs):
        return [ComplexEmbedding.from_flat(e) for e in embs]

    def test_no_negatives_zero(self):
        rng = RngStream(50)
        embs = [rng.normal(0, 1, 6) for _ in range(2)]
        out = angle_loss(self._cembs(embs), [PairIndex(0, 1, [])], 20.0)
        assert out.value == 0.0
        assert all(np.all(g == 0.0) for g in out.grads.values())

    def test_balanced_margin_log2(self):
        # delta(z, pos) == delta(z, neg) -> per-anchor term log 2
        z = ComplexEmbedding(re=[1.0], im=[0.0])
        pos = ComplexEmbedding(re=[1.0], im=[1.0])  # pi/4 away
        neg = ComplexEmbedding(re=[1.0], im=[-1.0])  # pi/4 away
        out = angle_loss([z, pos, neg], [PairIndex(0, 1, [2])], 20.0)
        assert out.value == pytest.approx(np.log(2.0), rel=1e-12)

    def test_scale_invariance_both_modes(self):
        rng = RngStream(51)
        embs = [rng.normal(0, 1, 8) for _ in range(3)]
        pairs = [PairIndex(0, 1, [2])]
        for mode in (AngleMode.EXACT_PHASE, AngleMode.SURROGATE_SUM):
            base = angle_loss(self._cembs(embs), pairs, 20.0, mode=mode).value
            scaled = self._cembs([e * 3.7 for e in embs])
            assert abs(angle_loss(scaled, pairs, 20.0, mode=mode).value - base) < 1e-10

    def test_monotone_margin(self):
        # pushing the negative's phase delta up strictly decreases the loss
        z = ComplexEmbedding(re=[1.0], im=[0.0])
        pos = ComplexEmbedding(re=[1.0], im=[0.3])
        prev = np.inf
        for ang in (0.5, 1.0, 1.8, 2.6, 3.0):
            neg = ComplexEmbedding(re=[np.cos(ang)], im=[np.sin(ang)])
            val = angle_loss([z, pos, neg], [PairIndex(0, 1, [2])], 5.0).value
            assert val < prev
            prev = val

    def test_paper_literal_sign_flips_ordering(self):
        z = ComplexEmbedding(re=[1.0], im=[0.0])
        near = ComplexEmbedding(re=[1.0], im=[0.2])
        far = ComplexEmbedding(re=[-1.0], im=[0.4])
        good = angle_loss([z, near, far], [PairIndex(0, 1, [2])], 5.0).value
        flipped = angle_loss([z, near, far], [PairIndex(0, 1, [2])], 5.0, paper_literal_sign=True).value
        # intent sign rewards (near positive, far negative); literal sign punishes it
        assert good < flipped

    def test_deltas_match_phase_delta_surface(self):
        rng = RngStream(52)
        embs = [rng.normal(0, 1, 8) for _ in range(3)]
        cembs = self._cembs(embs)
        dp = phase_delta(cembs[0], cembs[1])
        dn = phase_delta(cembs[0], cembs[2])
        out = angle_loss(cembs, [PairIndex(0, 1, [2])], 3.0)
        expected = np.log1p(np.exp(3.0 * (dp - dn)))
        assert out.value == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("mode", [AngleMode.EXACT_PHASE, AngleMode.SURROGATE_SUM])
    def test_gradient_matches_fd(self, mode):
        rng = RngStream(53)
        pairs = [PairIndex(0, 1, [2]), PairIndex(3, 4, [5])]
        done = 0
        while done < 8:
            embs = [rng.normal(0, 1, 8) for _ in range(6)]
            from phasesep.certify import _phases_clear_of_branches, _surrogate_clear

            clear = _surrogate_clear if mode is AngleMode.SURROGATE_SUM else _phases_clear_of_branches
            if not clear(embs, pairs):
                continue
            tau = 20.0 if mode is AngleMode.EXACT_PHASE else 1.0
            fn = lambda es: angle_loss(self._cembs(es), pairs, tau, mode=mode)
            fd_check(fn, embs, fn(embs))
            done += 1


class TestCosineLoss:
    def test_no_negatives_zero(self):
        rng = RngStream(60)
        embs = [rng.normal(0, 1, 4) for _ in range(2)]
        assert cosine_loss(embs, [PairIndex(0, 1, [])], 20.0).value == 0.0

    def test_closed_form(self):
        # cos(pos)=1, cos(neg)=-1, tau=1 -> log(1 + e^-2)
        embs = [np.array([1.0, 0.0]), np.array([2.0, 0.0]), np.array([-3.0, 0.0])]
        out = cosine_loss(embs, [PairIndex(0, 1, [2])], 1.0)
        assert out.value == pytest.approx(np.log1p(np.exp(-2.0)), rel=1e-12)

    def test_rescaling_invariance(self):
        rng = RngStream(61)
        embs = [rng.normal(0, 1, 6) for _ in range(3)]
        pairs = [PairIndex(0, 1, [2])]
        base = cosine_loss(embs, pairs, 20.0).value
        scaled = [e * s for e, s in zip(embs, [0.1, 42.0, 3.3])]
        assert cosine_loss(scaled, pairs, 20.0).value == pytest.approx(base, rel=1e-10)

    def test_zero_norm_rejected(self):
        with pytest.raises(NormalizationError):
            cosine_loss([np.ones(4), np.zeros(4), np.ones(4)], [PairIndex(0, 1, [2])], 1.0)

    def test_gradient_matches_fd(self):
        rng = RngStream(62)
        pairs = [PairIndex(0, 1, [2, 3])]
        for _ in range(10):
            embs = [rng.normal(0, 1, 8) for _ in range(4)]
            out = cosine_loss(embs, pairs, 20.0)
            fd_check(lambda es: cosine_loss(es, pairs, 20.0), embs, out)


class TestAmplitudePenalty:
    def _cembs(self, embs):
        return [ComplexEmbedding.from_flat(e) for e in embs]

    def test_equal_amplitudes_zero(self):
        embs = [np.array([3.0, 0.0]), np.array([0.0, 3.0]), np.array([3.0, 0.0])]
        out = amplitude_penalty(self._cembs(embs), ["a", "a", "a"])
        assert out.value == pytest.approx(0.0, abs=1e-15)

    def test_single_member_groups_zero(self):
        embs = [np.array([1.0, 0.0]), np.array([5.0, 0.0])]
        out = amplitude_penalty(self._cembs(embs), ["a", "b"])
        assert out.value == 0.0
        assert all(np.all(g == 0.0) for g in out.grads.values())

    def test_variance_form(self):
        # amplitudes {1, 3} in one group: mean 2, penalty 1.0
        embs = [np.array([1.0, 0.0]), np.array([3.0, 0.0])]
        out = amplitude_penalty(self._cembs(embs), ["a", "a"])
        assert out.value == pytest.approx(1.0, rel=1e-12)

    def test_gradient_matches_fd(self):
        rng = RngStream(70)
        aspects = ["a", "a", "b", "b", "b"]
        for _ in range(10):
            embs = [rng.normal(0, 1, 6) for _ in range(5)]
            out = amplitude_penalty(self._cembs(embs), aspects)
            fd_check(lambda es: amplitude_penalty(self._cembs(es), aspects), embs, out)


class TestTotalLoss:
    def _mk(self, value, grads=None):
        return LossOutput(value, grads or {})

    def test_arithmetic(self):
        comps = {"ibn": self._mk(0.2), "angle": self._mk(0.3), "cos": self._mk(0.5)}
        out = total_loss(comps, LossWeights(1.0, 1.0, 1.0, 0.0))
        assert out.value == pytest.approx(1.0)

    def test_zero_weight_contributes_nothing(self):
        g = np.ones(4)
        comps = {
            "ibn": self._mk(1.0, {0: g}),
            "angle": self._mk(100.0, {0: 50 * g}),
            "cos": self._mk(0.5, {0: 2 * g}),
        }
        out = total_loss(comps, LossWeights(1.0, 0.0, 1.0, 0.0))
        assert out.value == pytest.approx(1.5)
        assert np.allclose(out.grads[0], 3 * np.ones(4))

    def test_default_weights_all_one(self):
        w = LossWeights()
        assert (w.w_ibn, w.w_angle, w.w_cos) == (1.0, 1.0, 1.0)
        assert w.w_amp == 0.0

    def test_missing_weighted_component_rejected(self):
        with pytest.raises(CompositionError):
            total_loss({"ibn": self._mk(1.0)}, LossWeights(1.0, 1.0, 1.0, 0.0))

    def test_shape_mismatch_rejected(self):
        comps = {
            "ibn": self._mk(1.0, {0: np.ones(4)}),
            "angle": self._mk(1.0, {0: np.ones(6)}),
            "cos": self._mk(1.0, {0: np.ones(4)}),
        }
        with pytest.raises(CompositionError):
            total_loss(comps, LossWeights(1.0, 1.0, 1.0, 0.0))

    def test_unknown_component_rejected(self):
        with pytest.raises(CompositionError):
            total_loss({"bogus": self._mk(1.0)}, LossWeights())

    def test_weights_validation(self):
        with pytest.raises(ValueError):
            LossWeights(-1.0, 1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            LossWeights(0.0, 0.0, 0.0, 0.0)

    def test_temperatures_validation(self):
        with pytest.raises(ValueError):
            Temperatures(tau_ibn=0.0)
        t = Temperatures()
        assert t.tau_ibn == t.tau_angle == 20.0


class TestGradientMagnitudes:
    def test_cosine_vanishes_at_zero(self):
        assert cosine_gradient_magnitude(0.0) == 0.0

    def test_cosine_peak_at_half_pi(self):
        assert cosine_gradient_magnitude(np.pi / 2) == pytest.approx(1.0)

    def test_angle_constant(self):
        grid = np.linspace(0, np.pi, 100)
        vals = angle_gradient_magnitude(grid, tau=20.0)
        assert np.all(vals == 20.0)

    def test_scalar_and_array_forms(self):
        assert isinstance(cosine_gradient_magnitude(0.5), float)
        assert cosine_gradient_magnitude(np.array([0.5, 1.0])).shape == (2,)
        assert isinstance(angle_gradient_magnitude(0.5, 2.0), float)


class TestNonNegativity:
    def test_all_losses_nonnegative(self):
        rng = RngStream(80)
        labels = [L("a", "pos"), L("a", "pos"), L("a", "neg"), L("b", "neu")]
        pairs = [PairIndex(0, 1, [2])]
        m = build_anticollision_mask(labels)
        for _ in range(20):
            embs = [rng.normal(0, 1, 8) for _ in range(4)]
            cembs = [ComplexEmbedding.from_flat(e) for e in embs]
            assert ibn_loss(embs, pairs, m, 20.0).value >= 0.0
            assert angle_loss(cembs, pairs, 20.0).value >= 0.0
            assert cosine_loss(embs, pairs, 20.0).value >= 0.0
            assert amplitude_penalty(cembs, [l.aspect for l in labels]).value >= 0.0
