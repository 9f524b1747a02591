import math

import numpy as np
import pytest
import torch

from amcontrast.losses import (LossBreakdown, NonFiniteLossError,
                               SingletonBatchError, breakdown,
                               consistency_losses, denominator,
                               instance_nt_xent, l2_normalize, similarity)
from amcontrast.pairing import enumerate_positives
from amcontrast.reference import (oracle_consistency_losses,
                                  oracle_instance_nt_xent)


def random_unit_views(b, d=16, seed=0):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(b, 2, 2, d))
    return h / np.linalg.norm(h, axis=-1, keepdims=True)


def all_equal_views(b, d=8):
    e = np.zeros(d)
    e[0] = 1.0
    return np.broadcast_to(e, (b, 2, 2, d)).copy()


class TestSimilarity:
    def test_unit_vectors(self):
        u = np.array([1.0, 0.0])
        assert similarity(u, u, 0.07) == pytest.approx(1 / 0.07, abs=1e-12)
        assert similarity(u, np.array([0.0, 1.0]), 0.07) == pytest.approx(0.0)

    def test_scales_inversely_with_tau(self):
        u = np.array([0.6, 0.8])
        v = np.array([0.8, 0.6])
        assert similarity(u, v, 0.5) == pytest.approx(2 * similarity(u, v, 1.0))

    @pytest.mark.parametrize("tau", [0.0, -0.07])
    def test_rejects_nonpositive_tau(self, tau):
        with pytest.raises(ValueError):
            similarity(np.ones(2), np.ones(2), tau)


class TestDenominator:
    def test_identical_embeddings_closed_form(self):
        h = torch.as_tensor(all_equal_views(2))
        tau = 0.25
        d = denominator((0, 0, 0), h, tau)
        assert float(d) == pytest.approx(7 * math.exp(1 / tau), rel=1e-12)

    def test_orthogonal_anchor(self):
        h = torch.zeros(1, 2, 2, 4, dtype=torch.float64)
        h[0, 0, 0, 0] = 1.0
        h[0, 0, 1, 1] = 1.0
        h[0, 1, 0, 2] = 1.0
        h[0, 1, 1, 3] = 1.0
        assert float(denominator((0, 0, 0), h, 1.0)) == pytest.approx(3.0, abs=1e-12)

    def test_brute_force_match(self):
        h = torch.as_tensor(random_unit_views(3, seed=5))
        tau = 0.2
        flat = h.reshape(-1, h.shape[-1])
        anchor = flat[5]
        expected = sum(math.exp(float(anchor @ flat[j]) / tau)
                       for j in range(12) if j != 5)
        got = denominator((1, 0, 1), h, tau)  # flat index 1*4 + 0*2 + 1 = 5
        assert float(got) == pytest.approx(expected, rel=1e-9)

    def test_singleton_rejected(self):
        with pytest.raises(SingletonBatchError):
            denominator(0, torch.ones(1, 8, dtype=torch.float64), 1.0)


class TestConsistencyLosses:
    def test_degenerate_equal_embeddings(self):
        for b in (1, 2, 4, 8):
            h = torch.as_tensor(all_equal_views(b))
            out = consistency_losses(h, 0.07)
            expected = math.log(4 * b - 1)
            for key in ("ac", "sc", "jc"):
                assert float(out[key]) == pytest.approx(expected, abs=1e-9)
            assert float(out["total"]) == pytest.approx(3 * expected, abs=1e-9)

    def test_aligned_positive_scalar_example(self):
        # B=1, positive aligned with the anchor, both other views orthogonal:
        # the anchor's term is -log(e^(1/tau) / (e^(1/tau) + 2)); tau=1 gives
        # log(e + 2) - 1, which the scalar oracle puts at 0.5514447...
        h = torch.zeros(1, 2, 2, 4, dtype=torch.float64)
        h[0, 0, 0, 0] = 1.0
        h[0, 1, 0, 0] = 1.0  # ac positive of anchor (0,0,0), aligned
        h[0, 0, 1, 1] = 1.0
        h[0, 1, 1, 2] = 1.0
        tau = 1.0
        d = float(denominator((0, 0, 0), h, tau))
        term = -math.log(math.exp(similarity(h[0, 0, 0], h[0, 1, 0], tau)) / d)
        expected = math.log(math.e + 2) - 1
        assert term == pytest.approx(expected, abs=1e-12)
        assert term == pytest.approx(0.5514447139320511, abs=1e-9)

    @pytest.mark.parametrize("b", [1, 2, 4])
    def test_matches_brute_force_oracle(self, b):
        for trial in range(10):
            h = random_unit_views(b, seed=100 * b + trial)
            got = consistency_losses(torch.as_tensor(h), 0.07)
            want = oracle_consistency_losses(h, 0.07)
            for key in ("ac", "sc", "jc", "total"):
                assert float(got[key]) == pytest.approx(want[key], abs=1e-9)

    def test_permutation_invariance(self):
        h = random_unit_views(6, seed=1)
        perm = np.random.default_rng(2).permutation(6)
        a = consistency_losses(torch.as_tensor(h), 0.1)
        b = consistency_losses(torch.as_tensor(h[perm]), 0.1)
        for key in ("ac", "sc", "jc", "total"):
            assert float(a[key]) == pytest.approx(float(b[key]), abs=1e-9)

    def test_orthogonal_rotation_invariance(self):
        h = random_unit_views(4, d=12, seed=3)
        q, _ = np.linalg.qr(np.random.default_rng(4).normal(size=(12, 12)))
        a = consistency_losses(torch.as_tensor(h), 0.07)
        b = consistency_losses(torch.as_tensor(h @ q), 0.07)
        for key in ("ac", "sc", "jc", "total"):
            assert float(a[key]) == pytest.approx(float(b[key]), abs=1e-9)

    def test_small_tau_stays_finite(self):
        h = torch.as_tensor(random_unit_views(4, seed=6))
        out = consistency_losses(h, 0.001)
        assert math.isfinite(float(out["total"]))

    def test_nan_embeddings_raise(self):
        h = torch.as_tensor(random_unit_views(2, seed=7))
        h[0, 0, 0, 0] = float("nan")
        with pytest.raises(NonFiniteLossError):
            consistency_losses(h, 0.07)

    def test_rejects_nonpositive_tau(self):
        h = torch.as_tensor(random_unit_views(2))
        with pytest.raises(ValueError):
            consistency_losses(h, 0.0)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            consistency_losses(torch.ones(4, 3, 2, 8), 0.07)

    def test_symmetric_variant_differs(self):
        h = torch.as_tensor(random_unit_views(3, seed=8))
        a = consistency_losses(h, 0.07)
        b = consistency_losses(h, 0.07, symmetric=True)
        assert float(a["total"]) != pytest.approx(float(b["total"]), abs=1e-12)

    def test_redirected_relations_change_numerator_only(self):
        h = random_unit_views(2, seed=9)
        rels = enumerate_positives(2)
        redirected = [type(r)(r.tier, r.anchor, (1 - r.anchor[0], r.positive[1],
                                                 r.positive[2]))
                      for r in rels]
        base = consistency_losses(torch.as_tensor(h), 0.07)
        alt = consistency_losses(torch.as_tensor(h), 0.07, relations=redirected)
        assert float(base["total"]) != pytest.approx(float(alt["total"]), abs=1e-12)

    def test_breakdown_dataclass(self):
        out = consistency_losses(torch.as_tensor(random_unit_views(2)), 0.07)
        bd = breakdown(out)
        assert isinstance(bd, LossBreakdown)
        assert bd.l_total == pytest.approx(bd.l_ac + bd.l_sc + bd.l_jc, abs=1e-9)


class TestGradients:
    def test_autograd_matches_central_difference(self):
        # scale-relative max error across a few random embeddings
        torch.manual_seed(0)
        for trial in range(3):
            h0 = torch.randn(2, 2, 2, 8, dtype=torch.float64, requires_grad=True)
            loss = consistency_losses(l2_normalize(h0), 0.07)["total"]
            loss.backward()
            analytic = h0.grad.clone()
            step = 1e-5
            fd = torch.zeros_like(h0)
            flat = h0.detach().reshape(-1)
            for i in range(flat.numel()):
                for sign in (1.0, -1.0):
                    bumped = flat.clone()
                    bumped[i] += sign * step
                    val = consistency_losses(
                        l2_normalize(bumped.reshape(h0.shape)), 0.07)["total"]
                    fd.reshape(-1)[i] += sign * float(val) / (2 * step)
            scale = max(1.0, float(fd.abs().max()))
            assert float((analytic - fd).abs().max()) / scale < 1e-4


class TestInstanceBaseline:
    def test_degenerate_equal_embeddings(self):
        for b in (1, 2, 8):
            e = np.zeros(6)
            e[0] = 1.0
            h = torch.as_tensor(np.broadcast_to(e, (b, 2, 6)).copy())
            if b == 1:
                # 2B - 1 = 1 candidate: loss is exactly 0
                assert float(instance_nt_xent(h, 0.07)) == pytest.approx(0.0, abs=1e-9)
            else:
                assert float(instance_nt_xent(h, 0.07)) == pytest.approx(
                    math.log(2 * b - 1), abs=1e-9)

    @pytest.mark.parametrize("b", [2, 4, 8])
    def test_matches_brute_force_oracle(self, b):
        rng = np.random.default_rng(b)
        h = rng.normal(size=(b, 2, 16))
        h /= np.linalg.norm(h, axis=-1, keepdims=True)
        got = float(instance_nt_xent(torch.as_tensor(h), 0.07))
        assert got == pytest.approx(oracle_instance_nt_xent(h, 0.07), abs=1e-9)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            instance_nt_xent(torch.ones(3, 3, 4), 0.07)


class TestNormalize:
    def test_unit_norm(self):
        h = torch.randn(5, 7, dtype=torch.float64)
        n = torch.linalg.vector_norm(l2_normalize(h), dim=-1)
        assert torch.allclose(n, torch.ones(5, dtype=torch.float64), atol=1e-6)

    def test_zero_vector_floor(self):
        out = l2_normalize(torch.zeros(1, 4))
        assert torch.isfinite(out).all()
        assert torch.equal(out, torch.zeros(1, 4))
