import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jamcom.channel import make_deterministic_scenario, au_statistics_uniform_phase
from jamcom.metrics import (
    InterferenceTerms,
    PrecoderSet,
    interference_terms,
    jamming_power_avg,
    jamming_power_realized,
    mmse_filter,
    mse_opt,
    mutual_info,
    rate_report,
    sinr,
    stream_mses,
)
from oracles import (
    focused_power_terms,
    interference_sums,
    mse_of_filter,
    sample_covariance_focused_power,
)

THETA = 4 * np.pi / 9
BETA = 2 * np.pi / 9


def random_precoders(rng, n_t=4, N=3, K=2, L=1, scale=1.0):
    def draw(*shape):
        return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    return PrecoderSet(p_c=draw(N, n_t), p=draw(K, N, n_t), f=draw(L, N, n_t))


SCALAR_H = np.array([1.0, 0, 0, 0], dtype=complex)
SCALAR_P = np.array([np.sqrt(3.0), 0, 0, 0], dtype=complex)
NO_INTERFERENCE = InterferenceTerms(Z_c=0.0, Z=0.0, J=0.0)


class TestInterferenceTerms:
    def test_zero_precoders(self):
        pre = PrecoderSet.zeros(4, 2, 2, 1)
        t = interference_terms(np.ones(4), pre, 0, 0)
        assert (t.Z_c, t.Z, t.J) == (0.0, 0.0, 0.0)

    def test_single_user_has_no_private_interference(self, rng):
        pre = random_precoders(rng, K=1)
        t = interference_terms(rng.standard_normal(4) + 0j, pre, 1, 0)
        assert t.Z == 0.0 and t.Z_c > 0.0

    def test_matches_naive_resummation(self, rng):
        pre = random_precoders(rng)
        for n in range(3):
            for k in range(2):
                h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
                t = interference_terms(h, pre, n, k)
                Z_c, Z, J = interference_sums(
                    h, [pre.p[i, n] for i in range(2)], [pre.f[0, n]], k)
                assert abs(t.Z_c - Z_c) < 1e-12 * (1 + Z_c)
                assert abs(t.Z - Z) < 1e-12 * (1 + Z)
                assert abs(t.J - J) < 1e-12 * (1 + J)

    def test_ordering_invariant_enforced(self):
        with pytest.raises(ValueError):
            InterferenceTerms(Z_c=1.0, Z=2.0, J=0.0)


class TestSinrAndMse:
    def test_zero_target_zero_sinr(self):
        assert sinr(SCALAR_H, np.zeros(4), NO_INTERFERENCE) == 0.0

    def test_scalar_case(self):
        assert sinr(SCALAR_H, SCALAR_P, NO_INTERFERENCE) == pytest.approx(3.0, abs=1e-14)

    def test_mse_scalar_case(self):
        assert mse_opt(SCALAR_H, SCALAR_P, NO_INTERFERENCE) == pytest.approx(0.25, abs=1e-14)

    def test_mse_no_signal_is_one(self):
        assert mse_opt(SCALAR_H, np.zeros(4), NO_INTERFERENCE) == 1.0

    def test_mse_in_unit_interval(self, rng):
        for _ in range(200):
            h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            p = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            Z = abs(rng.standard_normal())
            t = InterferenceTerms(Z_c=Z + 0.5, Z=Z, J=abs(rng.standard_normal()))
            e = mse_opt(h, p, t)
            assert 0.0 < e <= 1.0

    def test_rate_mse_identity(self, rng):
        for _ in range(500):
            h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            p = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            Z = abs(rng.standard_normal())
            t = InterferenceTerms(Z_c=Z + 1.0, Z=Z, J=abs(rng.standard_normal()))
            for stage in ("common", "private"):
                lhs = -np.log2(mse_opt(h, p, t, stage))
                rhs = np.log2(1.0 + sinr(h, p, t, stage))
                assert abs(lhs - rhs) < 1e-10

    @given(st.floats(0.0, 50.0), st.floats(0.0, 50.0), st.floats(0.1, 40.0))
    @settings(max_examples=200, deadline=None)
    def test_jamming_strictly_degrades(self, Z, J, sig):
        h = np.array([1.0 + 0j])
        p = np.array([np.sqrt(sig) + 0j])
        base = InterferenceTerms(Z_c=Z, Z=Z, J=J)
        worse = InterferenceTerms(Z_c=Z, Z=Z, J=J + 1.0)
        assert sinr(h, p, worse) < sinr(h, p, base)
        assert mutual_info(h, p, worse) < mutual_info(h, p, base)


class TestMmseFilter:
    def test_zero_target(self):
        assert mmse_filter(SCALAR_H, np.zeros(4), NO_INTERFERENCE) == 0.0

    def test_scalar_closed_form(self):
        g = mmse_filter(SCALAR_H, SCALAR_P, NO_INTERFERENCE)
        assert g == pytest.approx(np.sqrt(3.0) / 4.0, abs=1e-14)

    def test_minimizes_mse_against_perturbations(self, rng):
        h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        p = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        t = InterferenceTerms(Z_c=2.0, Z=1.3, J=0.7)
        g = mmse_filter(h, p, t)
        other = t.Z + t.J
        best = mse_of_filter(g, h, p, other)
        assert best == pytest.approx(mse_opt(h, p, t), abs=1e-12)
        for _ in range(100):
            gp = g + 0.1 * (rng.standard_normal() + 1j * rng.standard_normal())
            assert mse_of_filter(gp, h, p, other) >= best - 1e-12


class TestMutualInfo:
    def test_unit_mse_zero_bits(self):
        assert mutual_info(SCALAR_H, np.zeros(4), NO_INTERFERENCE) == 0.0

    def test_scalar_two_bits(self):
        assert mutual_info(SCALAR_H, SCALAR_P, NO_INTERFERENCE) == pytest.approx(2.0, abs=1e-12)

    def test_sum_equals_log_product(self, rng):
        mses = 0.1 + 0.8 * rng.random(16)
        termwise = np.sum(-np.log2(mses))
        assert abs(termwise + np.log2(np.prod(mses))) < 1e-9


class TestJammingPower:
    def test_zero_precoders(self):
        pre = PrecoderSet.zeros(4, 2, 2, 1)
        assert jamming_power_realized(np.ones(4), pre, 0) == 0.0

    def test_orthogonal_adversary(self):
        pre = PrecoderSet.zeros(4, 1, 1, 0)
        pre.p[0, 0, 0] = 1.0
        g = np.array([0, 1.0, 0, 0], dtype=complex)
        assert jamming_power_realized(g, pre, 0) == 0.0

    def test_matches_termwise_oracle(self, rng):
        pre = random_precoders(rng)
        g = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        got = jamming_power_realized(g, pre, 1)
        ref = focused_power_terms(g, pre.p_c[1], [pre.p[i, 1] for i in range(2)],
                                  [pre.f[0, 1]])
        assert abs(got - ref) < 1e-12 * (1 + ref)

    def test_identity_covariance_gives_total_power(self, rng):
        pre = random_precoders(rng)
        got = jamming_power_avg(np.eye(4), pre, 2)
        assert got == pytest.approx(pre.subcarrier_power(2), rel=1e-12)

    def test_rank_one_covariance_matches_realized(self, rng):
        pre = random_precoders(rng)
        g = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        R = np.outer(g, g.conj())
        assert jamming_power_avg(R, pre, 0) == pytest.approx(
            jamming_power_realized(g, pre, 0), rel=1e-10)

    def test_statistical_average_against_sampling(self, rng):
        pre = random_precoders(rng, scale=0.5)
        R = au_statistics_uniform_phase(2 * BETA, 4, 3, 1, (1,)).R[0, 0]
        ref = sample_covariance_focused_power(
            R, pre.p_c[0], [pre.p[i, 0] for i in range(2)], [pre.f[0, 0]],
            draws=100_000, rng=np.random.default_rng(0))
        got = jamming_power_avg(R, pre, 0)
        assert abs(got - ref) < 0.02 * ref

    def test_scale_covariance(self, rng):
        pre = random_precoders(rng)
        g = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        R = au_statistics_uniform_phase(2 * BETA, 4, 3, 1, (1,)).R[0, 0]
        c = 2.7
        assert jamming_power_realized(g, pre.scaled(c), 0) == pytest.approx(
            c * jamming_power_realized(g, pre, 0), rel=1e-12)
        assert jamming_power_avg(R, pre.scaled(c), 0) == pytest.approx(
            c * jamming_power_avg(R, pre, 0), rel=1e-12)


class TestStreamMses:
    def test_matches_scalar_reference(self, rng):
        pre = random_precoders(rng)
        hs = rng.standard_normal((3, 2, 3, 4)) + 1j * rng.standard_normal((3, 2, 3, 4))
        eps_c, eps_p, *_ = stream_mses(hs, pre)
        for m in range(3):
            for k in range(2):
                for n in range(3):
                    t = interference_terms(hs[m, k, n], pre, n, k)
                    assert eps_p[m, k, n] == pytest.approx(
                        mse_opt(hs[m, k, n], pre.p[k, n], t, "private"), rel=1e-12)
                    assert eps_c[m, k, n] == pytest.approx(
                        mse_opt(hs[m, k, n], pre.p_c[n], t, "common"), rel=1e-12)


class TestRateReport:
    def test_zero_precoders_zero_rates(self):
        cs = make_deterministic_scenario(THETA, BETA, 4, 4)
        rep = rate_report(cs, PrecoderSet.zeros(4, 4, 2, 1))
        assert rep.R_sum == 0.0
        assert np.all(rep.I_private == 0.0) and np.all(rep.R_k == 0.0)

    def test_single_user_equal_power_matched_filter(self):
        # flat channel, power P_t/N per subcarrier on the matched direction:
        # every subcarrier carries log2(1 + (P_t/N) * ||h||^2)
        N, P_t = 4, 20.0
        h = np.tile(np.ones(4) / 1.0, (N, 1))[None]  # (1, N, 4), ||h||^2 = 4
        pre = PrecoderSet.zeros(4, N, 1, 0)
        for n in range(N):
            pre.p[0, n] = np.sqrt(P_t / N) * h[0, n] / np.linalg.norm(h[0, n])
        rep = rate_report(h[None] if h.ndim == 3 else h, pre)
        per_sc = np.log2(1.0 + (P_t / N) * 4.0)
        np.testing.assert_allclose(rep.I_private[0], per_sc, rtol=1e-12)
        assert rep.R_sum == pytest.approx(per_sc, rel=1e-12)

    def test_zero_common_equals_private_only(self, rng):
        cs = make_deterministic_scenario(THETA, BETA, 4, 4)
        pre = random_precoders(rng, N=4)
        pre_nc = PrecoderSet(p_c=np.zeros_like(pre.p_c), p=pre.p, f=pre.f)
        a = rate_report(cs, pre_nc, np.zeros((2, 4)))
        b = rate_report(cs, pre_nc)
        assert a.R_sum == b.R_sum
        assert np.array_equal(a.I_private, b.I_private)

    def test_sum_rate_identity(self, rng):
        cs = make_deterministic_scenario(THETA, BETA, 4, 4)
        pre = random_precoders(rng, N=4, scale=0.8)
        rep = rate_report(cs, pre, None)
        assert abs(rep.R_sum - (rep.C.sum() / 4 + rep.R_k.sum())) < 1e-9

    def test_infeasible_split_rejected(self, rng):
        cs = make_deterministic_scenario(THETA, BETA, 4, 4)
        pre = random_precoders(rng, N=4)
        C = np.full((2, 4), 50.0)
        with pytest.raises(ValueError, match="infeasible common-rate split"):
            rate_report(cs, pre, C)

    def test_realized_jamming_attached(self, rng):
        cs = make_deterministic_scenario(THETA, BETA, 4, 4)
        stats = au_statistics_uniform_phase(2 * BETA, 4, 4, 1, (1, 3))
        pre = random_precoders(rng, N=4)
        rep = rate_report(cs, pre, None, stats=stats, channels=cs)
        assert rep.lambda_avg.shape == (1, 2)
        assert rep.lambda_realized.shape == (1, 2)
        for j, n in enumerate((0, 2)):
            assert rep.lambda_realized[0, j] == pytest.approx(
                jamming_power_realized(cs.g[0, n], pre, n), rel=1e-12)
