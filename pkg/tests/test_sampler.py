import math

import numpy as np
import pytest
from scipy import stats as sps
from scipy.special import gammainc, ndtr

from bessellimit import analytic as an
from bessellimit.model import Model, PerturbationSpec, ScaledModel
from bessellimit.sampler import (
    ExitEstimate,
    RngPolicy,
    SimScheme,
    monte_carlo_exit,
    monte_carlo_marginal,
    monte_carlo_occupation,
    monte_carlo_occupations,
    read_sample_set,
    sample_besq_transition,
    simulate_bessel,
    simulate_limit,
    simulate_prelimit,
    write_path,
    write_sample_set,
)

ZERO = PerturbationSpec()
POLICY = RngPolicy(918273645)


def wiener_model(n=1.0, x0=0.0):
    return ScaledModel(Model(ZERO, 0.0, 0.0, x0), n)


class TestBesqTransition:
    @pytest.mark.parametrize("delta", [0.5, 1.0, 3.0])
    @pytest.mark.parametrize("z", [0.0, 1.0])
    def test_moments(self, delta, z):
        rng = POLICY.stream(1).generator()
        t = 0.7
        n = 40_000
        draws = np.array([sample_besq_transition(delta, z, t, rng) for _ in range(n)])
        mean, var = draws.mean(), draws.var(ddof=1)
        se_mean = draws.std(ddof=1) / math.sqrt(n)
        m4 = np.mean((draws - mean) ** 4)
        se_var = math.sqrt(max(m4 - var ** 2, 0.0) / n)
        assert abs(mean - (z + delta * t)) <= 4 * se_mean
        assert abs(var - (2 * delta * t * t + 4 * z * t)) <= 4 * se_var

    def test_from_zero_is_gamma(self):
        rng = POLICY.stream(2).generator()
        delta, t = 1.4, 0.5
        draws = np.array([sample_besq_transition(delta, 0.0, t, rng)
                          for _ in range(20_000)])
        rep = sps.kstest(draws, lambda x: gammainc(delta / 2, x / (2 * t)))
        assert rep.statistic < 0.012

    def test_domain(self):
        rng = POLICY.stream(0).generator()
        with pytest.raises(ValueError):
            sample_besq_transition(0.0, 1.0, 0.1, rng)
        with pytest.raises(ValueError):
            sample_besq_transition(1.0, -1.0, 0.1, rng)
        with pytest.raises(ValueError):
            sample_besq_transition(1.0, 1.0, 0.0, rng)


class TestSimulatePrelimit:
    def test_wiener_increments(self):
        # flat drift: increments are iid N(0, dt)
        path = simulate_prelimit(wiener_model(), T=1.0, dt=1e-3,
                                 rng=POLICY.stream(3))
        inc = np.diff(path.values)
        assert path.values[0] == 0.0
        assert len(path.values) == 1001
        rep = sps.kstest(inc, lambda x: ndtr(x / math.sqrt(1e-3)))
        assert rep.statistic < 0.05

    def test_deterministic_replay(self):
        a = simulate_prelimit(wiener_model(), 0.5, 1e-3, POLICY.stream(4))
        b = simulate_prelimit(wiener_model(), 0.5, 1e-3, POLICY.stream(4))
        c = simulate_prelimit(wiener_model(), 0.5, 1e-3, POLICY.stream(5))
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_start_point(self):
        sm = ScaledModel(Model(ZERO, 0.3, 0.3, -0.7), 5.0)
        path = simulate_prelimit(sm, 0.1, 1e-3, POLICY.stream(6))
        assert path.values[0] == -0.7

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            simulate_prelimit(wiener_model(), 0.0, 1e-3, POLICY.stream(0))
        with pytest.raises(ValueError):
            simulate_prelimit(wiener_model(), 1.0, 0.0, POLICY.stream(0))


class TestSimulateBessel:
    def test_reflected_normal_marginal(self):
        # c = 0 from 1: |N(1, t)| at time t
        vals = np.array([simulate_bessel(0.0, 1.0, +1, 1.0, 1e-2,
                                         POLICY.stream(100 + i)).values[-1]
                         for i in range(4000)])
        cdf = lambda y: ndtr(y - 1.0) - ndtr(-y - 1.0)
        rep = sps.kstest(vals, cdf)
        assert rep.statistic < 0.03

    def test_exponential_square_from_zero(self):
        # c = 1/2 from 0: X(t)^2 ~ Exp(mean 2t)
        t = 0.8
        vals = np.array([simulate_bessel(0.5, 0.0, +1, t, 0.1,
                                         POLICY.stream(5000 + i)).values[-1]
                         for i in range(4000)])
        rep = sps.kstest(vals ** 2, lambda x: 1.0 - np.exp(-x / (2 * t)))
        assert rep.statistic < 0.03

    def test_nonnegative_and_sign(self):
        up = simulate_bessel(0.25, 0.5, +1, 1.0, 1e-3, POLICY.stream(7))
        assert up.values.min() >= 0.0
        down = simulate_bessel(0.25, -0.5, -1, 1.0, 1e-3, POLICY.stream(7))
        assert down.values.max() <= 0.0

    def test_sign_consistency(self):
        with pytest.raises(ValueError):
            simulate_bessel(0.0, -1.0, +1, 1.0, 1e-3, POLICY.stream(0))
        with pytest.raises(ValueError):
            simulate_bessel(0.0, 1.0, 2, 1.0, 1e-3, POLICY.stream(0))


class TestMonteCarloMarginal:
    def test_single_path_matches_stream_zero(self):
        sm = wiener_model()
        scheme = SimScheme("prelimit", dt=1e-3)
        ss = monte_carlo_marginal("prelimit", sm, 1.0, 1, POLICY, scheme)
        path = simulate_prelimit(sm, 1.0, 1e-3, POLICY.stream(0))
        assert ss.values[0] == path.values[-1]

    def test_worker_invariance(self):
        sm = wiener_model()
        scheme = SimScheme("prelimit", dt=1e-2)
        a = monte_carlo_marginal("prelimit", sm, 1.0, 2000, POLICY, scheme,
                                 workers=1)
        b = monte_carlo_marginal("prelimit", sm, 1.0, 2000, POLICY, scheme,
                                 workers=4)
        np.testing.assert_array_equal(a.values, b.values)

    def test_wiener_mean(self):
        ss = monte_carlo_marginal("prelimit", wiener_model(), 1.0, 20_000,
                                  POLICY, SimScheme("prelimit", dt=1e-2))
        assert abs(ss.values.mean()) <= 4.0 / math.sqrt(20_000)

    def test_mean_square_matches_exact_bessel_dimension(self):
        # c = 1 on both sides from 0: the limit mean square is delta * t = 3,
        # the value of the exact BESQ sampler; the scaled SDE at n = 200
        # must reproduce it within Monte Carlo error
        sm = ScaledModel(Model(ZERO, 1.0, 1.0, 0.0), 200.0)
        n = 15_000
        ss = monte_carlo_marginal("prelimit", sm, 1.0, n, POLICY,
                                  SimScheme("prelimit", dt=2e-4))
        sq = ss.values ** 2
        se = sq.std(ddof=1) / math.sqrt(n)
        assert abs(sq.mean() - 3.0) <= 3.5 * se

    def test_kind_type_check(self):
        with pytest.raises(TypeError):
            monte_carlo_marginal("prelimit", an.LimitLaw("A5", 0, 0, 0, gamma=0.0),
                                 1.0, 10, POLICY, SimScheme("prelimit", dt=0.1))


class TestLimitSamplers:
    def test_a6_sign_split_and_conditional_law(self):
        law = an.LimitLaw("A6", 1.0, 1.5, 0.0, p=4 / 7)
        ss = monte_carlo_marginal("limit", law, 1.0, 30_000, POLICY,
                                  SimScheme("limit", dt=1e-2))
        frac = (ss.values > 0).mean()
        assert abs(frac - 4 / 7) <= 4 * math.sqrt(4 / 7 * 3 / 7 / 30_000)
        # positive branch is BESQ(2 c_plus + 1) from 0: mean of X^2 = delta t
        pos_sq = ss.values[ss.values > 0] ** 2
        assert abs(pos_sq.mean() - 4.0) <= 4 * pos_sq.std() / math.sqrt(pos_sq.size)

    def test_a5_absolute_value_is_bessel(self):
        c = 0.25
        law = an.LimitLaw("A5", c, c, 0.0, gamma=0.6)
        scheme = SimScheme("limit", dt=1e-3)
        ss = monte_carlo_marginal("limit", law, 1.0, 30_000, POLICY, scheme)
        # one-step exact BESQ sample as the comparison population
        rng = POLICY.stream(999).generator()
        ref = np.sqrt([sample_besq_transition(2 * c + 1, 0.0, 1.0, rng)
                       for _ in range(30_000)])
        rep = sps.ks_2samp(np.abs(ss.values), ref, method="asymp")
        assert rep.statistic < 0.015

    def test_a5_sign_mass(self):
        law = an.LimitLaw("A5", 0.0, 0.0, 0.0, gamma=0.6)
        ss = monte_carlo_marginal("limit", law, 1.0, 30_000, POLICY,
                                  SimScheme("limit", dt=1e-3))
        frac = (ss.values > 0).mean()
        assert abs(frac - 0.8) <= 4 * math.sqrt(0.8 * 0.2 / 30_000)

    def test_a5_initial_segment_keeps_sign(self):
        law = an.LimitLaw("A5", 0.0, 0.0, 1.5, gamma=-0.9)
        # from x0 = 1.5 with strongly negative bias, the first excursion is
        # still the initial one at small times
        path = simulate_limit(law, 0.01, 1e-3, POLICY.stream(10))
        assert (path.values > 0).all()

    def test_a3_concatenation_structure(self):
        law = an.LimitLaw("A3", 0.2, 0.7, -0.5)
        scheme = SimScheme("limit", dt=1e-3)
        ss = monte_carlo_marginal("limit", law, 1.0, 20_000, POLICY, scheme)
        hit = ss.aux["hit_time"]
        hit_mask = np.isfinite(hit)
        # positive endpoints only after the zero hit
        assert ((ss.values > 0) <= hit_mask).all()
        assert 0.2 < hit_mask.mean() < 0.9
        # post-hit segment: X(T) vs an independent B+ from 0 over the same
        # elapsed time, exact one-step BESQ draws
        rng = POLICY.stream(777).generator()
        elapsed = 1.0 - hit[hit_mask]
        ref = np.array([math.sqrt(sample_besq_transition(2 * 0.7 + 1, 0.0, e, rng))
                        if e > 0 else 0.0 for e in elapsed])
        rep = sps.ks_2samp(ss.values[hit_mask], ref, method="asymp")
        assert rep.statistic < 0.015

    def test_simulate_limit_replay_and_n1_contract(self):
        law = an.LimitLaw("A3", 0.2, 0.7, -0.5)
        scheme = SimScheme("limit", dt=1e-2)
        ss = monte_carlo_marginal("limit", law, 1.0, 1, POLICY, scheme)
        path = simulate_limit(law, 1.0, 1e-2, POLICY.stream(0))
        assert ss.values[0] == path.values[-1]


class TestExit:
    def test_wiener_symmetric(self):
        est = monte_carlo_exit("prelimit", wiener_model(), 1.0, 4000, POLICY,
                               SimScheme("prelimit", dt=1e-3))
        assert isinstance(est, ExitEstimate)
        assert abs(est.fraction_plus - 0.5) <= 3.5 * est.std_err

    def test_prelimit_matches_scale_formula(self):
        m = Model(ZERO, 1.0, 1.0, 0.25)
        sm = ScaledModel(m, 50.0)
        est = monte_carlo_exit("prelimit", sm, 1.0, 4000, POLICY,
                               SimScheme("prelimit", dt=5e-4))
        target = an.prelimit_exit_prob(sm, 0.25, 1.0)
        assert abs(est.fraction_plus - target) <= 3.5 * est.std_err

    def test_limit_a5_exit(self):
        law = an.LimitLaw("A5", 0.0, 0.0, 0.0, gamma=0.6)
        est = monte_carlo_exit("limit", law, 1.0, 4000, POLICY,
                               SimScheme("limit", dt=1e-3))
        assert abs(est.fraction_plus - 0.8) <= 3.5 * est.std_err

    def test_domain(self):
        with pytest.raises(ValueError):
            monte_carlo_exit("prelimit", wiener_model(x0=2.0), 1.0, 10, POLICY,
                             SimScheme("prelimit", dt=1e-3))


class TestOccupation:
    def test_flat_drift_values(self):
        sm = wiener_model()
        scheme = SimScheme("prelimit", dt=1e-3)
        ests = monte_carlo_occupations(sm, [1.0, 0.1], 4000, POLICY, scheme)
        assert abs(ests[0].mean_occupation - 1.0) <= 3.5 * ests[0].std_err
        assert abs(ests[1].mean_occupation - 0.19) <= max(
            3.5 * ests[1].std_err, 2 * 1e-3)

    def test_scalar_equals_multi(self):
        sm = wiener_model()
        scheme = SimScheme("prelimit", dt=5e-3)
        single = monte_carlo_occupation(sm, 0.3, 500, POLICY, scheme)
        multi = monte_carlo_occupations(sm, [0.3, 0.7], 500, POLICY, scheme)
        assert single.mean_occupation == multi[0].mean_occupation

    def test_monotone_in_eps(self):
        sm = ScaledModel(Model(ZERO, 0.6, 0.8, 0.0), 10.0)
        scheme = SimScheme("prelimit", dt=1e-3)
        ests = monte_carlo_occupations(sm, [0.05, 0.2, 0.6, 1.0], 2000, POLICY,
                                       scheme)
        means = [e.mean_occupation for e in ests]
        ses = [e.std_err for e in ests]
        for (a, sa), (b, sb) in zip(zip(means, ses), zip(means[1:], ses[1:])):
            assert a <= b + 3 * math.hypot(sa, sb)

    def test_matches_bvp(self):
        sm = ScaledModel(Model(ZERO, 0.6, 0.8, 0.0), 10.0)
        scheme = SimScheme("prelimit", dt=5e-4)
        est = monte_carlo_occupation(sm, 0.3, 4000, POLICY, scheme)
        bvp = an.occupation_bvp(sm, 0.3, 0.0)
        assert abs(est.mean_occupation - bvp) <= max(3.5 * est.std_err, 0.05 * bvp)


class TestPersistence:
    def test_sample_set_round_trip(self, tmp_path):
        ss = monte_carlo_marginal("prelimit", wiener_model(), 0.2, 50, POLICY,
                                  SimScheme("prelimit", dt=1e-2))
        target = tmp_path / "s.csv"
        write_sample_set(ss, target, extra_meta={"model.c_minus": 0.0})
        back = read_sample_set(target)
        np.testing.assert_array_equal(back.values, ss.values)
        assert back.time == ss.time
        assert back.master_seed == ss.master_seed
        assert back.scheme["kind"] == "prelimit"

    def test_byte_identical_rewrite(self, tmp_path):
        ss = monte_carlo_marginal("prelimit", wiener_model(), 0.2, 50, POLICY,
                                  SimScheme("prelimit", dt=1e-2))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_sample_set(ss, p1)
        write_sample_set(ss, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_path_csv(self, tmp_path):
        path = simulate_prelimit(wiener_model(), 0.05, 1e-2, POLICY.stream(0))
        target = tmp_path / "p.csv"
        write_path(path, target)
        text = target.read_text().splitlines()
        assert text[0].startswith("# dt=")
        assert text[1] == "time,value"
        assert len(text) == 2 + len(path.values)
