import numpy as np
import pytest
import scipy.stats
from numpy.testing import assert_allclose, assert_array_equal

from signvar.core import (
    FREE,
    MINUS,
    PLUS,
    ZERO,
    Dataset,
    McmcConfig,
    NumericalError,
    ParameterState,
    PriorConfig,
    SignPattern,
    ValidationError,
    build_regressors,
)
from signvar.gibbs import (
    initial_state,
    orthonormalize_factors,
    run_chain,
    step_factors,
    step_lambda,
    step_phi,
    step_sigma,
)
from signvar.rng import RngStream
from signvar.structural import companion_spectral_radius


def _blank_state(n, k, r, t_eff, sigma2=1.0):
    return ParameterState(
        phi=np.zeros((n, k)),
        loadings=np.zeros((n, r)),
        factors=np.zeros((t_eff, r)),
        sigma2=np.full(n, float(sigma2)),
        psi2=np.ones((n, k)),
        tau=np.ones(n),
    )


def _ar_dataset(n, t_out, coef, seed):
    gen = np.random.default_rng(seed)
    y = np.zeros((t_out + 50, n))
    for t in range(1, y.shape[0]):
        y[t] = coef * y[t - 1] + gen.normal(size=n)
    return Dataset(observations=y[50:], names=[f"v{i}" for i in range(n)])


class TestOrthonormalizeFactors:
    def test_invariants(self):
        gen = np.random.default_rng(0)
        f = gen.normal(size=(200, 4))
        out = orthonormalize_factors(f)
        gram = out.T @ out / 200.0
        assert_allclose(gram, np.eye(4), atol=1e-12)

    def test_span_preserved(self):
        gen = np.random.default_rng(1)
        f = gen.normal(size=(60, 3))
        out = orthonormalize_factors(f)
        for j in range(1, 4):
            # Leading j columns of the output lie in the span of the
            # leading j input columns and vice versa.
            proj = f[:, :j] @ np.linalg.lstsq(f[:, :j], out[:, :j], rcond=None)[0]
            assert_allclose(proj, out[:, :j], atol=1e-8)

    def test_first_column_direction_kept(self):
        gen = np.random.default_rng(2)
        f = gen.normal(size=(50, 2))
        out = orthonormalize_factors(f)
        cos = f[:, 0] @ out[:, 0] / (
            np.linalg.norm(f[:, 0]) * np.linalg.norm(out[:, 0])
        )
        assert_allclose(cos, 1.0, atol=1e-12)

    def test_collinear_raises(self):
        f = np.ones((30, 2))
        f[:, 1] = 3.0 * f[:, 0]
        with pytest.raises(NumericalError):
            orthonormalize_factors(f)

    def test_bad_shape(self):
        with pytest.raises(ValidationError):
            orthonormalize_factors(np.ones(5))


class TestInitialState:
    def test_pattern_satisfied_and_shapes(self):
        data = _ar_dataset(4, 160, 0.5, seed=3)
        y_eff, x = build_regressors(data.observations, 1)
        codes = np.array(
            [[PLUS, MINUS], [MINUS, FREE], [ZERO, PLUS], [FREE, FREE]], dtype=np.int8
        )
        pattern = SignPattern(codes=codes)
        state = initial_state(y_eff, x, 2, pattern, PriorConfig())
        assert pattern.satisfied_by(state.loadings)
        assert state.phi.shape == (4, 5)
        assert state.factors.shape == (y_eff.shape[0], 2)
        assert np.all(state.sigma2 > 0)
        assert_array_equal(state.psi2, np.ones((4, 5)))
        assert_array_equal(state.tau, np.ones(4))

    def test_arrays_contiguous(self):
        # The compiled kernels require C-contiguous equation rows.
        data = _ar_dataset(3, 120, 0.4, seed=4)
        y_eff, x = build_regressors(data.observations, 2)
        pattern = SignPattern.all_free(3, 1)
        state = initial_state(y_eff, x, 1, pattern, PriorConfig())
        assert state.phi.flags.c_contiguous
        assert state.factors.flags.c_contiguous

    def test_deterministic(self):
        data = _ar_dataset(3, 100, 0.4, seed=5)
        y_eff, x = build_regressors(data.observations, 1)
        pattern = SignPattern.all_free(3, 1)
        a = initial_state(y_eff, x, 1, pattern, PriorConfig())
        b = initial_state(y_eff, x, 1, pattern, PriorConfig())
        assert_array_equal(a.phi, b.phi)
        assert_array_equal(a.factors, b.factors)


class TestStepPhi:
    def test_diffuse_prior_recovers_least_squares(self):
        data = _ar_dataset(2, 400, 0.8, seed=6)
        y_eff, x = build_regressors(data.observations, 1)
        prior = PriorConfig(mode="diffuse", diffuse_scale=1e8)
        state = _blank_state(2, 3, 1, y_eff.shape[0])
        streams = [RngStream(20, i) for i in range(2)]

        v = np.linalg.inv(x.T @ x + np.eye(3) / 1e8)
        post_mean = v @ (x.T @ y_eff[:, 0])
        ols = np.linalg.lstsq(x, y_eff[:, 0], rcond=None)[0]
        assert_allclose(post_mean, ols, atol=1e-5)

        n_draws = 3000
        draws = np.empty((n_draws, 3))
        for d in range(n_draws):
            step_phi(state, x, y_eff, prior, streams)
            draws[d] = state.phi[0]
        se = np.sqrt(np.diag(v) / n_draws)
        assert np.all(np.abs(draws.mean(axis=0) - post_mean) < 3 * se)

    def test_tight_shrinkage_pins_to_zero(self):
        data = _ar_dataset(2, 200, 0.8, seed=7)
        y_eff, x = build_regressors(data.observations, 1)
        state = _blank_state(2, 3, 1, y_eff.shape[0])
        state.psi2[:] = 1e-16
        state.tau[:] = 1e-4
        streams = [RngStream(21, i) for i in range(2)]
        step_phi(state, x, y_eff, PriorConfig(), streams)
        assert np.max(np.abs(state.phi)) < 1e-6

    def test_precomputed_crossproducts_match(self):
        data = _ar_dataset(3, 150, 0.5, seed=8)
        y_eff, x = build_regressors(data.observations, 1)
        gen = np.random.default_rng(9)
        base = _blank_state(3, 4, 2, y_eff.shape[0])
        base.loadings[:] = gen.normal(size=(3, 2))
        base.factors[:] = gen.normal(size=(y_eff.shape[0], 2))
        prior = PriorConfig(mode="diffuse", diffuse_scale=100.0)

        a = base.copy()
        step_phi(a, x, y_eff, prior, [RngStream(22, i) for i in range(3)])
        b = base.copy()
        step_phi(
            b,
            x,
            y_eff,
            prior,
            [RngStream(22, i) for i in range(3)],
            xtx=x.T @ x,
            xty=x.T @ y_eff,
        )
        assert_allclose(a.phi, b.phi, rtol=1e-8, atol=1e-10)

    def test_equation_subset_only_touches_subset(self):
        data = _ar_dataset(3, 100, 0.5, seed=10)
        y_eff, x = build_regressors(data.observations, 1)
        state = _blank_state(3, 4, 1, y_eff.shape[0])
        before = state.phi.copy()
        step_phi(
            state, x, y_eff, PriorConfig(mode="diffuse"),
            [RngStream(23, i) for i in range(3)], equations=[1],
        )
        assert np.any(state.phi[1] != before[1])
        assert_array_equal(state.phi[0], before[0])
        assert_array_equal(state.phi[2], before[2])


class TestStepLambda:
    def _one_row_setup(self, seed, row_mean_target):
        # Single equation, two factors with correlated columns so the
        # within-row sweep has a nontrivial cross term.
        gen = np.random.default_rng(seed)
        t_eff = 30
        f1 = gen.normal(size=t_eff)
        f2 = 0.6 * f1 + 0.8 * gen.normal(size=t_eff)
        factors = np.column_stack([f1, f2])
        resid = (factors @ row_mean_target + gen.normal(size=t_eff)).reshape(-1, 1)
        state = _blank_state(1, 2, 2, t_eff)
        state.factors = factors
        state.loadings[:] = 0.5
        return state, resid

    def test_zero_cells_exact_and_signs_strict(self):
        state, resid = self._one_row_setup(11, np.array([0.4, 0.3]))
        pattern = SignPattern(codes=np.array([[PLUS, ZERO]], dtype=np.int8))
        streams = [RngStream(24, 0)]
        for _ in range(200):
            step_lambda(state, resid, pattern, PriorConfig(), streams)
            assert state.loadings[0, 0] > 0
            assert state.loadings[0, 1] == 0.0

    def test_stationary_law_matches_rejection_oracle(self):
        # Iterated single-row sweeps against accept-reject draws from the
        # same truncated bivariate normal. Mean of coordinate 2 is pushed
        # negative so the positivity constraint binds hard.
        state, resid = self._one_row_setup(12, np.array([0.08, -0.05]))
        pattern = SignPattern(codes=np.array([[PLUS, PLUS]], dtype=np.int8))
        prior = PriorConfig()
        streams = [RngStream(25, 0)]

        chain = []
        for it in range(40_000):
            step_lambda(state, resid, pattern, prior, streams)
            if it >= 1_000 and it % 10 == 0:
                chain.append(state.loadings[0].copy())
        chain = np.array(chain)

        prec = state.factors.T @ state.factors / state.sigma2[0]
        prec[np.diag_indices_from(prec)] += 1.0 / prior.h_loading
        cov = np.linalg.inv(prec)
        mean = cov @ (state.factors.T @ resid[:, 0] / state.sigma2[0])
        gen = np.random.default_rng(26)
        oracle = []
        while len(oracle) < chain.shape[0]:
            cand = gen.multivariate_normal(mean, cov, size=20_000)
            keep = cand[np.all(cand > 0, axis=1)]
            oracle.extend(keep[: chain.shape[0] - len(oracle)])
        oracle = np.array(oracle)

        for j in range(2):
            stat = scipy.stats.ks_2samp(chain[:, j], oracle[:, j])
            assert stat.pvalue > 0.01, (j, stat)

    def test_single_factor_conjugate_moments(self):
        gen = np.random.default_rng(13)
        t_eff = 40
        factors = gen.normal(size=(t_eff, 1))
        resid = 0.7 * factors + 0.5 * gen.normal(size=(t_eff, 1))
        state = _blank_state(1, 1, 1, t_eff, sigma2=0.25)
        state.factors = factors
        prior = PriorConfig()
        streams = [RngStream(27, 0)]

        prec = float(factors[:, 0] @ factors[:, 0]) / 0.25 + 1.0 / prior.h_loading
        mean = float(factors[:, 0] @ resid[:, 0]) / 0.25 / prec
        n = 50_000
        draws = np.empty(n)
        for d in range(n):
            step_lambda(state, resid, SignPattern.all_free(1, 1), prior, streams)
            draws[d] = state.loadings[0, 0]
        assert abs(draws.mean() - mean) < 3 * np.sqrt(1.0 / prec / n)
        assert abs(draws.var() - 1.0 / prec) < 3 * np.sqrt(2.0 / n) / prec


class TestStepFactors:
    def test_posterior_moments(self):
        gen = np.random.default_rng(14)
        n, r, t_eff = 4, 2, 6
        lam = gen.normal(size=(n, r))
        sigma2 = np.exp(gen.uniform(-1, 0.5, n))
        resid = gen.normal(size=(t_eff, n))
        state = _blank_state(n, 3, r, t_eff)
        state.loadings = lam
        state.sigma2 = sigma2

        a = np.eye(r) + lam.T @ (lam / sigma2[:, None])
        cov = np.linalg.inv(a)
        mean = resid @ (lam / sigma2[:, None]) @ cov.T

        stream = RngStream(28, 0)
        n_draws = 20_000
        draws = np.empty((n_draws, t_eff, r))
        for d in range(n_draws):
            step_factors(state, resid, stream)
            draws[d] = state.factors
        se = np.sqrt(np.diag(cov) / n_draws)
        assert np.all(np.abs(draws.mean(axis=0) - mean) < 3 * se)
        emp_cov = np.cov(draws[:, 0, :].T)
        se_cov = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov**2) / n_draws)
        assert np.all(np.abs(emp_cov - cov) < 3 * se_cov)


class TestStepSigma:
    def test_zero_residual_exact_law(self):
        # With residuals equal to the common component the scale reduces
        # to the prior term, an exact inverse gamma.
        n, t_eff = 2, 50
        prior = PriorConfig(rho=1.0, kappa=0.01)
        state = _blank_state(n, 3, 1, t_eff)
        resid = np.zeros((t_eff, n))
        streams = [RngStream(29, i) for i in range(n)]
        n_draws = 20_000
        draws = np.empty(n_draws)
        for d in range(n_draws):
            step_sigma(state, resid, prior, streams, t_eff=t_eff)
            draws[d] = state.sigma2[0]
        ref = scipy.stats.invgamma(a=0.5 * t_eff + 1.0, scale=0.01)
        stat = scipy.stats.kstest(draws, ref.cdf)
        assert stat.pvalue > 0.01, stat

    def test_larger_residuals_larger_scale(self):
        n, t_eff = 1, 80
        prior = PriorConfig()
        small = _blank_state(n, 2, 1, t_eff)
        big = _blank_state(n, 2, 1, t_eff)
        gen = np.random.default_rng(15)
        e = gen.normal(size=(t_eff, n))
        means = []
        for state, scale in ((small, 0.1), (big, 3.0)):
            streams = [RngStream(30, 0)]
            acc = 0.0
            for _ in range(2000):
                step_sigma(state, scale * e, prior, streams, t_eff=t_eff)
                acc += state.sigma2[0]
            means.append(acc / 2000)
        assert means[1] > means[0]


def _toy_problem(n=3, r=1, t_out=140, seed=31):
    data = _ar_dataset(n, t_out, 0.5, seed=seed)
    codes = np.full((n, r), FREE, dtype=np.int8)
    codes[0, 0] = PLUS
    codes[1, 0] = MINUS
    return data, SignPattern(codes=codes)


class TestRunChain:
    def test_counts_pattern_and_meta(self):
        data, pattern = _toy_problem()
        mcmc = McmcConfig(total_draws=300, burn_in=100, thin=10, seed=5)
        out = run_chain(data, 1, 1, pattern, PriorConfig(), mcmc)
        assert len(out.draws) == 20
        assert out.meta["n_kept"] == 20
        assert out.meta["t_eff"] == data.n_obs - 1
        assert out.meta["p"] == 1 and out.meta["r"] == 1
        assert out.meta["seconds_elapsed"] > 0
        for d in out.draws:
            assert pattern.satisfied_by(d.loadings)
            gram = d.factors.T @ d.factors / d.factors.shape[0]
            assert_allclose(gram, np.eye(1), atol=1e-10)

    def test_bitwise_reproducible(self):
        data, pattern = _toy_problem()
        mcmc = McmcConfig(total_draws=120, burn_in=40, thin=4, seed=9)
        a = run_chain(data, 1, 1, pattern, PriorConfig(), mcmc)
        b = run_chain(data, 1, 1, pattern, PriorConfig(), mcmc)
        assert_array_equal(a.stack("phi"), b.stack("phi"))
        assert_array_equal(a.stack("loadings"), b.stack("loadings"))
        assert_array_equal(a.stack("factors"), b.stack("factors"))
        assert_array_equal(a.stack("sigma2"), b.stack("sigma2"))

    def test_thread_count_invariant(self):
        data, pattern = _toy_problem(n=4)
        mcmc = McmcConfig(total_draws=100, burn_in=20, thin=4, seed=12)
        serial = run_chain(data, 1, 1, pattern, PriorConfig(), mcmc, n_threads=1)
        threaded = run_chain(data, 1, 1, pattern, PriorConfig(), mcmc, n_threads=2)
        assert_array_equal(serial.stack("phi"), threaded.stack("phi"))
        assert_array_equal(serial.stack("loadings"), threaded.stack("loadings"))
        assert_array_equal(serial.stack("sigma2"), threaded.stack("sigma2"))

    def test_hook_sees_every_iteration(self):
        data, pattern = _toy_problem()
        seen = []

        def hook(it, state):
            seen.append(it)
            assert pattern.satisfied_by(state.loadings)

        mcmc = McmcConfig(total_draws=50, burn_in=10, thin=5, seed=2)
        run_chain(data, 1, 1, pattern, PriorConfig(), mcmc, iteration_hook=hook)
        assert seen == list(range(1, 51))

    def test_stationarity_filter_bookkeeping(self):
        data, pattern = _toy_problem()
        mcmc = McmcConfig(
            total_draws=200, burn_in=50, thin=5, seed=3, stationarity_filter=True
        )
        out = run_chain(data, 1, 1, pattern, PriorConfig(), mcmc)
        assert out.meta["n_kept"] + out.meta["n_discarded_nonstationary"] == 30
        for d in out.draws:
            assert companion_spectral_radius(d.phi) < 1.0

    def test_diffuse_prior_runs(self):
        data, pattern = _toy_problem()
        mcmc = McmcConfig(total_draws=40, burn_in=10, thin=3, seed=4)
        out = run_chain(data, 1, 1, pattern, PriorConfig(mode="diffuse"), mcmc)
        assert out.meta["n_kept"] == 10

    def test_validation_errors(self):
        data, pattern = _toy_problem()
        mcmc = McmcConfig(total_draws=10, burn_in=2, thin=1, seed=0)
        with pytest.raises(ValidationError):
            run_chain(data, 1, 2, pattern, PriorConfig(), mcmc)
        bad = SignPattern.all_free(5, 1)
        with pytest.raises(ValidationError):
            run_chain(data, 1, 1, bad, PriorConfig(), mcmc)
        tiny = Dataset(
            observations=data.observations[:2], names=data.names
        )
        with pytest.raises(ValidationError):
            run_chain(tiny, 1, 1, pattern, PriorConfig(), mcmc)
