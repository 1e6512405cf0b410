import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nomavlc.device import (
    BussgangStats,
    LedModel,
    PredistorterState,
    cheb_nlms_step,
    chebyshev_basis,
    chebyshev_eval,
    coeffs_csv,
    estimate_bussgang,
    feasible_init,
    led_apply,
    nlms_scalar_step,
    train_predistorter,
)


class TestLedModel:
    def test_zero_maps_to_zero(self):
        assert led_apply(0.0, LedModel()) == 0.0

    def test_half_knee_values(self):
        led = LedModel(i_max=1.0, p=0.5)
        assert led_apply(1.0, led) == pytest.approx(0.5, abs=1e-15)
        assert led_apply(0.5, led) == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_odd_symmetry(self):
        led = LedModel()
        x = np.linspace(-3, 3, 41)
        assert np.allclose(led_apply(x, led), -led_apply(-x, led), atol=1e-15)

    def test_monotone_and_saturating(self):
        led = LedModel(i_max=1.0, p=0.5)
        x = np.linspace(-5, 5, 501)
        y = led_apply(x, led)
        assert np.all(np.diff(y) >= 0)
        assert np.max(np.abs(y)) < led.i_max

    def test_complex_per_rail(self):
        led = LedModel()
        z = 1.0 + 0.5j
        out = led_apply(z, led)
        assert out.real == pytest.approx(led_apply(1.0, led))
        assert out.imag == pytest.approx(led_apply(0.5, led))

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            LedModel(i_max=0.0)
        with pytest.raises(ValueError):
            LedModel(p=-1.0)


class TestChebyshevEval:
    def test_t0_only(self):
        assert chebyshev_eval([1.0, 0.0, 0.0], 0.37) == pytest.approx(1.0)

    def test_t2_at_half(self):
        assert chebyshev_eval([0.0, 0.0, 1.0], 0.5) == pytest.approx(-0.5, abs=1e-15)

    def test_t3_hand_value(self):
        assert chebyshev_eval([0.0, 0.0, 0.0, 1.0], 0.6) == pytest.approx(-0.936, abs=1e-12)

    def test_recursion_matches_direct_polynomials(self):
        # T_i from the recursion vs explicit polynomial forms, i <= 6
        direct = [
            lambda x: np.ones_like(x),
            lambda x: x,
            lambda x: 2 * x**2 - 1,
            lambda x: 4 * x**3 - 3 * x,
            lambda x: 8 * x**4 - 8 * x**2 + 1,
            lambda x: 16 * x**5 - 20 * x**3 + 5 * x,
            lambda x: 32 * x**6 - 48 * x**4 + 18 * x**2 - 1,
        ]
        x = np.random.default_rng(0).uniform(-1, 1, 100)
        T = chebyshev_basis(7, x)
        for i, f in enumerate(direct):
            assert np.max(np.abs(T[i] - f(x))) < 1e-12

    def test_complex_rails(self):
        coeffs = [0.2, 1.1, -0.3]
        z = 0.4 + 0.7j
        out = chebyshev_eval(coeffs, z)
        assert out.real == pytest.approx(chebyshev_eval(coeffs, 0.4))
        assert out.imag == pytest.approx(chebyshev_eval(coeffs, 0.7))


class TestScalarNlms:
    def test_zero_error_no_change(self):
        # e = beta x - lhat vanishes when the feedback equals the scaled input
        assert nlms_scalar_step(1.3, 0.5, 0.5, eta=0.1, beta=1.0) == pytest.approx(1.3)

    def test_hand_update(self):
        assert nlms_scalar_step(1.0, 1.0, 0.5, eta=0.1, beta=1.0) == pytest.approx(1.05)

    def test_zero_input_noop(self):
        assert nlms_scalar_step(1.0, 0.0, 0.7, eta=0.1) == 1.0

    def test_converges_on_static_linear_plant(self):
        # plant lhat = 0.5 r x: fixed point at r = beta / 0.5
        r, beta = 1.0, 1.0
        for _ in range(5000):
            r = nlms_scalar_step(r, 1.0, 0.5 * r * 1.0, eta=0.5, beta=beta)
        assert r == pytest.approx(beta / 0.5, rel=1e-6)

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(min_value=-2, max_value=2),
        st.floats(min_value=0.05, max_value=1.95),
        st.floats(min_value=0.1, max_value=2.0),
    )
    def test_passivity_linear_plant(self, r, eta, x):
        # with a linear plant, the a-posteriori error never exceeds the
        # a-priori error for eta < 2
        beta = 1.0
        lhat = r * x
        e_pre = beta * x - lhat
        r_next = nlms_scalar_step(r, x, lhat, eta=eta, beta=beta)
        e_post = beta * x - r_next * x
        assert abs(e_post) <= abs(e_pre) + 1e-12


class TestChebNlmsStep:
    def test_zero_error_no_change(self):
        st_ = PredistorterState(coeffs=[1.0, 0.5], eta=0.1, beta=1.0)
        out = cheb_nlms_step(st_, 0.4, 0.4)  # lhat == beta x, zero gradient
        assert np.allclose(out.coeffs, st_.coeffs)

    def test_hand_update(self):
        # x = 0.5: T = (1, 0.5), denom = 1.25, e = 0.1:
        # increments eta/1.25 * 0.1 * (1, 0.5) = (0.008, 0.004)
        st_ = PredistorterState(coeffs=[1.0, 1.0], eta=0.1, beta=1.0)
        out = cheb_nlms_step(st_, 0.5, 0.4)
        assert np.allclose(out.coeffs, [1.008, 1.004], atol=1e-12)

    def test_projection_rejects_negative_candidate(self):
        # enormous negative error drives the candidate negative at x
        st_ = PredistorterState(coeffs=[0.01, 0.0], eta=1.9)
        out = cheb_nlms_step(st_, 0.5, 50.0)
        assert np.allclose(out.coeffs, st_.coeffs)  # rejected, state unchanged
        assert out.iteration == st_.iteration + 1

    def test_probe_anchor_blocks_offsite_violation(self):
        probe = np.array([0.02])
        st_ = PredistorterState(
            coeffs=[0.05, 0.1],
            eta=1.9,
            probe_basis=chebyshev_basis(2, probe),
        )
        # An update triggered at x=0.9 that would push T(0.02) negative must
        # be rejected even though positivity at 0.9 itself survives.
        out = cheb_nlms_step(st_, 0.9, 1.2)
        cand_ok = np.all(out.coeffs @ chebyshev_basis(2, probe) > 0)
        assert cand_ok

    def test_posteriori_error_contraction(self):
        # linear feedback lhat = sum r T_i(x): e_post = (1 - eta) e_pre
        st_ = PredistorterState(coeffs=[0.8, 0.6, 0.1], eta=0.5, beta=1.0)
        x = 0.3
        lhat = float(chebyshev_eval(st_.coeffs, x)) - 0.2  # e_pre = beta x - lhat
        e_pre = st_.beta * x - lhat
        out = cheb_nlms_step(st_, x, lhat)
        e_post = st_.beta * x - (float(chebyshev_eval(out.coeffs, x)) - 0.2) - 0.0
        # prediction moved by eta * e_pre exactly
        moved = float(chebyshev_eval(out.coeffs, x)) - float(chebyshev_eval(st_.coeffs, x))
        assert moved == pytest.approx(st_.eta * e_pre, rel=1e-12)

    def test_misaligned_rails_rejected(self):
        st_ = PredistorterState(coeffs=[1.0, 0.0], eta=0.1)
        with pytest.raises(ValueError):
            cheb_nlms_step(st_, np.array([0.1, 0.2]), np.array([0.1]))


class TestFeasibleInit:
    def test_first_feasible_is_positive_on_probe(self):
        probe = np.linspace(0.05, 0.9, 32)
        r = feasible_init(5, probe, rng=np.random.default_rng(0))
        assert np.all(chebyshev_eval(r, probe) > 0)
        assert np.all((r >= 0) & (r <= 1))

    def test_scored_search_improves(self):
        probe = np.linspace(0.05, 0.9, 64)
        led = LedModel()
        target = probe  # want A(T(x)) = x

        def score(r):
            return float(np.mean((target - led_apply(chebyshev_eval(r, probe), led)) ** 2))

        rng = np.random.default_rng(1)
        first = feasible_init(5, probe, rng=np.random.default_rng(1))
        best = feasible_init(5, probe, score=score, rng=rng)
        assert score(best) < score(first)
        assert np.all(chebyshev_eval(best, probe) > 0)

    def test_exhausted_draw_budget_raises(self):
        with pytest.raises(RuntimeError):
            feasible_init(
                2, np.array([0.5]), rng=np.random.default_rng(0), max_draws=0,
                score=lambda r: 0.0,
            )


class TestTrainPredistorter:
    def test_identity_plant_converges_to_linear_weights(self):
        # plant = the expansion itself: optimum is T(x) = beta x, weights (0, beta)
        rng = np.random.default_rng(0)
        xs = rng.uniform(0.1, 0.9, 60_000)
        st_ = PredistorterState(coeffs=None, eta=0.05, beta=1.0)
        st_, trace = train_predistorter(lambda pred: pred, xs, st_, rng=rng)
        assert trace[-1] < 1e-6
        x = np.linspace(0.1, 0.9, 20)
        assert np.max(np.abs(chebyshev_eval(st_.coeffs, x) - x)) < 5e-3

    def test_zero_step_size_never_changes_weights(self):
        rng = np.random.default_rng(3)
        xs = rng.uniform(0.1, 0.8, 500)
        st_ = PredistorterState(coeffs=[1.0, 0.5, 0.1], eta=1e-300)
        out, _ = train_predistorter(lambda pred: led_apply(pred, LedModel()), xs, st_, rng=rng)
        assert np.allclose(out.coeffs, [1.0, 0.5, 0.1], atol=1e-290)

    def test_rapp_plant_mse_non_increasing(self):
        rng = np.random.default_rng(11)
        led = LedModel(i_max=1.0, p=0.5)
        xs = rng.uniform(0.1, 0.8, (30_000, 2)) + 1j * rng.uniform(0.1, 0.8, (30_000, 2))
        st_ = PredistorterState(coeffs=None, eta=0.00022, beta=1.0)
        st_, trace = train_predistorter(lambda pred: led_apply(pred, led), xs, st_, rng=rng)
        ratios = trace[1:] / trace[:-1]
        assert np.all(ratios <= 1.05)

    def test_hot_loop_matches_step_op(self):
        # one pass of train_predistorter over a short stream must land on the
        # same weights as chaining cheb_nlms_step manually
        rng = np.random.default_rng(5)
        led = LedModel()
        xs = rng.uniform(0.1, 0.8, (50, 2)) + 1j * rng.uniform(0.1, 0.8, (50, 2))
        plant = lambda pred: led_apply(pred, led)
        init = np.array([0.9, 0.4, 0.2, 0.1, 0.05])
        probe_T = chebyshev_basis(5, np.concatenate([xs[:16].real.ravel(), xs[:16].imag.ravel()]))
        st_fast = PredistorterState(coeffs=init.copy(), eta=0.1, probe_basis=probe_T)
        st_fast, _ = train_predistorter(plant, xs, st_fast, rng=rng, probe_len=16)
        st_ref = PredistorterState(coeffs=init.copy(), eta=0.1, probe_basis=probe_T)
        for k in range(50):
            pred = chebyshev_eval(st_ref.coeffs, xs[k])
            st_ref = cheb_nlms_step(st_ref, xs[k], plant(pred))
        assert np.allclose(st_fast.coeffs, st_ref.coeffs, atol=1e-14)


class TestEstimateBussgang:
    def test_pure_gain(self):
        x = np.random.default_rng(0).uniform(0.1, 1.0, 5000)
        stats = estimate_bussgang(x, 2.0 * x)
        assert stats.alpha == pytest.approx(2.0, abs=1e-12)
        assert stats.sigma_delta2 == pytest.approx(0.0, abs=1e-20)

    def test_additive_independent_noise(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0.1, 1.0, 400_000)
        n = rng.normal(0, np.sqrt(0.01), x.size)
        stats = estimate_bussgang(x, x + n)
        assert stats.alpha == pytest.approx(1.0, abs=5e-3)
        assert stats.sigma_delta2 == pytest.approx(0.01, rel=0.02)

    def test_rapp_against_oversampled_reference(self):
        led = LedModel(i_max=1.0, p=0.5)
        rng = np.random.default_rng(2)
        x_ref = rng.uniform(0.0, 0.9, 1_000_000)
        y_ref = led_apply(x_ref, led)
        alpha_ref = float(np.mean(y_ref * x_ref) / np.mean(x_ref * x_ref))
        sd2_ref = float(np.var(y_ref - alpha_ref * x_ref))
        x = rng.uniform(0.0, 0.9, 50_000)
        stats = estimate_bussgang(x, led_apply(x, led))
        assert stats.alpha == pytest.approx(alpha_ref, rel=0.02)
        assert stats.sigma_delta2 == pytest.approx(sd2_ref, rel=0.02)

    def test_zero_power_rejected(self):
        with pytest.raises(ValueError):
            estimate_bussgang(np.zeros(100), np.ones(100))

    def test_moment_orthogonality_on_fit_set(self):
        # residual_corr is the normalized cross-moment; zero on the set the
        # gain was fitted on, up to float rounding
        rng = np.random.default_rng(3)
        x = rng.uniform(0.1, 0.9, 10_000)
        stats = estimate_bussgang(x, led_apply(x, LedModel()))
        assert stats.residual_corr < 1e-10


def test_coeffs_csv_roundtrip():
    st_ = PredistorterState(coeffs=[1.25, -0.5, 0.125], eta=0.00022, beta=1.0)
    text = coeffs_csv(st_)
    lines = text.strip().split("\n")
    assert lines[0] == "# eta=0.00022 beta=1 ncheb=3"
    assert [float(v) for v in lines[1:]] == [1.25, -0.5, 0.125]
