import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nomavlc.geometry import ChannelSvd
from nomavlc.precoding import (
    Precoder,
    assign_lambdas,
    bias_offset,
    effective_channel,
    precoder_csv,
    qr_enhance,
    svd_precoder,
    zf_precoder,
)


def random_channel(rng, shape=(2, 2), lo=0.2, hi=2.0):
    return rng.uniform(lo, hi, shape)


class TestSvdPrecoder:
    def test_exponent_one_gives_v_on_support(self):
        rng = np.random.default_rng(0)
        H = random_channel(rng)
        svd = ChannelSvd.of(H)
        P = svd_precoder(svd, 1.0)
        assert np.allclose(P.matrix[:, : svd.rank], svd.v[:, : svd.rank], atol=1e-12)

    def test_orthonormal_channel_any_exponent(self):
        # H with unit singular values: sigma^(anything) = 1, P = V throughout
        q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(3, 3)))
        svd = ChannelSvd.of(q)
        for lam in (0.5, 1.0, 2.0, 3.7):
            P = svd_precoder(svd, lam)
            assert np.allclose(np.abs(P.matrix), np.abs(svd.v), atol=1e-10)

    def test_diagonal_channel_exponent_two(self):
        H = np.diag([2.0, 0.5])
        P = svd_precoder(ChannelSvd.of(H), 2.0)
        assert np.allclose(np.abs(P.matrix), np.diag([2.0, 0.5]), atol=1e-12)
        assert np.allclose(np.abs(H @ P.matrix), np.diag([4.0, 0.25]), atol=1e-12)

    def test_parallel_channel_identity_random(self):
        # effective channel H P equals U Sigma^lambda to 1e-9 relative
        rng = np.random.default_rng(42)
        for _ in range(100):
            H = random_channel(rng)
            svd = ChannelSvd.of(H)
            for lam in (0.5, 1.0, 2.0):
                P = svd_precoder(svd, lam)
                eff = effective_channel(svd, lam)
                err = np.linalg.norm(H @ P.matrix - eff, 2)
                assert err <= 1e-9 * np.linalg.norm(H, 2)

    def test_rank_truncation_no_pole(self):
        # zero singular value with exponent < 1 must map to 0, not a pole
        H = np.outer([1.0, 1.0], [0.6, 0.8])
        svd = ChannelSvd.of(H)
        assert svd.rank == 1
        P = svd_precoder(svd, 0.5)
        assert np.all(np.isfinite(P.matrix))
        assert np.allclose(P.matrix[:, svd.rank:], 0.0)

    def test_rank_cap(self):
        H = np.diag([2.0, 1.0])
        P = svd_precoder(ChannelSvd.of(H), 1.0, rank=1)
        assert np.allclose(P.matrix[:, 1], 0.0)

    def test_power_diversity_monotile(self):
        # with singular values > 1, distinct exponents give distinct
        # effective-channel traces, monotone in the exponent
        H = np.diag([3.0, 1.5]) @ np.linalg.qr(np.random.default_rng(3).normal(size=(2, 2)))[0]
        svd = ChannelSvd.of(H)
        traces = []
        for lam in (0.5, 1.0, 1.5, 2.0):
            HP = H @ svd_precoder(svd, lam).matrix
            traces.append(np.trace(HP.T @ HP))
        assert np.all(np.diff(traces) > 0)


class TestAssignLambdas:
    def test_identical_channels(self):
        plan = assign_lambdas([5.0, 5.0, 5.0], 1.0)
        assert plan.exponents == pytest.approx([1.0, 1.0, 1.0])

    def test_hand_example(self):
        plan = assign_lambdas([10.0, 100.0], 1.0)
        assert plan.exponents[1] == pytest.approx(0.5, abs=1e-12)

    def test_invariant_constant(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            strengths = list(rng.uniform(1.5, 50.0, rng.integers(2, 5)))
            lam1 = rng.uniform(0.3, 3.0)
            plan = assign_lambdas(strengths, lam1)
            ref = lam1 * np.log(strengths[0])
            for lam, s in zip(plan.exponents, strengths):
                assert abs(lam * np.log(s) - ref) / abs(ref) < 1e-9

    def test_sub_unity_strengths_keep_sign(self):
        # both logs negative: ratio positive, exponents stay positive
        plan = assign_lambdas([1e-10, 2e-10], 1.0)
        assert all(lam > 0 for lam in plan.exponents)

    def test_unit_strength_rejected(self):
        with pytest.raises(ValueError):
            assign_lambdas([10.0, 1.0], 1.0)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            assign_lambdas([10.0, -0.1], 1.0)


class TestBiasOffset:
    def test_identity(self):
        assert bias_offset(np.eye(2)) == pytest.approx(1.0)

    def test_hand_example(self):
        assert bias_offset(np.array([[1.0, -2.0], [0.5, 0.5]])) == pytest.approx(3.0)

    def test_biased_rails_nonnegative(self):
        rng = np.random.default_rng(11)
        qam = (rng.choice([-1.0, 1.0], (10_000, 2)) + 1j * rng.choice([-1.0, 1.0], (10_000, 2))) / np.sqrt(2)
        for _ in range(5):
            P = rng.normal(size=(2, 2))
            off = bias_offset(P)
            out = qam @ P.T + off * (1 + 1j)
            assert out.real.min() >= -1e-12
            assert out.imag.min() >= -1e-12


class TestQrEnhance:
    def test_favored_user_triangular(self):
        rng = np.random.default_rng(5)
        svds = [ChannelSvd.of(random_channel(rng)) for _ in range(2)]
        pres = [svd_precoder(svds[u], lam) for u, lam in enumerate((1.0, 1.3))]
        enhanced, q = qr_enhance(pres, svds, favored=1)
        eff = svds[1].reconstruct() @ enhanced[1].matrix
        upper = np.triu(eff, k=1)
        assert np.max(np.abs(upper)) < 1e-10
        assert np.linalg.norm(q.T @ q - np.eye(2)) < 1e-10

    def test_identity_factorization(self):
        svd = ChannelSvd.of(np.eye(2))
        pres = [svd_precoder(svd, 1.0)]
        enhanced, q = qr_enhance(pres, [svd], favored=0)
        assert np.allclose(np.abs(q), np.eye(2), atol=1e-12)
        assert np.allclose(np.abs(enhanced[0].matrix), np.abs(pres[0].matrix), atol=1e-12)

    def test_bad_index(self):
        svd = ChannelSvd.of(np.eye(2))
        with pytest.raises(ValueError):
            qr_enhance([svd_precoder(svd, 1.0)], [svd], favored=3)


class TestZfPrecoder:
    def test_identity_channel(self):
        P = zf_precoder(np.eye(2))
        assert np.allclose(P.matrix, np.eye(2), atol=1e-12)

    def test_diagonal_channel_effective_identity(self):
        H = np.diag([2.0, 1.0])
        P = zf_precoder(H)
        HP = H @ P.matrix
        assert np.allclose(HP / HP[0, 0], np.eye(2), atol=1e-10)

    def test_condition_number_one(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            H = rng.normal(size=(2, 2)) + 2 * np.eye(2)
            s = np.linalg.svd(H @ zf_precoder(H).matrix, compute_uv=False)
            assert s[0] / s[-1] == pytest.approx(1.0, abs=1e-8)

    def test_frobenius_normalization(self):
        H = np.diag([2.0, 1.0])
        assert np.linalg.norm(zf_precoder(H).matrix, "fro") == pytest.approx(np.sqrt(2))

    def test_rank_deficient_rejected(self):
        with pytest.raises(ValueError):
            zf_precoder(np.outer([1.0, 1.0], [0.6, 0.8]))

    def test_rank_deficient_allowed_with_rank(self):
        P = zf_precoder(np.outer([1.0, 1.0], [0.6, 0.8]), rank=1)
        assert np.all(np.isfinite(P.matrix))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_bias_bound_property(seed):
    # l1 row bound keeps both rails of P x + offset nonnegative for
    # any constellation whose rails lie in [-1, 1]
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(2, 2)) * rng.uniform(0.1, 3.0)
    x = rng.uniform(-1, 1, (64, 2)) + 1j * rng.uniform(-1, 1, (64, 2))
    off = bias_offset(P)
    out = x @ P.T + off * (1 + 1j)
    assert out.real.min() >= -1e-9 and out.imag.min() >= -1e-9


def test_precoder_csv_header():
    P = svd_precoder(ChannelSvd.of(np.diag([2.0, 1.0])), 1.5)
    text = precoder_csv(P, 0)
    head = text.splitlines()[0]
    assert head.startswith("# user=0 lambda=1.5 variant=svd bias=")


def test_precoder_requires_finite():
    with pytest.raises(ValueError):
        Precoder(matrix=np.array([[np.inf, 0.0], [0.0, 1.0]]), exponent=1.0)
