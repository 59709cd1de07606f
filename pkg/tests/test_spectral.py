"""Tests for the divergence-free Fourier field module.

The reference oracle below evaluates the closed basis formula directly and
integrates with a fine rectangle rule, independently of the package's
table machinery.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plflab.errors import ConfigurationError, DomainError
from plflab.spectral import (
    GridSpec,
    PhysicalField,
    SpectralState,
    WaveIndex,
    analyze,
    basis_eval,
    dissipation_Ip,
    divergence_max,
    mode_count,
    mode_list,
    second_gradient_norm,
    sobolev_norm,
    sym_gradient,
    synthesize,
)

C0 = 1.0 / (math.sqrt(2.0) * math.pi)


def reference_basis(k1, k2, X, Y):
    """Independent evaluation of e_k on meshgrid arrays."""
    norm = math.hypot(k1, k2)
    phase = k1 * X + k2 * Y
    trig = np.sin(phase) if (k1 > 0 or (k1 == 0 and k2 > 0)) else np.cos(phase)
    return (-k2 / norm * C0) * trig, (k1 / norm * C0) * trig


def reference_quadrature(values, M):
    return float(np.sum(values)) * (2.0 * math.pi / M) ** 2


def fine_mesh(M=64):
    x = 2.0 * math.pi * np.arange(M) / M
    return np.meshgrid(x, x, indexing="ij")


class TestWaveIndex:
    def test_zero_rejected(self):
        with pytest.raises(DomainError):
            WaveIndex(0, 0)

    def test_sine_branch_examples(self):
        assert WaveIndex(1, 0).sine_branch
        assert WaveIndex(0, 1).sine_branch
        assert not WaveIndex(0, -1).sine_branch
        assert not WaveIndex(-1, 5).sine_branch

    @given(st.integers(-9, 9), st.integers(-9, 9))
    def test_branch_partition(self, k1, k2):
        """Exactly one of k and -k gets the sine branch."""
        if (k1, k2) == (0, 0):
            return
        k = WaveIndex(k1, k2)
        minus = WaveIndex(-k1, -k2)
        assert k.sine_branch != minus.sine_branch

    def test_mode_list_order_and_count(self):
        modes = mode_list(2)
        assert len(modes) == 12
        norms = [m.norm_sq for m in modes]
        assert norms == sorted(norms)
        # lexicographic (|k|^2, k1, k2) within equal norms
        assert modes[0] == WaveIndex(-1, 0)
        assert mode_count(8) == 196

    def test_mode_list_bad_cutoff(self):
        with pytest.raises(ConfigurationError):
            mode_list(0)


class TestBasisEval:
    def test_closed_formula_point(self):
        # e_(1,0)(pi/2, 0) = (0, 1/(sqrt 2 pi))
        v = basis_eval(WaveIndex(1, 0), (math.pi / 2.0, 0.0))
        assert v == pytest.approx([0.0, 0.22507907903927651], abs=1e-15)

    def test_zero_at_origin(self):
        assert np.all(basis_eval(WaveIndex(1, 0), (0.0, 0.0)) == 0.0)

    def test_matches_reference_on_grid(self):
        X, Y = fine_mesh(32)
        for k1, k2 in [(1, 0), (0, 1), (-2, 1), (3, -3), (0, -2)]:
            ref1, ref2 = reference_basis(k1, k2, X, Y)
            pts = np.stack([X, Y], axis=-1).reshape(-1, 2)
            got = np.array([basis_eval(WaveIndex(k1, k2), p) for p in pts])
            assert np.allclose(got[:, 0], ref1.ravel(), atol=1e-14)
            assert np.allclose(got[:, 1], ref2.ravel(), atol=1e-14)

    def test_orthonormality_by_reference_quadrature(self):
        """<e_k, e_l> = delta_kl for all |k|, |l| <= 4, fine-grid oracle."""
        M = 64
        X, Y = fine_mesh(M)
        modes = [(m.k1, m.k2) for m in mode_list(4)]
        fields = [reference_basis(k1, k2, X, Y) for k1, k2 in modes]
        for i, (a1, a2) in enumerate(fields):
            for j, (b1, b2) in enumerate(fields):
                val = reference_quadrature(a1 * b1 + a2 * b2, M)
                assert val == pytest.approx(1.0 if i == j else 0.0, abs=1e-12)


class TestSynthesizeAnalyze:
    def test_zero_roundtrip(self):
        grid = GridSpec.for_cutoff(3)
        z = SpectralState.zero(3)
        f = synthesize(z, grid)
        assert np.all(f.values == 0.0)
        assert np.all(analyze(f, 3).coeffs == 0.0)

    def test_single_mode_closed_form(self):
        grid = GridSpec.for_cutoff(4)
        st_ = SpectralState.from_dict(4, {(1, 0): 1.0})
        f = synthesize(st_, grid)
        x = grid.points_1d()
        expected = np.sin(x)[:, None] * C0
        assert np.allclose(f.values[:, :, 1], np.broadcast_to(expected, (grid.M, grid.M)), atol=1e-14)
        assert np.allclose(f.values[:, :, 0], 0.0, atol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_roundtrip_random(self, seed):
        n = 4
        grid = GridSpec(M=2 * n + 2, dealias_factor=(2 * n + 2) / n)
        rng = np.random.default_rng(seed)
        state = SpectralState(n, rng.standard_normal(mode_count(n)))
        back = analyze(synthesize(state, grid), n)
        assert np.allclose(back.coeffs, state.coeffs, atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_linearity(self, seed):
        n, grid = 3, GridSpec.for_cutoff(3)
        rng = np.random.default_rng(seed)
        x = SpectralState(n, rng.standard_normal(mode_count(n)))
        y = SpectralState(n, rng.standard_normal(mode_count(n)))
        fx = synthesize(x, grid).values
        fy = synthesize(y, grid).values
        fxy = synthesize(x + y, grid).values
        assert np.allclose(fxy, fx + fy, atol=1e-12)

    def test_leray_annihilates_gradients(self):
        """analyze of grad h with h = sin(x1 + x2) is identically zero."""
        n = 4
        grid = GridSpec.for_cutoff(n)
        X, Y = fine_mesh(grid.M)
        gradh = np.stack([np.cos(X + Y), np.cos(X + Y)], axis=-1)
        coeffs = analyze(PhysicalField(grid, gradh), n).coeffs
        assert np.max(np.abs(coeffs)) < 1e-12

    def test_grid_too_coarse(self):
        state = SpectralState.zero(6)
        with pytest.raises(ConfigurationError):
            synthesize(state, GridSpec(M=8, dealias_factor=8 / 6))

    def test_nonfinite_field_rejected(self):
        grid = GridSpec.for_cutoff(2)
        bad = np.zeros((grid.M, grid.M, 2))
        bad[0, 0, 0] = np.nan
        with pytest.raises(DomainError):
            PhysicalField(grid, bad)


class TestDifferentialOperators:
    def test_sym_gradient_zero(self):
        grid = GridSpec.for_cutoff(3)
        E = sym_gradient(SpectralState.zero(3), grid)
        assert np.all(E.values == 0.0)

    def test_sym_gradient_closed_form(self):
        # E of e_(1,0): only off-diagonal cos(x1) / (2 sqrt2 pi)
        n, grid = 4, GridSpec.for_cutoff(4)
        st_ = SpectralState.from_dict(n, {(1, 0): 1.0})
        E = sym_gradient(st_, grid)
        x = grid.points_1d()
        expected = np.cos(x)[:, None] * 0.11253953951963826
        assert np.allclose(E.values[:, :, 1], np.broadcast_to(expected, (grid.M, grid.M)), atol=1e-14)
        assert np.allclose(E.values[:, :, 0], 0.0, atol=1e-15)
        assert np.allclose(E.values[:, :, 2], 0.0, atol=1e-15)
        # |Eu|^2 at x1 = 0 is 1/(4 pi^2)
        assert E.frobenius_sq()[0, 0] == pytest.approx(0.025330295910584444, rel=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_trace_free(self, seed):
        n, grid = 5, GridSpec.for_cutoff(5)
        rng = np.random.default_rng(seed)
        state = SpectralState(n, rng.standard_normal(mode_count(n)))
        E = sym_gradient(state, grid)
        trace = E.values[:, :, 0] + E.values[:, :, 2]
        grad_scale = sobolev_norm(state, grid, 1, 2.0)
        assert np.max(np.abs(trace)) <= 1e-10 * max(grad_scale, 1e-30)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_divergence_free(self, seed):
        n, grid = 5, GridSpec.for_cutoff(5)
        rng = np.random.default_rng(seed)
        state = SpectralState(n, rng.standard_normal(mode_count(n)))
        assert divergence_max(state, grid) < 1e-12 * max(state.norm_h(), 1.0)


class TestNorms:
    def test_basis_normalized(self):
        grid = GridSpec.for_cutoff(4)
        for kk in [(1, 0), (0, 2), (-1, 3), (2, 2)]:
            st_ = SpectralState.from_dict(4, {kk: 1.0})
            assert sobolev_norm(st_, grid, 0, 2.0) == pytest.approx(1.0, rel=1e-12)

    def test_v_norm_is_wavenumber(self):
        grid = GridSpec.for_cutoff(4)
        for kk, expect in [((1, 0), 1.0), ((1, 2), math.sqrt(5)), ((-2, -2), math.sqrt(8))]:
            st_ = SpectralState.from_dict(4, {kk: 1.0})
            assert sobolev_norm(st_, grid, 1, 2.0) == pytest.approx(expect, rel=1e-12)

    def test_zero_state_all_norms(self):
        grid = GridSpec.for_cutoff(3)
        z = SpectralState.zero(3)
        for order in (0, 1):
            for p in (1.0, 1.5, 2.0, 3.0):
                assert sobolev_norm(z, grid, order, p) == 0.0

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_parseval(self, seed):
        n, grid = 4, GridSpec.for_cutoff(4)
        rng = np.random.default_rng(seed)
        state = SpectralState(n, rng.standard_normal(mode_count(n)))
        h_quad = sobolev_norm(state, grid, 0, 2.0)
        v_quad = sobolev_norm(state, grid, 1, 2.0)
        assert h_quad**2 == pytest.approx(float(np.sum(state.coeffs**2)), rel=1e-10)
        w = np.array([m.norm_sq for m in mode_list(n)], dtype=float)
        assert v_quad**2 == pytest.approx(float(np.sum(w * state.coeffs**2)), rel=1e-10)
        assert state.norm_h() == pytest.approx(h_quad, rel=1e-10)
        assert state.norm_v() == pytest.approx(v_quad, rel=1e-10)

    def test_lp_norm_against_reference(self):
        """L^p norm of a single mode vs direct evaluation at the same grid.

        The norm is defined as rectangle-rule quadrature on the state's own
        grid, so the oracle evaluates the closed basis formula there.
        """
        n, grid = 3, GridSpec.for_cutoff(3)
        st_ = SpectralState.from_dict(n, {(1, 1): 1.3})
        X, Y = fine_mesh(grid.M)
        u1, u2 = reference_basis(1, 1, X, Y)
        for p in (1.0, 1.7, 3.0):
            ref = reference_quadrature(
                (1.3**2 * (u1**2 + u2**2)) ** (p / 2.0), grid.M
            ) ** (1.0 / p)
            assert sobolev_norm(st_, grid, 0, p) == pytest.approx(ref, rel=1e-12)

    def test_l2_norm_grid_independent(self):
        """For p = 2 the integrand is polynomial: exact at any admissible M."""
        n = 3
        st_ = SpectralState.from_dict(n, {(1, 1): 1.3, (2, 0): -0.4})
        vals = [
            sobolev_norm(st_, GridSpec(M=M, dealias_factor=M / n), 0, 2.0)
            for M in (8, 13, 27, 64)
        ]
        assert np.allclose(vals, vals[0], rtol=1e-12)

    def test_unsupported_order(self):
        grid = GridSpec.for_cutoff(3)
        with pytest.raises(ConfigurationError):
            sobolev_norm(SpectralState.zero(3), grid, 2, 2.0)

    def test_bad_exponent(self):
        grid = GridSpec.for_cutoff(3)
        with pytest.raises(DomainError):
            sobolev_norm(SpectralState.zero(3), grid, 0, 0.5)

    def test_second_gradient_single_mode(self):
        # |grad^2 e_k|^2 integrates to |k|^4, so the H^{2,2} seminorm is |k|^2
        grid = GridSpec.for_cutoff(4)
        st_ = SpectralState.from_dict(4, {(1, 2): 1.0})
        assert second_gradient_norm(st_, grid, 2.0) == pytest.approx(5.0, rel=1e-12)


class TestEigenrelation:
    def test_stokes_eigenvalue(self):
        """analyze(-Laplace synthesize(e_k)) = |k|^2 e_k via second derivatives."""
        from plflab.operators import apply_stokes

        n = 4
        for kk in [(1, 0), (1, 2), (-2, 1)]:
            st_ = SpectralState.from_dict(n, {kk: 1.0})
            out = apply_stokes(st_)
            expect = -float(kk[0] ** 2 + kk[1] ** 2)
            assert out.coeff(WaveIndex(*kk)) == pytest.approx(expect, rel=1e-10)


class TestDissipation:
    def test_zero(self):
        grid = GridSpec.for_cutoff(3)
        assert dissipation_Ip(SpectralState.zero(3), grid, 1.5) == 0.0

    def test_small_amplitude_limit(self):
        """I_p(c e_(1,0)) / c^2 -> 1/2 as c -> 0, independent of p."""
        grid = GridSpec.for_cutoff(4)
        for p in (1.2, 1.5, 1.9):
            for c in (1e-4, 1e-6):
                st_ = SpectralState.from_dict(4, {(1, 0): c})
                assert dissipation_Ip(st_, grid, p) / c**2 == pytest.approx(0.5, rel=1e-6)

    def test_weight_lower_bound(self):
        """I_p(u) >= (1 + max|Eu|^2)^{(p-2)/2} * integral |grad Eu|^2."""
        grid = GridSpec.for_cutoff(4)
        rng = np.random.default_rng(8)
        state = SpectralState(4, rng.standard_normal(mode_count(4)))
        E = sym_gradient(state, grid)
        max_e_sq = float(np.max(E.frobenius_sq()))
        raw = dissipation_Ip(state, grid, 2.0)  # weight = 1: plain integral
        for p in (1.2, 1.5, 1.9):
            ip = dissipation_Ip(state, grid, p)
            assert ip >= (1.0 + max_e_sq) ** ((p - 2.0) / 2.0) * raw * (1 - 1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_monotone_in_p(self, seed):
        """The weight base 1 + |E|^2 is >= 1, so I_p is nondecreasing in p."""
        grid = GridSpec.for_cutoff(4)
        rng = np.random.default_rng(seed)
        state = SpectralState(4, rng.standard_normal(mode_count(4)))
        values = [dissipation_Ip(state, grid, p) for p in (1.1, 1.4, 1.7, 2.0)]
        assert all(b >= a * (1 - 1e-12) for a, b in zip(values, values[1:]))

    def test_bad_p(self):
        grid = GridSpec.for_cutoff(3)
        with pytest.raises(DomainError):
            dissipation_Ip(SpectralState.zero(3), grid, 1.0)


class TestSpectralStateAlgebra:
    def test_cutoff_mismatch(self):
        with pytest.raises(ConfigurationError):
            SpectralState.zero(3) + SpectralState.zero(4)

    def test_wrong_shape(self):
        with pytest.raises(ConfigurationError):
            SpectralState(3, np.zeros(5))

    def test_from_dict_outside_cutoff(self):
        with pytest.raises(ConfigurationError):
            SpectralState.from_dict(2, {(3, 0): 1.0})

    def test_scalar_algebra(self):
        x = SpectralState.from_dict(3, {(1, 0): 2.0})
        y = 0.5 * x - x
        assert y.coeff(WaveIndex(1, 0)) == pytest.approx(-1.0)
