"""Divergence-free mean-zero Fourier fields on the torus (0, 2pi)^2.

The basis is indexed by nonzero integer wave vectors k and reads

    e_k(xi) = (1 / (sqrt(2) pi)) * (k_perp / |k|) * sin(k.xi)   if k in the sine branch
    e_k(xi) = (1 / (sqrt(2) pi)) * (k_perp / |k|) * cos(k.xi)   otherwise

with k_perp = (-k2, k1).  The sine branch is k1 > 0 or (k1 = 0 and k2 > 0),
so each pair {k, -k} contributes exactly one sine and one cosine mode and
the family is L2-orthonormal.  Every synthesized field is automatically
real, mean-zero and divergence-free, and -Laplace e_k = |k|^2 e_k.

All integrals are rectangle-rule quadrature on the uniform periodic M x M
grid, which is exact for trigonometric polynomials of per-axis degree < M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DomainError

NORMALIZATION = 1.0 / (math.sqrt(2.0) * math.pi)


@dataclass(frozen=True, order=True)
class WaveIndex:
    """Nonzero integer wave vector k = (k1, k2)."""

    k1: int
    k2: int

    def __post_init__(self):
        if self.k1 == 0 and self.k2 == 0:
            raise DomainError("wave index (0, 0) is excluded")

    @property
    def norm_sq(self) -> int:
        return self.k1 * self.k1 + self.k2 * self.k2

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    @property
    def perp(self) -> tuple[int, int]:
        return (-self.k2, self.k1)

    @property
    def sine_branch(self) -> bool:
        """True if k gets the sine, i.e. k1 > 0 or (k1 = 0 and k2 > 0).

        The boundary axis k1 = 0 is split by the sign of k2 so that the
        branches partition the nonzero lattice into k and -k halves.
        """
        return self.k1 > 0 or (self.k1 == 0 and self.k2 > 0)


@lru_cache(maxsize=None)
def mode_list(n: int) -> tuple[WaveIndex, ...]:
    """All wave indices with 0 < |k| <= n in the canonical storage order.

    Order is lexicographic in (|k|^2, k1, k2); it is fixed so coefficient
    vectors and CSV output are bit-stable across runs.
    """
    if n < 1:
        raise ConfigurationError(f"cutoff must be >= 1, got {n}")
    out = []
    for k1 in range(-n, n + 1):
        for k2 in range(-n, n + 1):
            if (k1, k2) != (0, 0) and k1 * k1 + k2 * k2 <= n * n:
                out.append(WaveIndex(k1, k2))
    out.sort(key=lambda k: (k.norm_sq, k.k1, k.k2))
    return tuple(out)


def mode_count(n: int) -> int:
    return len(mode_list(n))


@lru_cache(maxsize=None)
def _mode_index_map(n: int) -> dict:
    return {(k.k1, k.k2): i for i, k in enumerate(mode_list(n))}


def mode_index(n: int, k) -> int:
    """Position of wave index k in the canonical order at cutoff n."""
    key = (k.k1, k.k2) if isinstance(k, WaveIndex) else tuple(k)
    index = _mode_index_map(n)
    if key not in index:
        raise ConfigurationError(f"mode {key} outside cutoff n={n}")
    return index[key]


def basis_eval(k: WaveIndex, xi) -> np.ndarray:
    """Evaluate e_k at a single point xi in [0, 2pi)^2."""
    xi = np.asarray(xi, dtype=float)
    phase = k.k1 * xi[0] + k.k2 * xi[1]
    trig = math.sin(phase) if k.sine_branch else math.cos(phase)
    p1, p2 = k.perp
    scale = NORMALIZATION / k.norm
    return np.array([p1 * scale * trig, p2 * scale * trig])


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid xi_ij = (2pi i / M, 2pi j / M).

    dealias_factor records M / n for the cutoff the grid was sized for.
    M >= 3n + 1 makes quadrature exact for cubic spectral products; the
    default sizing M = 4n adds margin for the non-polynomial stress.
    """

    M: int
    dealias_factor: float

    def __post_init__(self):
        if self.M < 3:
            raise ConfigurationError(f"grid needs at least 3 points per axis, got M={self.M}")

    @classmethod
    def for_cutoff(cls, n: int, factor: float = 4.0) -> "GridSpec":
        M = max(int(math.ceil(factor * n)), 3 * n + 1)
        return cls(M=M, dealias_factor=M / n)

    @property
    def cell_weight(self) -> float:
        """Quadrature weight (2pi / M)^2 of one grid cell."""
        return (2.0 * math.pi / self.M) ** 2

    def points_1d(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.M) / self.M

    def require(self, n: int, min_points: int, what: str) -> None:
        if self.M < min_points:
            raise ConfigurationError(
                f"grid M={self.M} too coarse for {what} at cutoff n={n}: need M >= {min_points}"
            )


@dataclass(frozen=True)
class PhysicalField:
    """Velocity samples on the grid, shape (M, M, 2)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.M, self.grid.M, 2):
            raise ConfigurationError(
                f"field shape {self.values.shape} does not match grid M={self.grid.M}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DomainError("field contains non-finite entries")


@dataclass(frozen=True)
class SymTensorField:
    """Symmetric 2x2 tensor samples, stored as (M, M, 3) = (T11, T12, T22).

    Symmetry is exact by storage.  For tensors arising as the symmetric
    gradient of a divergence-free field the trace T11 + T22 vanishes to
    quadrature tolerance.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.M, self.grid.M, 3):
            raise ConfigurationError(
                f"tensor shape {self.values.shape} does not match grid M={self.grid.M}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DomainError("tensor field contains non-finite entries")

    def frobenius_sq(self) -> np.ndarray:
        v = self.values
        return v[..., 0] ** 2 + 2.0 * v[..., 1] ** 2 + v[..., 2] ** 2


class SpectralState:
    """Real coefficient vector over the divergence-free basis, |k| <= n.

    Coefficients are stored in the canonical mode order of ``mode_list(n)``.
    The represented velocity field is automatically real, mean-zero and
    divergence-free.
    """

    __slots__ = ("n", "coeffs")

    def __init__(self, n: int, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=float)
        dim = mode_count(n)
        if coeffs.shape != (dim,):
            raise ConfigurationError(
                f"coefficient vector has shape {coeffs.shape}, cutoff n={n} needs ({dim},)"
            )
        self.n = n
        self.coeffs = coeffs

    @classmethod
    def zero(cls, n: int) -> "SpectralState":
        return cls(n, np.zeros(mode_count(n)))

    @classmethod
    def from_dict(cls, n: int, amplitudes: dict) -> "SpectralState":
        state = np.zeros(mode_count(n))
        for key, a in amplitudes.items():
            state[mode_index(n, key)] = a
        return cls(n, state)

    def coeff(self, k: WaveIndex) -> float:
        return float(self.coeffs[mode_index(self.n, k)])

    def copy(self) -> "SpectralState":
        return SpectralState(self.n, self.coeffs.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    # Parseval shortcuts; equal to the quadrature norms within round-off.
    def norm_h(self) -> float:
        return float(np.sqrt(np.dot(self.coeffs, self.coeffs)))

    def norm_v(self) -> float:
        w = get_basis_cache(self.n).norm_sq_modes
        return float(np.sqrt(np.dot(self.coeffs * w, self.coeffs)))

    def __add__(self, other: "SpectralState") -> "SpectralState":
        self._check_cutoff(other)
        return SpectralState(self.n, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralState") -> "SpectralState":
        self._check_cutoff(other)
        return SpectralState(self.n, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralState":
        return SpectralState(self.n, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def _check_cutoff(self, other: "SpectralState") -> None:
        if self.n != other.n:
            raise ConfigurationError(f"cutoff mismatch: {self.n} vs {other.n}")

    def __repr__(self):
        return f"SpectralState(n={self.n}, normH={self.norm_h():.6g})"


class _ModeCache:
    """Cutoff-level arrays shared by all grids: wave vectors and |k|^2."""

    def __init__(self, n: int):
        modes = mode_list(n)
        self.n = n
        self.modes = modes
        self.k = np.array([(m.k1, m.k2) for m in modes], dtype=float)
        self.norm_sq_modes = np.array([m.norm_sq for m in modes], dtype=float)
        self.sine = np.array([m.sine_branch for m in modes], dtype=bool)


@lru_cache(maxsize=None)
def get_basis_cache(n: int) -> _ModeCache:
    return _ModeCache(n)


class BasisTables:
    """Precomputed grid samples of the basis and its derivatives.

    All tables are laid out (mode, component, x, y) so synthesis is one
    matrix product with the coefficient vector and projection is one
    matrix product with a grid field.  Components:

      vel   (dim, 2): u1, u2
      grad  (dim, 4): d1u1, d2u1, d1u2, d2u2
      sym   (dim, 3): E11, E12, E22
      gradE (dim, 6): d1E11, d1E12, d1E22, d2E11, d2E12, d2E22
      hess  (dim, 6): d11u1, d12u1, d22u1, d11u2, d12u2, d22u2
    """

    def __init__(self, n: int, M: int):
        self.n = n
        self.M = M
        self.cache = get_basis_cache(n)
        self.dim = len(self.cache.modes)
        self.cell_weight = (2.0 * math.pi / M) ** 2

        x = 2.0 * math.pi * np.arange(M) / M
        X, Y = np.meshgrid(x, x, indexing="ij")
        k = self.cache.k
        phase = k[:, 0, None, None] * X[None] + k[:, 1, None, None] * Y[None]
        sin_p, cos_p = np.sin(phase), np.cos(phase)
        sine = self.cache.sine[:, None, None]
        # T carries the mode's own trig, D the trig after one derivative
        # (each further derivative multiplies by k_j and flips T <-> -D).
        self._T = np.where(sine, sin_p, cos_p)
        self._D = np.where(sine, cos_p, -sin_p)
        norm = np.sqrt(self.cache.norm_sq_modes)
        self._dirs = NORMALIZATION * np.stack([-k[:, 1], k[:, 0]], axis=1) / norm[:, None]
        self._k = k
        self._tab = {}

    def _table(self, name: str) -> np.ndarray:
        if name in self._tab:
            return self._tab[name]
        d, k, T, D = self._dirs, self._k, self._T, self._D
        if name == "vel":
            tab = d[:, :, None, None] * T[:, None]
        elif name == "grad":
            c = np.stack(
                [d[:, 0] * k[:, 0], d[:, 0] * k[:, 1], d[:, 1] * k[:, 0], d[:, 1] * k[:, 1]],
                axis=1,
            )
            tab = c[:, :, None, None] * D[:, None]
        elif name == "sym":
            c = np.stack(
                [
                    d[:, 0] * k[:, 0],
                    0.5 * (d[:, 0] * k[:, 1] + d[:, 1] * k[:, 0]),
                    d[:, 1] * k[:, 1],
                ],
                axis=1,
            )
            tab = c[:, :, None, None] * D[:, None]
        elif name == "gradE":
            e = np.stack(
                [
                    d[:, 0] * k[:, 0],
                    0.5 * (d[:, 0] * k[:, 1] + d[:, 1] * k[:, 0]),
                    d[:, 1] * k[:, 1],
                ],
                axis=1,
            )
            c = np.concatenate([e * k[:, 0:1], e * k[:, 1:2]], axis=1)
            tab = -c[:, :, None, None] * T[:, None]
        elif name == "hess":
            quad = np.stack([k[:, 0] ** 2, k[:, 0] * k[:, 1], k[:, 1] ** 2], axis=1)
            c = np.concatenate([d[:, 0:1] * quad, d[:, 1:2] * quad], axis=1)
            tab = -c[:, :, None, None] * T[:, None]
        else:
            raise KeyError(name)
        tab = np.ascontiguousarray(tab.reshape(self.dim, -1))
        self._tab[name] = tab
        return tab

    def synth(self, name: str, coeffs: np.ndarray) -> np.ndarray:
        """Sum of coeffs[i] * table_i, shape (C, M, M)."""
        tab = self._table(name)
        out = coeffs @ tab
        return out.reshape(-1, self.M, self.M)

    def project(self, name: str, field: np.ndarray, comp_weights=None) -> np.ndarray:
        """Quadrature inner products of a (C, M, M) field with every mode."""
        if comp_weights is not None:
            field = field * np.asarray(comp_weights)[:, None, None]
        return self.cell_weight * (self._table(name) @ field.reshape(-1))


@lru_cache(maxsize=8)
def get_tables(n: int, M: int) -> BasisTables:
    return BasisTables(n, M)


_SYM_W = np.array([1.0, 2.0, 1.0])
_GRADE_W = np.array([1.0, 2.0, 1.0, 1.0, 2.0, 1.0])
_HESS_W = np.array([1.0, 2.0, 1.0, 1.0, 2.0, 1.0])


def _min_points_roundtrip(n: int) -> int:
    return 2 * n + 2


def synthesize(state: SpectralState, grid: GridSpec) -> PhysicalField:
    """Evaluate the represented velocity field on the grid."""
    grid.require(state.n, _min_points_roundtrip(state.n), "synthesis")
    tab = get_tables(state.n, grid.M)
    u = tab.synth("vel", state.coeffs)
    return PhysicalField(grid, np.moveaxis(u, 0, -1).copy())


def analyze(field: PhysicalField, n: int) -> SpectralState:
    """Project a grid field onto the basis: a_k = <field, e_k> by quadrature.

    Composing with the basis inner products realizes the divergence-free
    (Leray) projection onto |k| <= n; gradients and means are annihilated.
    """
    grid = field.grid
    grid.require(n, _min_points_roundtrip(n), "analysis")
    tab = get_tables(n, grid.M)
    vals = np.moveaxis(field.values, -1, 0)
    return SpectralState(n, tab.project("vel", np.ascontiguousarray(vals)))


def sym_gradient(state: SpectralState, grid: GridSpec) -> SymTensorField:
    """Symmetric part of the velocity gradient, differentiated spectrally."""
    grid.require(state.n, _min_points_roundtrip(state.n), "symmetric gradient")
    tab = get_tables(state.n, grid.M)
    E = tab.synth("sym", state.coeffs)
    return SymTensorField(grid, np.moveaxis(E, 0, -1).copy())


def divergence_max(state: SpectralState, grid: GridSpec) -> float:
    """Max pointwise |div u| on the grid (identically 0 up to round-off)."""
    tab = get_tables(state.n, grid.M)
    g = tab.synth("grad", state.coeffs)
    return float(np.max(np.abs(g[0] + g[3])))


def sobolev_norm(state: SpectralState, grid: GridSpec, order: int, p: float) -> float:
    """L^p quadrature norm of the field (order 0) or its full gradient (order 1).

    Order 1 with p = 2 is the V-norm; all fields are mean-zero so the
    gradient seminorm is a norm.
    """
    if p < 1:
        raise DomainError(f"exponent p must be >= 1, got {p}")
    if order not in (0, 1):
        raise ConfigurationError(f"unsupported derivative order {order}; only 0 and 1")
    grid.require(state.n, _min_points_roundtrip(state.n), "norm quadrature")
    tab = get_tables(state.n, grid.M)
    f = tab.synth("vel" if order == 0 else "grad", state.coeffs)
    mag_sq = np.einsum("cxy,cxy->xy", f, f)
    return float((grid.cell_weight * np.sum(mag_sq ** (p / 2.0))) ** (1.0 / p))


def second_gradient_norm(state: SpectralState, grid: GridSpec, p: float) -> float:
    """L^p quadrature norm of the full second gradient (H^{2,p} seminorm)."""
    if p < 1:
        raise DomainError(f"exponent p must be >= 1, got {p}")
    grid.require(state.n, _min_points_roundtrip(state.n), "norm quadrature")
    tab = get_tables(state.n, grid.M)
    h = tab.synth("hess", state.coeffs)
    mag_sq = np.einsum("c,cxy->xy", _HESS_W, h * h)
    return float((grid.cell_weight * np.sum(mag_sq ** (p / 2.0))) ** (1.0 / p))


def dissipation_integrand(state: SpectralState, grid: GridSpec, p: float):
    """Pointwise (1 + |Eu|^2)^{(p-2)/2} |grad Eu|^2 on the grid."""
    tab = get_tables(state.n, grid.M)
    E = tab.synth("sym", state.coeffs)
    gE = tab.synth("gradE", state.coeffs)
    e_sq = np.einsum("c,cxy->xy", _SYM_W, E * E)
    ge_sq = np.einsum("c,cxy->xy", _GRADE_W, gE * gE)
    return (1.0 + e_sq) ** (0.5 * (p - 2.0)) * ge_sq


def dissipation_Ip(state: SpectralState, grid: GridSpec, p: float) -> float:
    """The dissipation functional: integral of the weighted |grad Eu|^2.

    Intended for 1 < p < 2; larger p is accepted for diagnostic runs.
    """
    if p <= 1:
        raise DomainError(f"p must exceed 1, got {p}")
    grid.require(state.n, 3 * state.n + 1, "dissipation quadrature")
    return float(grid.cell_weight * np.sum(dissipation_integrand(state, grid, p)))
