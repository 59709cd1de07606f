"""Finitely based test functions with exact first and second derivatives.

A cylinder function depends on finitely many basis coordinates
x_i = <x, e_{k_i}>.  Its body is a closed expression over those coordinates
built from constants, coordinates, +, -, *, tanh and the Gaussian bump
exp(-(.)^2).  Derivatives are propagated exactly through the tree, so no
finite differencing enters the operator evaluation.

Boundedness (the C_b^2 requirement: function and both derivative arrays
bounded on all of coordinate space) is decided syntactically: an expression
is bounded iff every coordinate occurrence sits inside at least one tanh or
Gaussian-bump wrapper.  Both wrappers decay fast enough that the polynomial
factors produced by differentiation stay dominated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .spectral import WaveIndex


class Expr:
    """Expression-tree node over coordinate slots 0..n_args-1."""

    def value_grad_hess(self, x: np.ndarray):
        """Return (value, gradient, hessian) at the coordinate vector x."""
        raise NotImplementedError

    @property
    def bounded(self) -> bool:
        raise NotImplementedError

    def max_slot(self) -> int:
        raise NotImplementedError

    def label(self) -> str:
        raise NotImplementedError

    def __add__(self, other):
        return Add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Sub(self, _lift(other))

    def __rsub__(self, other):
        return Sub(_lift(other), self)

    def __mul__(self, other):
        return Mul(self, _lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Mul(Const(-1.0), self)


def _lift(v) -> "Expr":
    if isinstance(v, Expr):
        return v
    return Const(float(v))


@dataclass(frozen=True)
class Const(Expr):
    c: float

    def value_grad_hess(self, x):
        n = len(x)
        return self.c, np.zeros(n), np.zeros((n, n))

    @property
    def bounded(self):
        return True

    def max_slot(self):
        return -1

    def label(self):
        return repr(self.c)


@dataclass(frozen=True)
class Coord(Expr):
    slot: int

    def value_grad_hess(self, x):
        n = len(x)
        g = np.zeros(n)
        g[self.slot] = 1.0
        return float(x[self.slot]), g, np.zeros((n, n))

    @property
    def bounded(self):
        return False

    def max_slot(self):
        return self.slot

    def label(self):
        return f"x{self.slot}"


@dataclass(frozen=True)
class Add(Expr):
    a: Expr
    b: Expr

    def value_grad_hess(self, x):
        va, ga, ha = self.a.value_grad_hess(x)
        vb, gb, hb = self.b.value_grad_hess(x)
        return va + vb, ga + gb, ha + hb

    @property
    def bounded(self):
        return self.a.bounded and self.b.bounded

    def max_slot(self):
        return max(self.a.max_slot(), self.b.max_slot())

    def label(self):
        return f"({self.a.label()} + {self.b.label()})"


@dataclass(frozen=True)
class Sub(Expr):
    a: Expr
    b: Expr

    def value_grad_hess(self, x):
        va, ga, ha = self.a.value_grad_hess(x)
        vb, gb, hb = self.b.value_grad_hess(x)
        return va - vb, ga - gb, ha - hb

    @property
    def bounded(self):
        return self.a.bounded and self.b.bounded

    def max_slot(self):
        return max(self.a.max_slot(), self.b.max_slot())

    def label(self):
        return f"({self.a.label()} - {self.b.label()})"


@dataclass(frozen=True)
class Mul(Expr):
    a: Expr
    b: Expr

    def value_grad_hess(self, x):
        va, ga, ha = self.a.value_grad_hess(x)
        vb, gb, hb = self.b.value_grad_hess(x)
        v = va * vb
        g = ga * vb + va * gb
        h = ha * vb + va * hb + np.outer(ga, gb) + np.outer(gb, ga)
        return v, g, h

    @property
    def bounded(self):
        # products of bounded factors stay bounded; an unbounded factor
        # times anything non-constant-zero is treated as unbounded
        return self.a.bounded and self.b.bounded

    def max_slot(self):
        return max(self.a.max_slot(), self.b.max_slot())

    def label(self):
        return f"({self.a.label()} * {self.b.label()})"


@dataclass(frozen=True)
class Tanh(Expr):
    arg: Expr

    def value_grad_hess(self, x):
        v, g, h = self.arg.value_grad_hess(x)
        t = np.tanh(v)
        s = 1.0 - t * t
        return t, s * g, s * h - 2.0 * t * s * np.outer(g, g)

    @property
    def bounded(self):
        # tanh of anything is bounded; its derivatives pick up polynomial
        # factors that the sech^2 decay dominates
        return True

    def max_slot(self):
        return self.arg.max_slot()

    def label(self):
        return f"tanh({self.arg.label()})"


@dataclass(frozen=True)
class GaussBump(Expr):
    """exp(-(arg)^2); bounded with bounded derivatives for any argument."""

    arg: Expr

    def value_grad_hess(self, x):
        v, g, h = self.arg.value_grad_hess(x)
        w = np.exp(-v * v)
        grad = -2.0 * v * w * g
        hess = w * ((4.0 * v * v - 2.0) * np.outer(g, g) - 2.0 * v * h)
        return w, grad, hess

    @property
    def bounded(self):
        return True

    def max_slot(self):
        return self.arg.max_slot()

    def label(self):
        return f"exp(-({self.arg.label()})^2)"


def coord(slot: int) -> Coord:
    return Coord(slot)


def tanh_of(expr) -> Tanh:
    return Tanh(_lift(expr))


def gauss_bump(expr) -> GaussBump:
    return GaussBump(_lift(expr))


class CylinderFunction:
    """A test function phi(x) = body(<x, e_{k_1}>, ..., <x, e_{k_m}>).

    indices lists the wave vectors the function depends on; slot i of the
    body refers to the coordinate along e_{k_i}.  The gradient embeds into
    the state space as D phi = sum_i d_i body . e_{k_i}.
    """

    def __init__(self, indices: list[WaveIndex], body: Expr, name: str | None = None):
        self.indices = [
            k if isinstance(k, WaveIndex) else WaveIndex(*k) for k in indices
        ]
        self.body = body
        if body.max_slot() >= len(self.indices):
            raise ConfigurationError(
                f"body references slot {body.max_slot()} but only "
                f"{len(self.indices)} indices were given"
            )
        self.name = name if name is not None else body.label()

    @property
    def bounded(self) -> bool:
        return self.body.bounded

    def coordinates(self, state) -> np.ndarray:
        """Extract the coordinates this function depends on from a state."""
        return np.array([state.coeff(k) for k in self.indices])

    def value(self, coords: np.ndarray) -> float:
        v, _, _ = self.body.value_grad_hess(np.asarray(coords, dtype=float))
        return v

    def gradient(self, coords: np.ndarray) -> np.ndarray:
        _, g, _ = self.body.value_grad_hess(np.asarray(coords, dtype=float))
        return g

    def hessian(self, coords: np.ndarray) -> np.ndarray:
        _, _, h = self.body.value_grad_hess(np.asarray(coords, dtype=float))
        return h

    def require_bounded(self) -> None:
        if not self.bounded:
            raise DomainError(
                f"cylinder function {self.name!r} is not C_b^2: some coordinate "
                "appears outside every tanh/Gaussian wrapper"
            )

    def __repr__(self):
        ks = ", ".join(f"({k.k1},{k.k2})" for k in self.indices)
        return f"CylinderFunction([{ks}], {self.name})"
