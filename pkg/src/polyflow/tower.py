"""Auxiliary product variables and degree reduction of polynomial integrals.

A :class:`Tower` extends an ``n``-dimensional variable space with auxiliary
variables, each defined as the product of two earlier variables (original or
auxiliary).  Any monomial can then be rewritten as a product of at most two
extended variables, which turns every polynomial into one of degree <= 2 in
the extended space.  Evaluating an auxiliary variable on its defining
products recovers the original polynomial (the consistency condition), and
every auxiliary variable contributes a built-in quadratic invariant
``v - left*right`` to the extended dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .poly import Monomial, Polynomial, monomial, monomial_degree

__all__ = [
    "AuxVar",
    "Tower",
    "ReducedIntegral",
    "ConsistencyReport",
    "SplitWeights",
    "reduce_integral",
    "check_consistency",
]

# Optional overrides for how individual monomials are split: each monomial maps
# to weighted alternatives (weight, (half_a, half_b)); weights must sum to 1.
SplitWeights = Mapping[Monomial, Sequence[tuple[float, tuple[Monomial, Monomial]]]]


@dataclass(frozen=True)
class AuxVar:
    """Auxiliary variable ``index`` defined as the product ``left * right``."""

    index: int
    left: int
    right: int
    degree: int  # total degree of its expansion in the original variables


class Tower:
    """Registry of auxiliary product variables over an n-dimensional space.

    Towers are append-only while problems are being built and must not be
    grown once integration starts; all evaluation methods are pure.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("original dimension must be >= 1")
        self.n = n
        self.aux: list[AuxVar] = []
        self._pairs: dict[tuple[int, int], int] = {}
        self._lift_monomials: dict[int, Monomial] = {}

    @property
    def dim(self) -> int:
        """Extended dimension (original + auxiliary variables)."""
        return self.n + len(self.aux)

    def degree_of(self, var: int) -> int:
        """Degree in original variables of an extended variable's expansion."""
        if var < self.n:
            return 1
        return self.aux[var - self.n].degree

    def product(self, a: int, b: int) -> int:
        """Return the variable representing ``a*b``, creating it if needed."""
        if not (0 <= a < self.dim and 0 <= b < self.dim):
            raise ValueError("product factors must be existing variables")
        key = (a, b) if a <= b else (b, a)
        existing = self._pairs.get(key)
        if existing is not None:
            return existing
        index = self.dim
        self.aux.append(AuxVar(index, key[0], key[1], self.degree_of(a) + self.degree_of(b)))
        self._pairs[key] = index
        return index

    def lift(self, x: Sequence[float]) -> np.ndarray:
        """Extend a state with the values of all auxiliary variables."""
        if len(x) != self.n:
            raise ValueError(f"state has length {len(x)}, expected {self.n}")
        values = np.empty(self.dim)
        values[: self.n] = x
        for a in self.aux:
            values[a.index] = values[a.left] * values[a.right]
        return values

    def lift_monomial(self, var: int) -> Monomial:
        """Expansion of an extended variable as a monomial in x."""
        if var < self.n:
            return ((var, 1),)
        cached = self._lift_monomials.get(var)
        if cached is None:
            a = self.aux[var - self.n]
            exps: dict[int, int] = {}
            for v, e in self.lift_monomial(a.left) + self.lift_monomial(a.right):
                exps[v] = exps.get(v, 0) + e
            cached = monomial(exps)
            self._lift_monomials[var] = cached
        return cached

    def lift_polynomial(self, var: int) -> Polynomial:
        """Expansion of an extended variable as a polynomial in the x-space."""
        return Polynomial(self.n, {self.lift_monomial(var): 1.0})

    def quadric_integrals(self) -> list[Polynomial]:
        """The invariant ``v - left*right`` of each auxiliary variable."""
        out = []
        for a in self.aux:
            product = monomial([(a.left, 1), (a.right, 1)])
            out.append(Polynomial(self.dim, {((a.index, 1),): 1.0, product: -1.0}))
        return out

    def __str__(self) -> str:
        lines = [f"Tower over {self.n} variables, {len(self.aux)} auxiliary:"]
        for a in self.aux:
            lines.append(
                f"  x{a.index + 1} = x{a.left + 1}*x{a.right + 1} (degree {a.degree})"
            )
        return "\n".join(lines)

    __repr__ = __str__


def _sweep_flatten(mono: Monomial) -> list[int]:
    """Flatten a monomial into single-variable factors by repeated ascending
    sweeps over its distinct variables (one factor per variable per sweep)."""
    remaining = dict(mono)
    flat: list[int] = []
    while remaining:
        for var in sorted(remaining):
            flat.append(var)
            remaining[var] -= 1
            if not remaining[var]:
                del remaining[var]
    return flat


def _variable_for_factors(tower: Tower, factors: list[int]) -> int:
    if len(factors) == 1:
        return factors[0]
    cut = (len(factors) + 1) // 2
    left = _variable_for_factors(tower, factors[:cut])
    right = _variable_for_factors(tower, factors[cut:])
    return tower.product(left, right)


def _validate_overrides(overrides: SplitWeights) -> None:
    for mono, alternatives in overrides.items():
        if monomial_degree(mono) < 3:
            raise ValueError(
                f"split overrides apply to monomials of degree >= 3, got {mono}"
            )
        total = 0.0
        for weight, (half_a, half_b) in alternatives:
            merged: dict[int, int] = {}
            for v, e in half_a + half_b:
                merged[v] = merged.get(v, 0) + e
            if monomial(merged) != mono or not half_a or not half_b:
                raise ValueError(f"split {half_a} * {half_b} does not factor {mono}")
            total += weight
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"split weights for {mono} sum to {total}, expected 1")


def reduce_integral(
    original: Polynomial,
    tower: Tower,
    overrides: SplitWeights | None = None,
) -> "ReducedIntegral":
    """Rewrite ``original`` as a degree <= 2 polynomial in extended variables.

    Monomials of degree <= 2 pass through unchanged.  A monomial of degree d
    >= 3 becomes a product of two extended variables whose expansion degrees
    sum to d: its factors are flattened by ascending sweeps, cut into a
    ceil(d/2) prefix and floor(d/2) suffix, and each part is reduced
    recursively, deduplicating against the tower.  ``overrides`` replaces the
    representation of selected monomials by a weighted sum of alternative
    two-way splits (weights summing to 1), each half reduced canonically.
    """
    if original.nvars != tower.n:
        raise ValueError(
            f"integral lives in dimension {original.nvars}, tower expects {tower.n}"
        )
    if overrides:
        _validate_overrides(overrides)
    terms: dict[Monomial, float] = {}

    def _accumulate(mono: Monomial, coeff: float) -> None:
        c = terms.get(mono, 0.0) + coeff
        if c == 0.0:
            terms.pop(mono, None)
        else:
            terms[mono] = c

    for coeff, mono in original.ordered_terms():
        if monomial_degree(mono) <= 2:
            _accumulate(mono, coeff)
            continue
        alternatives = overrides.get(mono) if overrides else None
        if alternatives is None:
            flat = _sweep_flatten(mono)
            cut = (len(flat) + 1) // 2
            pairs = [(1.0, flat[:cut], flat[cut:])]
        else:
            pairs = [
                (weight, _sweep_flatten(half_a), _sweep_flatten(half_b))
                for weight, (half_a, half_b) in alternatives
            ]
        for weight, factors_a, factors_b in pairs:
            if weight == 0.0:
                continue
            va = _variable_for_factors(tower, factors_a)
            vb = _variable_for_factors(tower, factors_b)
            _accumulate(monomial({va: 1, vb: 1} if va != vb else {va: 2}), coeff * weight)
    reduced = Polynomial(tower.dim, terms)
    return ReducedIntegral(original, reduced, tower)


@dataclass
class ReducedIntegral:
    """A polynomial integral together with its degree-reduced form.

    ``reduced`` has total degree <= 2 in the extended space and recovers
    ``original`` when every auxiliary variable is expanded into its defining
    product of original variables.
    """

    original: Polynomial
    reduced: Polynomial
    tower: Tower
    _partials: tuple[int, list[Polynomial]] | None = field(
        default=None, repr=False, compare=False
    )

    def partials(self) -> list[Polynomial]:
        """Partial derivatives of the reduced form, one per extended variable,
        treating extended variables as independent.  Recomputed if the tower
        has grown since the last call."""
        dim = self.tower.dim
        if self._partials is None or self._partials[0] != dim:
            widened = self.reduced.widen(dim)
            self._partials = (dim, [widened.partial(v) for v in range(dim)])
        return self._partials[1]

    def total_gradient(self, z: Sequence[float]) -> np.ndarray:
        """Gradient of the reduced form with respect to the original variables,
        chaining through the auxiliary definitions by the product rule, with
        every extended coordinate read from ``z``."""
        tower = self.tower
        if len(z) != tower.dim:
            raise ValueError(f"point has length {len(z)}, expected {tower.dim}")
        zs = z.tolist() if isinstance(z, np.ndarray) else list(z)
        adjoint = [p(zs) for p in self.partials()]
        for a in reversed(tower.aux):
            w = adjoint[a.index]
            if w != 0.0:
                adjoint[a.left] += w * zs[a.right]
                adjoint[a.right] += w * zs[a.left]
        return np.array(adjoint[: tower.n])


@dataclass
class ConsistencyReport:
    """Outcome of expanding a reduced integral back into original variables."""

    passed: bool
    residual: float
    mismatches: list[tuple[Monomial, float, float]]

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"consistency {status}: residual {self.residual:.3e}, {len(self.mismatches)} mismatched terms"


def check_consistency(integral: ReducedIntegral, tol: float = 1e-12) -> ConsistencyReport:
    """Expand every auxiliary variable in ``reduced`` down to the original
    variables and compare coefficients against ``original``.  The residual is
    the largest absolute coefficient deviation."""
    tower = integral.tower
    bindings = {a.index: tower.lift_polynomial(a.index) for a in tower.aux}
    expanded = integral.reduced.substitute(bindings, nvars=tower.n)
    diff = expanded - integral.original
    residual = diff.max_abs_coeff()
    mismatches = []
    if residual > tol:
        expected = integral.original.terms
        actual = expanded.terms
        for mono, c in sorted(diff.terms.items()):
            if abs(c) > tol:
                mismatches.append((mono, expected.get(mono, 0.0), actual.get(mono, 0.0)))
    return ConsistencyReport(residual <= tol, residual, mismatches)
