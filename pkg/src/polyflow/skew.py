"""Skew structures and assembly of the degree-reduced vector field.

An ODE with first integrals can be written by contracting an antisymmetric
structure against the integral gradients.  Replacing those gradients by the
chained gradients of the degree-reduced integrals yields a vector field on
the extended space whose flow conserves every reduced integral exactly; at
lifted points it agrees with the original field.

Supported structures:

* :class:`CanonicalSymplectic` -- the constant matrix ``[[0, -I], [I, 0]]``
  for a single integral in even dimension.
* :class:`SkewPolynomialMatrix` -- an antisymmetric matrix of polynomials in
  the original variables, single integral.
* :class:`ExplicitReducedField` -- the reduced field given directly as
  polynomials in the extended variables.
* :class:`WedgeStructure` -- for any number of integrals, the field is
  rebuilt pointwise from the original field and the integral gradients via
  an antisymmetric determinant construction (:func:`contract_default`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .poly import Polynomial
from .tower import ReducedIntegral, Tower

__all__ = [
    "GRAM_RTOL",
    "StructuralSingularityError",
    "CanonicalSymplectic",
    "SkewPolynomialMatrix",
    "ExplicitReducedField",
    "WedgeStructure",
    "ReducedSystem",
    "contract_default",
    "extended_field",
    "verify_system",
    "VerificationReport",
]

# Relative Gram-determinant threshold below which the wedge construction
# refuses to evaluate (the integral gradients are numerically dependent).
GRAM_RTOL = 1e-10


class StructuralSingularityError(RuntimeError):
    """The integral gradients are too close to linearly dependent."""

    def __init__(self, gram_det: float, scale: float):
        super().__init__(
            f"skew structure singular: Gram determinant {gram_det:.3e} "
            f"below threshold {GRAM_RTOL:.1e} * {scale:.3e}"
        )
        self.gram_det = gram_det
        self.scale = scale


def contract_default(
    f_val: Sequence[float],
    grads: Sequence[Sequence[float]],
    args: Sequence[Sequence[float]],
    gram_rtol: float = GRAM_RTOL,
) -> np.ndarray:
    """Contract the antisymmetric wedge of ``f_val`` and ``grads`` with ``args``.

    Component ``i`` of the result is the determinant of the (m+1)x(m+1)
    matrix whose first column holds component ``i`` of ``(f, g_1, ..., g_m)``
    and whose remaining columns hold the inner products of those vectors with
    each argument, divided by the Gram determinant of the gradients.  With
    ``args == grads`` and ``f_val`` orthogonal to every gradient this returns
    ``f_val`` exactly; contracting against any ``grads`` member yields a
    vector orthogonal to it by determinant antisymmetry.
    """
    f = np.asarray(f_val, dtype=float)
    G = np.asarray(grads, dtype=float)
    A = np.asarray(args, dtype=float)
    m, n = G.shape
    if f.shape != (n,) or A.shape != (m, n):
        raise ValueError("inconsistent shapes for wedge contraction")
    gram = G @ G.T
    gram_det = float(np.linalg.det(gram))
    scale = float(np.prod(np.einsum("ij,ij->i", G, G)))
    if abs(gram_det) < gram_rtol * scale or scale == 0.0:
        raise StructuralSingularityError(gram_det, scale)
    vectors = np.vstack([f[None, :], G])  # rows: f, g_1..g_m
    products = vectors @ A.T  # (m+1, m)
    matrices = np.empty((n, m + 1, m + 1))
    matrices[:, :, 0] = vectors.T
    matrices[:, :, 1:] = products[None, :, :]
    return np.linalg.det(matrices) / gram_det


class CanonicalSymplectic:
    """Constant structure ``[[0, -I], [I, 0]]`` (single integral, even n)."""

    def __init__(self, n: int):
        if n % 2:
            raise ValueError("canonical symplectic structure needs even dimension")
        self.n = n
        half = n // 2
        J = np.zeros((n, n))
        J[:half, half:] = -np.eye(half)
        J[half:, :half] = np.eye(half)
        self.matrix = J


class SkewPolynomialMatrix:
    """Antisymmetric matrix of polynomials in the original variables."""

    def __init__(self, entries: Sequence[Sequence[Polynomial]], rel_tol: float = 1e-12):
        n = len(entries)
        for row in entries:
            if len(row) != n:
                raise ValueError("structure matrix must be square")
        for i in range(n):
            for j in range(n):
                if not entries[i][j].allclose(-entries[j][i], rel_tol):
                    raise ValueError(f"structure matrix not antisymmetric at ({i}, {j})")
        self.n = n
        self.entries = [list(row) for row in entries]

    def evaluate(self, x: Sequence[float]) -> np.ndarray:
        return np.array([[e(x) for e in row] for row in self.entries])


class ExplicitReducedField:
    """Reduced vector field supplied directly in the extended variables."""

    def __init__(self, components: Sequence[Polynomial]):
        if not components:
            raise ValueError("explicit field needs at least one component")
        dims = {p.nvars for p in components}
        if len(dims) != 1:
            raise ValueError("explicit field components live in different spaces")
        self.components = list(components)
        self.dim = dims.pop()


class WedgeStructure:
    """Marker selecting the determinant-based construction for any m < n."""

    def __init__(self, gram_rtol: float = GRAM_RTOL):
        self.gram_rtol = gram_rtol


Structure = CanonicalSymplectic | SkewPolynomialMatrix | ExplicitReducedField | WedgeStructure


class ReducedSystem:
    """An ODE packaged as skew structure plus degree-reduced integrals.

    ``original_field`` holds the n field components as polynomials in the
    original variables; ``integrals`` the reduced integrals sharing one
    tower.  Immutable after construction; evaluation is pure.
    """

    def __init__(
        self,
        original_field: Sequence[Polynomial],
        integrals: Sequence[ReducedIntegral],
        structure: Structure,
        tower: Tower,
    ):
        n = tower.n
        if len(original_field) != n:
            raise ValueError(f"field has {len(original_field)} components, expected {n}")
        for p in original_field:
            if p.nvars != n:
                raise ValueError("field components must live in the original space")
        if not integrals:
            raise ValueError("at least one integral is required")
        if len(integrals) >= n:
            raise ValueError(
                f"{len(integrals)} integrals in dimension {n}: need m < n"
            )
        for r in integrals:
            if r.tower is not tower:
                raise ValueError("all integrals must share the system tower")
        if isinstance(structure, (CanonicalSymplectic, SkewPolynomialMatrix)):
            if structure.n != n:
                raise ValueError("structure dimension does not match the system")
            if len(integrals) != 1:
                raise ValueError("matrix structures drive exactly one integral")
        elif isinstance(structure, ExplicitReducedField):
            if structure.dim != tower.dim:
                raise ValueError(
                    f"explicit field lives in dimension {structure.dim}, "
                    f"extended space has {tower.dim}"
                )
            if len(structure.components) != n:
                raise ValueError("explicit field must have n components")
        self.tower = tower
        self.original_field = list(original_field)
        self.integrals = list(integrals)
        self.structure = structure
        # gradients of the original integrals, used by the wedge construction
        self._original_grads = [
            [r.original.partial(v) for v in range(n)] for r in integrals
        ]

    @property
    def n(self) -> int:
        return self.tower.n

    @property
    def m(self) -> int:
        return len(self.integrals)

    @property
    def dim(self) -> int:
        return self.tower.dim

    def field(self, x: Sequence[float]) -> np.ndarray:
        """Original vector field at an n-dimensional point."""
        xs = x.tolist() if isinstance(x, np.ndarray) else list(x)
        return np.array([p(xs) for p in self.original_field])

    def original_gradients(self, x: Sequence[float]) -> list[np.ndarray]:
        xs = x.tolist() if isinstance(x, np.ndarray) else list(x)
        return [np.array([g(xs) for g in row]) for row in self._original_grads]

    def total_gradients(self, z: Sequence[float]) -> list[np.ndarray]:
        return [r.total_gradient(z) for r in self.integrals]

    def reduced_field(self, z: Sequence[float]) -> np.ndarray:
        """Degree-reduced vector field at an extended point."""
        structure = self.structure
        if isinstance(structure, ExplicitReducedField):
            zs = z.tolist() if isinstance(z, np.ndarray) else list(z)
            return np.array([p(zs) for p in structure.components])
        if isinstance(structure, CanonicalSymplectic):
            return structure.matrix @ self.integrals[0].total_gradient(z)
        x = z[: self.n]
        if isinstance(structure, SkewPolynomialMatrix):
            return structure.evaluate(
                x.tolist() if isinstance(x, np.ndarray) else list(x)
            ) @ self.integrals[0].total_gradient(z)
        return contract_default(
            self.field(x),
            self.original_gradients(x),
            self.total_gradients(z),
            structure.gram_rtol,
        )


def extended_field(system: ReducedSystem) -> Callable[[Sequence[float]], np.ndarray]:
    """Vector field of the fully extended ODE: the reduced field for the
    original coordinates together with the product-rule equations for every
    auxiliary variable."""
    tower = system.tower
    n = tower.n

    def field(z: Sequence[float]) -> np.ndarray:
        dz = np.empty(tower.dim)
        dz[:n] = system.reduced_field(z)
        for a in tower.aux:
            dz[a.index] = dz[a.left] * z[a.right] + z[a.left] * dz[a.right]
        return dz

    return field


@dataclass
class CheckResult:
    name: str
    max_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


@dataclass
class VerificationReport:
    """Max normalized residuals of the structural identities over a sample."""

    samples: int
    seed: int
    box: tuple[float, float]
    checks: list[CheckResult]
    structure_failures: int = 0

    @property
    def passed(self) -> bool:
        return self.structure_failures == 0 and all(c.passed for c in self.checks)

    def __str__(self) -> str:
        lines = [
            f"verification over {self.samples} samples in "
            f"[{self.box[0]}, {self.box[1]}]^n (seed {self.seed}):"
        ]
        for c in self.checks:
            mark = "ok  " if c.passed else "FAIL"
            lines.append(f"  {mark} {c.name}: max residual {c.max_residual:.3e} (tol {c.tol:.1e})")
        if self.structure_failures:
            lines.append(f"  FAIL structure singular at {self.structure_failures} samples")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def verify_system(
    system: ReducedSystem,
    samples: int = 200,
    seed: int = 0,
    box: tuple[float, float] = (-2.0, 2.0),
    tol: float = 1e-10,
) -> VerificationReport:
    """Check the defining identities of a system at random points.

    At each sample x: (a) the field is orthogonal to every original-integral
    gradient, (b) the reduced field at the lifted point matches the original
    field, and (c) a polynomial structure matrix is antisymmetric.  Residuals
    are normalized by the magnitudes entering each identity; failures are
    reported, never raised.
    """
    rng = np.random.default_rng(seed)
    n = system.n
    orthogonality = 0.0
    consistency = 0.0
    antisymmetry = 0.0
    singular = 0
    is_matrix = isinstance(system.structure, SkewPolynomialMatrix)
    for _ in range(samples):
        x = rng.uniform(box[0], box[1], size=n)
        fx = system.field(x)
        fnorm = float(np.max(np.abs(fx)))
        for grad in system.original_gradients(x):
            gnorm = float(np.max(np.abs(grad)))
            residual = abs(float(fx @ grad)) / (1.0 + n * fnorm * gnorm)
            orthogonality = max(orthogonality, residual)
        try:
            rf = system.reduced_field(system.tower.lift(x))
        except StructuralSingularityError:
            singular += 1
            continue
        consistency = max(
            consistency, float(np.max(np.abs(rf - fx))) / (1.0 + fnorm)
        )
        if is_matrix:
            S = system.structure.evaluate(x.tolist())
            scale = 1.0 + float(np.max(np.abs(S)))
            antisymmetry = max(antisymmetry, float(np.max(np.abs(S + S.T))) / scale)
    checks = [
        CheckResult("field orthogonal to integral gradients", orthogonality, tol),
        CheckResult("reduced field matches field at lifted points", consistency, tol),
    ]
    if is_matrix:
        checks.append(CheckResult("structure matrix antisymmetry", antisymmetry, tol))
    return VerificationReport(samples, seed, box, checks, singular)
