"""Implicit one-step methods and trajectory integration.

All methods solve their implicit step equations by fixed-point iteration
started from the current state, converging when the successive-iterate
max-norm falls below the configured absolute tolerance.  The conservative
step evaluates the reduced field at the midpoint of the extended
coordinates, with every auxiliary value averaged between the endpoint
lifts; eliminating the auxiliary unknowns this way keeps the implicit
system n-dimensional while inheriting the midpoint rule's preservation of
quadratic invariants, hence of every reduced integral.

Higher order comes from composing midpoint sub-steps with the weights of
diagonally implicit symplectic Runge-Kutta schemes or symmetric composition
schemes; the built-in coefficient tables reach orders four, six and eight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .poly import Polynomial
from .skew import ReducedSystem

__all__ = [
    "SolverConfig",
    "StepFailure",
    "FixedPointDiverged",
    "FixedPointStalled",
    "Method",
    "Trajectory",
    "DISRK4",
    "DISRK6",
    "C8",
    "METHOD_NAMES",
    "named_method",
    "midpoint_step",
    "rd_midpoint_step",
    "avf_step",
    "compose_step",
    "integrate",
]


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-point solver settings.

    ``tol`` is the absolute tolerance on the successive-iterate max-norm;
    ``divergence`` the state-norm blowup threshold; ``relaxation`` an
    optional damping factor for the iteration (1.0 = undamped).
    """

    tol: float = 1.11e-15
    max_iter: int = 100
    divergence: float = 1e8
    relaxation: float = 1.0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


DEFAULT_CONFIG = SolverConfig()


class StepFailure(RuntimeError):
    """A one-step solve failed; ``substep`` is set by composition wrappers."""

    status = "solver-failure"

    def __init__(self, message: str):
        super().__init__(message)
        self.substep: int | None = None


class FixedPointDiverged(StepFailure):
    status = "diverged"

    def __init__(self, norm: float, iterations: int):
        super().__init__(
            f"fixed-point iterate diverged (norm {norm:.3e} after {iterations} iterations)"
        )
        self.norm = norm
        self.iterations = iterations


class FixedPointStalled(StepFailure):
    status = "solver-failure"

    def __init__(self, iterations: int, delta: float):
        super().__init__(
            f"fixed-point iteration did not converge in {iterations} iterations "
            f"(last update {delta:.3e})"
        )
        self.iterations = iterations
        self.delta = delta


_EPS = float(np.finfo(float).eps)


def _fixed_point(update: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, cfg: SolverConfig):
    """Iterate ``x <- update(x)`` to the configured tolerance.

    When the requested tolerance is below the round-off granularity of the
    state, iterates can cycle within a few ulps forever; an exact period-two
    cycle, or a stretch of non-improving updates at that granularity, is
    accepted as converged.
    """
    x = np.asarray(x0, dtype=float)
    previous = x
    stalled = 0
    delta = math.inf
    for iteration in range(1, cfg.max_iter + 1):
        xn = update(x)
        if cfg.relaxation != 1.0:
            xn = x + cfg.relaxation * (xn - x)
        norm = float(np.max(np.abs(xn)))
        if not math.isfinite(norm) or norm > cfg.divergence:
            raise FixedPointDiverged(norm, iteration)
        delta = float(np.max(np.abs(xn - x)))
        if delta <= cfg.tol:
            return xn, iteration
        floor = 8.0 * _EPS * max(1.0, norm)
        if delta <= floor:
            if np.array_equal(xn, previous):  # exact period-two round-off cycle
                return xn, iteration
            stalled += 1
            if stalled >= 16:
                return xn, iteration
        else:
            stalled = 0
        previous = x
        x = xn
    raise FixedPointStalled(cfg.max_iter, delta)


def field_evaluator(components: Sequence[Polynomial]) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap polynomial field components as an ndarray-valued callable."""

    def f(x: np.ndarray) -> np.ndarray:
        xs = x.tolist()
        return np.array([p(xs) for p in components])

    return f


# -- one-step methods ------------------------------------------------------------


def _midpoint_solve(f, x, h, cfg):
    x = np.asarray(x, dtype=float)
    if h == 0.0:
        return x.copy(), 1

    def update(xc):
        return x + h * f(0.5 * (x + xc))

    return _fixed_point(update, x, cfg)


def midpoint_step(
    f: Callable[[np.ndarray], np.ndarray],
    x: Sequence[float],
    h: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> np.ndarray:
    """Implicit midpoint step for an arbitrary field on R^n."""
    return _midpoint_solve(f, x, h, cfg)[0]


def _rd_midpoint_solve(system: ReducedSystem, x, h, cfg):
    x = np.asarray(x, dtype=float)
    if h == 0.0:
        return x.copy(), 1
    tower = system.tower
    n = tower.n
    aux0 = tower.lift(x)[n:]

    def update(xc):
        lifted = tower.lift(xc)
        mid = np.empty(tower.dim)
        mid[:n] = 0.5 * (x + xc)
        mid[n:] = 0.5 * (aux0 + lifted[n:])
        return x + h * system.reduced_field(mid)

    return _fixed_point(update, x, cfg)


def rd_midpoint_step(
    system: ReducedSystem,
    x: Sequence[float],
    h: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> np.ndarray:
    """Integral-preserving midpoint step on the original n variables.

    Solves (x' - x)/h = f_reduced(midpoint) where the midpoint averages the
    original coordinates and all auxiliary values of the two endpoints.
    """
    return _rd_midpoint_solve(system, x, h, cfg)[0]


def quadrature_nodes(s: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    nodes, weights = leggauss(s)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _avf_solve(components: Sequence[Polynomial], x, h, cfg):
    x = np.asarray(x, dtype=float)
    if h == 0.0:
        return x.copy(), 1
    degree = max(max((p.degree for p in components), default=0), 0)
    nodes, weights = quadrature_nodes(max(1, (degree + 2) // 2))
    f = field_evaluator(components)

    def update(xc):
        avg = np.zeros_like(x)
        for xi, w in zip(nodes, weights):
            avg += w * f((1.0 - xi) * x + xi * xc)
        return x + h * avg

    return _fixed_point(update, x, cfg)


def avf_step(
    components: Sequence[Polynomial],
    x: Sequence[float],
    h: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> np.ndarray:
    """Chord-averaged vector field step for a polynomial field.

    The average of f along the segment from x to x' is a polynomial of the
    field's degree in the chord parameter, so Gauss-Legendre quadrature with
    ceil((degree+1)/2) nodes evaluates it exactly.
    """
    return _avf_solve(components, x, h, cfg)[0]


def compose_step(
    step: Callable[[np.ndarray, float], np.ndarray],
    coeffs: Sequence[float],
    x: Sequence[float],
    h: float,
) -> np.ndarray:
    """Apply ``step`` with sub-steps ``coeffs[i] * h`` in sequence.

    Coefficients must sum to 1.  A failing sub-step aborts the whole step;
    the raised error carries the sub-step index.
    """
    if abs(sum(coeffs) - 1.0) > 1e-12:
        raise ValueError(f"composition coefficients sum to {sum(coeffs)}, expected 1")
    y = np.asarray(x, dtype=float)
    for i, b in enumerate(coeffs):
        try:
            y = step(y, b * h)
        except StepFailure as err:
            err.substep = i
            raise
    return y


# -- built-in composition coefficient tables --------------------------------------

# three-stage, order four
_DISRK4_B1 = (2.0 ** (1.0 / 3.0) + 2.0 ** (-1.0 / 3.0) + 2.0) / 3.0
DISRK4: tuple[float, ...] = (_DISRK4_B1, 1.0 - 2.0 * _DISRK4_B1, _DISRK4_B1)

# eleven-stage, order six
_DISRK6_HALF = (
    0.6152247129651358,
    -0.9769283017304923,
    0.7756222228585488,
    1.1870793818191547,
    -1.1292359636503542,
)
DISRK6: tuple[float, ...] = _DISRK6_HALF + (0.05647589547601459,) + _DISRK6_HALF[::-1]

# fifteen-stage, order eight
_C8_HALF = (
    0.7416703643506129,
    -0.4091008258000315,
    0.1907547102962383,
    -0.5738624711160822,
    0.2990641813036559,
    0.3346249182452981,
    0.3152930923967665,
)
C8: tuple[float, ...] = _C8_HALF + (-0.7968879393529163,) + _C8_HALF[::-1]


@dataclass(frozen=True)
class Method:
    """A one-step method: a base step plus composition coefficients."""

    name: str
    base: str  # "mp2" | "rd-mp2" | "avf"
    coeffs: tuple[float, ...] = (1.0,)
    order: int = 2

    def __post_init__(self):
        if self.base not in ("mp2", "rd-mp2", "avf"):
            raise ValueError(f"unknown base method {self.base!r}")
        if abs(sum(self.coeffs) - 1.0) > 1e-12:
            raise ValueError("composition coefficients must sum to 1")

    @property
    def is_palindromic(self) -> bool:
        return self.coeffs == self.coeffs[::-1]

    @property
    def conservative(self) -> bool:
        return self.base == "rd-mp2"


_METHODS = {
    "mp2": Method("mp2", "mp2"),
    "rd-mp2": Method("rd-mp2", "rd-mp2"),
    "disrk4": Method("disrk4", "mp2", DISRK4, 4),
    "rd-disrk4": Method("rd-disrk4", "rd-mp2", DISRK4, 4),
    "disrk6": Method("disrk6", "mp2", DISRK6, 6),
    "rd-disrk6": Method("rd-disrk6", "rd-mp2", DISRK6, 6),
    "c8": Method("c8", "mp2", C8, 8),
    "rd-c8": Method("rd-c8", "rd-mp2", C8, 8),
    "avf": Method("avf", "avf"),
}

METHOD_NAMES: tuple[str, ...] = tuple(_METHODS)


def named_method(name: str) -> Method:
    try:
        return _METHODS[name]
    except KeyError:
        raise ValueError(
            f"unknown method {name!r}; available: {', '.join(METHOD_NAMES)}"
        ) from None


def _base_solver(method: Method, system: ReducedSystem, cfg: SolverConfig):
    if method.base == "rd-mp2":
        return lambda x, h: _rd_midpoint_solve(system, x, h, cfg)
    if method.base == "avf":
        return lambda x, h: _avf_solve(system.original_field, x, h, cfg)
    f = field_evaluator(system.original_field)
    return lambda x, h: _midpoint_solve(f, x, h, cfg)


def stepper(
    method: Method, system: ReducedSystem, cfg: SolverConfig = DEFAULT_CONFIG
) -> Callable[[np.ndarray, float], np.ndarray]:
    """One-step map of ``method`` on ``system`` (composition included)."""
    solve = _base_solver(method, system, cfg)
    if method.coeffs == (1.0,):
        return lambda x, h: solve(x, h)[0]
    return lambda x, h: compose_step(lambda y, hb: solve(y, hb)[0], method.coeffs, x, h)


@dataclass
class Trajectory:
    """Time series of states with per-step integral errors and diagnostics.

    ``integral_errors[k, i]`` is H_i(x_k) - H_i(x_0); ``iterations[k]`` the
    total fixed-point iterations spent on step k (0 for the initial state).
    ``status`` is ``completed``, ``diverged`` or ``solver-failure``; on
    failure the arrays are truncated after the last successful state and
    ``failed_step`` records the 1-based step that failed.
    """

    times: np.ndarray
    states: np.ndarray
    integral_errors: np.ndarray
    iterations: np.ndarray
    status: str
    failed_step: int | None = None

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    @property
    def max_drift(self) -> float:
        """Largest absolute integral error over the whole trajectory."""
        if self.integral_errors.size == 0:
            return 0.0
        return float(np.max(np.abs(self.integral_errors)))


def integrate(
    system: ReducedSystem,
    method: Method | str,
    x0: Sequence[float],
    h: float,
    steps: int,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> Trajectory:
    """Integrate ``steps`` uniform steps of size ``h`` from ``x0``.

    Never raises on step failure: the trajectory is truncated and its status
    records what happened.  A state whose max-norm exceeds the divergence
    bound also terminates the run.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if isinstance(method, str):
        method = named_method(method)
    solve = _base_solver(method, system, cfg)
    integrals = [r.original for r in system.integrals]
    x = np.asarray(x0, dtype=float)
    reference = np.array([H(x.tolist()) for H in integrals])

    states = [x.copy()]
    errors = [np.zeros(len(integrals))]
    iteration_counts = [0]
    status = "completed"
    failed_step = None
    for k in range(1, steps + 1):
        total_iterations = 0
        try:
            if method.coeffs == (1.0,):
                x, total_iterations = solve(x, h)
            else:
                y = x
                for i, b in enumerate(method.coeffs):
                    try:
                        y, used = solve(y, b * h)
                    except StepFailure as err:
                        err.substep = i
                        raise
                    total_iterations += used
                x = y
        except StepFailure as err:
            status = err.status
            failed_step = k
            break
        states.append(x.copy())
        errors.append(np.array([H(x.tolist()) for H in integrals]) - reference)
        iteration_counts.append(total_iterations)
        if float(np.max(np.abs(x))) > cfg.divergence:
            status = "diverged"
            failed_step = k
            break
    count = len(states)
    return Trajectory(
        times=h * np.arange(count),
        states=np.vstack(states),
        integral_errors=np.vstack(errors),
        iterations=np.array(iteration_counts),
        status=status,
        failed_step=failed_step,
    )
