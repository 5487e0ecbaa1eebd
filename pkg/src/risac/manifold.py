r"""Riemannian conjugate-gradient descent on two matrix manifolds.

The scattering matrix lives on the square Stiefel manifold (the unitary
group): tangent vectors ``Y`` at ``X`` satisfy ``X^H Y + Y^H X = 0``,
gradients are obtained by projecting the Euclidean gradient, transport
is projection onto the new tangent space, and the retraction is the
unitary polar factor computed from a thin SVD.

The conventional-surface baseline restricts the scattering matrix to a
unit-modulus diagonal; its search space is a product of circles with
per-entry projection and normalization taking the roles above.

The driver :func:`rcg_minimize` combines projected gradients with a
nonnegative Polak-Ribiere inertia term (old gradient transported to the
current point first) and an Armijo backtracking line search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import thin_svd, unitarity_residual


@dataclass
class RcgOptions:
    """Knobs for :func:`rcg_minimize`; defaults suit normalized units."""

    max_steps: int = 50          # inner descent steps per invocation
    grad_norm_tol: float = 1e-6  # stop when the Riemannian gradient norm drops below
    armijo_c: float = 1e-4       # sufficient-decrease constant
    armijo_shrink: float = 0.5   # backtracking contraction factor
    armijo_init_step: float = 1.0
    armijo_max_backtracks: int = 60

    def __post_init__(self) -> None:
        if not (0.0 < self.armijo_c < 1.0 and 0.0 < self.armijo_shrink < 1.0):
            raise ValueError("armijo constants must lie in (0, 1)")
        if self.armijo_init_step <= 0 or self.max_steps < 0 or self.grad_norm_tol <= 0:
            raise ValueError("step counts and tolerances must be positive")


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Canonical real inner product ``Re <a, b>`` on matrices or vectors."""
    return float(np.sum(a * b.conj()).real)


class UnitaryManifold:
    """Square Stiefel manifold: all M x M unitary matrices."""

    #: tolerance on ``X^H Y + Y^H X`` for tangency assertions
    TANGENT_TOL = 1e-8

    def __init__(self, dim: int):
        self.dim = dim

    def check_point(self, x: np.ndarray, tol: float = 1e-8) -> None:
        if unitarity_residual(x) > tol:
            raise ValueError("point is not unitary within tolerance")

    def project(self, x: np.ndarray, ambient: np.ndarray) -> np.ndarray:
        r"""Riemannian gradient from a Euclidean one: ``G - X G^H X``."""
        return ambient - x @ ambient.conj().T @ x

    def transport(self, x_new: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Move a tangent vector to the tangent space at ``x_new``.

        Orthogonal projection ``Y - X (X^H Y + Y^H X) / 2``; vectors
        already tangent at ``x_new`` pass through unchanged.
        """
        s = x_new.conj().T @ y
        return y - x_new @ ((s + s.conj().T) / 2.0)

    def retract(self, a: np.ndarray) -> np.ndarray:
        """Unitary polar factor ``K L^H`` of the thin SVD ``A = K S L^H``.

        Raises ``ValueError`` when ``A`` is numerically singular (the
        polar factor is then ill defined).
        """
        k, s, l = thin_svd(a)
        if s[-1] <= 1e-12 * max(1.0, s[0]):
            raise ValueError("retraction of a rank-deficient matrix")
        return k @ l.conj().T

    def tangency_residual(self, x: np.ndarray, y: np.ndarray) -> float:
        s = x.conj().T @ y
        return float(np.max(np.abs(s + s.conj().T)))

    def random_tangent(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        g = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
        return self.project(x, g / np.sqrt(2.0))


class CircleManifold:
    """Product of M unit circles: unit-modulus vectors (diagonal surfaces)."""

    TANGENT_TOL = 1e-8

    def __init__(self, dim: int):
        self.dim = dim

    def check_point(self, x: np.ndarray, tol: float = 1e-8) -> None:
        if np.max(np.abs(np.abs(x) - 1.0)) > tol:
            raise ValueError("point entries must have unit modulus")

    def project(self, x: np.ndarray, ambient: np.ndarray) -> np.ndarray:
        """Per-entry tangent projection ``g - Re(g conj(x)) x``."""
        return ambient - (ambient * x.conj()).real * x

    def transport(self, x_new: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.project(x_new, y)

    def retract(self, a: np.ndarray) -> np.ndarray:
        """Entrywise normalization back onto the circles."""
        mags = np.abs(a)
        if np.any(mags < 1e-12):
            raise ValueError("retraction of a zero-modulus entry")
        return a / mags

    def tangency_residual(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.max(np.abs((y * x.conj()).real)))

    def random_tangent(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        g = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
        return self.project(x, g / np.sqrt(2.0))


def retract_step(manifold, x: np.ndarray, step: float, y: np.ndarray) -> np.ndarray:
    """Retraction of the ambient step ``x + step * y`` onto the manifold."""
    return manifold.retract(x + step * y)


def polak_ribiere(
    g_new: np.ndarray, g_old_transported: np.ndarray
) -> tuple[float, bool]:
    r"""Nonnegative Polak-Ribiere inertia coefficient.

    ``Re <g_new - g_old, g_new> / <g_old, g_old>`` clamped below at
    zero; both gradients must live in the same tangent space (the old
    one transported first).  Returns ``(coefficient, restarted)`` where
    ``restarted`` flags a vanishing old gradient.
    """
    denom = inner(g_old_transported, g_old_transported)
    if denom <= 0.0:
        return 0.0, True
    coef = inner(g_new - g_old_transported, g_new) / denom
    return max(0.0, coef), False


@dataclass
class ArmijoResult:
    step: float
    x_new: np.ndarray
    cost_new: float
    stalled: bool
    backtracks: int


def armijo_step(
    cost,
    manifold,
    x: np.ndarray,
    y: np.ndarray,
    slope: float,
    cost_x: float,
    opts: RcgOptions,
    init_step: float | None = None,
) -> ArmijoResult:
    """Backtracking line search along the tangent direction ``y``.

    ``slope`` is the directional derivative ``Re <grad, y>`` and must be
    negative.  The largest step ``init * shrink^t`` satisfying the
    sufficient-decrease inequality is returned; after
    ``armijo_max_backtracks`` halvings a zero step is returned with the
    ``stalled`` flag set.  ``init_step`` overrides the configured start
    so callers can warm-start the search instead of paying the full
    backtracking ladder every iteration; when the warm start is
    accepted outright the search extends forward (up to the configured
    initial step) so a conservative warm start cannot lock the
    iteration into undersized steps.  An extension must *lower* the
    cost, not merely keep sufficient decrease: near a minimizer almost
    twice the ideal step still passes the decrease test while actually
    climbing back up the far side of the valley, and accepting it locks
    steepest descent into a permanent overshoot cycle.
    """
    if slope >= 0.0:
        raise ValueError("armijo_step requires a descent direction (slope < 0)")
    step = opts.armijo_init_step if init_step is None else init_step
    for t in range(opts.armijo_max_backtracks + 1):
        x_new = retract_step(manifold, x, step, y)
        c_new = cost(x_new)
        if c_new <= cost_x + opts.armijo_c * step * slope:
            break
        step *= opts.armijo_shrink
    else:
        return ArmijoResult(0.0, x, cost_x, True, opts.armijo_max_backtracks + 1)
    while t == 0 and step < opts.armijo_init_step:
        bigger = min(step / opts.armijo_shrink, opts.armijo_init_step)
        x_try = retract_step(manifold, x, bigger, y)
        c_try = cost(x_try)
        if c_try > cost_x + opts.armijo_c * bigger * slope or c_try >= c_new:
            break
        step, x_new, c_new = bigger, x_try, c_try
    return ArmijoResult(step, x_new, c_new, False, t)


@dataclass
class RcgResult:
    x: np.ndarray
    cost: float
    cost_trace: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    status: str = "converged"     # converged | max-steps | stalled
    steps: int = 0


def rcg_minimize(
    cost,
    euclid_grad,
    x0: np.ndarray,
    manifold,
    opts: RcgOptions | None = None,
) -> RcgResult:
    """Minimize ``cost`` over the manifold starting from ``x0``.

    ``euclid_grad`` must return the ambient (Euclidean) gradient in the
    convention ``2 * d cost / d conj(X)`` so that the directional
    derivative along a tangent ``Y`` is ``Re <grad, Y>``.  The cost
    trace is nonincreasing; iteration stops at the gradient tolerance,
    the step budget, or a stalled line search (best iterate returned).
    """
    opts = opts or RcgOptions()
    manifold.check_point(x0)
    x = np.array(x0, copy=True)
    cost_x = float(cost(x))
    g = manifold.project(x, euclid_grad(x))
    g_norm = np.sqrt(inner(g, g))
    direction = -g

    result = RcgResult(x=x, cost=cost_x, cost_trace=[cost_x], grad_norms=[g_norm])
    # Warm start for the line search: fit the one-dimensional quadratic
    # through the previous decrease and the current slope, and start the
    # search at that model's sweet spot (capped at the configured
    # initial step).  Searching from the configured initial step every
    # time costs dozens of retractions per iteration once the natural
    # step is small; starting from the raw previous step re-overshoots
    # whenever the previous step itself was too long.
    decrease: float | None = None
    for n in range(opts.max_steps):
        if g_norm <= opts.grad_norm_tol:
            result.status = "converged"
            break
        slope = inner(g, direction)
        if slope >= 0.0:
            # inertia produced an ascent direction: restart with steepest descent
            direction = -g
            slope = -g_norm**2
        start = opts.armijo_init_step
        if decrease is not None:
            start = min(start, max(2.02 * decrease / -slope, 1e-12))
        ls = armijo_step(
            cost, manifold, x, direction, slope, cost_x, opts, init_step=start
        )
        if ls.stalled:
            result.status = "stalled"
            break
        decrease = cost_x - ls.cost_new
        x_new, cost_x = ls.x_new, ls.cost_new
        g_new = manifold.project(x_new, euclid_grad(x_new))
        coef, _ = polak_ribiere(g_new, manifold.transport(x_new, g))
        direction = -g_new + coef * manifold.transport(x_new, direction)
        x, g = x_new, g_new
        g_norm = np.sqrt(inner(g, g))
        result.steps = n + 1
        result.cost_trace.append(cost_x)
        result.grad_norms.append(g_norm)
    else:
        result.status = "max-steps" if g_norm > opts.grad_norm_tol else "converged"

    result.x, result.cost = x, cost_x
    return result
