"""Riemannian descent machinery on the unitary group and the circle torus."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risac.manifold import (
    ArmijoResult,
    CircleManifold,
    RcgOptions,
    UnitaryManifold,
    armijo_step,
    inner,
    polak_ribiere,
    rcg_minimize,
    retract_step,
)
from risac.numerics import rand_complex, rand_unitary, unitarity_residual


def _rand_point(manifold, rng):
    if isinstance(manifold, UnitaryManifold):
        return rand_unitary(rng, manifold.dim)
    z = rand_complex(rng, manifold.dim)
    return z / np.abs(z)


@pytest.fixture(params=["unitary", "circle"])
def manifold(request):
    return UnitaryManifold(6) if request.param == "unitary" else CircleManifold(6)


# -- tangent-space geometry --------------------------------------------------


def test_projection_is_tangent(manifold, rng):
    for _ in range(10):
        x = _rand_point(manifold, rng)
        y = manifold.project(x, rand_complex(rng, *np.shape(x)))
        assert manifold.tangency_residual(x, y) <= 1e-8


def test_project_annihilates_normal_directions(manifold, rng):
    x = _rand_point(manifold, rng)
    if isinstance(manifold, UnitaryManifold):
        h = rand_complex(rng, manifold.dim, manifold.dim)
        normal = x @ (h + h.conj().T)  # x times any Hermitian factor
    else:
        normal = rng.standard_normal(manifold.dim) * x  # real multiples of x
    assert np.allclose(manifold.project(x, normal), 0.0, rtol=0.0, atol=1e-12)


def test_project_scales_tangents(manifold, rng):
    # the unitary map G - X G^H X is the gradient map, which doubles
    # tangent vectors; the circle projector is a plain idempotent one
    x = _rand_point(manifold, rng)
    y = manifold.project(x, rand_complex(rng, *np.shape(x)))
    factor = 2.0 if isinstance(manifold, UnitaryManifold) else 1.0
    assert np.allclose(manifold.project(x, y), factor * y, rtol=0.0, atol=1e-12)


def test_transport_lands_tangent(manifold, rng):
    x = _rand_point(manifold, rng)
    x_new = _rand_point(manifold, rng)
    y = manifold.random_tangent(x, rng)
    moved = manifold.transport(x_new, y)
    assert manifold.tangency_residual(x_new, moved) <= 1e-8


def test_transport_fixes_tangents(manifold, rng):
    x = _rand_point(manifold, rng)
    y = manifold.random_tangent(x, rng)
    assert np.allclose(manifold.transport(x, y), y, atol=1e-10)


def test_retraction_returns_to_manifold(manifold, rng):
    x = _rand_point(manifold, rng)
    y = manifold.random_tangent(x, rng)
    x_new = retract_step(manifold, x, 0.3, y)
    manifold.check_point(x_new, tol=1e-8)


def test_retraction_matches_polar_oracle(rng):
    # the unitary retraction must agree with the polar factor computed
    # independently from a Hermitian eigendecomposition of A^H A
    manifold = UnitaryManifold(6)
    for _ in range(10):
        x = rand_unitary(rng, 6)
        y = manifold.random_tangent(x, rng)
        a = x + 0.45 * y
        w, v = np.linalg.eigh(a.conj().T @ a)
        oracle = a @ (v * (np.maximum(w, 0.0) ** -0.5)) @ v.conj().T
        assert np.max(np.abs(manifold.retract(a) - oracle)) <= 1e-8


def test_unitary_retraction_rejects_singular():
    manifold = UnitaryManifold(3)
    a = np.diag([1.0, 1.0, 0.0]).astype(complex)
    with pytest.raises(ValueError, match="rank-deficient"):
        manifold.retract(a)


def test_circle_retraction_is_normalization(rng):
    manifold = CircleManifold(5)
    z = rand_complex(rng, 5) + 2.0
    assert np.allclose(manifold.retract(z), z / np.abs(z))


def test_check_point_rejects_off_manifold():
    with pytest.raises(ValueError):
        UnitaryManifold(3).check_point(1.1 * np.eye(3, dtype=complex))
    with pytest.raises(ValueError):
        CircleManifold(3).check_point(np.array([1.0, 1.0, 1.2], dtype=complex))


# -- search ingredients ------------------------------------------------------


def test_polak_ribiere_zero_on_repeated_gradient(rng):
    g = rand_complex(rng, 4, 4)
    coef, restarted = polak_ribiere(g, g)
    assert coef == 0.0 and not restarted


def test_polak_ribiere_restart_on_vanishing_gradient(rng):
    g = rand_complex(rng, 4, 4)
    coef, restarted = polak_ribiere(g, np.zeros_like(g))
    assert coef == 0.0 and restarted


def test_polak_ribiere_nonnegative(rng):
    for _ in range(20):
        a, b = rand_complex(rng, 3, 3), rand_complex(rng, 3, 3)
        coef, _ = polak_ribiere(a, b)
        assert coef >= 0.0


def test_armijo_requires_descent_direction(rng):
    manifold = UnitaryManifold(4)
    x = rand_unitary(rng, 4)
    y = manifold.random_tangent(x, rng)
    with pytest.raises(ValueError, match="descent"):
        armijo_step(lambda u: 0.0, manifold, x, y, slope=0.1, cost_x=0.0, opts=RcgOptions())


def test_armijo_satisfies_sufficient_decrease(rng):
    manifold = UnitaryManifold(5)
    target = rand_unitary(rng, 5)

    def cost(u):
        return -float(np.trace(target.conj().T @ u).real)

    def grad(u):
        return -target

    x = rand_unitary(rng, 5)
    opts = RcgOptions()
    g = manifold.project(x, grad(x))
    direction = -g
    slope = inner(g, direction)
    res = armijo_step(cost, manifold, x, direction, slope, cost(x), opts)
    assert isinstance(res, ArmijoResult) and not res.stalled
    assert res.cost_new <= cost(x) + opts.armijo_c * res.step * slope


def test_armijo_warm_start_extends_forward(rng):
    # a tiny warm start must not trap the search: the forward extension
    # climbs back toward the configured initial step while decrease holds
    manifold = UnitaryManifold(4)
    target = rand_unitary(rng, 4)

    def cost(u):
        return -float(np.trace(target.conj().T @ u).real)

    x = rand_unitary(rng, 4)
    g = manifold.project(x, -target)
    direction = -g
    slope = inner(g, direction)
    opts = RcgOptions()
    cold = armijo_step(cost, manifold, x, direction, slope, cost(x), opts)
    warm = armijo_step(
        cost, manifold, x, direction, slope, cost(x), opts, init_step=cold.step * 2**-6
    )
    assert warm.step == pytest.approx(cold.step)


def test_armijo_stalls_on_flat_cost(rng):
    manifold = UnitaryManifold(4)
    x = rand_unitary(rng, 4)
    y = manifold.random_tangent(x, rng)
    res = armijo_step(
        lambda u: 0.0, manifold, x, y, slope=-1.0, cost_x=0.0,
        opts=RcgOptions(armijo_max_backtracks=10),
    )
    assert res.stalled and res.step == 0.0


# -- the full descent --------------------------------------------------------


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.integers(min_value=2, max_value=8))
def test_rcg_reaches_global_optimum_of_linear_cost(seed, m):
    # cost -Re Tr[U^H X] over unitary X has optimum -M exactly at X = U
    rng = np.random.default_rng(seed)
    u = rand_unitary(rng, m)

    def cost(x):
        return -float(np.trace(u.conj().T @ x).real)

    def grad(x):
        return -u

    res = rcg_minimize(cost, grad, np.eye(m, dtype=complex), UnitaryManifold(m))
    assert res.cost <= -m + 1e-6
    assert unitarity_residual(res.x) <= 1e-8


def test_rcg_cost_trace_nonincreasing(rng):
    u = rand_unitary(rng, 5)
    res = rcg_minimize(
        lambda x: -float(np.trace(u.conj().T @ x).real),
        lambda x: -u,
        np.eye(5, dtype=complex),
        UnitaryManifold(5),
    )
    assert np.all(np.diff(res.cost_trace) <= 1e-12)


def test_rcg_respects_step_budget(rng):
    u = rand_unitary(rng, 6)
    res = rcg_minimize(
        lambda x: -float(np.trace(u.conj().T @ x).real),
        lambda x: -u,
        np.eye(6, dtype=complex),
        UnitaryManifold(6),
        RcgOptions(max_steps=2, grad_norm_tol=1e-12),
    )
    assert res.steps <= 2
    assert res.status in ("max-steps", "converged", "stalled")


def test_rcg_converged_at_stationary_start(rng):
    u = rand_unitary(rng, 4)
    res = rcg_minimize(
        lambda x: -float(np.trace(u.conj().T @ x).real),
        lambda x: -u,
        u,
        UnitaryManifold(4),
    )
    assert res.status == "converged"
    assert res.steps == 0


def test_rcg_circle_quadratic(rng):
    # maximizing |a^H x|-style alignment on the circle torus: the cost
    # -Re(a^H x) is minimized entrywise at x = a / |a|
    a = rand_complex(rng, 6) + 0.5

    def cost(x):
        return -float(np.sum((a.conj() * x).real))

    def grad(x):
        return -a

    x0 = np.ones(6, dtype=complex)
    res = rcg_minimize(cost, grad, x0, CircleManifold(6))
    assert res.cost == pytest.approx(-np.sum(np.abs(a)), abs=1e-6)


def test_rcg_rejects_bad_start():
    with pytest.raises(ValueError):
        rcg_minimize(
            lambda x: 0.0,
            lambda x: np.zeros((3, 3)),
            1.2 * np.eye(3, dtype=complex),
            UnitaryManifold(3),
        )
