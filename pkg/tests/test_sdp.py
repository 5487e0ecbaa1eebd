"""Relaxed beamformer subproblem: solver, certificates, extraction, repair."""

import numpy as np
import pytest

from risac import lagrangian, sdp
from risac.channels import gram, realize
from risac.numerics import hermitian_evd, rand_complex, rand_psd
from risac.scenario import build_scenario


def _problem(seed=0, loose=False, **overrides):
    # an 8 dB floor keeps these four-element instances feasible with the
    # scattering matrix frozen at identity
    cfg = {"M_a": 2, "M_b": 2, "J_T": 4, "K": 2, "L": 2, "gamma_D_min_dB": 8}
    cfg.update(overrides)
    scn = build_scenario(cfg)
    chans = realize(scn, np.random.default_rng([seed, 0]))
    sub = lagrangian.build_subproblem(
        chans,
        np.eye(scn.n_elems, dtype=complex),
        scn.n_users,
        scn.n_targets,
        scn.gamma_user_min,
        scn.gamma_eaves_max,
        scn.weights,
        scn.noise_w,
    )
    rows = sub.effective_rows(np.eye(scn.n_elems, dtype=complex))
    k, l = scn.n_users, scn.n_targets
    grams = [gram(r) for r in rows]
    gamma_min = 1e-9 if loose else scn.gamma_user_min
    gamma_max = 1e9 if loose else scn.gamma_eaves_max
    problem = sdp.build_subproblem(
        np.stack(grams[:k]),
        np.stack(grams[k : k + l]),
        np.stack(grams[k + l :]),
        scn.weights,
        gamma_min,
        gamma_max,
        scn.power_budget,
    )
    return scn, problem


# -- interior-point core -----------------------------------------------------


def test_ipm_scalar_oracle():
    # min x subject to x - s = 1 over nonnegative scalars: optimum x = 1
    one = np.eye(1, dtype=complex)
    res = sdp.ipm_solve(
        c=[one, np.zeros((1, 1), dtype=complex)],
        constraints=[[one, -one]],
        b=np.array([1.0]),
    )
    assert res.status == "optimal"
    assert res.x[0][0, 0].real == pytest.approx(1.0, abs=1e-6)


def test_ipm_trace_heuristic_oracle():
    # min Tr[C X] s.t. Tr[X] = 1 has optimum at the smallest eigenvalue of C
    rng = np.random.default_rng(8)
    c = rand_psd(rng, 3) + 0.1 * np.eye(3)
    res = sdp.ipm_solve(
        c=[c.astype(complex)],
        constraints=[[np.eye(3, dtype=complex)]],
        b=np.array([1.0]),
    )
    assert res.status == "optimal"
    lam_min = float(np.linalg.eigvalsh(c)[0])
    assert res.primal_obj == pytest.approx(lam_min, rel=1e-6)


# -- the relaxed subproblem --------------------------------------------------


def test_solve_sdp_optimal_and_feasible():
    _, problem = _problem(seed=1)
    sol = sdp.solve_sdp(problem)
    assert sol.status == "optimal"
    assert sol.max_violation <= 1e-6
    assert sol.rel_gap <= 1e-6
    for block in (*sol.beam_grams, sol.an_cov):
        assert np.linalg.eigvalsh((block + block.conj().T) / 2)[0] >= -1e-9


def test_solve_sdp_power_saturates_under_loose_constraints():
    # with trivial SINR floors and caps, all budget goes to sensing
    scn, problem = _problem(seed=2, loose=True)
    sol = sdp.solve_sdp(problem)
    assert sol.status == "optimal"
    total = float(np.trace(np.sum(sol.beam_grams, axis=0) + sol.an_cov).real)
    assert abs(total - scn.power_budget) <= 1e-5 * scn.power_budget


def test_solve_sdp_deterministic():
    _, problem = _problem(seed=3)
    a = sdp.solve_sdp(problem)
    b = sdp.solve_sdp(problem)
    assert np.array_equal(a.beam_grams, b.beam_grams)
    assert np.array_equal(a.an_cov, b.an_cov)
    assert a.objective == b.objective and a.iterations == b.iterations


def test_solve_sdp_certifies_infeasibility():
    # the same receiver cannot be forced above a floor and below a
    # much smaller leakage cap at once
    row = rand_complex(np.random.default_rng(4), 3)
    g = gram(row)[None]
    problem = sdp.build_subproblem(
        user_grams=g,
        eaves_grams=g,
        sens_grams=g,
        weights=np.array([1.0]),
        gamma_user_min=10.0,
        gamma_eaves_max=0.1,
        power_budget=1.0,
    )
    sol = sdp.solve_sdp(problem)
    assert sol.status == "infeasible"
    assert sdp.phase1_max_slack(problem) < 0.0


def test_phase1_positive_on_feasible_instance():
    _, problem = _problem(seed=5)
    assert sdp.phase1_max_slack(problem) > 0.0


def test_inequality_order_matches_constraint_indices():
    scn, problem = _problem(seed=6)
    rows, rhs, norms = sdp._inequalities(problem)
    k, l = problem.n_users, problem.n_targets
    indices = lagrangian.constraint_indices(k, l)
    assert len(rows) == len(indices) + 1  # power row appended last
    # first block of each row: users carry -G_k at their own slot,
    # eavesdropper rows carry +G_l at the decoded stream's slot
    for pos, idx in enumerate(indices):
        blocks = rows[pos]
        own = blocks[idx.user] * norms[pos]
        if idx.kind == "user":
            assert np.allclose(own, -problem.user_grams[idx.user])
        else:
            assert np.allclose(own, problem.eaves_grams[idx.target])
    power = rows[-1]
    assert np.allclose(power[0] * norms[-1], np.eye(problem.n_tx))
    assert rhs[-1] * norms[-1] == pytest.approx(problem.power_budget)


# -- duals as prices ---------------------------------------------------------


def test_duals_nonnegative_and_complementary():
    _, problem = _problem(seed=7)
    sol = sdp.solve_sdp(problem)
    assert np.all(sol.duals >= 0.0)
    rows, rhs, norms = sdp._inequalities(problem)
    blocks = list(sol.beam_grams) + [sol.an_cov]
    for i, (a, bi) in enumerate(zip(rows, rhs)):
        value = float(sum(np.sum(ab * xb.conj()).real for ab, xb in zip(a, blocks)))
        slack = bi - value  # normalized units
        # complementary slackness: price times slack vanishes
        assert abs(sol.duals[i] * norms[i] * slack) <= 1e-4 * (1.0 + abs(bi))


def test_power_dual_is_shadow_price():
    # bumping the power budget by 1% moves the optimum by price * bump;
    # loose SINR constraints guarantee the budget is the binding row
    scn, problem = _problem(seed=8, loose=True)
    sol = sdp.solve_sdp(problem)
    price = sol.duals[-1]
    assert price > 0.0
    bump = 0.01 * problem.power_budget
    bumped = sdp.SdpProblem(
        cost=problem.cost,
        user_grams=problem.user_grams,
        eaves_grams=problem.eaves_grams,
        gamma_user_min=problem.gamma_user_min,
        gamma_eaves_max=problem.gamma_eaves_max,
        power_budget=problem.power_budget + bump,
        noise=problem.noise,
    )
    sol2 = sdp.solve_sdp(bumped)
    predicted = price * bump
    actual = sol2.objective - sol.objective
    assert actual == pytest.approx(predicted, rel=0.05)


# -- rank-one extraction -----------------------------------------------------


def test_extract_rank_one_matches_evd_oracle():
    rng = np.random.default_rng(9)
    for _ in range(50):
        q = rand_psd(rng, 5)
        approx, lam = sdp.extract_rank_one(q)
        w, v = hermitian_evd(q)
        oracle = w[0] * np.outer(v[:, 0], v[:, 0].conj())
        assert lam == pytest.approx(w[0])
        assert np.max(np.abs(approx - oracle)) <= 1e-10 * max(1.0, w[0])
        assert np.trace(approx).real <= np.trace(q).real * (1 + 1e-12)


def test_extract_rank_one_clamps_negative():
    approx, lam = sdp.extract_rank_one(-np.eye(3, dtype=complex))
    assert lam == 0.0
    assert np.allclose(approx, 0.0)


# -- feasibility repair ------------------------------------------------------


def test_repair_scale_restores_power():
    scn, problem = _problem(seed=10, loose=True)
    sol = sdp.solve_sdp(problem)
    rank_one = np.stack([sdp.extract_rank_one(q)[0] for q in sol.beam_grams])
    factor, ok = sdp.repair_scale(problem, 2.0 * rank_one, 2.0 * sol.an_cov)
    assert ok
    total = float(
        np.trace(np.sum(2.0 * factor * rank_one, axis=0) + 2.0 * factor * sol.an_cov).real
    )
    assert total <= problem.power_budget * (1 + 1e-9)
    assert sdp.violations(problem, 2.0 * factor * rank_one, 2.0 * factor * sol.an_cov) <= 1e-6


def test_repair_scale_factor_is_maximal():
    # the returned factor is the top of the feasible scaling interval:
    # the tightest of the power cap and the positive-margin leakage caps,
    # recomputed here directly from the constraint definitions
    scn, problem = _problem(seed=11)
    sol = sdp.solve_sdp(problem)
    rank_one = np.stack([sdp.extract_rank_one(q)[0] for q in sol.beam_grams])
    factor, _ = sdp.repair_scale(problem, rank_one, sol.an_cov)

    caps = [problem.power_budget / float(np.trace(np.sum(rank_one, axis=0) + sol.an_cov).real)]
    for l in range(problem.n_targets):
        g = problem.eaves_grams[l]
        received = [float(np.trace(g @ q).real) for q in rank_one]
        an = float(np.trace(g @ sol.an_cov).real)
        for k in range(problem.n_users):
            # leakage cap for stream k at target l, affine in the scale c:
            # c*s_k <= gamma * (c*(sum_{j!=k} s_j + an) + noise)
            margin = received[k] - problem.gamma_eaves_max * (
                sum(received) - received[k] + an
            )
            if margin > 0:
                caps.append(problem.gamma_eaves_max * problem.noise / margin)
    assert factor == pytest.approx(min(caps), rel=1e-12)


def test_repair_scale_zero_design():
    _, problem = _problem(seed=12)
    zeros = np.zeros_like(problem.user_grams)
    factor, ok = sdp.repair_scale(problem, zeros, np.zeros_like(problem.cost))
    assert factor == 1.0 and not ok


# -- relaxation dominates sampled rank-one designs ---------------------------


def test_sdr_dominates_sampled_designs():
    # J_T = 2, K = L = 1: the relaxed optimum upper-bounds every feasible
    # rank-one design found by random sampling
    scn, problem = _problem(seed=13, J_T=2, K=1, L=1)
    sol = sdp.solve_sdp(problem)
    assert sol.status == "optimal"

    rng = np.random.default_rng(14)
    n = 100_000
    w = rand_complex(rng, n, 2)          # beam directions
    v = rand_complex(rng, n, 2)          # artificial-noise directions
    v[: n // 2] = 0.0                    # half the samples carry no AN

    def forms(g):
        return (
            np.einsum("ni,ij,nj->n", w.conj(), g, w).real,
            np.einsum("ni,ij,nj->n", v.conj(), g, v).real,
        )

    s_u, a_u = forms(problem.user_grams[0])
    s_e, a_e = forms(problem.eaves_grams[0])
    s_c, a_c = forms(problem.cost)
    power = np.sum(np.abs(w) ** 2, axis=1) + np.sum(np.abs(v) ** 2, axis=1)

    # the largest common scale c allowed by the caps, then the floor check
    caps = problem.power_budget / power
    coef_e = s_e - problem.gamma_eaves_max * a_e
    with np.errstate(divide="ignore"):
        cap_e = np.where(
            coef_e > 0,
            problem.gamma_eaves_max * problem.noise / np.where(coef_e > 0, coef_e, 1.0),
            np.inf,
        )
    c = np.minimum(caps, cap_e)
    coef_u = s_u - problem.gamma_user_min * a_u
    feasible = c * coef_u >= problem.gamma_user_min * problem.noise * (1 - 1e-12)
    assert np.any(feasible), "sampling found no feasible design"
    best = float(np.max((c * (s_c + a_c))[feasible]))
    assert best <= sol.objective * (1 + 1e-9) + 1e-12
