r"""Beamformer/AN subproblem: a small dense semidefinite program.

With the scattering matrix frozen, the design objective and all SINR
constraints are linear in the beamformer outer products ``Qbar_k`` and
the artificial-noise covariance ``R_z``; dropping the rank-one
requirement on the ``Qbar_k`` leaves a semidefinite program over
``K + 1`` Hermitian blocks:

    maximize    sum_l alpha_l Tr[Hbar_l (sum_k Qbar_k + R_z)]
    subject to  per-user SINR floor, per-pair leakage cap,
                total transmit power, all blocks PSD.

The in-repo solver is a primal-dual infeasible-start interior-point
method with Nesterov-Todd scaling, specialized to a handful of small
Hermitian blocks plus scalar slacks.  A relaxation gap can survive the
rank-one extraction that follows, so :func:`repair_scale` rescales the
extracted design back into the feasible set.

Everything here expects noise-normalized data (noise power 1) — see
:mod:`risac.lagrangian` for the scaling convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import hermitian_evd, is_hermitian

# ---------------------------------------------------------------------------
# problem containers


@dataclass(frozen=True)
class SdpProblem:
    """One instance of the relaxed beamformer/AN subproblem."""

    cost: np.ndarray          # (J, J) Hermitian PSD: weighted sensing Gram sum
    user_grams: np.ndarray    # (K, J, J) noise-normalized user Grams
    eaves_grams: np.ndarray   # (L, J, J) noise-normalized eavesdropper Grams
    gamma_user_min: float
    gamma_eaves_max: float
    power_budget: float
    noise: float = 1.0

    @property
    def n_users(self) -> int:
        return self.user_grams.shape[0]

    @property
    def n_targets(self) -> int:
        return self.eaves_grams.shape[0]

    @property
    def n_tx(self) -> int:
        return self.cost.shape[0]


@dataclass
class SdpSolution:
    beam_grams: np.ndarray    # (K, J, J) PSD, possibly rank > 1
    an_cov: np.ndarray        # (J, J) PSD
    objective: float          # value of the (maximized) sensing objective
    status: str               # optimal | infeasible | numerical-failure
    max_violation: float      # worst relative violation of the inequalities
    rel_gap: float
    iterations: int
    duals: np.ndarray         # multipliers of the inequalities, original units


def build_subproblem(
    user_grams: np.ndarray,
    eaves_grams: np.ndarray,
    sens_grams: np.ndarray,
    weights: np.ndarray,
    gamma_user_min: float,
    gamma_eaves_max: float,
    power_budget: float,
    noise: float = 1.0,
) -> SdpProblem:
    """Assemble the subproblem from per-node Gram matrices."""
    cost = np.einsum("l,ljk->jk", np.asarray(weights, dtype=float), sens_grams)
    cost = (cost + cost.conj().T) / 2.0
    for name, grams in (("user", user_grams), ("eavesdropper", eaves_grams)):
        for g in grams:
            if not is_hermitian(g, tol=1e-8):
                raise ValueError(f"{name} Gram matrix is not Hermitian")
    return SdpProblem(
        cost=cost,
        user_grams=np.asarray(user_grams, dtype=complex),
        eaves_grams=np.asarray(eaves_grams, dtype=complex),
        gamma_user_min=float(gamma_user_min),
        gamma_eaves_max=float(gamma_eaves_max),
        power_budget=float(power_budget),
        noise=float(noise),
    )


# ---------------------------------------------------------------------------
# generic standard-form interior-point core
#
# minimize <c, X>  s.t.  <A_i, X> = b_i,  X in a product of PSD cones.
# Block vectors are lists of Hermitian arrays, one per cone.


@dataclass
class IpmOptions:
    tol: float = 1e-9           # relative gap and feasibility target
    max_iters: int = 100
    step_frac: float = 0.95     # fraction of the distance to the cone boundary


@dataclass
class IpmResult:
    x: list
    y: np.ndarray
    s: list
    status: str                 # optimal | iteration-limit
    iterations: int
    rel_gap: float
    primal_feas: float
    dual_feas: float
    primal_obj: float


def _binner(xs: list, ys: list) -> float:
    """Real trace inner product of Hermitian block vectors."""
    total = 0.0
    for x, y in zip(xs, ys):
        total += np.vdot(y, x).real
    return total


def _bnorm(xs: list) -> float:
    return float(np.sqrt(sum(float(np.sum(np.abs(x) ** 2)) for x in xs)))


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2.0


def _nt_scaling(x: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nesterov-Todd scaling point: ``w`` with ``w s w = x``.

    Returns ``(w, lx)`` where ``lx`` is the Cholesky factor of ``x``
    (reused for the maximum-step computation).  Scalar cones (the slack
    variables of inequality rows) skip the factorizations.
    """
    if x.shape[0] == 1:
        xv = max(x[0, 0].real, 1e-300)
        sv = max(s[0, 0].real, 1e-300)
        return (
            np.array([[np.sqrt(xv / sv)]], dtype=complex),
            np.array([[np.sqrt(xv)]], dtype=complex),
        )
    lx = np.linalg.cholesky(x)
    mid = _sym(lx.conj().T @ s @ lx)
    lam, u = np.linalg.eigh(mid)
    lam = np.maximum(lam, 1e-300)
    root = u * (lam**-0.5)
    w = lx @ root @ u.conj().T @ lx.conj().T
    return _sym(w), lx


def _max_step(lx: np.ndarray, delta: np.ndarray) -> float:
    """Largest ``t`` with ``X + t*delta`` still PSD, given ``X = lx lx^H``."""
    if lx.shape[0] == 1:
        d = delta[0, 0].real
        if d >= -1e-300:
            return np.inf
        return -(lx[0, 0].real ** 2) / d
    half = np.linalg.solve(lx, delta)
    mapped = _sym(np.linalg.solve(lx, half.conj().T).conj().T)
    lam_min = float(np.linalg.eigvalsh(mapped)[0])
    if lam_min >= -1e-300:
        return np.inf
    return -1.0 / lam_min


def _chol_psd(a: np.ndarray):
    """Cholesky with escalating diagonal jitter for near-singular matrices."""
    jitter = 0.0
    base = max(1e-300, float(np.trace(a).real)) / a.shape[0]
    for _ in range(12):
        try:
            return np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
        except np.linalg.LinAlgError:
            jitter = max(jitter * 100.0, base * 1e-14)
    raise np.linalg.LinAlgError("Schur complement not positive definite")


def ipm_solve(
    c: list,
    constraints: list,
    b: np.ndarray,
    opts: IpmOptions | None = None,
) -> IpmResult:
    """Solve the standard-form block SDP by a primal-dual NT method.

    ``c`` and each entry of ``constraints`` are block vectors (lists of
    Hermitian arrays with matching shapes).  Uses an infeasible start,
    a predictor step to pick the centering weight ``sigma =
    (mu_aff/mu)^3``, and a corrector solved with the same factorized
    Schur complement.
    """
    opts = opts or IpmOptions()
    m = len(constraints)
    dims = [blk.shape[0] for blk in c]
    n_total = sum(dims)
    b = np.asarray(b, dtype=float)

    # per-constraint and cost scaling for conditioning
    con_scale = np.array([max(1.0, _bnorm(a)) for a in constraints])
    a_s = [[blk / d for blk in a] for a, d in zip(constraints, con_scale)]
    b_s = b / con_scale
    cost_scale = max(1.0, _bnorm(c))
    c_s = [blk / cost_scale for blk in c]

    xi = max(1.0, float(np.max(np.abs(b_s))) if m else 1.0)
    x = [xi * np.eye(d, dtype=complex) for d in dims]
    s = [np.eye(d, dtype=complex) for d in dims]
    y = np.zeros(m)

    b_norm = 1.0 + float(np.linalg.norm(b_s))
    c_norm = 1.0 + _bnorm(c_s)

    def apply_a(v: list) -> np.ndarray:
        return np.array([_binner(a, v) for a in a_s])

    def apply_at(yv: np.ndarray) -> list:
        out = [np.zeros((d, d), dtype=complex) for d in dims]
        for coef, a in zip(yv, a_s):
            for blk_out, blk_a in zip(out, a):
                blk_out += coef * blk_a
        return out

    best: IpmResult | None = None
    best_score = np.inf
    best_iter = 0
    status = "iteration-limit"
    it = 0
    for it in range(1, opts.max_iters + 1):
        rp = b_s - apply_a(x)
        at_y = apply_at(y)
        rd = [cb - ab - sb for cb, ab, sb in zip(c_s, at_y, s)]
        gap = _binner(x, s)
        mu = gap / n_total
        pobj = _binner(c_s, x)
        dobj = float(b_s @ y)
        rel_gap = abs(gap) / (1.0 + abs(pobj) + abs(dobj))
        p_feas = float(np.linalg.norm(rp)) / b_norm
        d_feas = _bnorm(rd) / c_norm

        snapshot = IpmResult(
            x=[xb.copy() for xb in x],
            y=y * 0 if m == 0 else y / con_scale * cost_scale,
            s=[sb * cost_scale for sb in s],
            status="optimal",
            iterations=it,
            rel_gap=rel_gap,
            primal_feas=p_feas,
            dual_feas=d_feas,
            primal_obj=pobj * cost_scale,
        )
        score = max(rel_gap, p_feas, d_feas)
        if best is None or score < best_score * (1.0 - 1e-3):
            best, best_score, best_iter = snapshot, score, it
        if rel_gap <= opts.tol and p_feas <= opts.tol and d_feas <= opts.tol:
            status = "optimal"
            best = snapshot
            break
        if it - best_iter > 15:
            break  # stalled: no meaningful progress, keep the best iterate

        # Nesterov-Todd scaling per block
        w, lx, ls = [], [], []
        try:
            for xb, sb in zip(x, s):
                wb, lxb = _nt_scaling(xb, sb)
                w.append(wb)
                lx.append(lxb)
                ls.append(np.linalg.cholesky(sb))
        except np.linalg.LinAlgError:
            break

        # Schur complement G_ij = <A_i, W A_j W>
        wa = [[_sym(wb @ ab @ wb) for wb, ab in zip(w, a)] for a in a_s]
        schur = np.empty((m, m))
        for i in range(m):
            for j in range(i + 1):
                schur[i, j] = schur[j, i] = _binner(a_s[i], wa[j])
        try:
            schur_l = _chol_psd(schur)
        except np.linalg.LinAlgError:
            break

        w_rd_w = [_sym(wb @ rb @ wb) for wb, rb in zip(w, rd)]

        def solve_newton(rc: list) -> tuple[list, list, np.ndarray]:
            rhs = rp - apply_a(rc) + apply_a(w_rd_w)
            dy = np.linalg.solve(
                schur_l.conj().T, np.linalg.solve(schur_l, rhs)
            ).real
            at_dy = apply_at(dy)
            ds = [rb - ab for rb, ab in zip(rd, at_dy)]
            dx = [
                _sym(rcb - wb @ dsb @ wb) for rcb, wb, dsb in zip(rc, w, ds)
            ]
            return dx, ds, dy

        def step_lengths(dx: list, ds: list) -> tuple[float, float]:
            ap = min((_max_step(lxb, dxb) for lxb, dxb in zip(lx, dx)), default=np.inf)
            ad = min((_max_step(lsb, dsb) for lsb, dsb in zip(ls, ds)), default=np.inf)
            return min(1.0, opts.step_frac * ap), min(1.0, opts.step_frac * ad)

        # predictor (affine) pass: no centering
        rc_aff = [-xb for xb in x]
        dx_a, ds_a, _ = solve_newton(rc_aff)
        ap_a, ad_a = step_lengths(dx_a, ds_a)
        x_aff = [xb + ap_a * dxb for xb, dxb in zip(x, dx_a)]
        s_aff = [sb + ad_a * dsb for sb, dsb in zip(s, ds_a)]
        mu_aff = max(0.0, _binner(x_aff, s_aff) / n_total)
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector with centering, same factorization
        rc = [
            _sym(sigma * mu * np.linalg.inv(sb) - xb) for xb, sb in zip(x, s)
        ]
        dx, ds, dy = solve_newton(rc)
        ap, ad = step_lengths(dx, ds)
        if max(ap, ad) < 1e-12:
            break
        x = [_sym(xb + ap * dxb) for xb, dxb in zip(x, dx)]
        s = [_sym(sb + ad * dsb) for sb, dsb in zip(s, ds)]
        y = y + ad * dy

    assert best is not None
    best.status = status if status == "optimal" else "iteration-limit"
    best.iterations = it
    return best


# ---------------------------------------------------------------------------
# assembling the beamforming subproblem in standard form


def _inequalities(problem: SdpProblem) -> tuple[list, np.ndarray, np.ndarray]:
    """Inequality rows ``<A_i, (Q_1..Q_K, R_z)> <= b_i`` over matrix blocks.

    Order: user SINR floors, leakage caps in target-major order, total
    power last — matching the multiplier order of
    :func:`risac.lagrangian.constraint_indices`.  Every row is
    normalized by its Frobenius norm, so residuals computed against
    these rows are relative; without this the slack variables (unit
    coefficient) would sit many orders of magnitude below Gram entries
    and the interior-point geometry degrades badly.  The norms are
    returned so multipliers can be mapped back to the unnormalized
    constraints.
    """
    n_u, n_t, j = problem.n_users, problem.n_targets, problem.n_tx
    rows: list = []
    rhs: list = []
    for k in range(n_u):
        g = problem.user_grams[k]
        blocks = [problem.gamma_user_min * g for _ in range(n_u + 1)]
        blocks[k] = -g
        rows.append(blocks)
        rhs.append(-problem.gamma_user_min * problem.noise)
    for l in range(n_t):
        g = problem.eaves_grams[l]
        for k in range(n_u):
            blocks = [-problem.gamma_eaves_max * g for _ in range(n_u + 1)]
            blocks[k] = g
            rows.append(blocks)
            rhs.append(problem.gamma_eaves_max * problem.noise)
    rows.append([np.eye(j, dtype=complex) for _ in range(n_u + 1)])
    rhs.append(problem.power_budget)
    norms = np.ones(len(rows))
    for i, blocks in enumerate(rows):
        norm = max(
            1.0, float(np.sqrt(sum(np.sum(np.abs(b) ** 2) for b in blocks)))
        )
        rows[i] = [b / norm for b in blocks]
        rhs[i] = rhs[i] / norm
        norms[i] = norm
    return rows, np.array(rhs), norms


def violations(
    problem: SdpProblem, beam_grams: np.ndarray, an_cov: np.ndarray
) -> float:
    """Worst relative violation of the subproblem's inequalities."""
    rows, rhs, _ = _inequalities(problem)
    blocks = list(beam_grams) + [an_cov]
    worst = 0.0
    for a, bi in zip(rows, rhs):
        val = float(sum(np.sum(ab * xb.conj()).real for ab, xb in zip(a, blocks)))
        worst = max(worst, (val - bi) / (1.0 + abs(bi)))
    return worst


#: a solution is accepted when gap and residuals reach this, even if the
#: solver's own (tighter) target was not met before it stalled
ACCEPT_TOL = 1e-6


def solve_sdp(problem: SdpProblem, opts: IpmOptions | None = None) -> SdpSolution:
    """Solve the relaxed subproblem; classify failures via a phase-1 SDP.

    The returned status is ``optimal`` (inequalities hold and the
    duality gap closed within 1e-6), ``infeasible`` (phase-1 certifies
    there is no feasible design), or ``numerical-failure`` (no
    certificate either way).
    """
    n_u, j = problem.n_users, problem.n_tx
    rows, rhs, norms = _inequalities(problem)
    m = len(rows)

    zero1 = np.zeros((1, 1), dtype=complex)
    eye1 = np.eye(1, dtype=complex)

    # standard form: matrix blocks then one scalar slack per inequality
    c = [-problem.cost.astype(complex) for _ in range(n_u + 1)]
    c += [zero1 for _ in range(m)]
    constraints = []
    for i, blocks in enumerate(rows):
        a = [blk.astype(complex) for blk in blocks]
        a += [eye1 if q == i else zero1 for q in range(m)]
        constraints.append(a)

    res = ipm_solve(c, constraints, rhs, opts)
    beam = np.stack([_sym(res.x[k]) for k in range(n_u)])
    an_cov = _sym(res.x[n_u])
    objective = float(
        np.sum(problem.cost * (np.sum(beam, axis=0) + an_cov).conj()).real
    )
    worst = violations(problem, beam, an_cov)
    score = max(res.rel_gap, res.primal_feas, res.dual_feas)
    # Multiplier of inequality i in its unnormalized units: the slack
    # coordinate of the dual residual forces y_i <= 0 at the optimum, so
    # the conventional nonnegative price is -y_i, and dividing by the
    # row norm undoes the Frobenius normalization of the rows.
    duals = np.maximum(0.0, -res.y) / norms

    if score <= ACCEPT_TOL and worst <= ACCEPT_TOL:
        status = "optimal"
    else:
        slack = phase1_max_slack(problem, opts)
        status = "numerical-failure" if slack > 1e-9 * (1 + np.max(np.abs(rhs))) else "infeasible"

    return SdpSolution(
        beam_grams=beam,
        an_cov=an_cov,
        objective=objective,
        status=status,
        max_violation=worst,
        rel_gap=res.rel_gap,
        iterations=res.iterations,
        duals=duals,
    )


def phase1_max_slack(problem: SdpProblem, opts: IpmOptions | None = None) -> float:
    """Maximal uniform slack ``t`` with ``<A_i, X> + t <= b_i`` for PSD X.

    Positive at the optimum means the subproblem has a strictly
    feasible point; negative certifies infeasibility.  The slack is
    modeled as a shifted nonnegative scalar ``u = t + shift`` (a free
    variable split into two halves would leave the dual with no strict
    interior), which makes this program strictly feasible on both sides
    and bounded (the power row caps ``t``) — safe ground for the
    interior-point method.
    """
    n_u, j = problem.n_users, problem.n_tx
    rows, rhs, _ = _inequalities(problem)
    m = len(rows)
    shift = 1.0 + max(0.0, -float(np.min(rhs)))

    zero1 = np.zeros((1, 1), dtype=complex)
    eye1 = np.eye(1, dtype=complex)
    zero = np.zeros((j, j), dtype=complex)

    # blocks: Q_1..Q_K, R_z, u, s_1..s_m; maximize u - shift
    c = [zero for _ in range(n_u + 1)] + [-eye1] + [zero1] * m
    constraints = []
    for i, blocks in enumerate(rows):
        a = [blk.astype(complex) for blk in blocks]
        a += [eye1]
        a += [eye1 if q == i else zero1 for q in range(m)]
        constraints.append(a)

    res = ipm_solve(c, constraints, rhs + shift, opts)
    return float(res.x[n_u + 1].real[0, 0]) - shift


# ---------------------------------------------------------------------------
# rank-one extraction and feasibility repair


def extract_rank_one(q_bar: np.ndarray) -> tuple[np.ndarray, float]:
    """Dominant-eigenpair rank-one approximation ``lam * b b^H``.

    Eigenvalue ties are broken deterministically toward the lowest
    index of the descending-sorted spectrum.  The result is PSD with
    trace at most that of the input.
    """
    w, v = hermitian_evd(_sym(q_bar))
    lam = max(0.0, float(w[0]))
    vec = v[:, 0]
    return lam * np.outer(vec, vec.conj()), lam


def repair_scale(
    problem: SdpProblem, beam_grams: np.ndarray, an_cov: np.ndarray
) -> tuple[float, bool]:
    """Common rescaling of the whole design restoring feasibility.

    Every inequality is affine in a shared factor ``c`` on all beam
    outer products and the AN covariance, so the feasible ``c`` form a
    closed interval whose top end is pinned by the power budget and the
    leakage caps.  Returns that top factor (the sensing objective grows
    with ``c``) together with a flag telling whether the scaled design
    satisfies every inequality within the solver's own normalized
    tolerance; ``False`` means scaling alone cannot close the rank-one
    gap.
    """
    total = float(np.trace(np.sum(beam_grams, axis=0) + an_cov).real)
    if total <= 0.0:
        return 1.0, False
    hi = problem.power_budget / total
    for l in range(problem.n_targets):
        g = problem.eaves_grams[l]
        traces = np.einsum("ij,kji->k", g, beam_grams).real
        an = float(np.trace(g @ an_cov).real)
        for k in range(problem.n_users):
            margin = float(
                traces[k]
                - problem.gamma_eaves_max * (traces.sum() - traces[k] + an)
            )
            if margin > 0.0:
                hi = min(hi, problem.gamma_eaves_max * problem.noise / margin)
    # The SINR floors only give lower bounds on the factor, so the top of
    # the interval is the best candidate; whether the floors actually
    # hold there is judged in the same normalized residual units the
    # solver itself is held to.  An absolute comparison would be
    # meaningless: active constraints balance received powers many
    # orders of magnitude above the noise floor, so their margins carry
    # cancellation error far larger than the noise-scale right-hand
    # side.
    feasible = violations(problem, hi * beam_grams, hi * an_cov) <= ACCEPT_TOL
    return hi, feasible


# ---------------------------------------------------------------------------
# problem dump (for cross-checking against external solvers)


def dump_problem(problem: SdpProblem, path: str) -> None:
    """Write the subproblem as labeled real/imag CSV blocks."""

    def write_matrix(handle, label: str, mat: np.ndarray) -> None:
        handle.write(f"# {label} real\n")
        for row in np.asarray(mat).real:
            handle.write(",".join(format(v, ".17g") for v in row) + "\n")
        handle.write(f"# {label} imag\n")
        for row in np.asarray(mat).imag:
            handle.write(",".join(format(v, ".17g") for v in row) + "\n")

    with open(path, "w", encoding="utf-8") as handle:
        handle.write("# beamforming subproblem dump\n")
        handle.write(
            f"# n_users={problem.n_users} n_targets={problem.n_targets} "
            f"n_tx={problem.n_tx}\n"
        )
        handle.write(
            f"# gamma_user_min={problem.gamma_user_min!r} "
            f"gamma_eaves_max={problem.gamma_eaves_max!r} "
            f"power_budget={problem.power_budget!r} noise={problem.noise!r}\n"
        )
        write_matrix(handle, "cost", problem.cost)
        for k, g in enumerate(problem.user_grams):
            write_matrix(handle, f"user_gram_{k}", g)
        for l, g in enumerate(problem.eaves_grams):
            write_matrix(handle, f"eaves_gram_{l}", g)
