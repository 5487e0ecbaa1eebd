r"""Alternating optimization driver.

One outer iteration alternates three moves, starting from a
zero-forcing transmit design and a scattering matrix whose first column
is aligned with the array-to-surface steering direction:

1. Riemannian conjugate gradient improves a unitary rotation ``X`` of
   the scattering matrix against the penalized objective (beamformers
   frozen), and the surface is updated ``Psi <- Psi @ X``.
2. The beamformer/AN subproblem is re-solved at the new surface by
   semidefinite relaxation, followed by rank-one extraction and a
   feasibility-restoring rescale.
3. The constraint multipliers take one projected-subgradient step.

The loop declares convergence when the sensing objective's relative
change stays below ``plateau_rel`` for ``plateau_len`` consecutive
iterations.  A conventional diagonal surface ("dris" mode) runs the
same loop with the rotation restricted to unit-modulus phase vectors.

All SINR bookkeeping is noise-normalized (noise power 1); transmit
powers remain in watts throughout.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import lagrangian, metrics, sdp
from .channels import ChannelSet, gram, steering_planar
from .manifold import CircleManifold, RcgOptions, UnitaryManifold, rcg_minimize
from .metrics import IsacDesign
from .numerics import unitary_completion
from .scenario import Scenario

log = logging.getLogger(__name__)

MODES = ("bdris", "dris")


@dataclass
class AoOptions:
    """Knobs of the outer loop and its two inner solvers."""

    max_outer: int = 30
    rcg: RcgOptions = field(default_factory=RcgOptions)
    sdp: sdp.IpmOptions = field(default_factory=sdp.IpmOptions)
    dual_step: float = 0.1
    dual_init: float = 1.0
    plateau_rel: float = 0.01
    plateau_len: int = 3
    early_stop: bool = True

    def __post_init__(self) -> None:
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.plateau_len < 1:
            raise ValueError("plateau_len must be at least 1")

    @classmethod
    def from_config(cls, config: dict) -> "AoOptions":
        """Build options from the flat configuration mapping."""
        return cls(
            max_outer=int(config["G_it"]),
            rcg=RcgOptions(
                max_steps=int(config["N_it"]),
                grad_norm_tol=float(config["grad_tol"]),
                armijo_c=float(config["armijo_c"]),
                armijo_shrink=float(config["armijo_shrink"]),
                armijo_init_step=float(config["armijo_init_step"]),
            ),
            dual_step=float(config["dual_step"]),
            dual_init=float(config["dual_init"]),
            plateau_rel=float(config["plateau_rel"]),
            plateau_len=int(config["plateau_len"]),
            early_stop=bool(config["early_stop"]),
        )


@dataclass
class IterationRecord:
    """Everything observable about one outer iteration."""

    m: int                       # 1-based outer iteration index
    objective: float             # weighted reflected power, noise-normalized
    secrecy: float               # achieved worst-case secrecy capacity
    constraint_values: np.ndarray  # g_i at the new surface and repaired design
    duals: np.ndarray            # multipliers after this iteration's update
    tx_power: float              # Tr[R_v] in watts
    rcg_status: str
    rcg_steps: int
    rcg_cost: float              # final penalized value of the inner solve
    sdp_status: str
    sdp_iterations: int
    repair_factor: float
    repair_ok: bool
    monotone_ok: bool            # soft check: SDP value vs. previous design


@dataclass
class SolveReport:
    """Full trace of one alternating solve."""

    status: str                  # converged | max-iters | degraded |
    #                              infeasible | numerical-failure
    mode: str
    iterations: list
    design: IsacDesign
    plateau_iteration: int | None
    wall_time: float

    @property
    def objective_trace(self) -> np.ndarray:
        return np.array([rec.objective for rec in self.iterations])

    @property
    def secrecy_trace(self) -> np.ndarray:
        return np.array([rec.secrecy for rec in self.iterations])


def init_design(
    scn: Scenario, chans: ChannelSet, mode: str = "bdris"
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Starting point: aligned surface, zero-forcing beams, no AN.

    The scattering matrix is a unitary completion of the surface-side
    steering vector toward the transmit array (its diagonal phase
    profile in "dris" mode).  Beams are the zero-forcing directions of
    the cascaded user channels at that surface, with a common power
    scale meeting the budget with equality; the AN covariance starts
    at zero.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if scn.n_users > scn.n_tx:
        raise ValueError("zero-forcing needs at least as many antennas as users")
    incident = steering_planar(
        0.0, scn.az_ris, scn.m_a, scn.m_b, scn.spacing_ris, scn.wavelength
    )
    if mode == "bdris":
        psi0 = unitary_completion(incident)
    else:
        psi0 = np.diag(incident / np.abs(incident))

    rows = np.sqrt(chans.loss_user)[:, None] * (
        chans.ris_user @ psi0 @ chans.bs_ris
    )
    gram_users = rows @ rows.conj().T
    if np.linalg.cond(gram_users) > 1e12:
        raise ValueError("cascaded user channels are rank deficient")
    v_zf = rows.conj().T @ np.linalg.inv(gram_users)
    beam = np.stack([np.outer(v_zf[:, k], v_zf[:, k].conj()) for k in range(scn.n_users)])
    total = float(np.trace(np.sum(beam, axis=0)).real)
    beam *= scn.power_budget / total
    an_cov = np.zeros((scn.n_tx, scn.n_tx), dtype=complex)
    return psi0, beam, an_cov


def _plateaued(series: list, rel: float, length: int) -> bool:
    """True when the last ``length`` relative changes are all below ``rel``."""
    if len(series) < length + 1:
        return False
    tail = np.asarray(series[-(length + 1):])
    prev = np.maximum(np.abs(tail[:-1]), 1e-30)
    return bool(np.all(np.abs(np.diff(tail)) / prev < rel))


class _PriceTrend:
    """Extrapolates persistently rising user-floor prices.

    The beamformer stage prices its constraints exactly, but only at
    the current surface.  While the surface still has far to rotate,
    the price of a tightening user floor grows geometrically from one
    outer iteration to the next, and a rotation penalized at today's
    price overshoots the floor it should have respected tomorrow — the
    loop then spends many iterations grinding the overshoot back.
    Extrapolating along the observed growth (a smoothed log-ratio of
    consecutive prices, amplified ``LOOKAHEAD`` steps forward, capped
    at ``MAX_BOOST``) lets the penalty anticipate where the price is
    heading instead of trailing it.

    Three gates keep the extrapolation from doing harm.  It never
    touches leakage-cap prices: the eavesdroppers sit on the sensing
    targets, so overpricing leakage directly fights the objective.  It
    waits for ``PERSISTENCE`` consecutive rises, so one-off re-pricing
    spikes at active-set changes pass through unamplified.  And it
    switches off once the objective's smoothed relative gain drops
    below ``MIN_MOMENTUM``, leaving the endgame to the exact prices.
    """

    LOOKAHEAD = 5.0      # extrapolation horizon, in outer iterations
    MAX_BOOST = 8.0      # cap on the amplification factor
    PERSISTENCE = 3      # consecutive rises before extrapolation engages
    MIN_MOMENTUM = 0.02  # smoothed relative objective gain keeping it live
    SMOOTHING = 0.3      # EMA weight of the newest observation

    def __init__(self, prices: np.ndarray, n_users: int) -> None:
        self._prev = prices.copy()
        self._trend = np.zeros(prices.shape[0])
        self._streak = np.zeros(prices.shape[0], dtype=int)
        self._user = np.zeros(prices.shape[0], dtype=bool)
        self._user[:n_users] = True
        self._momentum = 1.0
        self._objective: float | None = None

    def anticipate(self, prices: np.ndarray, objective: float) -> np.ndarray:
        """Amplify ``prices`` along their growth trend; return the result."""
        if self._objective is not None:
            gain = (objective - self._objective) / abs(self._objective)
            self._momentum = (
                (1.0 - self.SMOOTHING) * self._momentum + self.SMOOTHING * gain
            )
        self._objective = objective
        ratio = prices / np.maximum(self._prev, 1e-12)
        self._streak = np.where(ratio > 1.05, self._streak + 1, 0)
        self._trend = (1.0 - self.SMOOTHING) * self._trend + self.SMOOTHING * np.log(
            np.clip(ratio, 0.25, 4.0)
        )
        self._prev = prices.copy()
        boost = np.minimum(
            np.exp(np.maximum(self._trend, 0.0) * self.LOOKAHEAD), self.MAX_BOOST
        )
        boost[~self._user] = 1.0
        boost[self._streak < self.PERSISTENCE] = 1.0
        if self._momentum <= self.MIN_MOMENTUM:
            boost[:] = 1.0
        return prices * boost


def run(
    scn: Scenario,
    chans: ChannelSet,
    opts: AoOptions | None = None,
    mode: str = "bdris",
) -> SolveReport:
    """Run the alternating solve on one channel realization.

    Aborts with status ``infeasible`` (with the partial trace) when the
    beamformer subproblem has no solution at some surface, and with
    ``numerical-failure`` when its solver fails without an
    infeasibility certificate.  A run whose final secrecy capacity
    falls more than 0.05 bits/s/Hz short of the guaranteed floor is
    reported ``degraded``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    t0 = time.perf_counter()
    opts = opts or AoOptions.from_config(scn.config)
    n_elems, n_users, n_targets = scn.n_elems, scn.n_users, scn.n_targets

    psi, beam, an_cov = init_design(scn, chans, mode)
    if mode == "bdris":
        manifold = UnitaryManifold(n_elems)
        ident = np.eye(n_elems, dtype=complex)
    else:
        manifold = CircleManifold(n_elems)
        ident = np.ones(n_elems, dtype=complex)

    indices = lagrangian.constraint_indices(n_users, n_targets)
    caps = np.array(
        [
            scn.gamma_user_min if idx.kind == "user" else scn.gamma_eaves_max
            for idx in indices
        ]
    )

    def make_subproblem(scatter: np.ndarray) -> lagrangian.ScatterSubproblem:
        return lagrangian.build_subproblem(
            chans,
            scatter,
            n_users,
            n_targets,
            scn.gamma_user_min,
            scn.gamma_eaves_max,
            scn.weights,
            scn.noise_w,
        )

    def stage_grams(sub: lagrangian.ScatterSubproblem):
        rows_eff = sub.effective_rows(ident)
        user_grams = np.stack([gram(rows_eff[k]) for k in range(n_users)])
        eaves_grams = np.stack(
            [gram(rows_eff[n_users + l]) for l in range(n_targets)]
        )
        sens_grams = np.stack(
            [gram(rows_eff[n_users + n_targets + l]) for l in range(n_targets)]
        )
        return user_grams, eaves_grams, sens_grams

    def stage_solve(grams):
        user_grams, eaves_grams, sens_grams = grams
        problem = sdp.build_subproblem(
            user_grams,
            eaves_grams,
            sens_grams,
            scn.weights,
            scn.gamma_user_min,
            scn.gamma_eaves_max,
            scn.power_budget,
        )
        return problem, sdp.solve_sdp(problem, opts.sdp)

    # Price the constraints before the first rotation: one beamformer
    # solve at the starting surface replaces the zero-forcing guess with
    # the stage-optimal design and, crucially, yields the multipliers of
    # the active constraints.  Seeding the rotation penalty with those
    # prices (instead of hand-scaled constants) makes the penalized
    # subproblem share its stationary point with the constrained one, so
    # the alternation settles instead of orbiting: a unit of constraint
    # slack is worth exactly what the beamformer stage would pay for it.
    sub = make_subproblem(psi)
    grams = stage_grams(sub)
    problem, sol = stage_solve(grams)
    if sol.status != "optimal":
        log.warning("beamformer subproblem %s at initialization", sol.status)
        return SolveReport(
            status=sol.status,
            mode=mode,
            iterations=[],
            design=IsacDesign(scatter=psi, beam_grams=beam, an_cov=an_cov),
            plateau_iteration=None,
            wall_time=time.perf_counter() - t0,
        )
    rank_one = np.stack([sdp.extract_rank_one(q)[0] for q in sol.beam_grams])
    factor, _ = sdp.repair_scale(problem, rank_one, sol.an_cov)
    beam = factor * rank_one
    an_cov = factor * sol.an_cov
    duals = opts.dual_init * sol.duals[:-1]
    price_trend = _PriceTrend(sol.duals[:-1], n_users)

    # Ascent steps per the stated convention: 0.1 per unit constraint
    # value, scaled so user and leakage rows move comparably.  On top of
    # the re-pricing these are small corrections; the re-pricing carries
    # the real adaptation.
    dual_steps = opts.dual_step / caps
    # The rotation solver's gradient tolerance is specified in units
    # where the objective has magnitude one; rescale it to this
    # instance.  Stopping the inner descent far from stationarity makes
    # every outer iteration inject a fresh half-converged rotation and
    # the outer loop never settles.
    f_scale = abs(sub.objective(ident, beam, an_cov)) + 1e-300
    rcg_opts = replace(opts.rcg, grad_norm_tol=opts.rcg.grad_norm_tol * f_scale)
    records: list = []
    series: list = []
    plateau_iter: int | None = None
    status: str | None = None

    for m in range(1, opts.max_outer + 1):
        # The rotation is measured against the freshly rebuilt scatter, so
        # the previous outer solution corresponds to the identity here;
        # restarting at the previous rotation would double it.
        rcg_res = rcg_minimize(
            lambda x: sub.value(x, beam, an_cov, duals),
            lambda x: sub.gradient(x, beam, an_cov, duals),
            ident,
            manifold,
            rcg_opts,
        )
        x_m = rcg_res.x
        psi = psi @ x_m if mode == "bdris" else psi * x_m[None, :]

        sub = make_subproblem(psi)
        grams = stage_grams(sub)
        user_grams, eaves_grams, sens_grams = grams
        problem, sol = stage_solve(grams)
        if sol.status != "optimal":
            status = sol.status  # infeasible | numerical-failure
            log.warning("beamformer subproblem %s at iteration %d", sol.status, m)
            break

        # soft monotonicity check: the previous repaired design is a feasible
        # candidate at the new surface only up to the rank-one gap, so a
        # decrease is logged rather than fatal.
        prev_value = metrics.weighted_reflected_power(
            sens_grams, scn.weights, metrics.tx_covariance(beam, an_cov)
        )
        monotone_ok = sol.objective >= prev_value - 1e-6 * (1.0 + abs(prev_value))
        if not monotone_ok:
            # Transient decreases are expected while anticipated prices
            # overshoot; the plateau check is what declares convergence.
            log.info(
                "objective decreased at iteration %d: %.6g -> %.6g",
                m,
                prev_value,
                sol.objective,
            )

        rank_one = np.stack(
            [sdp.extract_rank_one(q)[0] for q in sol.beam_grams]
        )
        factor, repair_ok = sdp.repair_scale(problem, rank_one, sol.an_cov)
        beam = factor * rank_one
        an_cov = factor * sol.an_cov
        if not repair_ok:
            log.warning("feasibility repair fell short at iteration %d", m)

        tx_cov = metrics.tx_covariance(beam, an_cov)
        objective = metrics.weighted_reflected_power(sens_grams, scn.weights, tx_cov)
        secrecy = metrics.secrecy_capacity(user_grams, eaves_grams, beam, an_cov)
        g_vals = sub.constraints(ident, beam, an_cov)

        # Duals last: re-price from the beamformer stage's multipliers,
        # anticipate along their growth trend, then take the conventional
        # projected-subgradient step on the repaired design's constraint
        # values.  The correction nudges prices of constraints the repair
        # left tight; re-pricing does the heavy lifting.
        duals = lagrangian.update_duals(
            price_trend.anticipate(sol.duals[:-1], objective), g_vals, dual_steps
        )

        records.append(
            IterationRecord(
                m=m,
                objective=objective,
                secrecy=secrecy,
                constraint_values=g_vals,
                duals=duals.copy(),
                tx_power=float(np.trace(tx_cov).real),
                rcg_status=rcg_res.status,
                rcg_steps=rcg_res.steps,
                rcg_cost=rcg_res.cost,
                sdp_status=sol.status,
                sdp_iterations=sol.iterations,
                repair_factor=factor,
                repair_ok=repair_ok,
                monotone_ok=monotone_ok,
            )
        )
        series.append(objective)
        if plateau_iter is None and _plateaued(series, opts.plateau_rel, opts.plateau_len):
            plateau_iter = m
            if opts.early_stop:
                break

    scatter = psi
    design = IsacDesign(scatter=scatter, beam_grams=beam, an_cov=an_cov)
    if status is None:
        status = "converged" if plateau_iter is not None else "max-iters"
        if records and records[-1].secrecy < scn.secrecy_floor - 0.05:
            status = "degraded"
        if records and not records[-1].repair_ok:
            status = "degraded"
    return SolveReport(
        status=status,
        mode=mode,
        iterations=records,
        design=design,
        plateau_iteration=plateau_iter,
        wall_time=time.perf_counter() - t0,
    )
