r"""Penalized subproblem for the scattering matrix.

With the beamformers and the artificial-noise covariance frozen, the
scattering matrix is improved by minimizing

    J(X) = -f(X) + sum_i beta_i * g_i(X)

over unitary rotations ``X`` applied on top of the previous scattering
matrix: ``Psi = Psi_prev @ X``.  Here ``f`` is the weighted sum of
per-target reflected powers and the ``g_i`` encode the quality-of-
service constraints with ``g_i <= 0`` meaning "satisfied":

* user constraint (one per user ``k``): the user's SINR must reach the
  floor, ``g = gamma_min * (interference + AN + noise) - signal``;
* eavesdropper constraint (one per target/user pair): the SINR leaked
  to target ``l`` on stream ``k`` must stay below the cap,
  ``g = signal - gamma_max * (interference + AN + noise)``.

Every term is a quadratic form of one *incident row* (a path-loss
scaled surface-side channel propagated through ``Psi_prev``) with one
covariance matrix, which keeps evaluation and gradients at a handful of
small matrix products.  Gradients use the convention
``2 * d/d conj(X)`` so ``Re <grad, Y>`` is the directional derivative.

Rows are expected pre-scaled by ``sqrt(path_loss / noise_power)`` so
the noise term is exactly 1 (see :func:`build_subproblem`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet


@dataclass(frozen=True)
class ConstraintIndex:
    """Position of one constraint in the multiplier vector.

    Constraints are numbered ``i = 1 .. K(L+1)``: first the ``K`` user
    constraints (``user = i - 1``), then the eavesdropper pairs in
    target-major order — with ``j = i - K - 1``, target ``j // K`` and
    user ``j % K``.  This covers every (target, user) pair exactly once.
    """

    i: int                 # 1-based position
    kind: str              # "user" | "eavesdropper"
    user: int              # 0-based stream/user index
    target: int | None = None  # 0-based target index (eavesdropper kind)


def constraint_indices(n_users: int, n_targets: int) -> list[ConstraintIndex]:
    """All constraint indices in multiplier order."""
    out = [ConstraintIndex(k + 1, "user", k) for k in range(n_users)]
    for i in range(n_users + 1, n_users * (n_targets + 1) + 1):
        j = i - n_users - 1
        out.append(ConstraintIndex(i, "eavesdropper", j % n_users, j // n_users))
    return out


def update_duals(
    duals: np.ndarray, g_values: np.ndarray, steps: np.ndarray | float
) -> np.ndarray:
    """Projected subgradient update ``max(0, beta + step * g)``.

    Violated constraints (``g > 0``) gain weight, satisfied ones decay
    toward zero; ``steps`` may be scalar or per-constraint.
    """
    return np.maximum(0.0, duals + np.asarray(steps) * g_values)


class ScatterSubproblem:
    """Value/gradient oracle for the penalized scattering objective.

    Parameters
    ----------
    bs_ris:
        ``(M, J_T)`` BS-to-surface fading matrix.
    incident_rows:
        ``(K + 2L, M)`` stack of noise-normalized surface-side rows
        already propagated through the previous scattering matrix:
        users first, then targets on the eavesdropping path loss, then
        targets on the sensing path loss.
    """

    def __init__(
        self,
        bs_ris: np.ndarray,
        incident_rows: np.ndarray,
        n_users: int,
        n_targets: int,
        gamma_user_min: float,
        gamma_eaves_max: float,
        weights: np.ndarray,
        noise: float = 1.0,
    ):
        if incident_rows.shape[0] != n_users + 2 * n_targets:
            raise ValueError("expected K + 2L incident rows")
        self.bs_ris = bs_ris
        self.rows = incident_rows
        self.n_users = n_users
        self.n_targets = n_targets
        self.gamma_user_min = float(gamma_user_min)
        self.gamma_eaves_max = float(gamma_eaves_max)
        self.weights = np.asarray(weights, dtype=float)
        self.noise = float(noise)
        self.indices = constraint_indices(n_users, n_targets)

    # -- internal tables ---------------------------------------------------

    def _cov_stack(self, beam_grams: np.ndarray, an_cov: np.ndarray) -> np.ndarray:
        """Stack (Qbar_1 .. Qbar_K, R_z, R_v) along the first axis."""
        total = np.sum(beam_grams, axis=0) + an_cov
        return np.concatenate([beam_grams, an_cov[None], total[None]], axis=0)

    def _bs_rows(self, x: np.ndarray) -> np.ndarray:
        """Rows seen at the BS array: ``a_o @ X @ H`` for every node ``o``.

        A 1-D ``x`` is the diagonal of a diagonal rotation.
        """
        if x.ndim == 1:
            return (self.rows * x[None, :]) @ self.bs_ris
        return (self.rows @ x) @ self.bs_ris

    def _power_table(self, x, beam_grams, an_cov) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Quadratic forms ``Re(v W v^H)`` for every (row, covariance) pair."""
        covs = self._cov_stack(beam_grams, an_cov)
        v = self._bs_rows(x)
        table = np.einsum("oj,wjk,ok->ow", v, covs, v.conj()).real
        return table, v, covs

    def _coeffs_objective(self) -> np.ndarray:
        c = np.zeros((self.rows.shape[0], self.n_users + 2))
        for l in range(self.n_targets):
            c[self.n_users + self.n_targets + l, self.n_users + 1] = self.weights[l]
        return c

    def _coeffs_constraint(self, idx: ConstraintIndex) -> tuple[np.ndarray, float]:
        """Coefficient table and constant term of one constraint function."""
        n_u = self.n_users
        c = np.zeros((self.rows.shape[0], n_u + 2))
        if idx.kind == "user":
            row = idx.user
            c[row, :n_u] = self.gamma_user_min
            c[row, n_u] = self.gamma_user_min          # AN column
            c[row, idx.user] = -1.0
            return c, self.gamma_user_min * self.noise
        row = n_u + idx.target
        c[row, :n_u] = -self.gamma_eaves_max
        c[row, n_u] = -self.gamma_eaves_max
        c[row, idx.user] = 1.0
        return c, -self.gamma_eaves_max * self.noise

    def _coeffs_penalized(self, duals: np.ndarray) -> tuple[np.ndarray, float]:
        c = -self._coeffs_objective()
        const = 0.0
        for beta, idx in zip(duals, self.indices):
            ci, consti = self._coeffs_constraint(idx)
            c += beta * ci
            const += beta * consti
        return c, const

    def _grad_from_coeffs(self, x, beam_grams, an_cov, coeffs) -> np.ndarray:
        """Gradient ``2 sum_o a_o^H v_o W_eff_o H^H`` for a coefficient table."""
        _, v, covs = self._power_table(x, beam_grams, an_cov)
        w_eff = np.einsum("ow,wjk->ojk", coeffs, covs)
        back = np.einsum("oj,ojk->ok", v, w_eff) @ self.bs_ris.conj().T
        if x.ndim == 1:
            return 2.0 * np.sum(self.rows.conj() * back, axis=0)
        return 2.0 * (self.rows.conj().T @ back)

    # -- public surface ----------------------------------------------------

    def effective_rows(self, x: np.ndarray) -> np.ndarray:
        """Noise-normalized per-node channel rows at the BS array.

        Outer products of these rows are the Gram matrices the
        beamformer subproblem consumes; pass the identity (or
        ``ones(M)`` for a diagonal surface) for the current scattering
        matrix.
        """
        return self._bs_rows(x)

    def objective(self, x, beam_grams, an_cov) -> float:
        """Weighted sum of reflected powers at ``Psi_prev @ X`` (maximize)."""
        table, _, _ = self._power_table(x, beam_grams, an_cov)
        return float(np.sum(self._coeffs_objective() * table))

    def objective_grad(self, x, beam_grams, an_cov) -> np.ndarray:
        return self._grad_from_coeffs(x, beam_grams, an_cov, self._coeffs_objective())

    def constraints(self, x, beam_grams, an_cov) -> np.ndarray:
        """All constraint values ``g_i`` in multiplier order (``<= 0`` ok)."""
        table, _, _ = self._power_table(x, beam_grams, an_cov)
        out = np.empty(len(self.indices))
        for pos, idx in enumerate(self.indices):
            c, const = self._coeffs_constraint(idx)
            out[pos] = float(np.sum(c * table)) + const
        return out

    def constraint_grad(self, idx: ConstraintIndex, x, beam_grams, an_cov) -> np.ndarray:
        c, _ = self._coeffs_constraint(idx)
        return self._grad_from_coeffs(x, beam_grams, an_cov, c)

    def value(self, x, beam_grams, an_cov, duals: np.ndarray) -> float:
        """Penalized value ``-f + sum_i beta_i g_i``."""
        table, _, _ = self._power_table(x, beam_grams, an_cov)
        c, const = self._coeffs_penalized(duals)
        return float(np.sum(c * table)) + const

    def gradient(self, x, beam_grams, an_cov, duals: np.ndarray) -> np.ndarray:
        """Euclidean gradient of :meth:`value` (``2 d/d conj(X)``)."""
        c, _ = self._coeffs_penalized(duals)
        return self._grad_from_coeffs(x, beam_grams, an_cov, c)


def build_subproblem(
    chans: ChannelSet,
    psi_prev: np.ndarray,
    n_users: int,
    n_targets: int,
    gamma_user_min: float,
    gamma_eaves_max: float,
    weights: np.ndarray,
    noise_w: float,
) -> ScatterSubproblem:
    """Assemble the subproblem at the current scattering matrix.

    Surface-side rows are scaled by ``sqrt(path_loss / noise_w)`` and
    propagated through ``psi_prev`` once, so the rotation ``X`` is the
    only moving part afterwards.
    """
    scale_u = np.sqrt(chans.loss_user / noise_w)[:, None]
    scale_e = np.sqrt(chans.loss_target / noise_w)[:, None]
    scale_s = np.sqrt(chans.loss_sensing / noise_w)[:, None]
    rows = np.concatenate(
        [
            scale_u * chans.ris_user,
            scale_e * chans.ris_target,
            scale_s * chans.ris_target,
        ]
    )
    return ScatterSubproblem(
        bs_ris=chans.bs_ris,
        incident_rows=rows @ psi_prev,
        n_users=n_users,
        n_targets=n_targets,
        gamma_user_min=gamma_user_min,
        gamma_eaves_max=gamma_eaves_max,
        weights=weights,
        noise=1.0,
    )
