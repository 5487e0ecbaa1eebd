r"""Figures of merit for a (channel realization, design) pair.

A *design* is the triple (scattering matrix, beamformer outer products,
artificial-noise covariance).  Everything here is linear scale; the
noise power defaults to 1 because the optimization layers feed in
noise-normalized Gram matrices.  dB conversion is the reporting
layer's job.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channels
from .numerics import unitarity_residual
from .scenario import Scenario


@dataclass(frozen=True)
class IsacDesign:
    """The decision variables of one solve.

    ``scatter`` is the M-by-M unitary scattering matrix (a diagonal
    unitary in the conventional-surface baseline, stored dense),
    ``beam_grams`` the per-stream beamformer outer products (K, J, J)
    and ``an_cov`` the artificial-noise covariance (J, J).
    """

    scatter: np.ndarray
    beam_grams: np.ndarray
    an_cov: np.ndarray

    def validate(self, power_budget: float) -> None:
        """Raise if the design leaves its feasible set.

        Checks unitarity of the scattering matrix (1e-8), the total
        transmit power against the budget (relative 1e-6), and that no
        covariance eigenvalue dips below ``-1e-9`` times its trace.
        """
        if unitarity_residual(self.scatter) > 1e-8:
            raise ValueError("scattering matrix is not unitary within 1e-8")
        total = float(np.trace(tx_covariance(self.beam_grams, self.an_cov)).real)
        if total > power_budget * (1.0 + 1e-6):
            raise ValueError("transmit power exceeds the budget")
        for mat in (*self.beam_grams, self.an_cov):
            tr = max(0.0, float(np.trace(mat).real))
            lam_min = float(np.linalg.eigvalsh((mat + mat.conj().T) / 2.0)[0])
            if lam_min < -1e-9 * max(tr, 1e-300):
                raise ValueError("covariance block has a negative eigenvalue")


def tx_covariance(beam_grams: np.ndarray, an_cov: np.ndarray) -> np.ndarray:
    """Transmit signal covariance: sum of beam outer products plus AN."""
    return np.sum(beam_grams, axis=0) + an_cov


def sinr(
    rx_gram: np.ndarray,
    beam_grams: np.ndarray,
    an_cov: np.ndarray,
    k: int,
    noise: float = 1.0,
) -> float:
    r"""SINR at the receiver with Gram ``rx_gram`` decoding stream ``k``.

    ``Tr[G Qbar_k]`` over interference from the other streams plus the
    artificial-noise contribution plus ``noise``.
    """
    powers = np.einsum("ij,kji->k", rx_gram, beam_grams).real
    an = np.trace(rx_gram @ an_cov).real
    interf = float(powers.sum() - powers[k])
    return max(0.0, float(powers[k])) / (max(0.0, interf) + max(0.0, an) + noise)


def capacity(gamma: float) -> float:
    """Shannon capacity ``log2(1 + gamma)`` in bits/s/Hz."""
    if gamma < 0:
        raise ValueError("SINR must be nonnegative")
    return float(np.log2(1.0 + gamma))


def secrecy_capacity(
    user_grams: np.ndarray,
    eaves_grams: np.ndarray,
    beam_grams: np.ndarray,
    an_cov: np.ndarray,
    noise: float = 1.0,
) -> float:
    """Worst-case secrecy capacity over all user/eavesdropper pairs.

    For every stream ``k`` and every eavesdropper ``l``, the capacity of
    user ``k`` minus the capacity of eavesdropper ``l`` decoding stream
    ``k``, clamped at zero; the minimum over all pairs is returned.
    """
    worst = np.inf
    for k in range(len(user_grams)):
        rate_user = capacity(sinr(user_grams[k], beam_grams, an_cov, k, noise))
        for l in range(len(eaves_grams)):
            rate_eaves = capacity(sinr(eaves_grams[l], beam_grams, an_cov, k, noise))
            worst = min(worst, max(0.0, rate_user - rate_eaves))
    return float(worst)


def beampattern(
    scn: Scenario,
    scatter: np.ndarray,
    bs_ris: np.ndarray,
    tx_cov: np.ndarray,
    azimuths: np.ndarray,
    elevation: float = 0.0,
) -> np.ndarray:
    """Reflected power toward each look azimuth (radians), shape of input.

    Power of the transmit covariance seen through the surface in the
    look direction; no path loss is applied (this is an aperture-side
    directivity profile).
    """
    azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
    look = np.stack(
        [
            channels.steering_planar(
                elevation, az, scn.m_a, scn.m_b, scn.spacing_ris, scn.wavelength
            )
            for az in azimuths
        ]
    )
    rows = look @ (scatter @ bs_ris)  # (n_az, J_T)
    vals = np.einsum("ij,jk,ik->i", rows, tx_cov, rows.conj()).real
    return np.maximum(vals, 0.0)


def reflected_power(sens_gram: np.ndarray, tx_cov: np.ndarray) -> float:
    """Power reflected by one target: ``Tr[Hbar_l R_v]`` (real, >= 0)."""
    return max(0.0, float(np.trace(sens_gram @ tx_cov).real))


def weighted_reflected_power(
    sens_grams: np.ndarray, weights: np.ndarray, tx_cov: np.ndarray
) -> float:
    """Weighted sum of per-target reflected powers (the design objective)."""
    return float(
        sum(w * reflected_power(g, tx_cov) for w, g in zip(weights, sens_grams))
    )
