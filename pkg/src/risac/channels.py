r"""Channel synthesis: steering vectors, Rician fades, cascaded links.

One :class:`ChannelSet` holds a single realization of the static fading
state — the BS-to-surface matrix and the surface-to-node row vectors —
together with the cascaded path-loss factors.  End-to-end channels are
functions of the scattering matrix and are recomposed on demand with
:func:`cascade`.

Conventions: rows are receive-side vectors (``1 x M`` looking into the
surface, ``1 x J_T`` looking into the BS array); steering entries have
unit modulus with the first element as phase reference; fading matrices
are unit scale with path loss kept as separate linear factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import rand_complex
from .scenario import Scenario

FOUR_PI = 4.0 * math.pi


def steering_linear(
    theta: float, phi: float, spacing: float, n: int, wavelength: float
) -> np.ndarray:
    r"""Uniform linear array response, shape ``(n,)``.

    Entry ``i`` (0-based) is ``exp(-j 2 pi spacing / wavelength * i *
    cos(theta) sin(phi))`` for elevation ``theta`` and azimuth ``phi``.
    """
    if n < 1:
        raise ValueError("array size must be at least 1")
    phase = -2j * math.pi * spacing / wavelength * math.cos(theta) * math.sin(phi)
    return np.exp(phase * np.arange(n))


def steering_planar(
    theta: float, phi: float, m_a: int, m_b: int, spacing: float, wavelength: float
) -> np.ndarray:
    """Uniform planar array response: Kronecker product of two linear factors.

    The vertical factor scans the elevation ``theta`` (at zero azimuth
    slot) and the horizontal factor scans ``phi`` at that elevation;
    the result has length ``m_a * m_b`` and unit-modulus entries.
    """
    vert = steering_linear(0.0, theta, spacing, m_a, wavelength)
    horz = steering_linear(theta, phi, spacing, m_b, wavelength)
    return np.kron(vert, horz)


def fspl_comm(scn: Scenario, d_rx: float) -> float:
    r"""Cascaded two-hop free-space path loss of a communication link.

    ``G_tx * G_rx * spacing^4 / (d_SR^2 * d_rx^2 * (4 pi)^2)`` for a
    node at distance ``d_rx`` from the surface.
    """
    if d_rx <= 0:
        raise ValueError("distance must be positive")
    return (
        scn.gain_tx
        * scn.gain_rx
        * scn.spacing_ris**4
        / (scn.d_sr**2 * d_rx**2 * FOUR_PI**2)
    )


def fspl_sens(scn: Scenario, d_target: float, rcs: float) -> float:
    """Sensing-path loss up to the reflection off a target.

    Single ``4 pi`` spreading term and no receive antenna gain — the
    echo terminates on the target's radar cross-section ``rcs``.
    """
    if d_target <= 0:
        raise ValueError("distance must be positive")
    return scn.gain_tx * scn.spacing_ris**4 * rcs / (scn.d_sr**2 * d_target**2 * FOUR_PI)


def synth_rician(
    los: np.ndarray, k_factor: float, rng: np.random.Generator
) -> np.ndarray:
    """Mix a deterministic component with i.i.d. unit-variance scatter.

    ``sqrt(K/(K+1)) * los + sqrt(1/(K+1)) * nlos``; ``k_factor`` may be
    ``inf`` (pure line of sight, no randomness consumed) or ``0`` (pure
    scatter).
    """
    if k_factor < 0:
        raise ValueError("Rician factor must be nonnegative")
    if math.isinf(k_factor):
        return np.array(los, dtype=complex, copy=True)
    nlos = rand_complex(rng, *np.shape(los))
    return math.sqrt(k_factor / (k_factor + 1.0)) * los + math.sqrt(
        1.0 / (k_factor + 1.0)
    ) * nlos


def cascade(
    loss: float, row: np.ndarray, scatter: np.ndarray, bs_ris: np.ndarray
) -> np.ndarray:
    """End-to-end row vector ``sqrt(loss) * row @ scatter @ bs_ris``.

    ``row`` is the node's ``1 x M`` surface-side channel, ``scatter``
    the ``M x M`` scattering matrix, ``bs_ris`` the ``M x J_T`` BS-to-
    surface matrix; the result is a ``1 x J_T`` row (returned 1-D).
    """
    row = np.asarray(row).reshape(-1)
    if row.size != scatter.shape[0] or scatter.shape[1] != bs_ris.shape[0]:
        raise ValueError("cascade dimension mismatch")
    return math.sqrt(loss) * (row @ scatter @ bs_ris)


def gram(row: np.ndarray) -> np.ndarray:
    """Rank-one Gram matrix ``row^H row`` of a channel row vector."""
    row = np.asarray(row).reshape(-1)
    return np.outer(row.conj(), row)


@dataclass(frozen=True)
class ChannelSet:
    """One realization of all static channel state for a scenario."""

    bs_ris: np.ndarray        # (M, J_T) unit-scale fading, S -> R
    ris_user: np.ndarray      # (K, M) unit-scale fading rows, R -> D_k
    ris_target: np.ndarray    # (L, M) pure line-of-sight rows, R -> T_l
    loss_user: np.ndarray     # (K,) cascaded path loss, communication
    loss_target: np.ndarray   # (L,) cascaded path loss, eavesdropping
    loss_sensing: np.ndarray  # (L,) path loss of the sensing reflection


def bs_ris_los(scn: Scenario) -> np.ndarray:
    """Rank-one line-of-sight component of the BS-to-surface matrix."""
    at_ris = steering_planar(
        0.0, scn.az_ris, scn.m_a, scn.m_b, scn.spacing_ris, scn.wavelength
    )
    at_bs = steering_linear(0.0, scn.az_ris, scn.spacing_bs, scn.n_tx, scn.wavelength)
    return np.outer(at_ris, at_bs)


def node_row_los(scn: Scenario, azimuth: float) -> np.ndarray:
    """Line-of-sight surface-side row for a node at the given bearing."""
    return steering_planar(
        0.0, azimuth, scn.m_a, scn.m_b, scn.spacing_ris, scn.wavelength
    )


def realize(scn: Scenario, rng: np.random.Generator) -> ChannelSet:
    """Draw one channel realization.

    Draw order (fixed for reproducibility): BS-to-surface scatter first,
    then the user rows in index order.  Target rows are deterministic
    line-of-sight and consume no randomness.
    """
    bs_ris = synth_rician(bs_ris_los(scn), scn.rician_bs_ris, rng)
    ris_user = np.stack(
        [
            synth_rician(node_row_los(scn, az), scn.rician_ris_user, rng)
            for az in scn.az_users
        ]
    )
    ris_target = np.stack([node_row_los(scn, az) for az in scn.az_targets])
    return ChannelSet(
        bs_ris=bs_ris,
        ris_user=ris_user,
        ris_target=ris_target,
        loss_user=np.array([fspl_comm(scn, d) for d in scn.d_r_user]),
        loss_target=np.array([fspl_comm(scn, d) for d in scn.d_r_target]),
        loss_sensing=np.array(
            [fspl_sens(scn, d, rcs) for d, rcs in zip(scn.d_r_target, scn.rcs)]
        ),
    )
