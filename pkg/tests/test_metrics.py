"""Figures of merit: SINR, capacities, beampattern, design validation."""

import numpy as np
import pytest

from risac import channels, metrics
from risac.numerics import rand_complex, rand_psd, rand_unitary


def _random_design(rng, n_tx, n_streams, power=1.0):
    beams = np.stack(
        [channels.gram(rand_complex(rng, n_tx)) for _ in range(n_streams)]
    )
    an = rand_psd(rng, n_tx, rank=2)
    total = np.trace(np.sum(beams, axis=0) + an).real
    return beams * power / total, an * power / total


def test_tx_covariance_sum(rng):
    beams, an = _random_design(rng, 4, 2)
    cov = metrics.tx_covariance(beams, an)
    assert np.allclose(cov, beams[0] + beams[1] + an)


def test_sinr_oracle(rng):
    # hand-rolled SINR from explicit powers
    beams, an = _random_design(rng, 4, 3)
    g = channels.gram(rand_complex(rng, 4))
    k = 1
    powers = [float(np.trace(g @ q).real) for q in beams]
    an_pow = float(np.trace(g @ an).real)
    noise = 0.7
    oracle = powers[k] / (sum(powers) - powers[k] + an_pow + noise)
    assert metrics.sinr(g, beams, an, k, noise) == pytest.approx(oracle, rel=1e-12)


def test_sinr_clamps_negative_roundoff(rng):
    g = np.zeros((3, 3), dtype=complex)
    beams = np.stack([np.eye(3, dtype=complex)])
    assert metrics.sinr(g, beams, np.zeros((3, 3)), 0) == 0.0


def test_capacity_values():
    assert metrics.capacity(0.0) == 0.0
    assert metrics.capacity(1.0) == pytest.approx(1.0)
    assert metrics.capacity(3.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        metrics.capacity(-0.1)


def test_secrecy_capacity_worst_pair(rng):
    beams, an = _random_design(rng, 5, 2)
    users = np.stack([channels.gram(rand_complex(rng, 5)) for _ in range(2)])
    eaves = np.stack([channels.gram(rand_complex(rng, 5)) for _ in range(2)])
    worst = np.inf
    for k in range(2):
        rate_u = metrics.capacity(metrics.sinr(users[k], beams, an, k))
        for l in range(2):
            rate_e = metrics.capacity(metrics.sinr(eaves[l], beams, an, k))
            worst = min(worst, max(0.0, rate_u - rate_e))
    assert metrics.secrecy_capacity(users, eaves, beams, an) == pytest.approx(worst)


def test_secrecy_capacity_clamped_at_zero(rng):
    # an eavesdropper with a much stronger channel drives the difference negative
    beams, an = _random_design(rng, 4, 1)
    row = rand_complex(rng, 4)
    users = np.stack([channels.gram(row)])
    eaves = np.stack([channels.gram(10.0 * row)])
    assert metrics.secrecy_capacity(users, eaves, beams, an) == 0.0


# -- beampattern -------------------------------------------------------------


def test_beampattern_nonnegative_and_shaped(tiny_scenario, tiny_channels, rng):
    scn = tiny_scenario
    beams, an = _random_design(rng, scn.n_tx, scn.n_users)
    cov = metrics.tx_covariance(beams, an)
    psi = rand_unitary(rng, scn.n_elems)
    az = np.radians(np.linspace(-90, 90, 19))
    pattern = metrics.beampattern(scn, psi, tiny_channels.bs_ris, cov, az)
    assert pattern.shape == (19,)
    assert np.all(pattern >= 0.0)


def test_beampattern_oracle_single_direction(tiny_scenario, tiny_channels, rng):
    scn = tiny_scenario
    beams, an = _random_design(rng, scn.n_tx, scn.n_users)
    cov = metrics.tx_covariance(beams, an)
    psi = rand_unitary(rng, scn.n_elems)
    az = -0.35
    look = channels.steering_planar(
        0.0, az, scn.m_a, scn.m_b, scn.spacing_ris, scn.wavelength
    )
    row = look @ psi @ tiny_channels.bs_ris
    oracle = float((row @ cov @ row.conj()).real)
    val = metrics.beampattern(scn, psi, tiny_channels.bs_ris, cov, np.array([az]))
    assert val[0] == pytest.approx(oracle, rel=1e-12)


def test_reflected_power_matches_trace(rng):
    g = rand_psd(rng, 4)
    cov = rand_psd(rng, 4)
    assert metrics.reflected_power(g, cov) == pytest.approx(
        float(np.trace(g @ cov).real)
    )


def test_weighted_reflected_power(rng):
    grams = np.stack([rand_psd(rng, 3), rand_psd(rng, 3)])
    cov = rand_psd(rng, 3)
    weights = np.array([0.25, 0.75])
    oracle = sum(
        w * np.trace(g @ cov).real for w, g in zip(weights, grams)
    )
    assert metrics.weighted_reflected_power(grams, weights, cov) == pytest.approx(
        float(oracle)
    )


# -- design validation -------------------------------------------------------


def test_validate_accepts_feasible_design(rng):
    beams, an = _random_design(rng, 4, 2, power=0.9)
    design = metrics.IsacDesign(
        scatter=rand_unitary(rng, 6), beam_grams=beams, an_cov=an
    )
    design.validate(power_budget=1.0)


def test_validate_rejects_power_overrun(rng):
    beams, an = _random_design(rng, 4, 2, power=1.1)
    design = metrics.IsacDesign(
        scatter=rand_unitary(rng, 6), beam_grams=beams, an_cov=an
    )
    with pytest.raises(ValueError, match="budget"):
        design.validate(power_budget=1.0)


def test_validate_rejects_nonunitary_scatter(rng):
    beams, an = _random_design(rng, 4, 2)
    design = metrics.IsacDesign(
        scatter=1.5 * rand_unitary(rng, 6), beam_grams=beams, an_cov=an
    )
    with pytest.raises(ValueError, match="unitary"):
        design.validate(power_budget=2.0)


def test_validate_rejects_indefinite_block(rng):
    beams, an = _random_design(rng, 4, 2, power=0.5)
    an = an - 0.2 * np.trace(an).real * np.eye(4)
    design = metrics.IsacDesign(
        scatter=rand_unitary(rng, 6), beam_grams=beams, an_cov=an
    )
    with pytest.raises(ValueError, match="eigenvalue"):
        design.validate(power_budget=1.0)
