r"""Batch experiment runner.

Each preset sweeps one experiment axis (SINR floor, element count,
antenna count, objective weights, target offset, leakage cap) over a
number of Monte-Carlo channel trials and writes

* one CSV per preset (RFC-4180, header row, ``.`` decimal separator)
  holding trial means next to the retained per-trial columns, and
* ``manifest.json`` with the resolved configuration, the seed scheme,
  per-trial statuses and wall times, and a SHA-256 hash of every CSV.

Trial ``t`` of every sweep cell draws its channels from
``numpy.random.default_rng([seed, t])``, so cells are trial-paired:
the same trial index sees the same fading across sweep values with
equal array sizes.  Reported powers are de-normalized to dBm; rerunning
with the manifest's seed and config reproduces byte-identical CSVs.

Exit codes: 0 all runs healthy, 1 at least one run ended degraded,
infeasible, or in numerical failure, 2 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, ao, channels, lagrangian, metrics, sdp
from .scenario import (
    ConfigError,
    build_scenario,
    load_config,
    resolve_config,
    watt_to_dbm,
)

log = logging.getLogger(__name__)

PRESETS = (
    "fig1-convergence",
    "fig2-beampattern",
    "fig3-antennas",
    "fig4-alpha",
    "fig5-secrecy",
    "fig6-offset",
    "fig7-tradeoff",
)

DEFAULT_TRIALS = {
    "fig1-convergence": 20,
    "fig2-beampattern": 20,
    "fig3-antennas": 10,
    "fig4-alpha": 5,
    "fig5-secrecy": 10,
    "fig6-offset": 5,
    "fig7-tradeoff": 5,
}

#: planar factorizations used when a preset sweeps the element count
ELEMENT_GRIDS = {36: (6, 6), 48: (8, 6), 60: (10, 6), 64: (8, 8), 72: (9, 8)}

_POWER_FLOOR_W = 1e-30


def _elements(m: int) -> dict:
    m_a, m_b = ELEMENT_GRIDS[m]
    return {"M_a": m_a, "M_b": m_b}


def _dbm(norm_power: float, noise_w: float) -> float:
    """De-normalize a noise-normalized power and convert to dBm."""
    return watt_to_dbm(max(norm_power * noise_w, _POWER_FLOOR_W))


def run_trial(
    overrides: dict,
    seed: int,
    trial: int,
    mode: str,
    beampattern_deg: list | None = None,
) -> dict:
    """One Monte-Carlo run; returns a plain-dict payload (pickles cleanly)."""
    config = resolve_config(overrides)
    scn = build_scenario(config)
    rng = np.random.default_rng([seed, trial])
    chans = channels.realize(scn, rng)
    report = ao.run(scn, chans, mode=mode)

    design = report.design
    tx_cov = metrics.tx_covariance(design.beam_grams, design.an_cov)
    sub = lagrangian.build_subproblem(
        chans,
        design.scatter,
        scn.n_users,
        scn.n_targets,
        scn.gamma_user_min,
        scn.gamma_eaves_max,
        scn.weights,
        scn.noise_w,
    )
    rows_eff = sub.effective_rows(np.eye(scn.n_elems, dtype=complex))
    vs_dbm = [
        _dbm(
            metrics.reflected_power(
                channels.gram(rows_eff[scn.n_users + scn.n_targets + l]), tx_cov
            ),
            scn.noise_w,
        )
        for l in range(scn.n_targets)
    ]

    payload = {
        "status": report.status,
        "plateau_iteration": report.plateau_iteration,
        "wall_time": report.wall_time,
        "objective_dbm_trace": [
            _dbm(v, scn.noise_w) for v in report.objective_trace
        ],
        "secrecy_trace": [float(s) for s in report.secrecy_trace],
        "vs_dbm": vs_dbm,
        "tx_power_w": float(np.trace(tx_cov).real),
        "c_th": scn.secrecy_floor,
    }
    payload["objective_dbm"] = (
        payload["objective_dbm_trace"][-1] if payload["objective_dbm_trace"] else None
    )
    payload["secrecy"] = (
        payload["secrecy_trace"][-1] if payload["secrecy_trace"] else None
    )
    if beampattern_deg is not None:
        pattern = metrics.beampattern(
            scn,
            design.scatter,
            chans.bs_ris,
            tx_cov,
            np.radians(np.asarray(beampattern_deg)),
        )
        payload["beampattern_db"] = [
            10.0 * math.log10(max(float(v), _POWER_FLOOR_W)) for v in pattern
        ]
    return payload


def _run_trial_star(job: tuple) -> dict:
    return run_trial(*job)


def _run_cells(cells: list, seed: int, trials: int, jobs: int) -> list:
    """Run ``trials`` per cell; returns payload lists in cell order.

    ``cells`` holds ``(label, overrides, mode, beampattern_deg)``.
    Execution order never leaks into the output: results are keyed by
    (cell, trial).
    """
    tasks = [
        (overrides, seed, trial, mode, pattern)
        for (_, overrides, mode, pattern) in cells
        for trial in range(trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            flat = list(pool.map(_run_trial_star, tasks))
    else:
        flat = [_run_trial_star(task) for task in tasks]
    return [flat[i * trials : (i + 1) * trials] for i in range(len(cells))]


# ---------------------------------------------------------------------------
# CSV plumbing


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".10g")


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _mean(values: list) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _trace_value(payload: dict, key: str, idx: int) -> float | None:
    trace = payload[key]
    return trace[idx] if idx < len(trace) else None


# ---------------------------------------------------------------------------
# presets


def _preset_cells(preset: str, base: dict, mode_flag: str | None) -> tuple[list, dict]:
    """Cells of one preset plus its CSV layout description.

    Returns ``(cells, layout)`` where each cell is ``(label, overrides,
    mode, beampattern_deg)`` and ``layout`` carries what the row builder
    needs.
    """
    mode = mode_flag or "bdris"

    def cell(label: str, cell_overrides: dict, cell_mode: str = mode, pattern=None):
        merged = dict(base)
        merged.update(cell_overrides)
        return (label, merged, cell_mode, pattern)

    if preset == "fig1-convergence":
        gammas = [8.0, 16.0, 24.0]
        cells = [
            cell(f"gD{g:g}", {**_elements(36), "gamma_D_min_dB": g, "early_stop": False})
            for g in gammas
        ]
        return cells, {"kind": "trace", "gammas": gammas}

    if preset == "fig2-beampattern":
        gammas = [8.0, 16.0, 24.0]
        azimuths = [round(-90.0 + 0.5 * i, 1) for i in range(361)]
        modes = [mode_flag] if mode_flag else ["bdris", "dris"]
        cells = [
            cell(f"{md}_gD{g:g}", {**_elements(64), "gamma_D_min_dB": g}, md, azimuths)
            for md in modes
            for g in gammas
        ]
        return cells, {"kind": "pattern", "azimuths": azimuths}

    if preset == "fig3-antennas":
        grid = [(jt, m) for jt in (6, 12, 20) for m in (36, 48, 60, 72)]
        cells = [
            cell(f"JT{jt}_M{m}", {"J_T": jt, **_elements(m)}) for jt, m in grid
        ]
        return cells, {"kind": "objective", "axes": ("J_T", "M"), "grid": grid}

    if preset == "fig4-alpha":
        alphas = [round(0.1 * i, 1) for i in range(1, 10)]
        grid = [(a, m) for a in alphas for m in (36, 48, 60)]
        cells = [
            cell(f"a{a:g}_M{m}", {"alpha": [a, round(1.0 - a, 12)], **_elements(m)})
            for a, m in grid
        ]
        return cells, {"kind": "per-target", "axes": ("alpha1", "M"), "grid": grid}

    if preset == "fig5-secrecy":
        grid = [(g, m) for g in (8.0, 12.0, 16.0, 20.0, 24.0) for m in (36, 64)]
        cells = [
            cell(f"gD{g:g}_M{m}", {"gamma_D_min_dB": g, **_elements(m)})
            for g, m in grid
        ]
        return cells, {"kind": "secrecy", "axes": ("gamma_D_min_dB", "M"), "grid": grid}

    if preset == "fig6-offset":
        grid = [(dx, m) for dx in (-5.0, -3.0, -1.0, 1.0, 3.0, 5.0) for m in (36, 48, 60)]
        cells = [
            cell(f"dx{dx:g}_M{m}", {"target_offset_x_m": dx, **_elements(m)})
            for dx, m in grid
        ]
        return cells, {"kind": "objective", "axes": ("delta_x_m", "M"), "grid": grid}

    if preset == "fig7-tradeoff":
        grid = [
            (gt, a, m)
            for gt in (4.0, 8.0, 12.0, 16.0)
            for a in (0.5, 0.25)
            for m in (36, 60)
        ]
        cells = [
            cell(
                f"gT{gt:g}_a{a:g}_M{m}",
                {
                    "gamma_D_min_dB": 20.0,
                    "gamma_T_max_dB": gt,
                    "alpha": [a, round(1.0 - a, 12)],
                    **_elements(m),
                },
            )
            for gt, a, m in grid
        ]
        return cells, {
            "kind": "tradeoff",
            "axes": ("gamma_T_max_dB", "alpha1", "M"),
            "grid": grid,
        }

    raise ValueError(f"unknown preset: {preset!r}")


def _preset_rows(preset: str, layout: dict, cells: list, results: list, trials: int):
    """Build (header, rows) for one preset's CSV."""
    t_cols = list(range(trials))

    if layout["kind"] == "trace":
        n_iter = max(
            (len(p["objective_dbm_trace"]) for payloads in results for p in payloads),
            default=0,
        )
        header = ["iteration"]
        for label, _, _, _ in cells:
            header.append(f"obj_dBm_{label}_mean")
            header += [f"obj_dBm_{label}_t{t}" for t in t_cols]
        rows = []
        for it in range(n_iter):
            row = [it + 1]
            for payloads in results:
                vals = [_trace_value(p, "objective_dbm_trace", it) for p in payloads]
                row.append(_mean(vals))
                row += vals
            rows.append(row)
        return header, rows

    if layout["kind"] == "pattern":
        header = ["azimuth_deg"]
        for label, _, _, _ in cells:
            header.append(f"V_dB_{label}_mean")
            header += [f"V_dB_{label}_t{t}" for t in t_cols]
        rows = []
        for i, az in enumerate(layout["azimuths"]):
            row = [az]
            for payloads in results:
                vals = [
                    p["beampattern_db"][i] if "beampattern_db" in p else None
                    for p in payloads
                ]
                row.append(_mean(vals))
                row += vals
            rows.append(row)
        return header, rows

    if layout["kind"] == "objective":
        header = list(layout["axes"]) + ["obj_dBm_mean"] + [f"obj_dBm_t{t}" for t in t_cols]
        rows = []
        for point, payloads in zip(layout["grid"], results):
            vals = [p["objective_dbm"] for p in payloads]
            rows.append(list(point) + [_mean(vals)] + vals)
        return header, rows

    if layout["kind"] == "per-target":
        header = list(layout["axes"])
        header += ["Vs1_dBm_mean", "Vs2_dBm_mean"]
        header += [f"Vs1_dBm_t{t}" for t in t_cols]
        header += [f"Vs2_dBm_t{t}" for t in t_cols]
        rows = []
        for point, payloads in zip(layout["grid"], results):
            vs1 = [p["vs_dbm"][0] for p in payloads]
            vs2 = [p["vs_dbm"][1] if len(p["vs_dbm"]) > 1 else None for p in payloads]
            rows.append(list(point) + [_mean(vs1), _mean(vs2)] + vs1 + vs2)
        return header, rows

    if layout["kind"] == "secrecy":
        header = list(layout["axes"]) + ["C_th", "achieved_SC_mean"]
        header += [f"achieved_SC_t{t}" for t in t_cols]
        rows = []
        for point, payloads in zip(layout["grid"], results):
            converged = [
                p["secrecy"] for p in payloads if p["status"] == "converged"
            ]
            vals = [p["secrecy"] for p in payloads]
            c_th = payloads[0]["c_th"]
            rows.append(
                list(point) + [c_th, _mean(converged) if converged else _mean(vals)] + vals
            )
        return header, rows

    if layout["kind"] == "tradeoff":
        header = list(layout["axes"]) + ["C_th", "Vs1_dBm_mean"]
        header += [f"Vs1_dBm_t{t}" for t in t_cols]
        rows = []
        for point, payloads in zip(layout["grid"], results):
            vs1 = [p["vs_dbm"][0] for p in payloads]
            rows.append(list(point) + [payloads[0]["c_th"], _mean(vs1)] + vs1)
        return header, rows

    raise ValueError(f"unknown layout kind: {layout['kind']!r}")


# ---------------------------------------------------------------------------
# debug dumps


def _write_dumps(
    out_dir: Path, overrides: dict, seed: int, mode: str, want_channels: bool, want_sdp: bool
) -> list:
    """Dump the first trial's channels and/or initial-design subproblem."""
    written = []
    config = resolve_config(overrides)
    scn = build_scenario(config)
    rng = np.random.default_rng([seed, 0])
    chans = channels.realize(scn, rng)
    if want_channels:
        path = out_dir / "channels_trial0.npz"
        np.savez(
            path,
            bs_ris=chans.bs_ris,
            ris_user=chans.ris_user,
            ris_target=chans.ris_target,
            loss_user=chans.loss_user,
            loss_target=chans.loss_target,
            loss_sensing=chans.loss_sensing,
        )
        written.append(path)
    if want_sdp:
        psi0, beam, an_cov = ao.init_design(scn, chans, mode)
        sub = lagrangian.build_subproblem(
            chans,
            psi0,
            scn.n_users,
            scn.n_targets,
            scn.gamma_user_min,
            scn.gamma_eaves_max,
            scn.weights,
            scn.noise_w,
        )
        rows_eff = sub.effective_rows(np.eye(scn.n_elems, dtype=complex))
        grams = [channels.gram(r) for r in rows_eff]
        problem = sdp.build_subproblem(
            np.stack(grams[: scn.n_users]),
            np.stack(grams[scn.n_users : scn.n_users + scn.n_targets]),
            np.stack(grams[scn.n_users + scn.n_targets :]),
            scn.weights,
            scn.gamma_user_min,
            scn.gamma_eaves_max,
            scn.power_budget,
        )
        path = out_dir / "sdp_trial0_initial.txt"
        sdp.dump_problem(problem, str(path))
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# entry point


def run_experiment(
    preset: str,
    base_overrides: dict,
    seed: int,
    trials: int,
    out_dir: Path,
    mode_flag: str | None,
    jobs: int = 1,
    dump_channels: bool = False,
    dump_sdp: bool = False,
) -> int:
    """Run one preset end to end; returns the process exit code."""
    started = time.time()
    cells, layout = _preset_cells(preset, base_overrides, mode_flag)
    for _, overrides, _, _ in cells:
        resolve_config(overrides)  # fail fast before spawning workers

    out_dir.mkdir(parents=True, exist_ok=True)
    results = _run_cells(cells, seed, trials, jobs)

    header, rows = _preset_rows(preset, layout, cells, results, trials)
    csv_path = out_dir / f"{preset}.csv"
    _write_csv(csv_path, header, rows)

    extra_files = []
    if dump_channels or dump_sdp:
        extra_files = _write_dumps(
            out_dir, cells[0][1], seed, cells[0][2], dump_channels, dump_sdp
        )

    files = {}
    for path in [csv_path] + extra_files:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        files[path.name] = {"sha256": digest}

    manifest = {
        "preset": preset,
        "seed": seed,
        "trials": trials,
        "mode": mode_flag or ("both" if preset == "fig2-beampattern" else "bdris"),
        "jobs": jobs,
        "package_version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "seed_scheme": "trial t uses numpy.random.default_rng([seed, t])",
        "base_config": resolve_config(base_overrides),
        "cells": [
            {
                "label": label,
                "overrides": {
                    k: v for k, v in overrides.items() if base_overrides.get(k) != v
                },
                "mode": cell_mode,
                "trials": [
                    {
                        "trial": t,
                        "status": p["status"],
                        "plateau_iteration": p["plateau_iteration"],
                        "wall_time": round(p["wall_time"], 6),
                    }
                    for t, p in enumerate(payloads)
                ],
            }
            for (label, overrides, cell_mode, _), payloads in zip(cells, results)
        ],
        "files": files,
        "wall_time": round(time.time() - started, 3),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")

    statuses = [p["status"] for payloads in results for p in payloads]
    bad = [s for s in statuses if s not in ("converged", "max-iters")]
    log.info(
        "%s: %d runs (%d unhealthy) -> %s", preset, len(statuses), len(bad), csv_path
    )
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risac",
        description="Batch experiment runner for the secure surface-aided "
        "sensing/communication optimizer.",
    )
    parser.add_argument("--preset", required=True, choices=PRESETS)
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--trials", type=int, help="Monte-Carlo trials per sweep cell")
    parser.add_argument("--out", help="output directory (default ./out/<preset>)")
    parser.add_argument(
        "--mode",
        choices=ao.MODES,
        help="surface architecture; fig2-beampattern runs both when omitted",
    )
    parser.add_argument("--jobs", type=int, default=1, help="parallel trial processes")
    parser.add_argument(
        "--dump-channels",
        action="store_true",
        help="save the first trial's channel realization as .npz",
    )
    parser.add_argument(
        "--dump-sdp",
        action="store_true",
        help="save the first trial's initial beamformer subproblem as text",
    )
    return parser


def main(argv: list | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        base = load_config(args.config) if args.config else {}
        resolve_config(base)
        trials = args.trials if args.trials is not None else DEFAULT_TRIALS[args.preset]
        if trials < 1:
            raise ConfigError("--trials must be at least 1")
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        out_dir = Path(args.out) if args.out else Path("out") / args.preset
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        return run_experiment(
            args.preset,
            base,
            args.seed,
            trials,
            out_dir,
            args.mode,
            jobs=args.jobs,
            dump_channels=args.dump_channels,
            dump_sdp=args.dump_sdp,
        )
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
