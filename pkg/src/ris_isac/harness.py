"""Detection-probability sweeps over the static-target SNR.

Four schemes are evaluated at every sweep point:

* ``no_ris``: cascaded paths removed, precoder optimised;
* ``random_ris``: random RIS phases, precoder optimised;
* ``optimized``: co-phased RIS and optimised precoder;
* ``clutter_unaware``: the optimised configuration with the detector that
  ignores the clutter subspace.

Random streams are keyed by ``(purpose, scheme, sweep index, chunk)`` under
the master seed, see :mod:`ris_isac.mc`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io
import json
import logging
from pathlib import Path

import numpy as np

from . import mc
from .channel import RisPhases, ScenarioGeometry
from .config import ScenarioConfig, apply_snr_point
from .detector import (
    H0, ReceiverModel, binomial_ci, build_test_matrix, exceedance_rate, tie_weight,
    calibrate_threshold, check_trials, detection_rate, estimate_clutter_subspace, threshold_from_sample,
)
from .errors import Infeasible
from .optimizer import PrecoderSolution, optimize_phases, optimize_precoder
from .sensing import gain_matrix, target_covariance

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "snr_db", "pd_no_ris", "pd_random_ris", "pd_optimized", "pd_clutter_unaware",
    "realized_pfa", "ci_halfwidth",
)
SCHEMES = ("no_ris", "random_ris", "optimized", "clutter_unaware")

# stream keys
KEY_SCENARIO = 0
KEY_RANDOM_PHASES = 1
KEY_CALIBRATION = 2
KEY_DETECTION = 3


@dataclass(frozen=True)
class CurveRow:
    snr_db: float
    pd_no_ris: float
    pd_random_ris: float
    pd_optimized: float
    pd_clutter_unaware: float
    realized_pfa: float
    ci_halfwidth: float

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


@dataclass
class CurveTable:
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            buf.write(",".join(f"{v:.6g}" for v in row.values()) + "\n")
        return buf.getvalue()


@dataclass(frozen=True)
class SchemeSetup:
    """Everything needed to simulate one scheme at one sweep point."""

    name: str
    model: ReceiverModel
    T: np.ndarray
    solution: PrecoderSolution
    phases: RisPhases


class Scenario:
    """A configured scenario: geometry, clutter subspace and both phase sets."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        seed = config.master_seed
        self.geometry = ScenarioGeometry(config, mc.stream(seed, KEY_SCENARIO))
        self.random_phases = RisPhases.random(config.N, mc.stream(seed, KEY_RANDOM_PHASES))
        self.subspace = estimate_clutter_subspace(self.geometry.R_clutter, config.clutter_energy_frac)
        if self.subspace.capped:
            log.warning("clutter subspace rank capped at K-1")

    def channels(self, snr_db: float):
        return self.geometry.channels(apply_snr_point(self.config, snr_db))

    def optimized_phases(self, ch) -> RisPhases:
        return optimize_phases(ch.b_t, ch.hbar_r2)

    def setups(self, snr_db: float) -> dict[str, SchemeSetup]:
        cfg = self.config
        ch = self.channels(snr_db)
        opt = self.optimized_phases(ch)
        variants = {
            "no_ris": (ch.without_ris(), RisPhases.zeros(cfg.N)),
            "random_ris": (ch, self.random_phases),
            "optimized": (ch, opt),
        }
        out = {}
        for name, (c, phases) in variants.items():
            C = gain_matrix(c, phases, cfg.betas)
            sol = optimize_precoder(C, c.ue_channel(phases), cfg.P_t, cfg.gamma_th, cfg.sigma2)
            R = target_covariance(c, phases, sol.p, cfg.betas)
            model = ReceiverModel(c, phases, sol.p, cfg.betas, self.subspace, cfg.cnr_db, cfg.sigma2, cfg.L)
            out[name] = SchemeSetup(name, model, build_test_matrix(R, self.subspace, cfg.sigma2), sol, phases)
            if name == "optimized":
                T_unaware = build_test_matrix(R, None, cfg.sigma2)
                out["clutter_unaware"] = SchemeSetup("clutter_unaware", model, T_unaware, sol, phases)
        return out


def _setups_or_fail(scenario: Scenario, index: int, snr_db: float) -> dict[str, SchemeSetup]:
    try:
        return scenario.setups(snr_db)
    except Infeasible as exc:
        raise Infeasible(f"sweep point {index} (snr_db={snr_db:g}): {exc}") from exc


def run_curve(config: ScenarioConfig, threads: int = 1, progress=None) -> CurveTable:
    """Detection probability of every scheme across ``config.snr_grid_db``."""
    cfg = config
    check_trials(cfg.alpha, cfg.trials_calibration)
    scenario = Scenario(cfg)
    seed, chunk = cfg.master_seed, cfg.chunk_size
    grid = cfg.snr_grid_db
    setups = [_setups_or_fail(scenario, i, snr) for i, snr in enumerate(grid)]

    thresholds: dict[int, tuple[float, float]] = {}
    if cfg.threshold_mode == "global":
        for s, name in enumerate(SCHEMES):
            pooled = []
            for i, st in enumerate(setups):
                fn = lambda rng, n, st=st[name]: st.model.statistics(rng, n, H0, st.T)  # noqa: E731
                pooled.append(mc.run_chunked(fn, seed, (KEY_CALIBRATION, s, i, 0), cfg.trials_calibration, chunk, threads))
            pooled = np.concatenate(pooled)
            gamma = threshold_from_sample(pooled, cfg.alpha)
            thresholds[s] = gamma, tie_weight(pooled, gamma, cfg.alpha)

    table = CurveTable(meta={"config": cfg.to_dict(), "clutter_rank": scenario.subspace.r})
    for i, snr in enumerate(grid):
        pd, pfa, half = {}, float("nan"), float("nan")
        for s, name in enumerate(SCHEMES):
            st = setups[i][name]
            validate = cfg.n_validation if name == "optimized" else None
            if cfg.threshold_mode == "global":
                gamma, w = thresholds[s]
                if validate:
                    fresh = mc.run_chunked(
                        lambda rng, n, st=st: st.model.statistics(rng, n, H0, st.T),
                        seed, (KEY_CALIBRATION, s, i, 1), validate, chunk, threads,
                    )
                    pfa = exceedance_rate(fresh, gamma, w)
                    lo, hi = binomial_ci(round(pfa * fresh.size), fresh.size)
                    half = 0.5 * (hi - lo)
            else:
                cal = calibrate_threshold(
                    st.model, st.T, cfg.alpha, cfg.trials_calibration, seed,
                    key=(KEY_CALIBRATION, s, i), validation_trials=validate,
                    chunk_size=chunk, threads=threads,
                )
                gamma, w = cal.threshold, cal.tie_weight
                if validate:
                    pfa, half = cal.realized_pfa, cal.ci_halfwidth
            pd[name] = detection_rate(
                st.model, st.T, gamma, cfg.trials_detection, seed,
                key=(KEY_DETECTION, s, i), chunk_size=chunk, threads=threads, tie_weight=w,
            )
        row = CurveRow(snr, pd["no_ris"], pd["random_ris"], pd["optimized"], pd["clutter_unaware"], pfa, half)
        table.rows.append(row)
        if progress:
            progress(row)
    return table


def calibrate_point(config: ScenarioConfig, snr_db: float, scheme: str = "optimized", threads: int = 1):
    """Calibrate one scheme at one SNR; returns the :class:`~ris_isac.detector.Calibration`."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    cfg = config
    scenario = Scenario(cfg)
    st = scenario.setups(snr_db)[scheme]
    s = SCHEMES.index(scheme)
    return calibrate_threshold(
        st.model, st.T, cfg.alpha, cfg.trials_calibration, cfg.master_seed,
        key=(KEY_CALIBRATION, s, 0), validation_trials=cfg.n_validation,
        chunk_size=cfg.chunk_size, threads=threads,
    )


def emit_csv(table: CurveTable, path) -> None:
    path = Path(path)
    try:
        path.write_text(table.to_csv())
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write CSV: {exc.strerror}", str(path)) from exc


def emit_json(table: CurveTable, path) -> None:
    path = Path(path)
    doc = {
        "columns": list(CSV_COLUMNS),
        "rows": [dict(zip(CSV_COLUMNS, (float(f"{v:.6g}") for v in r.values()))) for r in table.rows],
        "meta": table.meta,
    }
    try:
        path.write_text(json.dumps(doc, indent=2, default=str) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write JSON: {exc.strerror}", str(path)) from exc


__all__ = [
    "CSV_COLUMNS", "SCHEMES", "CurveRow", "CurveTable", "Scenario", "SchemeSetup",
    "calibrate_point", "emit_csv", "emit_json", "run_curve",
]
