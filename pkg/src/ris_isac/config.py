"""Scenario configuration and the SNR-to-gain mapping.

A configuration file is a flat JSON object whose keys are the field names
of :class:`ScenarioConfig`.  Angles are radians, directions are
``[azimuth, elevation]`` pairs, tuples are JSON arrays.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
import json
import math
from pathlib import Path

import numpy as np

from .channel import ChannelGains, Direction
from .errors import ConfigError

DEFAULT_DIRECTIONS = {
    "ue_from_bs": (math.pi / 3, -math.pi / 5),
    "target_from_bs": (math.pi / 6, -math.pi / 5),
    "ue_from_ris": (0.0, -math.pi / 5),
    "target_from_ris": (-math.pi / 4, -math.pi / 5),
    "ris_from_bs": (-math.pi / 4, 0.0),
    "bs_from_ris": (math.pi / 4, 0.0),
}

DEFAULT_SNR_GRID = tuple(float(x) for x in range(-70, -5, 5))


@dataclass(frozen=True)
class ScenarioConfig:
    bs_grid: tuple = (6, 6)
    ris_grid: tuple = (8, 8)
    L: int = 5
    sigma2: float = 1.0
    P_t: float = 1.0
    gamma_th: float = 10.0
    betas: tuple = (0.1, 4.0, 1.0)
    alpha: float = 1e-3
    cnr_db: float = 20.0
    snr_grid_db: tuple = DEFAULT_SNR_GRID
    rician_kappa_db: float = 10.0
    clutter_energy_frac: float = 0.99
    ris_relative_gain_db: float = -10.0
    ue_snr_db: float = 0.0
    ris_hop_gain: float = 1.0
    scattering_samples: int = 100_000
    trials_calibration: int = 200_000
    trials_detection: int = 10_000
    validation_trials: int | None = None
    threshold_mode: str = "per_tuple"
    master_seed: int = 0
    chunk_size: int = 4096
    directions: dict = field(default_factory=lambda: dict(DEFAULT_DIRECTIONS))

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("bs_grid", tuple(int(x) for x in self.bs_grid))
        set_("ris_grid", tuple(int(x) for x in self.ris_grid))
        set_("betas", tuple(float(x) for x in self.betas))
        set_("snr_grid_db", tuple(float(x) for x in self.snr_grid_db))
        dirs = dict(DEFAULT_DIRECTIONS)
        for k, v in dict(self.directions).items():
            if k not in DEFAULT_DIRECTIONS:
                raise ConfigError(f"unknown direction {k!r}")
            dirs[k] = v if isinstance(v, Direction) else Direction(float(v[0]), float(v[1]))
        dirs = {k: v if isinstance(v, Direction) else Direction(*v) for k, v in dirs.items()}
        set_("directions", dirs)
        self.validate()

    def validate(self) -> None:
        counts = {
            "L": self.L, "scattering_samples": self.scattering_samples,
            "trials_calibration": self.trials_calibration,
            "trials_detection": self.trials_detection, "chunk_size": self.chunk_size,
        }
        for k, v in counts.items():
            if int(v) < 1:
                raise ConfigError(f"{k} must be positive, got {v}")
        if len(self.bs_grid) != 2 or min(self.bs_grid) < 1:
            raise ConfigError(f"bs_grid must be two positive counts, got {self.bs_grid}")
        if len(self.ris_grid) != 2 or min(self.ris_grid) < 1:
            raise ConfigError(f"ris_grid must be two positive counts, got {self.ris_grid}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.sigma2 <= 0 or self.P_t <= 0:
            raise ConfigError("sigma2 and P_t must be positive")
        if self.gamma_th < 0:
            raise ConfigError("gamma_th must be nonnegative")
        if len(self.betas) != 3 or min(self.betas) < 0:
            raise ConfigError(f"betas must be three nonnegative variances, got {self.betas}")
        grid = np.asarray(self.snr_grid_db)
        if np.any(np.diff(grid) <= 0):
            raise ConfigError("snr_grid_db must be strictly increasing")
        if not 0 < self.clutter_energy_frac <= 1:
            raise ConfigError("clutter_energy_frac must lie in (0, 1]")
        if self.threshold_mode not in ("per_tuple", "global"):
            raise ConfigError(f"threshold_mode must be 'per_tuple' or 'global', got {self.threshold_mode!r}")
        if self.validation_trials is not None and self.validation_trials < 1:
            raise ConfigError("validation_trials must be positive")

    @property
    def K(self) -> int:
        return self.bs_grid[0] * self.bs_grid[1]

    @property
    def N(self) -> int:
        return self.ris_grid[0] * self.ris_grid[1]

    @property
    def nlos_fraction(self) -> float:
        """NLOS trace budget relative to the LOS gain, ``1 / kappa``."""
        return 10.0 ** (-self.rician_kappa_db / 10.0)

    @property
    def n_validation(self) -> int:
        return self.validation_trials or self.trials_calibration

    def replace(self, **changes) -> "ScenarioConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        out["directions"] = {k: [d.azimuth, d.elevation] for k, d in self.directions.items()}
        for k in ("bs_grid", "ris_grid", "betas", "snr_grid_db"):
            out[k] = list(out[k])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        if "K" in data:
            K = int(data.pop("K"))
            if "bs_grid" not in data:
                side = math.isqrt(K)
                if side * side != K:
                    raise ConfigError(f"K={K} is not square; give bs_grid explicitly")
                data["bs_grid"] = (side, side)
            elif int(np.prod(data["bs_grid"])) != K:
                raise ConfigError(f"K={K} disagrees with bs_grid={data['bs_grid']}")
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return ScenarioConfig.from_dict(data)


def apply_snr_point(config: ScenarioConfig, snr_db: float) -> ChannelGains:
    """Per-element gains realising a two-way static target SNR of ``snr_db``.

    The swept SNR is ``P_t * beta1 * ||hbar_s2||^4 / sigma2`` with
    ``||hbar_s2||^2 = g_s K``.  When ``beta1`` is zero the normalisation uses
    ``beta1 = 1`` so that the gain stays finite.  RIS-side hops sit
    ``ris_relative_gain_db`` below their static counterparts per element, and
    the UE gain is fixed by ``P_t g_ue / sigma2 = ue_snr_db``.
    """
    beta1 = config.betas[0] if config.betas[0] > 0 else 1.0
    snr = 10.0 ** (snr_db / 10.0)
    g_s = math.sqrt(snr * config.sigma2 / (config.P_t * beta1)) / config.K
    rel = 10.0 ** (config.ris_relative_gain_db / 10.0)
    g_ue = 10.0 ** (config.ue_snr_db / 10.0) * config.sigma2 / config.P_t
    return ChannelGains(
        static_target=g_s,
        ris_target=rel * g_s / config.ris_hop_gain,
        ue_static=g_ue,
        ue_ris=rel * g_ue / config.ris_hop_gain,
        ris_hop=config.ris_hop_gain,
    )
