"""Configuration settings for the measurement protocol"""
from dataclasses import asdict, dataclass, fields
from typing import Optional

from modules.errors import ValidationError


class ProtocolDefaults:
    """Main protocol configuration"""

    # App Information
    APP_DESCRIPTION = "Work-cost state and channel tomography with battery-mediated unitaries"

    # Numerical tolerances
    TOL_HERM = 1e-10
    TOL_TRACE = 1e-10
    TOL_UNITARY = 1e-10
    TOL_PSD = 1e-10
    TOL_EIG = 1e-9
    TOL_RECONSTRUCT = 1e-6
    TOL_WEIGHT = 1e-8
    TOL_ISOLATION = 1e-10
    TOL_MARGINAL_WARN = 1e-3
    TOL_DISTRIBUTION = 1e-8
    TOL_BOUNDARY = 1e-12

    # Battery defaults
    GAMMA = 1.0
    S = 0.05
    GRID_L = 4096
    P_MAX_PER_S = 10.0
    CONTAINMENT_RATIO = 6.0

    # Sampling / runs
    N_SAMPLES = 100_000
    SEED = 1234
    WORKERS = 1
    MODES = ("ideal", "battery")
    DEFAULT_MODE = "ideal"
    DEFAULT_SWEEP = (0.3, 0.1, 0.03, 0.01, 0.003, 0.001)

    # Channel tomography envelope
    MAX_CHANNEL_DIM = 4

    # Run profiles
    RUN_PROFILES = {
        "Ideal": {
            "description": "Exact measurement unitary, no battery",
            "params": {"mode": "ideal"}
        },
        "Battery Coarse": {
            "description": "Wide battery momentum, visibly disturbed rounds",
            "params": {"mode": "battery", "s": 0.3}
        },
        "Battery Standard": {
            "description": "Default battery width for routine runs",
            "params": {"mode": "battery", "s": 0.05}
        },
        "Battery Precise": {
            "description": "Narrow battery momentum, epsilon below 1e-3",
            "params": {"mode": "battery", "s": 0.001}
        }
    }

    @classmethod
    def get_profile(cls, name):
        """Get parameter overrides for a named run profile"""
        if name not in cls.RUN_PROFILES:
            raise ValidationError(
                f"unknown profile {name!r}; choose from {sorted(cls.RUN_PROFILES)}"
            )
        return dict(cls.RUN_PROFILES[name]["params"])

    @classmethod
    def get_profile_description(cls, name):
        """Get description for a named run profile"""
        return cls.RUN_PROFILES.get(name, {}).get("description", "")

    @classmethod
    def default_p_max(cls, s):
        """Momentum cutoff used when no explicit p_max is given"""
        return cls.P_MAX_PER_S * s


@dataclass
class RunConfig:
    """Validated parameters of one command invocation"""

    d: int = 2
    mode: str = ProtocolDefaults.DEFAULT_MODE
    s: float = ProtocolDefaults.S
    gamma: float = ProtocolDefaults.GAMMA
    grid_l: int = ProtocolDefaults.GRID_L
    p_max: Optional[float] = None
    seed: int = ProtocolDefaults.SEED
    n_samples: int = ProtocolDefaults.N_SAMPLES
    tol: float = ProtocolDefaults.TOL_ISOLATION
    workers: int = ProtocolDefaults.WORKERS

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_sources(cls, file_values=None, flag_values=None, profile=None):
        """Merge profile, config file and flags (flags win) and validate.

        ``None`` flag values mean "not given on the command line".
        """
        merged = {}
        if profile:
            merged.update(ProtocolDefaults.get_profile(profile))
        for source in (file_values or {}, flag_values or {}):
            unknown = sorted(set(source) - set(cls.keys()))
            if unknown:
                raise ValidationError(f"unknown configuration keys: {unknown}")
            merged.update({k: v for k, v in source.items() if v is not None})
        config = cls(**merged)
        config.validate()
        return config

    def validate(self):
        for key in ("s", "gamma", "tol") + (("p_max",) if self.p_max is not None else ()):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"{key} must be a number, got {value!r}")
        if isinstance(self.d, bool) or not isinstance(self.d, int) or self.d < 2:
            raise ValidationError(f"d must be an integer >= 2, got {self.d!r}")
        if self.mode not in ProtocolDefaults.MODES:
            raise ValidationError(f"mode must be one of {ProtocolDefaults.MODES}, got {self.mode!r}")
        if not self.s > 0:
            raise ValidationError(f"s must be positive, got {self.s!r}")
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma!r}")
        if not isinstance(self.grid_l, int) or self.grid_l < 2 or self.grid_l & (self.grid_l - 1):
            raise ValidationError(f"grid_l must be a power of two >= 2, got {self.grid_l!r}")
        if self.p_max is not None and not self.p_max > 0:
            raise ValidationError(f"p_max must be positive, got {self.p_max!r}")
        if not isinstance(self.seed, int):
            raise ValidationError(f"seed must be an integer, got {self.seed!r}")
        if not isinstance(self.n_samples, int) or self.n_samples < 1:
            raise ValidationError(f"n_samples must be a positive integer, got {self.n_samples!r}")
        if not self.tol > 0:
            raise ValidationError(f"tol must be positive, got {self.tol!r}")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ValidationError(f"workers must be a positive integer, got {self.workers!r}")

    def to_protocol_config(self, d=None):
        """Build the battery module's ProtocolConfig (optionally at another dimension)"""
        from modules.battery import ProtocolConfig

        return ProtocolConfig(
            d=d if d is not None else self.d,
            gamma=float(self.gamma),
            p_max=float(self.p_max) if self.p_max is not None else None,
            grid_l=self.grid_l,
            s=float(self.s),
            seed=self.seed,
            mode=self.mode,
            workers=self.workers,
        )

    def as_dict(self):
        return asdict(self)
