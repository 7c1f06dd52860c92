"""Synthetic panels with digit-tail treatment assignment and known effect.

Subject ``i`` is treated iff ``i % 10 == 0``. A latent confounder
``u_i ~ N(shift * D_i, 1)`` drives both the observed features
(``u_i`` plus noise) and the response
``y_il = gamma * u_i + s_l + tau * D_i * [l > t] + noise``, so a naive
treated-vs-control comparison is biased by ``gamma * shift``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data_model import PanelDataset
from .errors import ConfigInvalid


def default_day_effects(n_periods):
    """Smooth weekly-looking seasonality profile of length ``n_periods``."""
    l = np.arange(n_periods, dtype=float)
    return tuple((0.5 * np.sin(2.0 * math.pi * l / 7.0) + 0.02 * l).tolist())


@dataclass(frozen=True)
class SimulationConfig:
    n_subjects: int = 400_000
    k: int = 8
    tau: float = 0.0
    confounder_shift: float = 1.0
    confounder_to_outcome: float = 1.0
    feature_noise_sd: float = 0.5
    response_noise_sd: float = 1.0
    day_effects: tuple = None
    t: int = 6
    T: int = 12
    seed: int = 0

    def resolved_day_effects(self):
        if self.day_effects is None:
            return default_day_effects(self.T)
        return tuple(float(v) for v in self.day_effects)

    def check(self):
        if self.n_subjects < 20:
            raise ConfigInvalid(f"n_subjects must be >= 20, got {self.n_subjects}")
        if self.k < 1:
            raise ConfigInvalid("k must be >= 1")
        if not 1 <= self.t < self.T:
            raise ConfigInvalid(f"need 1 <= t < T, got t={self.t}, T={self.T}")
        if self.feature_noise_sd < 0 or self.response_noise_sd < 0:
            raise ConfigInvalid("noise standard deviations must be >= 0")
        if len(self.resolved_day_effects()) != self.T:
            raise ConfigInvalid(f"day_effects must have T={self.T} entries")
        for name in ("tau", "confounder_shift", "confounder_to_outcome"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigInvalid(f"{name} must be finite")


def generate(config):
    config.check()
    rng = np.random.default_rng(config.seed)
    n, T, t = config.n_subjects, config.T, config.t
    ids = np.arange(n)
    group = (ids % 10 == 0).astype(np.int8)
    u = rng.normal(config.confounder_shift * group, 1.0)
    features = u[:, None] + rng.normal(0.0, config.feature_noise_sd, size=(n, config.k))
    days = np.asarray(config.resolved_day_effects())
    post = (np.arange(T) >= t).astype(float)
    responses = (
        config.confounder_to_outcome * u[:, None]
        + days[None, :]
        + config.tau * group[:, None] * post[None, :]
        + rng.normal(0.0, config.response_noise_sd, size=(n, T))
    )
    return PanelDataset(features, group, responses, t, [str(i) for i in range(n)])


def true_att(config):
    return config.tau
