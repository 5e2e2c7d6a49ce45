"""Scenario configuration and network snapshot generation.

A scenario describes the coordinated multi-point network: L cells, each
base station serving one user and illuminating one target, with per-link
communication power gains rho[l][i] (BS l to user i) and two-round
sensing power gains g[l][i] (BS l, off target i, back to BS i). Channel
snapshots are drawn either in *direct* mode, where the mean gain
matrices are given and Rayleigh fading makes the realized power gains
exponential around those means, or in *geometry* mode, where positions
are drawn in each cell's disc and means follow a pathloss law before the
same fading is applied.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "ScenarioConfig",
    "ChannelRealization",
    "GeometrySample",
    "db_to_linear",
    "sample_channels",
    "scenario_from_dict",
    "SCENARIO_KEYS",
]


def db_to_linear(x_db):
    """Convert a dB quantity to linear scale: 10^(x_db / 10)."""
    return 10.0 ** (float(x_db) / 10.0)


def _as_per_entry(key, value, L, lower=None, upper=None, strict=False):
    """Broadcast a scalar or length-L sequence to a float array of length L."""
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.shape == (1,):
        arr = np.full(L, arr[0])
    if arr.shape != (L,):
        raise ConfigError(key, f"expected a scalar or {L} values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(key, "values must be finite")
    if lower is not None:
        ok = arr > lower if strict else arr >= lower
        if not np.all(ok):
            raise ConfigError(key, f"values must be {'>' if strict else '>='} {lower}")
    if upper is not None:
        ok = arr < upper if strict else arr <= upper
        if not np.all(ok):
            raise ConfigError(key, f"values must be {'<' if strict else '<='} {upper}")
    return arr


def _as_matrix(key, value, L):
    mat = np.asarray(value, dtype=float)
    if mat.shape != (L, L):
        raise ConfigError(key, f"expected an {L}x{L} matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)) or np.any(mat < 0):
        raise ConfigError(key, "entries must be finite and nonnegative")
    return mat


@dataclass
class ScenarioConfig:
    """Full description of one experiment scenario.

    Scalars given for per-user or per-target fields broadcast to length
    L. Mean gain matrices default to ``serving_gain`` on the diagonal
    and ``cross_gain`` elsewhere. Treat instances as read-only; derived
    arrays are normalized in ``__post_init__``.
    """

    L: int = 3
    N: int = 100
    pfa_target: float = 1e-6
    noise_comm_db: object = 1.0
    noise_sense_db: object = 15.0
    power_budget_db: float = 15.0
    rate_threshold: object = 1.0
    pod_threshold: object = 0.7
    channel_mode: str = "direct"
    serving_gain: float = 1.0
    cross_gain: float = 0.1
    mean_rho: object = None
    mean_g: object = None
    cell_radius: object = None
    pathloss_exponent: object = None
    rcs: float = 1.0
    fading: bool = True
    seed: int = 27

    def __post_init__(self):
        if not isinstance(self.L, (int, np.integer)) or isinstance(self.L, bool):
            raise ConfigError("L", f"must be an integer, got {self.L!r}")
        if self.L < 1:
            raise ConfigError("L", f"must be >= 1, got {self.L}")
        self.L = int(self.L)
        if not isinstance(self.N, (int, np.integer)) or isinstance(self.N, bool):
            raise ConfigError("N", f"must be an integer, got {self.N!r}")
        if self.N < 1:
            raise ConfigError("N", f"must be >= 1, got {self.N}")
        self.N = int(self.N)
        self.pfa_target = float(self.pfa_target)
        if not 0.0 < self.pfa_target < 1.0:
            raise ConfigError("pfa_target", f"must lie in (0, 1), got {self.pfa_target}")
        self.power_budget_db = float(self.power_budget_db)
        if not np.isfinite(self.power_budget_db):
            raise ConfigError("power_budget_db", "must be finite")
        self.noise_comm_db = _as_per_entry("noise_comm_db", self.noise_comm_db, self.L)
        self.noise_sense_db = _as_per_entry("noise_sense_db", self.noise_sense_db, self.L)
        self.rate_threshold = _as_per_entry("rate_threshold", self.rate_threshold, self.L, lower=0.0)
        self.pod_threshold = _as_per_entry(
            "pod_threshold", self.pod_threshold, self.L, lower=0.0, upper=1.0, strict=True
        )
        if self.channel_mode not in ("direct", "geometry"):
            raise ConfigError("channel_mode", f"must be 'direct' or 'geometry', got {self.channel_mode!r}")
        self.serving_gain = float(self.serving_gain)
        self.cross_gain = float(self.cross_gain)
        if self.serving_gain < 0 or self.cross_gain < 0:
            raise ConfigError("serving_gain", "mean gains must be nonnegative")
        if self.mean_rho is None:
            self.mean_rho = self._default_means()
        else:
            self.mean_rho = _as_matrix("mean_rho", self.mean_rho, self.L)
        if self.mean_g is None:
            self.mean_g = self._default_means()
        else:
            self.mean_g = _as_matrix("mean_g", self.mean_g, self.L)
        if self.channel_mode == "geometry":
            if self.cell_radius is None:
                raise ConfigError("cell_radius", "required in geometry mode")
            if self.pathloss_exponent is None:
                raise ConfigError("pathloss_exponent", "required in geometry mode")
            self.cell_radius = float(self.cell_radius)
            self.pathloss_exponent = float(self.pathloss_exponent)
            if self.cell_radius <= 0:
                raise ConfigError("cell_radius", f"must be > 0, got {self.cell_radius}")
            if self.pathloss_exponent <= 0:
                raise ConfigError("pathloss_exponent", f"must be > 0, got {self.pathloss_exponent}")
            self.rcs = float(self.rcs)
            if self.rcs <= 0:
                raise ConfigError("rcs", f"must be > 0, got {self.rcs}")
        self.fading = bool(self.fading)
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ConfigError("seed", f"must be an integer, got {self.seed!r}")
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed", "must fit in 64 bits")

    def _default_means(self):
        m = np.full((self.L, self.L), self.cross_gain, dtype=float)
        np.fill_diagonal(m, self.serving_gain)
        return m

    @property
    def sigma_c2(self):
        """Per-user communication noise power, linear scale."""
        return np.array([db_to_linear(v) for v in self.noise_comm_db])

    @property
    def sigma_s2(self):
        """Per-BS sensing noise power, linear scale."""
        return np.array([db_to_linear(v) for v in self.noise_sense_db])

    @property
    def power_budget(self):
        """Total transmit power budget, linear scale."""
        return db_to_linear(self.power_budget_db)

    def replace(self, **changes):
        """Return a copy with the given fields replaced (re-validated)."""
        return dataclasses.replace(self, **changes)


@dataclass
class GeometrySample:
    """Positions drawn for one geometry-mode snapshot (meters, 2-D)."""

    bs_xy: np.ndarray
    user_xy: np.ndarray
    target_xy: np.ndarray


@dataclass
class ChannelRealization:
    """One immutable network snapshot of realized power gains."""

    rho: np.ndarray
    g: np.ndarray
    sigma_c2: np.ndarray
    sigma_s2: np.ndarray
    geometry: object = None

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        self.sigma_c2 = np.atleast_1d(np.asarray(self.sigma_c2, dtype=float))
        self.sigma_s2 = np.atleast_1d(np.asarray(self.sigma_s2, dtype=float))
        L = self.rho.shape[0]
        if self.rho.shape != (L, L) or self.g.shape != (L, L):
            raise ConfigError("rho", "gain matrices must be square and equally sized")
        if self.sigma_c2.shape != (L,) or self.sigma_s2.shape != (L,):
            raise ConfigError("sigma_c2", f"noise vectors must have length {L}")
        for key, arr in (("rho", self.rho), ("g", self.g)):
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ConfigError(key, "entries must be finite and nonnegative")
        if np.any(self.sigma_c2 <= 0) or np.any(self.sigma_s2 <= 0):
            raise ConfigError("sigma_c2", "noise powers must be positive")
        for arr in (self.rho, self.g, self.sigma_c2, self.sigma_s2):
            arr.flags.writeable = False

    @property
    def L(self):
        return self.rho.shape[0]


def _bs_positions(L, r):
    """Base stations on a ring of radius 2r (a single BS sits at the origin)."""
    if L == 1:
        return np.zeros((1, 2))
    angles = 2.0 * np.pi * np.arange(L) / L
    return 2.0 * r * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def _uniform_in_disc(stream, center, r, n):
    radii = r * np.sqrt(stream.random(n))
    angles = 2.0 * np.pi * stream.random(n)
    return center + radii[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def sample_channels(config, stream=None):
    """Draw one ChannelRealization from the scenario's channel model.

    Direct mode: each power gain is an independent exponential draw with
    the configured mean (the squared magnitude of a circularly symmetric
    complex Gaussian coefficient). Geometry mode: user and target
    positions are drawn uniformly in each serving cell's disc, means
    follow d^(-alpha) pathloss (two-round product times the radar cross
    section for sensing), then the same exponential fading applies.
    Distances are floored at one meter so gains stay finite. With
    ``fading`` disabled the means pass through unchanged.

    With ``stream`` omitted the scenario's own seed is used, giving the
    canonical snapshot for that scenario. Deterministic given
    (config, stream state): two calls with freshly seeded identical
    streams return identical snapshots.
    """
    if stream is None:
        stream = np.random.default_rng(config.seed)
    L = config.L
    geometry = None
    if config.channel_mode == "direct":
        mean_rho = config.mean_rho
        mean_g = config.mean_g
    else:
        bs = _bs_positions(L, config.cell_radius)
        users = _uniform_in_disc(stream, bs, config.cell_radius, L)
        targets = _uniform_in_disc(stream, bs, config.cell_radius, L)
        geometry = GeometrySample(bs_xy=bs, user_xy=users, target_xy=targets)
        alpha = config.pathloss_exponent
        d_bu = np.maximum(np.linalg.norm(bs[:, None, :] - users[None, :, :], axis=2), 1.0)
        d_bt = np.maximum(np.linalg.norm(bs[:, None, :] - targets[None, :, :], axis=2), 1.0)
        # return leg: target i back to its own (receiving) BS i
        d_tb = np.maximum(np.linalg.norm(targets - bs, axis=1), 1.0)
        mean_rho = d_bu ** (-alpha)
        mean_g = (d_bt ** (-alpha)) * (d_tb[None, :] ** (-alpha)) * config.rcs
    if config.fading:
        rho = stream.exponential(mean_rho)
        g = stream.exponential(mean_g)
    else:
        rho = mean_rho.copy()
        g = mean_g.copy()
    return ChannelRealization(
        rho=rho,
        g=g,
        sigma_c2=np.array([db_to_linear(v) for v in config.noise_comm_db]),
        sigma_s2=np.array([db_to_linear(v) for v in config.noise_sense_db]),
        geometry=geometry,
    )


SCENARIO_KEYS = tuple(f.name for f in dataclasses.fields(ScenarioConfig))


def scenario_from_dict(doc):
    """Build a ScenarioConfig from a plain mapping (parsed config file).

    Unknown keys are rejected by name so typos in a config file do not
    silently fall back to defaults.
    """
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("scenario", f"expected a mapping, got {type(doc).__name__}")
    unknown = sorted(set(doc) - set(SCENARIO_KEYS))
    if unknown:
        raise ConfigError(unknown[0], "unknown scenario key")
    return ScenarioConfig(**doc)
