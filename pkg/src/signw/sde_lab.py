"""Synthetic data for learning SDE solution maps, and the convergence study.

Randomness: sample ``i`` of a run with seed ``s`` draws from its own
PCG64 stream seeded by ``SeedSequence(s, spawn_key=(i,))``; Gaussian
increments come from ``Generator.standard_normal`` (ziggurat). Sample
``i`` is therefore the same path whatever the dataset size, and identical
seeds give bitwise-identical datasets.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .metrics import SemiMetricSpec, pairwise_distances
from .regression import CVConfig, fit_cv, rmse
from .signature import Path, time_augment

# split streams live far away from sample indices
_SPLIT_KEY = 2**62


class NumericalError(ArithmeticError):
    """A simulated state became non-finite."""


DRIFTS: Dict[str, Callable[..., Callable]] = {
    "power": lambda p=5: (lambda x: -(x**p)),
    "linear": lambda k=1.0: (lambda x: -k * x),
    "zero": lambda *_: (lambda x: np.zeros_like(x)),
}
DIFFUSIONS: Dict[str, Callable[..., Callable]] = {
    "xcos": lambda *_: (lambda x: x * np.cos(x)),
    "identity": lambda *_: (lambda x: x),
    "zero": lambda *_: (lambda x: np.zeros_like(x)),
}


def register_drift(name: str, factory: Callable[..., Callable]):
    DRIFTS[name] = factory


def register_diffusion(name: str, factory: Callable[..., Callable]):
    DIFFUSIONS[name] = factory


@dataclass(frozen=True)
class SDEConfig:
    """Scalar SDE ``dZ = b(Z) dt + sigma(Z) dB`` on ``[0, T]`` with ``L`` Euler steps.

    The default is ``b(x) = -x**5``, ``sigma(x) = x cos(x)``, ``Z_0 = 1``.
    """

    drift: str = "power"
    drift_param: Optional[float] = 5
    diffusion: str = "xcos"
    z0: float = 1.0
    T: float = 1.0
    L: int = 500

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("need at least one Euler step")
        if not self.T > 0:
            raise ValueError("horizon must be positive")
        if self.drift not in DRIFTS:
            raise ValueError(f"unknown drift {self.drift!r}")
        if self.diffusion not in DIFFUSIONS:
            raise ValueError(f"unknown diffusion {self.diffusion!r}")

    def b(self):
        f = DRIFTS[self.drift]
        return f() if self.drift_param is None else f(self.drift_param)

    def sigma(self):
        return DIFFUSIONS[self.diffusion]()

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.L + 1) * (self.T / self.L)


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_brownian(L: int, T: float, d: int, rng: np.random.Generator) -> Path:
    """Brownian path on the uniform grid ``t_i = i T / L`` started at 0."""
    if L < 1:
        raise ValueError("need L >= 1")
    inc = rng.standard_normal((L, d)) * np.sqrt(T / L)
    values = np.vstack([np.zeros((1, d)), np.cumsum(inc, axis=0)])
    return Path(np.arange(L + 1) * (T / L), values)


def brownian_values(seed: int, indices: Sequence[int], L: int, T: float, d: int = 1) -> np.ndarray:
    """Stacked ``(len(indices), L + 1, d)`` driver values, one stream per index."""
    out = np.zeros((len(indices), L + 1, d))
    scale = np.sqrt(T / L)
    for row, i in enumerate(indices):
        out[row, 1:] = np.cumsum(sample_rng(seed, i).standard_normal((L, d)) * scale, axis=0)
    return out


def euler_maruyama_batch(cfg: SDEConfig, dB: np.ndarray) -> np.ndarray:
    """Terminal values for driver increments of shape ``(n, L)``."""
    dB = np.atleast_2d(dB)
    if dB.shape[1] != cfg.L:
        raise ValueError(f"driver has {dB.shape[1]} increments, config expects {cfg.L}")
    b, sigma = cfg.b(), cfg.sigma()
    dt = cfg.T / cfg.L
    z = np.full(dB.shape[0], float(cfg.z0))
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(cfg.L):
            z = z + b(z) * dt + sigma(z) * dB[:, i]
    if not np.all(np.isfinite(z)):
        bad = np.flatnonzero(~np.isfinite(z))
        raise NumericalError(f"non-finite SDE state for {len(bad)} sample(s), first at row {bad[0]}")
    return z


def euler_maruyama(cfg: SDEConfig, driver: Path) -> float:
    """Itô Euler-Maruyama terminal value driven by a 1-d Brownian path."""
    if driver.dim != 1:
        raise ValueError("driver must be one-dimensional")
    if driver.times.size != cfg.L + 1 or not np.allclose(driver.times, cfg.times, rtol=0, atol=1e-12):
        raise ValueError("driver times do not match the Euler grid")
    return float(euler_maruyama_batch(cfg, np.diff(driver.values[:, 0])[None, :])[0])


@dataclass(frozen=True, eq=False)
class RegressionDataset:
    inputs: tuple
    targets: np.ndarray
    train: np.ndarray
    test: np.ndarray

    def train_paths(self) -> List[Path]:
        return [self.inputs[i] for i in self.train]

    def test_paths(self) -> List[Path]:
        return [self.inputs[i] for i in self.test]


def _paths_from_values(times, values, augment):
    paths = [Path(times, v) for v in values]
    return [time_augment(p) for p in paths] if augment else paths


def simulate(cfg: SDEConfig, seed: int, indices: Sequence[int], augment: bool = False):
    """Drivers and terminal values for the given sample indices."""
    values = brownian_values(seed, indices, cfg.L, cfg.T, 1)
    targets = euler_maruyama_batch(cfg, np.diff(values[:, :, 0], axis=1))
    return _paths_from_values(cfg.times, values, augment), targets


def generate_dataset(M: int, train_fraction: float, cfg: SDEConfig, seed: int, augment: bool = False) -> RegressionDataset:
    """``M`` driver/target pairs with a seeded disjoint train/test split."""
    if M < 2:
        raise ValueError("need M >= 2")
    n_train = int(round(train_fraction * M))
    if not 0 < n_train < M:
        raise ValueError(f"split fraction {train_fraction} leaves an empty side for M={M}")
    paths, targets = simulate(cfg, seed, range(M), augment)
    perm = sample_rng(seed, _SPLIT_KEY).permutation(M)
    return RegressionDataset(tuple(paths), targets, np.sort(perm[:n_train]), np.sort(perm[n_train:]))


def empirical_small_ball(samples: Sequence[Path], x: Path, metric: SemiMetricSpec, h_grid) -> List[tuple]:
    """Fraction of ``samples`` within distance ``h`` of ``x``, for each ``h``."""
    if not samples or len(h_grid) == 0:
        raise ValueError("need samples and a non-empty h grid")
    dist = pairwise_distances(metric, [x], list(samples))[0]
    return [(float(h), float(np.mean(dist <= h))) for h in h_grid]


@dataclass
class ConvergenceResult:
    m_values: List[int]
    metrics: List[str]
    rmse: np.ndarray  # (len(m_values), len(metrics)), seed-averaged
    seconds: np.ndarray  # same shape, seed-averaged wall clock
    per_seed: np.ndarray = field(repr=False, default=None)  # (n_seeds, n_m, n_metrics)
    chosen: List[Dict] = field(default_factory=list)


def convergence_experiment(m_values: Sequence[int], metrics: Sequence[SemiMetricSpec], cfg: SDEConfig,
                           cv: CVConfig, seeds: Sequence[int], n_test: int = 512, kernel: str = "gaussian",
                           progress: Optional[Callable[[str], None]] = None) -> ConvergenceResult:
    """Test RMSE of cross-validated estimators as the training size grows.

    Per seed, samples ``0..n_test-1`` form the test set and samples
    ``n_test..n_test+M-1`` the training set, so training sets are nested in M.
    Signature metrics see time-augmented drivers.
    """
    m_values = list(m_values)
    if m_values != sorted(m_values) or not m_values:
        raise ValueError("m_values must be non-empty and ascending")
    out = np.zeros((len(seeds), len(m_values), len(metrics)))
    secs = np.zeros_like(out)
    chosen = []
    for s_i, seed in enumerate(seeds):
        paths, targets = simulate(cfg, seed, range(n_test + m_values[-1]))
        aug = [time_augment(p) for p in paths]
        for m_i, M in enumerate(m_values):
            tr = slice(n_test, n_test + M)
            for k, spec in enumerate(metrics):
                inputs = aug if spec.is_signature else paths
                start = time.perf_counter()
                model, res = fit_cv(cv, spec, kernel, inputs[tr], targets=targets[tr])
                pred = model.predict(inputs[:n_test])
                secs[s_i, m_i, k] = time.perf_counter() - start
                out[s_i, m_i, k] = rmse(pred, targets[:n_test])
                chosen.append({"seed": seed, "M": M, "metric": str(spec), "chosen": str(res.metric), "h": res.h})
                if progress:
                    progress(f"seed={seed} M={M} {spec}: rmse={out[s_i, m_i, k]:.4f}")
    return ConvergenceResult(m_values, [str(m) for m in metrics], out.mean(axis=0), secs.mean(axis=0), out, chosen)


# --- synthetic classification benchmark ---------------------------------------------


def sine_cosine_dataset(n: int, noise: float = 0.1, n_points: int = 50, seed: int = 0):
    """Two-class benchmark: noisy ``sin(2 pi t)`` versus ``cos(2 pi t)`` on ``[0, 1]``.

    Classes alternate ``sin, cos, sin, ...``. Returns ``(paths, labels)``.
    """
    t = np.linspace(0.0, 1.0, n_points)
    paths, labels = [], []
    for i in range(n):
        rng = sample_rng(seed, i)
        label = "sin" if i % 2 == 0 else "cos"
        clean = np.sin(2 * np.pi * t) if label == "sin" else np.cos(2 * np.pi * t)
        paths.append(Path(t, clean + noise * rng.standard_normal(n_points)))
        labels.append(label)
    return paths, labels
