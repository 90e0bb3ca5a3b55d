"""Finite-domain data-generating processes and reproducible sampling."""

from dataclasses import dataclass, field

import numpy as np

from ..spectrum import marginal_masses

NOISE_TRANSFORM = "numpy PCG64 + ziggurat standard normal"


def default_target(domain_size, support=5):
    """Indicator of the first ``support`` domain points."""
    f = np.zeros(domain_size)
    f[: min(support, domain_size)] = 1.0
    return f


@dataclass(frozen=True)
class SyntheticTask:
    """Regression on ``{1, ..., N}`` with ``mu(x) proportional to x^(-a)``.

    ``target[x - 1]`` is the regression function at ``x``; labels are the
    target plus ``N(0, noise_sd^2)`` noise.
    """

    domain_size: int
    marginal_exponent: float = 0.5
    noise_sd: float = 0.5
    target: np.ndarray | None = field(default=None, repr=False, compare=False)
    master_seed: int = 0

    def __post_init__(self):
        if self.domain_size < 1:
            raise ValueError("domain_size must be positive")
        if self.marginal_exponent < 0:
            raise ValueError("marginal_exponent must be >= 0")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        f = default_target(self.domain_size) if self.target is None else np.asarray(self.target, float)
        if f.shape != (self.domain_size,):
            raise ValueError("target must give one value per domain point")
        f = f.copy()
        f.setflags(write=False)
        object.__setattr__(self, "target", f)
        mu = marginal_masses(self.domain_size, self.marginal_exponent)
        mu.setflags(write=False)
        cdf = np.cumsum(mu)
        cdf[-1] = 1.0
        cdf.setflags(write=False)
        object.__setattr__(self, "_masses", mu)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def masses(self):
        return self._masses

    @property
    def domain(self):
        return np.arange(1, self.domain_size + 1)

    @property
    def noise_var(self):
        return self.noise_sd**2

    def f(self, x):
        return self.target[np.asarray(x, dtype=np.int64) - 1]


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray


def replicate_seed(master_seed, replicate, stream=0):
    """64-bit seed for one (replicate, stream) pair, via ``SeedSequence`` mixing."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(replicate), int(stream)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_points(task, n, rng):
    u = rng.random(n)
    x = np.searchsorted(task._cdf, u, side="right") + 1
    return np.minimum(x, task.domain_size)


def sample_dataset(task, n, replicate_seed):
    """Draw ``n`` iid pairs; a pure function of ``(task, n, replicate_seed)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(replicate_seed)
    x = sample_points(task, n, rng)
    noise = rng.standard_normal(n)
    y = task.f(x) + task.noise_sd * noise
    return Dataset(x, y)
