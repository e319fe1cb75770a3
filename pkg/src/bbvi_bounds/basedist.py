"""Standardized symmetric base distributions and seeded random streams."""

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, digamma
from scipy.stats import t as student_t_dist


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by ``(seed, index)``.

    ``index`` is a tuple of non-negative integers (for instance
    ``(experiment, iterate, replicate)``). Equal ``(seed, index)`` pairs give
    bit-identical draws regardless of which other streams were used before.
    """

    seed: int
    index: tuple = ()

    def child(self, *key):
        return RngStream(self.seed, self.index + tuple(int(k) for k in key))

    def generator(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=self.index)
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class BaseDistribution:
    kind: str = "gaussian"
    nu: float = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "student-t"):
            raise ValueError(f"unknown base distribution {self.kind!r}")
        if self.kind == "student-t":
            if self.nu is None or not self.nu > 4:
                raise ValueError(
                    f"kurtosis undefined for student-t with nu={self.nu}; need nu > 4"
                )

    @property
    def t_scale(self):
        # standardizes a raw t(nu) draw to unit variance
        return np.sqrt((self.nu - 2.0) / self.nu)

    def sample(self, shape, rng):
        """Draw i.i.d. standardized components with the given shape."""
        gen = rng.generator() if isinstance(rng, RngStream) else rng
        z = gen.standard_normal(shape)
        if self.kind == "gaussian":
            return z
        chi2 = gen.chisquare(self.nu, size=shape)
        return z / np.sqrt(chi2 / self.nu) * self.t_scale

    def kurtosis(self):
        if self.kind == "gaussian":
            return 3.0
        return 3.0 * (self.nu - 2.0) / (self.nu - 4.0)

    def entropy_per_dim(self):
        if self.kind == "gaussian":
            return 0.5 * np.log(2.0 * np.pi * np.e)
        nu = self.nu
        raw = (nu + 1.0) / 2.0 * (digamma((nu + 1.0) / 2.0) - digamma(nu / 2.0)) + (
            0.5 * np.log(nu) + betaln(nu / 2.0, 0.5)
        )
        return float(raw + np.log(self.t_scale))

    def logpdf(self, x):
        """Per-component log density of the standardized distribution."""
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return -0.5 * x * x - 0.5 * np.log(2.0 * np.pi)
        return student_t_dist.logpdf(x, self.nu, scale=self.t_scale)


GAUSSIAN = BaseDistribution("gaussian")


def student_t(nu):
    return BaseDistribution("student-t", nu)


def sample(dist, d, rng):
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return dist.sample((d,), rng)


def kurtosis(dist):
    return dist.kurtosis()


def entropy_per_dim(dist):
    return dist.entropy_per_dim()
