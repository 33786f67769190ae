from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from ..errors import DimensionError, ParameterError, SizeError
from ..numcore import FLOAT

_CHUNK = 2048


def scott_bandwidth(n: int, d: int) -> float:
    """Scott's rule on standardized data: ``n ** (-1 / (d + 4))``."""
    if n < 1:
        raise SizeError("scott_bandwidth needs at least one sample")
    if d < 1:
        raise SizeError("scott_bandwidth needs dimension >= 1")
    return float(n ** (-1.0 / (d + 4)))


class KdeModel:
    """Isotropic Gaussian KDE; ``log_density`` uses log-sum-exp."""

    kind = "kde"

    def __init__(self, points, bandwidth: float):
        points = np.asarray(points, dtype=FLOAT)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.shape[0] == 0:
            raise SizeError("KDE needs at least one point")
        if not (bandwidth > 0.0 and math.isfinite(bandwidth)):
            raise ParameterError(f"bandwidth must be positive, got {bandwidth}")
        self.points = points
        self.points.setflags(write=False)
        self.bandwidth = float(bandwidth)
        self.fitted = True

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def log_density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=FLOAT)
        single = x.ndim == 1
        x = x.reshape(1, -1) if single else x
        if x.shape[1] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {x.shape[1]}")
        n, d = self.points.shape
        h = self.bandwidth
        const = -math.log(n) - d * (math.log(h) + 0.5 * math.log(2.0 * math.pi))
        p_sq = np.einsum("ij,ij->i", self.points, self.points)
        out = np.empty(x.shape[0], dtype=FLOAT)
        for start in range(0, x.shape[0], _CHUNK):
            xb = x[start : start + _CHUNK]
            sq = np.einsum("ij,ij->i", xb, xb)[:, None] + p_sq[None, :] - 2.0 * xb @ self.points.T
            np.maximum(sq, 0.0, out=sq)
            out[start : start + _CHUNK] = logsumexp(-0.5 * sq / (h * h), axis=1) + const
        return out[0] if single else out

    def sample(self, n: int, rng) -> np.ndarray:
        idx = rng.sample_with_replacement(self.points.shape[0], n)
        return self.points[idx] + self.bandwidth * rng.normal((n, self.dim))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "bandwidth": self.bandwidth, "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KdeModel":
        return cls(np.array(d["points"], dtype=FLOAT), d["bandwidth"])


def kde_fit(data, bandwidth: float | None = None) -> KdeModel:
    """Fit a KDE to a Dataset (or array); bandwidth defaults to Scott's rule."""
    values = getattr(data, "values", data)
    values = np.asarray(values, dtype=FLOAT)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if values.shape[0] == 0:
        raise SizeError("cannot fit a KDE on empty data")
    if bandwidth is None:
        bandwidth = scott_bandwidth(*values.shape)
    return KdeModel(values, bandwidth)
