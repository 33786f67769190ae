from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from ..errors import DimensionError, ParameterError
from ..numcore import FLOAT

LOG_2PI = math.log(2.0 * math.pi)


def normal_logpdf(x, mean=0.0, std=1.0):
    z = (np.asarray(x, dtype=FLOAT) - mean) / std
    return -0.5 * z * z - np.log(std) - 0.5 * LOG_2PI


class ClosedFormDensity:
    """Mixture of diagonal Gaussians with exact log-pdf."""

    kind = "closed_form"

    def __init__(self, weights, means, stds):
        weights = np.asarray(weights, dtype=FLOAT).ravel()
        means = np.asarray(means, dtype=FLOAT)
        stds = np.asarray(stds, dtype=FLOAT)
        k = weights.size
        means = means.reshape(k, -1)
        stds = stds.reshape(k, -1)
        if means.shape != stds.shape:
            raise ParameterError("means and stds must have matching shapes")
        if np.any(weights < 0) or not math.isclose(weights.sum(), 1.0, abs_tol=1e-12):
            raise ParameterError("mixture weights must be non-negative and sum to 1")
        if np.any(stds <= 0):
            raise ParameterError("mixture stds must be positive")
        self.weights, self.means, self.stds = weights, means, stds
        self.fitted = True

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=FLOAT)
        single = x.ndim == 0 or (x.ndim == 1 and self.dim > 1 and x.size == self.dim)
        if x.ndim == 0:
            x = x.reshape(1, 1)
        elif x.ndim == 1:
            x = x.reshape(1, -1) if single else x.reshape(-1, 1)
        if x.shape[1] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {x.shape[1]}")
        # (rows, components)
        comp = normal_logpdf(x[:, None, :], self.means[None], self.stds[None]).sum(axis=2)
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        if self.weights.size == 1:
            out = comp[:, 0]
        else:
            out = logsumexp(comp + log_w[None, :], axis=1)
        return out[0] if single else out

    def sample(self, n: int, rng) -> np.ndarray:
        u = rng.uniform(size=n)
        comp = np.searchsorted(np.cumsum(self.weights), u, side="right")
        comp = np.minimum(comp, self.weights.size - 1)
        return self.means[comp] + self.stds[comp] * rng.normal((n, self.dim))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClosedFormDensity":
        return cls(d["weights"], d["means"], d["stds"])


def closed_form_log_density(cf: ClosedFormDensity, x):
    return cf.log_density(x)


class TransformedDensity:
    """Density of ``g(X)`` for a per-feature strictly monotone ``g``.

    ``inverse`` maps representation values back to the original space and
    ``log_abs_dinv`` returns ``log |d inverse / dy|`` per feature.
    """

    kind = "transformed"

    def __init__(self, base, inverse, log_abs_dinv):
        self.base = base
        self.inverse = inverse
        self.log_abs_dinv = log_abs_dinv
        self.fitted = True

    @property
    def dim(self) -> int:
        return self.base.dim

    def log_density(self, y):
        y = np.asarray(y, dtype=FLOAT)
        jac = np.asarray(self.log_abs_dinv(y), dtype=FLOAT)
        if jac.ndim == 2:
            jac = jac.sum(axis=1)
        return self.base.log_density(self.inverse(y)) + jac


def log_shift_representation(density, shift: float = 10.0) -> TransformedDensity:
    """Density of ``ln(x + shift)`` applied to every feature."""
    return TransformedDensity(density, lambda y: np.exp(y) - shift, lambda y: y)
