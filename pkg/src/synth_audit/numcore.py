"""Numeric substrate: seeded randomness, Adam, and a finite-difference checker.

Randomness always flows through :class:`SeededRng`, which pins the PCG64
bit generator so a given seed yields the same stream on every platform.
Dense matrices are plain ``float64`` numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError

FLOAT = np.float64


class SeededRng:
    """PCG64-backed random stream with deterministic child derivation."""

    algorithm = "PCG64"

    def __init__(self, seed: int, spawn_key: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.spawn_key = tuple(int(k) for k in spawn_key)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "SeededRng":
        """Independent stream for task ``index``; depends only on (seed, key, index)."""
        return SeededRng(self.seed, self.spawn_key + (int(index),))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def sample_without_replacement(self, n: int, k: int) -> np.ndarray:
        if k > n:
            raise ValueError(f"cannot draw {k} distinct indices from {n}")
        return self._gen.permutation(n)[:k]

    def sample_with_replacement(self, n: int, k: int) -> np.ndarray:
        return self._gen.integers(0, n, size=k)


@dataclass
class AdamState:
    size: int
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.size, dtype=FLOAT)
        if self.v is None:
            self.v = np.zeros(self.size, dtype=FLOAT)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update; returns new params and advances ``state``."""
    params = np.asarray(params, dtype=FLOAT)
    grads = np.asarray(grads, dtype=FLOAT)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise DimensionError(
            f"adam_step: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m = b1 * state.m + (1.0 - b1) * grads
    state.v = b2 * state.v + (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1**state.step)
    v_hat = state.v / (1.0 - b2**state.step)
    return params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


def finite_diff_check(loss_fn, params, analytic_grads, rel_tol=1e-4, h=1e-5):
    """Compare analytic gradients against central differences.

    Returns ``(passed, max_rel_error)`` where the relative error of each
    coordinate is ``|analytic - numeric| / (|numeric| + 1e-8)``.
    """
    params = np.array(params, dtype=FLOAT).ravel()
    analytic = np.asarray(analytic_grads, dtype=FLOAT).ravel()
    if analytic.shape != params.shape:
        raise DimensionError("analytic gradient length differs from parameter length")
    numeric = np.empty_like(params)
    for i in range(params.size):
        orig = params[i]
        params[i] = orig + h
        f_plus = float(loss_fn(params.copy()))
        params[i] = orig - h
        f_minus = float(loss_fn(params.copy()))
        params[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"non-finite loss when perturbing parameter {i}")
        numeric[i] = (f_plus - f_minus) / (2.0 * h)
    rel = np.abs(analytic - numeric) / (np.abs(numeric) + 1e-8)
    max_rel = float(rel.max()) if rel.size else 0.0
    return max_rel <= rel_tol, max_rel


def flatten(arrays) -> np.ndarray:
    return np.concatenate([np.asarray(a, dtype=FLOAT).ravel() for a in arrays])


def unflatten(vector: np.ndarray, like) -> list[np.ndarray]:
    out, pos = [], 0
    for a in like:
        n = a.size
        out.append(vector[pos : pos + n].reshape(a.shape).copy())
        pos += n
    if pos != vector.size:
        raise DimensionError("parameter vector length does not match layout")
    return out
