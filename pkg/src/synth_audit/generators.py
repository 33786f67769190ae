"""Toy synthetic-data generators with an explicit overfitting knob.

``additive_noise`` and ``smoothed_bootstrap`` resample member rows and add
isotropic Gaussian noise (the knob is the noise scale), so a small knob
means heavy memorization. ``gaussian_mle`` only keeps first and second
moments and therefore memorizes nothing row-specific.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .density.closed_form import ClosedFormDensity
from .errors import ConfigError, SizeError
from .numcore import SeededRng

KINDS = ("additive_noise", "smoothed_bootstrap", "gaussian_mle", "closed_form_scenario")

# noise values of the additive-noise privacy/utility baseline
NOISE_GRID = (0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9, 2.3, 2.5, 2.9, 3.5, 3.9)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str = "additive_noise"
    knob: float = 0.1
    n_syn: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        if self.n_syn < 1:
            raise ConfigError("n_syn must be at least 1")
        if self.kind == "smoothed_bootstrap" and not self.knob > 0:
            raise ConfigError("smoothed_bootstrap bandwidth must be positive")
        if self.kind == "additive_noise" and self.knob < 0:
            raise ConfigError("additive_noise sigma must be non-negative")


def generate(spec: GeneratorSpec, d_mem: Dataset, rng: SeededRng) -> Dataset:
    if d_mem.n_rows == 0:
        raise SizeError("generator needs a non-empty training set")
    x = d_mem.values
    n, d = x.shape
    if spec.kind in ("additive_noise", "smoothed_bootstrap"):
        idx = rng.sample_with_replacement(n, spec.n_syn)
        out = x[idx] + spec.knob * rng.normal((spec.n_syn, d))
    elif spec.kind == "gaussian_mle":
        mean = x.mean(axis=0)
        cov = np.atleast_2d(np.cov(x, rowvar=False, bias=True))
        # eigh keeps semidefinite covariances usable (e.g. a single row)
        w, v = np.linalg.eigh(cov)
        root = v * np.sqrt(np.clip(w, 0.0, None))
        out = mean + rng.normal((spec.n_syn, d)) @ root.T
    else:
        raise ConfigError("closed_form_scenario data comes from scenario_fig2, not generate()")
    return d_mem.with_values(out)


@dataclass(frozen=True)
class Fig2Scenario:
    d_mem: Dataset
    d_syn: Dataset
    p_r: ClosedFormDensity
    p_g: ClosedFormDensity


def fig2_densities() -> tuple[ClosedFormDensity, ClosedFormDensity]:
    """Population N(0,1) and a generator with an overfitted bump at x=4."""
    p_r = ClosedFormDensity([1.0], [[0.0]], [[1.0]])
    p_g = ClosedFormDensity([0.5, 0.5], [[0.0], [4.0]], [[1.0], [0.2]])
    return p_r, p_g


def scenario_fig2(n_mem: int, n_syn: int, rng: SeededRng) -> Fig2Scenario:
    if n_mem < 1 or n_syn < 1:
        raise SizeError("scenario sizes must be at least 1")
    p_r, p_g = fig2_densities()
    d_mem = Dataset.from_array(p_r.sample(n_mem, rng))
    d_syn = Dataset.from_array(p_g.sample(n_syn, rng))
    return Fig2Scenario(d_mem, d_syn, p_r, p_g)
