"""Built-in synthetic populations used by the CLI and the acceptance runs."""
from __future__ import annotations


from .data import Dataset
from .density.closed_form import ClosedFormDensity
from .errors import ConfigError
from .generators import fig2_densities
from .numcore import SeededRng


def gauss_mixture() -> ClosedFormDensity:
    """Three-cluster 2-D population."""
    return ClosedFormDensity(
        [0.5, 0.3, 0.2],
        [[-2.0, 0.0], [2.0, 0.0], [0.0, 3.0]],
        [[1.0, 1.0], [0.7, 0.7], [0.5, 0.5]],
    )


def gauss_mixture_minority(minority_fraction: float = 0.1) -> ClosedFormDensity:
    """Majority N(0, I) plus a small, tight minority cluster around x0 = 4.5.

    Rows with ``x0 > 3`` are (almost exactly) the minority cluster.
    """
    if not 0.0 < minority_fraction < 1.0:
        raise ConfigError("minority_fraction must lie in (0, 1)")
    return ClosedFormDensity(
        [1.0 - minority_fraction, minority_fraction],
        [[0.0, 0.0], [4.5, 0.0]],
        [[1.0, 1.0], [0.5, 0.5]],
    )


MINORITY_PREDICATE = "x0 > 3"

SCENARIOS = ("gauss-mixture", "gauss-mixture-minority", "fig2")


def population_density(name: str, minority_fraction: float = 0.1) -> ClosedFormDensity:
    if name == "gauss-mixture":
        return gauss_mixture()
    if name == "gauss-mixture-minority":
        return gauss_mixture_minority(minority_fraction)
    if name == "fig2":
        return fig2_densities()[0]
    raise ConfigError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")


def sample_population(name: str, n_rows: int, rng: SeededRng, minority_fraction: float = 0.1) -> Dataset:
    density = population_density(name, minority_fraction)
    return Dataset.from_array(density.sample(n_rows, rng))
