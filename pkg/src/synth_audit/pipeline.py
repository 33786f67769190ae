"""Audit workflow: split, standardize, generate, fit densities, score, evaluate.

All randomness of one run derives from a single seed through fixed child
indices, so a run is reproducible from (config, seed) alone.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import attacks as atk
from .config import RunConfig
from .data import (
    Dataset,
    ExperimentSplit,
    Predicate,
    concat,
    dequantize,
    fit_standardizer,
    load_csv,
    make_split,
    shifted_reference,
)
from .density import flow_fit, kde_fit
from .errors import ConfigError
from .evaluation import (
    DEFAULT_Q_GRID,
    accuracy_at_median,
    auc,
    precision_quantile_curve,
    subgroup_report,
    wasserstein_utility,
)
from .generators import GeneratorSpec, fig2_densities, generate
from .numcore import SeededRng
from .scenarios import sample_population

log = logging.getLogger(__name__)

# fixed child-stream indices; never renumber
_POPULATION, _SPLIT, _GENERATOR, _DEQUANT, _UTILITY, _SHIFT = 0, 1, 2, 3, 4, 5
_DENSITY_BASE, _ATTACKER_BASE = 20, 40


@dataclass
class RunResult:
    seed: int
    split: ExperimentSplit
    raw_test: Dataset
    scores: dict
    metrics: dict
    utility: float
    extra: dict


def load_population(cfg: RunConfig, rng: SeededRng) -> Dataset:
    d = cfg.data
    if d.csv is not None:
        data = load_csv(d.csv)
    elif d.scenario == "fig2":
        raise ConfigError("fig2 is handled by run_fig2")
    else:
        data = sample_population(d.scenario, d.n_rows, rng.child(_POPULATION), d.minority_fraction)
    if d.exclude:
        data = data.take(np.flatnonzero(~Predicate.parse(d.exclude).mask(data)))
    return data


class DensityCache:
    """Fits each (backend, dataset role) density at most once per run."""

    def __init__(self, cfg: RunConfig, rng: SeededRng, sets: dict, closed_forms: dict | None = None):
        self.cfg, self.rng, self.sets = cfg, rng, sets
        self.closed_forms = closed_forms or {}
        self._fitted = {}

    def get(self, backend: str, role: str, bandwidth=None):
        key = (backend, role, bandwidth)
        if key not in self._fitted:
            data = self.sets[role]
            if backend == "kde":
                model = kde_fit(data, bandwidth)
            elif backend == "flow":
                index = _DENSITY_BASE + (0 if role == "ref" else 1)
                model = flow_fit(data, self.cfg.flow, self.rng.child(index))
            elif backend == "closed_form":
                model = self.closed_forms[role]
            else:
                raise ConfigError(f"unknown backend {backend!r}")
            log.debug("fitted %s density on %s (%d rows)", backend, role, data.n_rows)
            self._fitted[key] = model
        return self._fitted[key]

    def log_density(self, backend, role, x, bandwidth=None):
        return self.get(backend, role, bandwidth).log_density(x)


def score_attackers(cfg: RunConfig, sets: dict, densities: DensityCache, rng: SeededRng) -> dict:
    d_syn, d_ref, d_test = sets["syn"], sets["ref"], sets["test"]
    x = d_test.values
    out = {}
    for name in cfg.attackers:
        a_rng = rng.child(_ATTACKER_BASE + atk.ATTACKERS.index(name))
        backend = cfg.backend_for(name)
        bw = cfg.option(name, "bandwidth")
        if name == "domias":
            s = atk.domias(densities.log_density(backend, "syn", x, bw), densities.log_density(backend, "ref", x, bw))
        elif name == "eq1_only":
            s = atk.eq1_only(densities.log_density(backend, "syn", x, bw))
        elif name == "gaussian_prior":
            feats = cfg.option(name, "features")
            means, stds = cfg.option(name, "means", ()), cfg.option(name, "stds", ())
            if not (len(feats) == len(means) == len(stds)):
                raise ConfigError("gaussian_prior features, means and stds must have equal lengths")
            prior = atk.PriorSpec({f: (m, sd) for f, m, sd in zip(feats, means, stds)})
            s = atk.gaussian_prior_domias(densities.log_density(backend, "syn", x, bw), d_test, prior)
        elif name == "logan0":
            s = atk.logan0(d_syn, d_test, cfg.net_config(name), a_rng)
        elif name == "logan_d1":
            s = atk.logan_d1(d_syn, d_ref, d_test, cfg.net_config(name), a_rng)
        elif name == "mc":
            s = atk.mc_score(d_syn, d_test, cfg.option(name, "epsilon"), cfg.option(name, "pca_components"))
        elif name == "ganleaks0":
            s = atk.ganleaks0(d_syn, d_test, cfg.option(name, "k"), a_rng)
        elif name == "ganleaks_cal":
            spec = GeneratorSpec(
                cfg.option(name, "reference_kind", cfg.generator.kind),
                cfg.option(name, "reference_knob", cfg.generator.knob),
                cfg.generator.n_syn,
            )
            s = atk.ganleaks_cal(d_syn, d_ref, d_test, cfg.option(name, "k"), spec, a_rng)
        else:  # pragma: no cover - validated earlier
            raise ConfigError(name)
        if name in ("domias", "eq1_only", "gaussian_prior"):
            s = replace(s, metadata={**s.metadata, "backend": backend, "bandwidth": bw})
        out[name] = s
    return out


def evaluate_scores(scores: dict, labels, mask=None, q_grid=DEFAULT_Q_GRID) -> dict:
    metrics = {}
    for name, s in scores.items():
        curve = precision_quantile_curve(s, labels, q_grid)
        m = {
            "auc": auc(s, labels),
            "accuracy_at_median": accuracy_at_median(s, labels),
            "precision_curve": [[q, p] for q, p in curve.rows()],
        }
        if mask is not None:
            rep = subgroup_report(s, labels, mask)
            m["subgroup"] = {
                "minority": {"auc": rep["minority"].auc, "accuracy": rep["minority"].accuracy, "n": rep["minority"].n},
                "majority": {"auc": rep["majority"].auc, "accuracy": rep["majority"].accuracy, "n": rep["majority"].n},
                "gap_auc": rep["gap_auc"],
                "gap_accuracy": rep["gap_accuracy"],
            }
        metrics[name] = m
    return metrics


def prepare_sets(cfg: RunConfig, split: ExperimentSplit, rng: SeededRng, fit_on: Dataset | None = None) -> dict:
    """Standardize on D_ref (or ``fit_on``), then generate D_syn from the standardized members."""
    if cfg.data.dequantize:
        j = rng.child(_DEQUANT)
        split = split.map(lambda d: dequantize(d, j))
        fit_on = dequantize(fit_on, rng.child(_DEQUANT)) if fit_on is not None else None
    if cfg.data.standardize:
        params = fit_standardizer(split.d_ref if fit_on is None else fit_on)
        mem, ref, test = (params.apply(d) for d in (split.d_mem, split.d_ref, split.d_test))
    else:
        mem, ref, test = split.d_mem, split.d_ref, split.d_test
    g = cfg.generator
    spec = GeneratorSpec(g.kind, g.knob, g.n_syn)
    syn = generate(spec, mem, rng.child(_GENERATOR))
    return {"mem": mem, "ref": ref, "test": test, "syn": syn}


def run_on_split(cfg: RunConfig, seed: int, split: ExperimentSplit, closed_forms=None, sets=None) -> RunResult:
    rng = SeededRng(seed)
    sets = sets or prepare_sets(cfg, split, rng)
    densities = DensityCache(cfg, rng, sets, closed_forms)
    scores = score_attackers(cfg, sets, densities, rng)
    mask = Predicate.parse(cfg.subgroup).mask(split.d_test) if cfg.subgroup else None
    metrics = evaluate_scores(scores, split.labels, mask)
    utility = wasserstein_utility(sets["syn"], sets["ref"], rng.child(_UTILITY))
    return RunResult(seed, split, split.d_test, scores, metrics, utility, {})


def run_fig2(cfg: RunConfig, seed: int) -> RunResult:
    """Closed-form bump scenario.

    The generator reproduces its training distribution, so members follow
    p_G (half population, half the overfitted bump at x=4) while reference
    rows and non-members follow the population p_R = N(0, 1).
    """
    rng = SeededRng(seed)
    p_r, p_g = fig2_densities()
    s = cfg.split
    half = s.n_test // 2
    r = rng.child(_POPULATION)
    mem = Dataset.from_array(p_g.sample(s.n_mem, r))
    ref = Dataset.from_array(p_r.sample(s.n_ref, r))
    fresh = p_r.sample(half, r)
    r_split = rng.child(_SPLIT)
    member_pick = mem.values[r_split.sample_without_replacement(s.n_mem, half)]
    test_values = np.vstack([member_pick, fresh])
    labels = np.concatenate([np.ones(half, dtype=int), np.zeros(half, dtype=int)])
    order = r_split.permutation(s.n_test)
    test = Dataset.from_array(test_values[order])
    labels = labels[order]
    split = ExperimentSplit(mem, ref, test, labels)
    syn = Dataset.from_array(p_g.sample(cfg.generator.n_syn, rng.child(_GENERATOR)))
    sets = {"mem": mem, "ref": ref, "test": test, "syn": syn}
    return run_on_split(cfg, seed, split, {"ref": p_r, "syn": p_g}, sets)


def run_audit(cfg: RunConfig, seed: int) -> RunResult:
    if cfg.data.scenario == "fig2":
        return run_fig2(cfg, seed)
    rng = SeededRng(seed)
    population = load_population(cfg, rng)
    s = cfg.split
    split = make_split(population, s.n_mem, s.n_ref, s.n_test, rng.child(_SPLIT))
    return run_on_split(cfg, seed, split)


def apply_knob(cfg: RunConfig, knob: str, value: float) -> RunConfig:
    if knob == "generator.knob":
        return replace(cfg, generator=replace(cfg.generator, knob=float(value)))
    if knob == "n_syn":
        return replace(cfg, generator=replace(cfg.generator, n_syn=int(value)))
    if knob in ("n_mem", "n_ref"):
        return replace(cfg, split=replace(cfg.split, **{knob: int(value)}))
    raise ConfigError(f"cannot sweep {knob!r}")


def sweep_task(args) -> dict:
    cfg, knob, value, seed = args
    res = run_audit(apply_knob(cfg, knob, value), seed)
    return {"value": value, "seed": seed, "auc": {k: m["auc"] for k, m in res.metrics.items()}, "utility": res.utility}


def frontier_sweep(cfg: RunConfig, knob_values, split: ExperimentSplit, seed: int) -> list:
    """Regenerate D_syn at each generator knob on a fixed split; (knob, utility, AUCs) per point."""
    if len(knob_values) == 0:
        raise ConfigError("frontier sweep needs at least one knob value")
    rows = []
    for value in knob_values:
        res = run_on_split(apply_knob(cfg, "generator.knob", value), seed, split)
        rows.append((float(value), res.utility, {k: m["auc"] for k, m in res.metrics.items()}))
    return rows


def shift_task(args) -> dict:
    """DOMIAS and eq1-only AUC with a reference set shifted towards group A=0.

    Members, non-members and the unshifted reference come from the A=1
    population; at level p a fraction p of the reference is replaced by
    A=0 rows. Level 0 reuses the unshifted reference unchanged, and every
    level standardizes with the unshifted reference statistics so that only
    the data behind p_R changes.
    """
    cfg, level, seed = args
    group0 = Predicate.parse(cfg.shift.group0)
    rng = SeededRng(seed)
    full = load_population(replace(cfg, data=replace(cfg.data, exclude=None)), rng)
    in0 = group0.mask(full)
    a1 = full.take(np.flatnonzero(~in0))
    a0 = full.take(np.flatnonzero(in0))
    s = cfg.split
    split = make_split(a1, s.n_mem, s.n_ref, s.n_test, rng.child(_SPLIT))
    pool = concat([split.d_ref, a0])
    ref = shifted_reference(pool, group0, level, s.n_ref, rng.child(_SHIFT))
    shifted = replace(split, d_ref=ref)
    sets = prepare_sets(cfg, shifted, rng, fit_on=split.d_ref)
    res = run_on_split(cfg, seed, shifted, sets=sets)
    return {"value": level, "seed": seed, "auc": {k: m["auc"] for k, m in res.metrics.items()}, "utility": res.utility}
