"""Membership-inference scorers.

Every scorer returns :class:`AttackScores` with one finite score per test
row; larger means more member-like.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .data import Dataset
from .density.closed_form import normal_logpdf
from .errors import DimensionError, NumericError, ParameterError, SchemaError, SizeError, TrainingDivergedError
from .generators import GeneratorSpec, generate
from .nn import MLP, bce_with_logits
from .numcore import FLOAT, AdamState, SeededRng, adam_step, unflatten

ATTACKERS = ("domias", "eq1_only", "gaussian_prior", "logan0", "logan_d1", "mc", "ganleaks0", "ganleaks_cal")


@dataclass(frozen=True)
class AttackScores:
    name: str
    scores: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=FLOAT).ravel()
        if not np.all(np.isfinite(scores)):
            raise NumericError(f"{self.name}: non-finite scores")
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return self.scores.size

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("row_id,score\n")
            for i, s in enumerate(self.scores):
                fh.write(f"{i},{float(s)!r}\n")


def _vector(v, name):
    v = np.asarray(v, dtype=FLOAT).ravel()
    if not np.all(np.isfinite(v)):
        raise NumericError(f"{name} contains non-finite values")
    return v


def domias(log_p_g, log_p_r) -> AttackScores:
    """Log density ratio ``log p_G(x) - log p_R(x)``."""
    log_p_g, log_p_r = _vector(log_p_g, "log_pG"), _vector(log_p_r, "log_pR")
    if log_p_g.shape != log_p_r.shape:
        raise DimensionError(f"log_pG has {log_p_g.size} rows, log_pR has {log_p_r.size}")
    return AttackScores("domias", log_p_g - log_p_r)


def eq1_only(log_p_g) -> AttackScores:
    """Score by generator density alone (no reference data)."""
    return AttackScores("eq1_only", _vector(log_p_g, "log_pG"))


@dataclass(frozen=True)
class PriorSpec:
    """Known (mean, std) for a subset of features; the rest get a flat prior."""

    stats: dict

    def __post_init__(self):
        if not self.stats:
            raise ParameterError("a prior needs statistics for at least one feature")
        for name, (mean, std) in self.stats.items():
            if not (std > 0 and math.isfinite(std) and math.isfinite(mean)):
                raise ParameterError(f"invalid prior statistics for {name!r}: ({mean}, {std})")


def gaussian_prior_domias(log_p_g, d_test: Dataset, prior: PriorSpec) -> AttackScores:
    log_p_g = _vector(log_p_g, "log_pG")
    if log_p_g.size != d_test.n_rows:
        raise DimensionError("log_pG length differs from test rows")
    log_ref = np.zeros(d_test.n_rows, dtype=FLOAT)
    for name, (mean, std) in prior.stats.items():
        try:
            j = d_test.schema.index(name)
        except SchemaError:
            raise SchemaError(f"prior feature {name!r} not in test schema") from None
        log_ref += normal_logpdf(d_test.values[:, j], mean, std)
    return AttackScores("gaussian_prior", log_p_g - log_ref, {"prior": {k: list(v) for k, v in prior.stats.items()}})


# -- neural baselines -------------------------------------------------------------


@dataclass(frozen=True)
class NetConfig:
    hidden: int = 32
    epochs: int = 200
    lr: float = 0.001
    batch: int = 50
    latent: int = 8


def _check_finite(loss, grads, step):
    if not (math.isfinite(loss) and all(np.all(np.isfinite(g)) for g in grads)):
        raise TrainingDivergedError(step)


def train_gan(data: np.ndarray, config: NetConfig, rng: SeededRng):
    """Non-saturating GAN with MLP generator and discriminator; returns the discriminator."""
    n, d = data.shape
    h = config.hidden
    gen = MLP((config.latent, h, h, d), rng.child(0))
    disc = MLP((d, h, h, 1), rng.child(1))
    g_vec, d_vec = gen.get_vector(), disc.get_vector()
    g_state = AdamState(g_vec.size, learning_rate=config.lr, beta1=0.5)
    d_state = AdamState(d_vec.size, learning_rate=config.lr, beta1=0.5)
    batch = min(config.batch, n)
    ones = np.ones(batch)
    zeros = np.zeros(batch)
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n - batch + 1, batch):
            step += 1
            real = data[order[start : start + batch]]
            noise = rng.normal((batch, config.latent))
            g_params = unflatten(g_vec, gen.params)
            d_params = unflatten(d_vec, disc.params)
            fake, _ = gen.forward(noise, g_params)
            # discriminator step
            logit_r, acts_r = disc.forward(real, d_params)
            logit_f, acts_f = disc.forward(fake, d_params)
            loss_r, g_r = bce_with_logits(logit_r, ones)
            loss_f, g_f = bce_with_logits(logit_f, zeros)
            gr, _ = disc.backward(acts_r, g_r, d_params)
            gf, _ = disc.backward(acts_f, g_f, d_params)
            d_grad = np.concatenate([(a + b).ravel() for a, b in zip(gr, gf)])
            _check_finite(loss_r + loss_f, [d_grad], step)
            d_vec = adam_step(d_vec, d_grad, d_state)
            # generator step against the updated discriminator
            d_params = unflatten(d_vec, disc.params)
            fake, acts_g = gen.forward(noise, g_params)
            logit, acts = disc.forward(fake, d_params)
            loss_g, g_logit = bce_with_logits(logit, ones)
            _, g_fake = disc.backward(acts, g_logit, d_params)
            g_grads, _ = gen.backward(acts_g, g_fake, g_params)
            g_grad = np.concatenate([g.ravel() for g in g_grads])
            _check_finite(loss_g, [g_grad], step)
            g_vec = adam_step(g_vec, g_grad, g_state)
    disc.set_vector(d_vec)
    gen.set_vector(g_vec)
    return disc, gen


def train_classifier(pos: np.ndarray, neg: np.ndarray, config: NetConfig, rng: SeededRng) -> MLP:
    """Class-balanced logistic MLP separating ``pos`` (label 1) from ``neg`` (label 0)."""
    x = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    w = np.where(y == 1, len(x) / (2.0 * len(pos)), len(x) / (2.0 * len(neg)))
    n, d = x.shape
    net = MLP((d, config.hidden, config.hidden, 1), rng.child(0))
    vec = net.get_vector()
    state = AdamState(vec.size, learning_rate=config.lr)
    batch = min(config.batch, n)
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n - batch + 1, batch):
            step += 1
            idx = order[start : start + batch]
            params = unflatten(vec, net.params)
            logit, acts = net.forward(x[idx], params)
            loss, g_logit = bce_with_logits(logit, y[idx], w[idx])
            grads, _ = net.backward(acts, g_logit, params)
            grad = np.concatenate([g.ravel() for g in grads])
            _check_finite(loss, [grad], step)
            vec = adam_step(vec, grad, state)
    net.set_vector(vec)
    return net


def logan0(d_syn: Dataset, d_test: Dataset, config: NetConfig = NetConfig(), rng: SeededRng | None = None) -> AttackScores:
    """Train a GAN on the synthetic data and score test rows by discriminator logit."""
    if d_syn.n_rows == 0:
        raise SizeError("logan0 needs synthetic data")
    rng = rng or SeededRng(0)
    disc, _ = train_gan(d_syn.values, config, rng)
    logit, _ = disc.forward(d_test.values)
    return AttackScores("logan0", logit.ravel(), {"net": asdict(config)})


def logan_d1(
    d_syn: Dataset, d_ref: Dataset, d_test: Dataset, config: NetConfig = NetConfig(), rng: SeededRng | None = None
) -> AttackScores:
    """Classifier trained on synthetic (1) versus reference (0) rows."""
    if d_syn.n_rows == 0 or d_ref.n_rows == 0:
        raise SizeError("logan_d1 needs non-empty synthetic and reference sets")
    rng = rng or SeededRng(0)
    net = train_classifier(d_syn.values, d_ref.values, config, rng)
    logit, _ = net.forward(d_test.values)
    return AttackScores("logan_d1", logit.ravel(), {"net": asdict(config)})


# -- distance baselines -----------------------------------------------------------


def pca_projection(fit_on: np.ndarray, n_components: int):
    mean = fit_on.mean(axis=0)
    _, _, vt = np.linalg.svd(fit_on - mean, full_matrices=False)
    basis = vt[:n_components].T
    return lambda x: (x - mean) @ basis


def median_nn_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        raise SizeError("need at least two synthetic rows for the default MC radius")
    dist, _ = cKDTree(points).query(points, k=2)
    return float(np.median(dist[:, 1]))


def mc_score(
    d_syn: Dataset, d_test: Dataset, epsilon: float | None = None, pca_components: int | None = None
) -> AttackScores:
    """Fraction of synthetic rows strictly within ``epsilon`` of each test row."""
    if d_syn.n_rows == 0:
        raise SizeError("mc needs synthetic data")
    syn, test = d_syn.values, d_test.values
    if pca_components:
        project = pca_projection(syn, pca_components)
        syn, test = project(syn), project(test)
    if epsilon is None:
        epsilon = median_nn_distance(syn)
    if not epsilon > 0:
        raise ParameterError(f"mc epsilon must be positive, got {epsilon}")
    radius = np.nextafter(epsilon, 0.0)
    counts = cKDTree(syn).query_ball_point(test, r=radius, return_length=True)
    meta = {"epsilon": float(epsilon), "pca_components": pca_components}
    return AttackScores("mc", np.asarray(counts, dtype=FLOAT) / len(syn), meta)


def _subsample(points: np.ndarray, k: int | None, rng: SeededRng | None):
    n = len(points)
    if k is None:
        return points
    if not 1 <= k <= n:
        raise ParameterError(f"k must lie in [1, {n}], got {k}")
    if k == n:
        return points
    rng = rng or SeededRng(0)
    return points[np.sort(rng.sample_without_replacement(n, k))]


def nearest_distance(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    dist, _ = cKDTree(points).query(queries, k=1)
    return np.asarray(dist, dtype=FLOAT)


def ganleaks0(d_syn: Dataset, d_test: Dataset, k: int | None = None, rng: SeededRng | None = None) -> AttackScores:
    """Negated distance to the nearest of ``k`` synthetic rows."""
    if d_syn.n_rows == 0:
        raise SizeError("ganleaks0 needs synthetic data")
    sample = _subsample(d_syn.values, k, rng)
    return AttackScores("ganleaks0", -nearest_distance(sample, d_test.values), {"k": len(sample)})


def calibrated_distance(syn_points, ref_points, test_points) -> np.ndarray:
    return nearest_distance(ref_points, test_points) - nearest_distance(syn_points, test_points)


def ganleaks_cal(
    d_syn: Dataset,
    d_ref: Dataset,
    d_test: Dataset,
    k: int | None = None,
    generator_spec: GeneratorSpec | None = None,
    rng: SeededRng | None = None,
) -> AttackScores:
    """Distance score calibrated by a reference generator trained on ``d_ref``."""
    if d_syn.n_rows == 0 or d_ref.n_rows == 0:
        raise SizeError("ganleaks_cal needs non-empty synthetic and reference sets")
    rng = rng or SeededRng(0)
    syn = _subsample(d_syn.values, k, rng.child(0))
    spec = generator_spec or GeneratorSpec()
    spec = replace(spec, n_syn=len(syn))
    ref_gen = generate(spec, d_ref, rng.child(1)).values
    meta = {"k": len(syn), "reference_generator": asdict(spec)}
    return AttackScores("ganleaks_cal", calibrated_distance(syn, ref_gen, d_test.values), meta)
