"""Block neural autoregressive flow with analytic gradients.

Each flow is a stack of block-masked linear layers. Block (i, j) of a layer
connects the hidden units of input coordinate j to those of output
coordinate i; blocks above the diagonal are masked out, diagonal blocks are
``exp(log_scale) * softmax(logits)`` row-wise (strictly positive), and
blocks below the diagonal are free. Between layers the activation
``u + gamma * tanh(u)`` with ``gamma = exp(rho) - 1 > -1`` is strictly
increasing and unbounded, so every flow is a bijection of R^d with a
lower-triangular Jacobian.

The Jacobian diagonal ``dz_i/dx_i`` is carried alongside the forward pass
as a product of diagonal blocks and activation slopes, so
``log|det J| = sum_i log(dz_i/dx_i)`` never touches a dense determinant.
At initialization (``rho = 0``, ``log_scale = 0``) each flow is a linear
map with unit diagonal.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DimensionError, SizeError, TrainingDivergedError
from ..numcore import FLOAT, AdamState, SeededRng, adam_step, flatten, unflatten

FORMAT_VERSION = 1
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class FlowConfig:
    flows: int = 5
    layers: int = 3
    hidden: int = 32
    batch: int = 50
    lr: float = 0.01
    epochs: int = 50
    init_std: float = 0.01
    polyak: float = 0.998

    def __post_init__(self):
        if self.layers < 2:
            raise ValueError("a flow needs at least 2 layers")
        if min(self.flows, self.hidden, self.batch) < 1 or self.epochs < 0:
            raise ValueError(f"invalid flow config {self}")


class _Layer:
    """Shape bookkeeping for one masked layer."""

    def __init__(self, d, in_blk, out_blk, activated):
        self.d, self.in_blk, self.out_blk, self.activated = d, in_blk, out_blk, activated
        blk = np.arange(d)
        self.mask = np.repeat(
            np.repeat((blk[:, None] > blk[None, :]).astype(FLOAT), out_blk, 0), in_blk, 1
        )

    def param_shapes(self):
        d, i, o = self.d, self.in_blk, self.out_blk
        shapes = [(d * o, d * i), (d, o), (d, o, i), (d * o,)]
        if self.activated:
            shapes.append((d * o,))
        return shapes

    def diag_blocks(self, log_scale, logits):
        z = logits - logits.max(axis=-1, keepdims=True)
        e = np.exp(z)
        soft = e / e.sum(axis=-1, keepdims=True)
        return np.exp(log_scale)[..., None] * soft, soft

    def weight(self, w_off, diag):
        d, i, o = self.d, self.in_blk, self.out_blk
        w = (w_off * self.mask).reshape(d, o, d, i)
        ar = np.arange(d)
        w[ar, :, ar, :] = diag
        return w.reshape(d * o, d * i)

    def extract_diag(self, g_w):
        d, i, o = self.d, self.in_blk, self.out_blk
        ar = np.arange(d)
        return g_w.reshape(d, o, d, i)[ar, :, ar, :]


class FlowModel:
    kind = "flow"

    def __init__(self, dim: int, config: FlowConfig = FlowConfig(), seed: int = 0, params=None):
        self.dim = int(dim)
        self.config = config
        self.seed = seed
        h = config.hidden
        self._layers = []
        for l in range(config.layers):
            in_blk = 1 if l == 0 else h
            out_blk = 1 if l == config.layers - 1 else h
            self._layers.append(_Layer(self.dim, in_blk, out_blk, l < config.layers - 1))
        self.shapes = [s for _ in range(config.flows) for layer in self._layers for s in layer.param_shapes()]
        if params is None:
            params = self._init_params(SeededRng(seed))
        self.params = [np.asarray(p, dtype=FLOAT).reshape(s) for p, s in zip(params, self.shapes)]
        self.loss_trace: list[float] = []
        self.fitted = False

    def _init_params(self, rng):
        out = []
        for shape in self.shapes:
            out.append(np.zeros(shape, dtype=FLOAT))
        pos = 0
        for _ in range(self.config.flows):
            for layer in self._layers:
                w_off, _, logits = out[pos], out[pos + 1], out[pos + 2]
                w_off[...] = self.config.init_std * rng.normal(w_off.shape) * layer.mask
                logits[...] = 0.5 * rng.normal(logits.shape)
                pos += len(layer.param_shapes())
        return out

    # -- parameter vector helpers -------------------------------------------------
    def get_vector(self) -> np.ndarray:
        return flatten(self.params)

    def set_vector(self, vec) -> None:
        self.params = unflatten(np.asarray(vec, dtype=FLOAT), self.params)

    def _split(self, params):
        """Yield per-flow lists of per-layer parameter tuples."""
        pos = 0
        flows = []
        for _ in range(self.config.flows):
            per_layer = []
            for layer in self._layers:
                k = len(layer.param_shapes())
                per_layer.append(params[pos : pos + k])
                pos += k
            flows.append(per_layer)
        return flows

    # -- forward / backward -------------------------------------------------------
    def _forward(self, x, params, keep=False):
        n = x.shape[0]
        d = self.dim
        caches = []
        logdet = np.zeros(n, dtype=FLOAT)
        a = x
        for flow_params in self._split(params):
            jac = np.ones((n, d, 1), dtype=FLOAT)
            flow_cache = []
            for layer, p in zip(self._layers, flow_params):
                w_off, log_scale, logits, bias = p[:4]
                diag, soft = layer.diag_blocks(log_scale, logits)
                w = layer.weight(w_off, diag)
                u = a @ w.T + bias
                jac_in = jac
                q = np.einsum("nik,irk->nir", jac_in, diag)
                c = {"a": a, "w": w, "diag": diag, "soft": soft, "jac_in": jac_in, "q": q}
                if layer.activated:
                    gam = np.expm1(p[4])
                    t = np.tanh(u)
                    sech2 = 1.0 - t * t
                    slope = 1.0 + gam * sech2
                    a = u + gam * t
                    jac = q * slope.reshape(n, d, -1)
                    c.update(t=t, sech2=sech2, slope=slope, gam=gam, rho=p[4])
                else:
                    a = u
                    jac = q
                flow_cache.append(c)
            logdet += np.log(jac[:, :, 0]).sum(axis=1)
            caches.append((flow_cache, jac[:, :, 0]))
        z = a
        return z, logdet, (caches if keep else None)

    def _backward(self, caches, g_z, c_logdet, params):
        """Gradients of ``sum(g_z * z) + c_logdet * sum(logdet)`` w.r.t. params and input."""
        grads = [None] * len(params)
        flows = self._split(list(range(len(params))))
        n = g_z.shape[0]
        d = self.dim
        for f in reversed(range(len(caches))):
            flow_cache, jac_out = caches[f]
            idx_layers = flows[f]
            # Jacobian-diagonal path
            g_jac = (c_logdet / jac_out)[:, :, None]
            g_u_jac = [None] * len(self._layers)
            g_diag = [None] * len(self._layers)
            g_rho = [None] * len(self._layers)
            for l in reversed(range(len(self._layers))):
                c = flow_cache[l]
                if self._layers[l].activated:
                    slope = c["slope"].reshape(n, d, -1)
                    g_slope = (g_jac * c["q"]).reshape(n, -1)
                    g_jac = g_jac * slope
                    g_u_jac[l] = g_slope * c["gam"] * (-2.0 * c["t"] * c["sech2"])
                    g_rho[l] = (g_slope * c["sech2"]).sum(axis=0) * np.exp(c["rho"])
                g_diag[l] = np.einsum("nir,nik->irk", g_jac, c["jac_in"])
                g_jac = np.einsum("nir,irk->nik", g_jac, c["diag"])
            # value path
            g_a = g_z
            for l in reversed(range(len(self._layers))):
                c = flow_cache[l]
                layer = self._layers[l]
                ids = idx_layers[l]
                if layer.activated:
                    g_u = g_a * c["slope"] + g_u_jac[l]
                    g_rho[l] = g_rho[l] + (g_a * c["t"]).sum(axis=0) * np.exp(c["rho"])
                    grads[ids[4]] = g_rho[l]
                else:
                    g_u = g_a
                g_w = g_u.T @ c["a"]
                grads[ids[3]] = g_u.sum(axis=0)
                grads[ids[0]] = g_w * layer.mask
                g_d = g_diag[l] + layer.extract_diag(g_w)
                diag, soft = c["diag"], c["soft"]
                grads[ids[1]] = (g_d * diag).sum(axis=-1)
                scale = diag.sum(axis=-1, keepdims=True)  # = exp(log_scale)
                inner = (g_d * soft).sum(axis=-1, keepdims=True)
                grads[ids[2]] = scale * soft * (g_d - inner)
                g_a = g_u @ c["w"]
            g_z = g_a
        return grads, g_z

    # -- public API ----------------------------------------------------------------
    def _check(self, x):
        x = np.asarray(x, dtype=FLOAT)
        single = x.ndim == 1 and (self.dim > 1 and x.size == self.dim)
        if x.ndim == 0:
            x, single = x.reshape(1, 1), True
        elif x.ndim == 1:
            x = x.reshape(1, -1) if single else x.reshape(-1, 1)
        if x.shape[1] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {x.shape[1]}")
        return x, single

    def forward(self, x):
        """Map ``x`` to latent ``z``; returns ``(z, logdet)``."""
        x, _ = self._check(x)
        z, logdet, _ = self._forward(x, self.params)
        return z, logdet

    def log_density(self, x):
        x, single = self._check(x)
        z, logdet, _ = self._forward(x, self.params)
        out = -0.5 * (z * z).sum(axis=1) - 0.5 * self.dim * LOG_2PI + logdet
        return out[0] if single else out

    def loss_and_grad(self, x, params=None):
        """Negative mean log-likelihood of ``x`` and its gradient (flat vector)."""
        params = self.params if params is None else params
        n = x.shape[0]
        z, logdet, caches = self._forward(x, params, keep=True)
        ll = -0.5 * (z * z).sum(axis=1) - 0.5 * self.dim * LOG_2PI + logdet
        loss = -float(ll.mean())
        grads, _ = self._backward(caches, z / n, -1.0 / n, params)
        return loss, flatten(grads)

    def loss(self, x, params=None) -> float:
        params = self.params if params is None else params
        z, logdet, _ = self._forward(x, params)
        ll = -0.5 * (z * z).sum(axis=1) - 0.5 * self.dim * LOG_2PI + logdet
        return -float(ll.mean())

    def input_gradient(self, x):
        """d log_density / dx, used for consistency checks."""
        x, _ = self._check(x)
        z, _, caches = self._forward(x, self.params, keep=True)
        _, g_x = self._backward(caches, -z, 1.0, self.params)
        return g_x

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "version": FORMAT_VERSION,
            "dim": self.dim,
            "seed": self.seed,
            "config": asdict(self.config),
            "params": [p.tolist() for p in self.params],
            "loss_trace": list(self.loss_trace),
            "fitted": self.fitted,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FlowModel":
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported flow format version {d.get('version')}")
        model = cls(d["dim"], FlowConfig(**d["config"]), d["seed"], params=d["params"])
        model.loss_trace = list(d["loss_trace"])
        model.fitted = d["fitted"]
        return model


def flow_fit(data, config: FlowConfig = FlowConfig(), rng: SeededRng | None = None) -> FlowModel:
    """Train a flow by mini-batch Adam on the negative mean log-likelihood.

    Runs exactly ``config.epochs`` epochs; there is no early stopping. The
    returned parameters are the exponential moving average (decay
    ``config.polyak``) of the Adam iterates; ``polyak=0`` keeps the last iterate.
    """
    values = np.asarray(getattr(data, "values", data), dtype=FLOAT)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    n, d = values.shape
    if n < config.batch:
        raise SizeError(f"flow batch size {config.batch} exceeds {n} training rows")
    rng = rng or SeededRng(0)
    model = FlowModel(d, config, seed=int(rng.integers(0, 2**63)))
    vec = model.get_vector()
    state = AdamState(vec.size, learning_rate=config.lr)
    avg = vec.copy()
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n - config.batch + 1, config.batch):
            batch = values[order[start : start + config.batch]]
            params = unflatten(vec, model.params)
            loss, grad = model.loss_and_grad(batch, params)
            step += 1
            if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                raise TrainingDivergedError(step)
            vec = adam_step(vec, grad, state)
            avg = config.polyak * avg + (1.0 - config.polyak) * vec
            epoch_loss += loss
            n_batches += 1
        model.loss_trace.append(epoch_loss / n_batches)
    model.set_vector(avg if step else vec)
    model.fitted = True
    return model
