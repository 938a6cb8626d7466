"""Dense variational auto-encoder built on plain numpy.

Encoder: a stack of fully connected hidden layers feeding two linear
heads, one for the latent mean and one for the latent log-std.  The
latent draw uses z = mu + sigma * eps with eps ~ N(0, I), so the whole
network stays differentiable in the encoder weights.  Decoder: mirror
stack with a linear output layer.

The training objective is

    C * mean_batch( sum_i (x_i - xhat_i)^2 )  +  mean_batch( KL )

with the closed-form Gaussian divergence
KL(N(mu, diag sigma^2) || N(0, I)) = 1/2 * sum_j (sigma_j^2 + mu_j^2
- 1 - ln sigma_j^2).  Gradients are backpropagated analytically
(no autodiff framework); see ``grad``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

_ACTIVATIONS = {
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0.0).astype(float)),
}

PARAMS_FORMAT_VERSION = 1


@dataclass(frozen=True)
class VaeArch:
    """Layer-size descriptor. ``hidden`` is the encoder trunk; the decoder
    mirrors it by default."""

    input_dim: int
    hidden: tuple[int, ...] = (64,)
    latent_dim: int = 10
    decoder_hidden: tuple[int, ...] | None = None
    hidden_activation: str = "tanh"
    output_activation: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.decoder_hidden is not None:
            object.__setattr__(self, "decoder_hidden",
                               tuple(int(h) for h in self.decoder_hidden))
        if self.input_dim < 1 or self.latent_dim < 1:
            raise ValueError("input_dim and latent_dim must be >= 1")
        if self.latent_dim >= self.input_dim:
            raise ValueError("latent_dim must be smaller than input_dim")
        if any(h < 1 for h in self.hidden) or any(h < 1 for h in self.dec_hidden):
            raise ValueError("all hidden layer sizes must be >= 1")
        if self.hidden_activation not in _ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation != "linear":
            raise ValueError("only a linear output layer is supported")

    @property
    def dec_hidden(self) -> tuple[int, ...]:
        if self.decoder_hidden is not None:
            return self.decoder_hidden
        return tuple(reversed(self.hidden))


@dataclass
class VaeParams:
    """All weight matrices / bias vectors, grouped by role.

    The same container doubles as the gradient structure returned by
    ``grad`` (identical shapes, block for block).
    """

    arch: VaeArch
    enc_w: list[np.ndarray]
    enc_b: list[np.ndarray]
    mu_w: np.ndarray
    mu_b: np.ndarray
    logsig_w: np.ndarray
    logsig_b: np.ndarray
    dec_w: list[np.ndarray]
    dec_b: list[np.ndarray]

    def blocks(self) -> list[tuple[str, np.ndarray]]:
        """Named parameter blocks in a fixed, documented order."""
        out = []
        for i, (w, b) in enumerate(zip(self.enc_w, self.enc_b)):
            out += [(f"enc_w{i}", w), (f"enc_b{i}", b)]
        out += [("mu_w", self.mu_w), ("mu_b", self.mu_b),
                ("logsig_w", self.logsig_w), ("logsig_b", self.logsig_b)]
        for i, (w, b) in enumerate(zip(self.dec_w, self.dec_b)):
            out += [(f"dec_w{i}", w), (f"dec_b{i}", b)]
        return out

    def copy(self) -> "VaeParams":
        return copy.deepcopy(self)

    def flatten(self) -> np.ndarray:
        return np.concatenate([arr.ravel() for _, arr in self.blocks()])

    def with_flat(self, flat: np.ndarray) -> "VaeParams":
        """New params with values taken from a flat vector (block order)."""
        out = self.copy()
        pos = 0
        for _, arr in out.blocks():
            arr[...] = flat[pos:pos + arr.size].reshape(arr.shape)
            pos += arr.size
        if pos != flat.size:
            raise ValueError("flat vector has the wrong length")
        return out


@dataclass(frozen=True)
class LatentGaussian:
    """Diagonal Gaussian over the latent space."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.shape != sigma.shape:
            raise ValueError("mu and sigma must have the same shape")
        if np.any(sigma <= 0.0):
            raise ValueError("sigma must be strictly positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class TrainConfig:
    recon_coefficient: float = 100.0
    batch_size: int = 64
    epochs: int = 300
    learning_rate: float = 1e-3
    optimizer: str = "sgd"            # "sgd" or "adam"
    seed: int = 0
    validation_fraction: float = 0.0  # last fraction of rows held out

    def __post_init__(self):
        if self.recon_coefficient <= 0.0:
            raise ValueError("recon_coefficient must be > 0")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainHistory:
    """Per-epoch loss traces (validation entries are NaN when unused)."""

    train_loss: np.ndarray = field(default_factory=lambda: np.empty(0))
    val_loss: np.ndarray = field(default_factory=lambda: np.empty(0))
    kl: np.ndarray = field(default_factory=lambda: np.empty(0))
    recon: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return len(self.train_loss)


# ---------------------------------------------------------------------------
# construction and forward passes


def init_params(arch: VaeArch, seed: int) -> VaeParams:
    """Fan-in scaled normal weights, zero biases; deterministic in the seed."""
    rng = np.random.default_rng(seed)

    def layer(n_in, n_out):
        w = rng.standard_normal((n_in, n_out)) / np.sqrt(n_in)
        return w, np.zeros(n_out)

    enc_w, enc_b = [], []
    size = arch.input_dim
    for h in arch.hidden:
        w, b = layer(size, h)
        enc_w.append(w)
        enc_b.append(b)
        size = h
    mu_w, mu_b = layer(size, arch.latent_dim)
    logsig_w, logsig_b = layer(size, arch.latent_dim)
    dec_w, dec_b = [], []
    size = arch.latent_dim
    for h in (*arch.dec_hidden, arch.input_dim):
        w, b = layer(size, h)
        dec_w.append(w)
        dec_b.append(b)
        size = h
    return VaeParams(arch=arch, enc_w=enc_w, enc_b=enc_b, mu_w=mu_w, mu_b=mu_b,
                     logsig_w=logsig_w, logsig_b=logsig_b, dec_w=dec_w, dec_b=dec_b)


def _encode_batch(params: VaeParams, x: np.ndarray):
    """Trunk + heads for a (M, N) batch; returns cached intermediates."""
    act, _ = _ACTIVATIONS[params.arch.hidden_activation]
    a = x
    pre, post = [], [x]
    for w, b in zip(params.enc_w, params.enc_b):
        z = a @ w + b
        a = act(z)
        pre.append(z)
        post.append(a)
    mu = a @ params.mu_w + params.mu_b
    logsig = a @ params.logsig_w + params.logsig_b
    return mu, logsig, pre, post


def _decode_batch(params: VaeParams, z: np.ndarray):
    act, _ = _ACTIVATIONS[params.arch.hidden_activation]
    a = z
    pre, post = [], [z]
    for w, b in zip(params.dec_w[:-1], params.dec_b[:-1]):
        zz = a @ w + b
        a = act(zz)
        pre.append(zz)
        post.append(a)
    x_hat = a @ params.dec_w[-1] + params.dec_b[-1]
    return x_hat, pre, post


def encode(params: VaeParams, x: np.ndarray) -> LatentGaussian:
    """Posterior Gaussian for a single length-N observation."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.arch.input_dim,):
        raise ValueError(f"expected input of shape ({params.arch.input_dim},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite encoder input")
    mu, logsig, _, _ = _encode_batch(params, x[None, :])
    return LatentGaussian(mu=mu[0], sigma=np.exp(logsig[0]))


def reparameterize(lat: LatentGaussian, eps: np.ndarray) -> np.ndarray:
    """z = mu + sigma * eps, elementwise."""
    eps = np.asarray(eps, dtype=float)
    if eps.shape != lat.mu.shape:
        raise ValueError("eps shape does not match the latent Gaussian")
    return lat.mu + lat.sigma * eps


def decode(params: VaeParams, z: np.ndarray) -> np.ndarray:
    """Deterministic decoder output for a single length-Q latent vector."""
    z = np.asarray(z, dtype=float)
    if z.shape != (params.arch.latent_dim,):
        raise ValueError(f"expected latent of shape ({params.arch.latent_dim},)")
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite decoder input")
    x_hat, _, _ = _decode_batch(params, z[None, :])
    return x_hat[0]


def kl_gaussian(lat: LatentGaussian) -> float:
    """KL(N(mu, diag sigma^2) || N(0, I)), closed form; always >= 0."""
    s2 = lat.sigma ** 2
    return float(0.5 * np.sum(s2 + lat.mu ** 2 - 1.0 - np.log(s2)))


def _kl_batch(mu: np.ndarray, logsig: np.ndarray) -> np.ndarray:
    s2 = np.exp(2.0 * logsig)
    return 0.5 * np.sum(s2 + mu ** 2 - 1.0 - 2.0 * logsig, axis=1)


def elbo_loss(params: VaeParams, batch: np.ndarray, eps_batch: np.ndarray,
              recon_coefficient: float) -> tuple[float, float, float]:
    """Negative evidence bound: (total, reconstruction part, KL part).

    Reconstruction: recon_coefficient * mean over the batch of the
    per-sample squared error summed over assets.  KL: batch mean of the
    closed-form divergence.  Both are averaged (not summed) over the
    batch so the value is comparable across batch sizes.
    """
    batch = np.asarray(batch, dtype=float)
    eps_batch = np.asarray(eps_batch, dtype=float)
    if batch.ndim != 2 or batch.shape[1] != params.arch.input_dim:
        raise ValueError("batch must be (M, input_dim)")
    if eps_batch.shape != (batch.shape[0], params.arch.latent_dim):
        raise ValueError("eps_batch must be (M, latent_dim)")
    mu, logsig, _, _ = _encode_batch(params, batch)
    z = mu + np.exp(logsig) * eps_batch
    x_hat, _, _ = _decode_batch(params, z)
    recon = recon_coefficient * float(np.mean(np.sum((batch - x_hat) ** 2, axis=1)))
    kl = float(np.mean(_kl_batch(mu, logsig)))
    return recon + kl, recon, kl


def grad(params: VaeParams, batch: np.ndarray, eps_batch: np.ndarray,
         recon_coefficient: float) -> VaeParams:
    """Analytic gradient of ``elbo_loss`` total w.r.t. every parameter block.

    Backpropagates through the decoder, the reparameterized latent draw
    (both heads), and the encoder trunk; the KL term contributes directly
    to the head gradients.  Returns a VaeParams-shaped container.
    """
    batch = np.asarray(batch, dtype=float)
    eps_batch = np.asarray(eps_batch, dtype=float)
    m = batch.shape[0]
    arch = params.arch
    if eps_batch.shape != (m, arch.latent_dim):
        raise ValueError("eps_batch must be (M, latent_dim)")
    _, dact = _ACTIVATIONS[arch.hidden_activation]

    mu, logsig, enc_pre, enc_post = _encode_batch(params, batch)
    sigma = np.exp(logsig)
    z = mu + sigma * eps_batch
    x_hat, dec_pre, dec_post = _decode_batch(params, z)

    g = params.copy()

    # decoder, starting from d(recon)/d(x_hat)
    delta = (2.0 * recon_coefficient / m) * (x_hat - batch)
    g.dec_w[-1][...] = dec_post[-1].T @ delta
    g.dec_b[-1][...] = delta.sum(axis=0)
    delta = delta @ params.dec_w[-1].T
    for layer in range(len(params.dec_w) - 2, -1, -1):
        delta = delta * dact(dec_pre[layer])
        g.dec_w[layer][...] = dec_post[layer].T @ delta
        g.dec_b[layer][...] = delta.sum(axis=0)
        delta = delta @ params.dec_w[layer].T

    # reparameterization plus the KL term on both heads
    d_mu = delta + mu / m
    d_logsig = delta * eps_batch * sigma + (sigma ** 2 - 1.0) / m
    trunk_out = enc_post[-1]
    g.mu_w[...] = trunk_out.T @ d_mu
    g.mu_b[...] = d_mu.sum(axis=0)
    g.logsig_w[...] = trunk_out.T @ d_logsig
    g.logsig_b[...] = d_logsig.sum(axis=0)

    # encoder trunk
    delta = d_mu @ params.mu_w.T + d_logsig @ params.logsig_w.T
    for layer in range(len(params.enc_w) - 1, -1, -1):
        delta = delta * dact(enc_pre[layer])
        g.enc_w[layer][...] = enc_post[layer].T @ delta
        g.enc_b[layer][...] = delta.sum(axis=0)
        delta = delta @ params.enc_w[layer].T
    return g


# ---------------------------------------------------------------------------
# training and sampling


class _Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for (_, p), (_, gv) in zip(params.blocks(), grads.blocks()):
            p -= self.lr * gv


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        blocks = [p for _, p in params.blocks()]
        gs = [gv for _, gv in grads.blocks()]
        if self.m is None:
            self.m = [np.zeros_like(p) for p in blocks]
            self.v = [np.zeros_like(p) for p in blocks]
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, gv, m, v in zip(blocks, gs, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * gv
            v *= self.beta2
            v += (1.0 - self.beta2) * gv * gv
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def train(params: VaeParams, data, config: TrainConfig) -> tuple[VaeParams, TrainHistory]:
    """Mini-batch gradient descent on the loss; fresh eps draw per sample per step.

    ``data`` is a StandardizedPanel or a plain (rows, input_dim) array;
    rows are samples, columns are assets.  The last
    ``validation_fraction`` of the rows (time order preserved) is held
    out and scored once per epoch.  Deterministic given ``config.seed``.
    Raises RuntimeError on a non-finite loss.
    """
    x = np.asarray(getattr(data, "values", data), dtype=float)
    if x.ndim != 2 or x.shape[1] != params.arch.input_dim:
        raise ValueError("training data must be (rows, input_dim)")
    if x.shape[0] == 0:
        raise ValueError("empty training data")
    n_val = int(round(config.validation_fraction * x.shape[0]))
    x_train, x_val = (x[:-n_val], x[-n_val:]) if n_val else (x, x[:0])
    if x_train.shape[0] < config.batch_size:
        raise ValueError(f"{x_train.shape[0]} training rows < batch size {config.batch_size}")

    params = params.copy()
    hist = TrainHistory(np.empty(config.epochs), np.full(config.epochs, np.nan),
                        np.empty(config.epochs), np.empty(config.epochs))
    if config.epochs == 0:
        return params, hist

    rng = np.random.default_rng(config.seed)
    opt = _Adam(config.learning_rate) if config.optimizer == "adam" else _Sgd(config.learning_rate)
    q = params.arch.latent_dim
    n_train = x_train.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n_train)
        tot_sum = recon_sum = kl_sum = 0.0
        for start in range(0, n_train, config.batch_size):
            rows = order[start:start + config.batch_size]
            batch = x_train[rows]
            eps = rng.standard_normal((len(rows), q))
            tot, recon, kl = elbo_loss(params, batch, eps, config.recon_coefficient)
            if not np.isfinite(tot):
                raise RuntimeError(f"training diverged: non-finite loss at epoch "
                                   f"{epoch}, batch starting at {start}")
            opt.step(params, grad(params, batch, eps, config.recon_coefficient))
            tot_sum += tot * len(rows)
            recon_sum += recon * len(rows)
            kl_sum += kl * len(rows)
        hist.train_loss[epoch] = tot_sum / n_train
        hist.recon[epoch] = recon_sum / n_train
        hist.kl[epoch] = kl_sum / n_train
        if n_val:
            eps = rng.standard_normal((n_val, q))
            hist.val_loss[epoch], _, _ = elbo_loss(params, x_val, eps,
                                                   config.recon_coefficient)
    return params, hist


def sample_standardized(params: VaeParams, n: int, seed) -> np.ndarray:
    """Decode ``n`` iid standard-normal latent draws into an (n, N) matrix."""
    if n < 1:
        raise ValueError("need n >= 1 samples")
    rng = np.random.default_rng(seed)
    zs = rng.standard_normal((n, params.arch.latent_dim))
    x_hat, _, _ = _decode_batch(params, zs)
    return x_hat


# ---------------------------------------------------------------------------
# serialization


def save_params(params: VaeParams, path) -> None:
    """Versioned JSON: arch descriptor plus flat row-major weight arrays."""
    doc = {
        "format_version": PARAMS_FORMAT_VERSION,
        "arch": {
            "input_dim": params.arch.input_dim,
            "hidden": list(params.arch.hidden),
            "latent_dim": params.arch.latent_dim,
            "decoder_hidden": (None if params.arch.decoder_hidden is None
                               else list(params.arch.decoder_hidden)),
            "hidden_activation": params.arch.hidden_activation,
            "output_activation": params.arch.output_activation,
        },
        "blocks": [
            {"name": name, "shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in params.blocks()
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def load_params(path) -> VaeParams:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != PARAMS_FORMAT_VERSION:
        raise ValueError(f"unsupported params format {doc.get('format_version')!r}")
    a = doc["arch"]
    arch = VaeArch(input_dim=a["input_dim"], hidden=tuple(a["hidden"]),
                   latent_dim=a["latent_dim"],
                   decoder_hidden=(None if a["decoder_hidden"] is None
                                   else tuple(a["decoder_hidden"])),
                   hidden_activation=a["hidden_activation"],
                   output_activation=a["output_activation"])
    params = init_params(arch, seed=0)
    by_name = {b["name"]: b for b in doc["blocks"]}
    for name, arr in params.blocks():
        blk = by_name[name]
        arr[...] = np.asarray(blk["data"], dtype=float).reshape(blk["shape"])
    return params


def history_to_csv(hist: TrainHistory, path) -> None:
    """CSV trace: epoch, train_loss, val_loss, kl, recon."""
    import pandas as pd

    pd.DataFrame({
        "epoch": np.arange(len(hist)),
        "train_loss": hist.train_loss,
        "val_loss": hist.val_loss,
        "kl": hist.kl,
        "recon": hist.recon,
    }).to_csv(path, index=False)
