"""Minimal float64 MLP stack: forward, analytic backprop, Adam, checkpoints.

Everything is explicit numpy; no autograd.  Inputs and outputs are matrices
of column vectors so branch-batched policy evaluation is a single call.
Narrow batches are zero-padded up to a fixed GEMM width before the matrix
product, which keeps every column's result bit-identical whether it is
evaluated alone or inside a wide batch.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

LOG_SIGMA_MIN = -20.0
LOG_SIGMA_MAX = 2.0
SQUASH_EPS = 1e-6
_MIN_GEMM_WIDTH = 8

_MLP_MAGIC = b"PSIMMLP1"
_ADAM_MAGIC = b"PSIMADM1"
_FORMAT_VERSION = 1


def _matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-stable matrix product (see module docstring)."""
    cols = b.shape[1]
    if cols >= _MIN_GEMM_WIDTH or cols == 0:
        return a @ b
    padded = np.zeros((b.shape[0], _MIN_GEMM_WIDTH), dtype=np.float64)
    padded[:, :cols] = b
    return (a @ padded)[:, :cols]


@dataclass
class MlpParams:
    """ReLU hidden layers, identity output.  weights[l]: (out_l, in_l)."""

    weights: list
    biases: list

    @property
    def sizes(self) -> list:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def copy(self) -> "MlpParams":
        return MlpParams(weights=[w.copy() for w in self.weights],
                         biases=[b.copy() for b in self.biases])


def init_mlp(sizes, rng: np.random.Generator,
             final_scale: float = 1.0) -> MlpParams:
    """He-scaled Gaussian init; final layer optionally shrunk."""
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    weights, biases = [], []
    for l, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        scale = np.sqrt(2.0 / fan_in)
        if l == len(sizes) - 2:
            scale *= final_scale
        weights.append(rng.normal(0.0, scale, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases)


def forward(params: MlpParams, x: np.ndarray):
    """Batched forward pass.

    x: (input_dim, batch).  Returns (y, cache); cache holds the layer
    activations needed by backward.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != params.weights[0].shape[1]:
        raise ValueError("input must be (input_dim, batch)")
    activations = [x]
    pre = []
    a = x
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = _matmul(w, a) + b[:, None]
        pre.append(z)
        a = z if l == last else np.maximum(z, 0.0)
        activations.append(a)
    return a, (activations, pre)


def backward(params: MlpParams, cache, dy: np.ndarray):
    """Gradients of sum(dy * y) w.r.t. parameters and the input.

    Returns (grads, dx) where grads mirrors MlpParams.
    """
    activations, pre = cache
    dz = np.asarray(dy, dtype=np.float64)
    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    last = len(params.weights) - 1
    for l in range(last, -1, -1):
        if l != last:
            dz = dz * (pre[l] > 0.0)
        grad_w[l] = _matmul(dz, activations[l].T.copy())
        grad_b[l] = dz.sum(axis=1)
        dz = _matmul(params.weights[l].T.copy(), dz)
    return MlpParams(weights=grad_w, biases=grad_b), dz


@dataclass
class AdamState:
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "AdamState":
        return cls(m_w=[np.zeros_like(w) for w in params.weights],
                   v_w=[np.zeros_like(w) for w in params.weights],
                   m_b=[np.zeros_like(b) for b in params.biases],
                   v_b=[np.zeros_like(b) for b in params.biases])


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState,
              lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8):
    """One in-place Adam update with bias correction."""
    state.t += 1
    t = state.t
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for w, g, m, v in zip(params.weights, grads.weights, state.m_w, state.v_w):
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * np.square(g)
        w -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    for b, g, m, v in zip(params.biases, grads.biases, state.m_b, state.v_b):
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * np.square(g)
        b -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def split_head(raw: np.ndarray, act_dim: int):
    """Actor output -> (mu, clamped log sigma).  raw: (2*act_dim, batch)."""
    if raw.shape[0] != 2 * act_dim:
        raise ValueError("head expects 2*act_dim rows")
    mu = raw[:act_dim]
    log_sigma = np.clip(raw[act_dim:], LOG_SIGMA_MIN, LOG_SIGMA_MAX)
    return mu, log_sigma


def sample_squashed(mu: np.ndarray, log_sigma: np.ndarray, eps: np.ndarray):
    """Reparameterised tanh-Gaussian sample.

    a = tanh(mu + sigma * eps); log-density includes the tanh Jacobian
    correction log(1 - a^2 + 1e-6) per coordinate.
    Returns (a, log_prob (batch,), u).
    """
    sigma = np.exp(log_sigma)
    u = mu + sigma * eps
    a = np.tanh(u)
    log_prob = (-log_sigma - 0.5 * np.log(2.0 * np.pi) - 0.5 * np.square(eps)
                - np.log(1.0 - np.square(a) + SQUASH_EPS))
    return a, log_prob.sum(axis=0), u


def squashed_log_prob_grads(a: np.ndarray, sigma: np.ndarray,
                            eps: np.ndarray):
    """d log_prob / du and d log_prob / d log_sigma, elementwise.

    With u = mu + sigma*eps and eps held fixed (reparameterisation):
    dlp/du = 2a(1-a^2)/(1-a^2+eps0),  dlp/dlog_sigma = dlp/du * sigma*eps - 1.
    """
    one_m_a2 = 1.0 - np.square(a)
    dlp_du = 2.0 * a * one_m_a2 / (one_m_a2 + SQUASH_EPS)
    dlp_dls = dlp_du * sigma * eps - 1.0
    return dlp_du, dlp_dls


def action_to_scs(a: np.ndarray, alloc: np.ndarray) -> np.ndarray:
    """Map squashed actions in [-1, 1] to SC demands in [0, n_e]."""
    return (a + 1.0) * 0.5 * np.asarray(alloc, dtype=np.float64)


def _write_array(fh, arr: np.ndarray):
    data = np.ascontiguousarray(arr, dtype="<f8")
    fh.write(data.tobytes())


def _read_array(fh, shape) -> np.ndarray:
    count = int(np.prod(shape))
    raw = fh.read(count * 8)
    if len(raw) != count * 8:
        raise ValueError("checkpoint truncated")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()


def save_mlp(path, params: MlpParams):
    """Magic, format version, layer sizes, then row-major LE float64 data."""
    sizes = params.sizes
    with open(path, "wb") as fh:
        fh.write(_MLP_MAGIC)
        fh.write(struct.pack("<II", _FORMAT_VERSION, len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for w, b in zip(params.weights, params.biases):
            _write_array(fh, w)
            _write_array(fh, b)


def load_mlp(path) -> MlpParams:
    with open(path, "rb") as fh:
        if fh.read(8) != _MLP_MAGIC:
            raise ValueError(f"{path}: not a network checkpoint")
        version, n_sizes = struct.unpack("<II", fh.read(8))
        if version != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        sizes = struct.unpack(f"<{n_sizes}I", fh.read(4 * n_sizes))
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(_read_array(fh, (fan_out, fan_in)))
            biases.append(_read_array(fh, (fan_out,)))
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes")
    return MlpParams(weights=weights, biases=biases)


def save_adam(path, state: AdamState, sizes):
    with open(path, "wb") as fh:
        fh.write(_ADAM_MAGIC)
        fh.write(struct.pack("<II", _FORMAT_VERSION, len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        fh.write(struct.pack("<Q", state.t))
        for group in (state.m_w, state.v_w, state.m_b, state.v_b):
            for arr in group:
                _write_array(fh, arr)


def load_adam(path, sizes) -> AdamState:
    sizes = list(sizes)
    with open(path, "rb") as fh:
        if fh.read(8) != _ADAM_MAGIC:
            raise ValueError(f"{path}: not an optimiser checkpoint")
        version, n_sizes = struct.unpack("<II", fh.read(8))
        if version != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        stored = list(struct.unpack(f"<{n_sizes}I", fh.read(4 * n_sizes)))
        if stored != sizes:
            raise ValueError(f"{path}: layer sizes do not match network")
        (t,) = struct.unpack("<Q", fh.read(8))
        w_shapes = [(o, i) for i, o in zip(sizes[:-1], sizes[1:])]
        b_shapes = [(o,) for o in sizes[1:]]
        m_w = [_read_array(fh, s) for s in w_shapes]
        v_w = [_read_array(fh, s) for s in w_shapes]
        m_b = [_read_array(fh, s) for s in b_shapes]
        v_b = [_read_array(fh, s) for s in b_shapes]
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes")
    return AdamState(m_w=m_w, v_w=v_w, m_b=m_b, v_b=v_b, t=t)
