"""Dense MLPs with manual backprop, Adam, soft target updates and checkpoints.

All parameters of a network live in one contiguous float64 vector; per-layer
weight and bias arrays are views into it. Optimizer and target updates then
operate on a single array.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from . import kernels

ACTIVATIONS = ("relu", "tanh", "linear")

CHECKPOINT_MAGIC = b"HRNVCKPT"
CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class CheckpointError(ValueError):
    pass


class Network:
    def __init__(self, layer_sizes, activations, params=None):
        layer_sizes = [int(s) for s in layer_sizes]
        if len(layer_sizes) < 2:
            raise ShapeError("need at least an input and an output size")
        if any(s <= 0 for s in layer_sizes):
            raise ShapeError(f"layer sizes must be positive: {layer_sizes}")
        if isinstance(activations, str):
            activations = [activations] * (len(layer_sizes) - 1)
        activations = list(activations)
        if len(activations) != len(layer_sizes) - 1:
            raise ShapeError("one activation per layer required")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        self.layer_sizes = layer_sizes
        self.activations = activations
        n = sum(i * o + o for i, o in zip(layer_sizes[:-1], layer_sizes[1:]))
        if params is None:
            params = np.zeros(n)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (n,):
            raise ShapeError(f"expected {n} parameters, got shape {params.shape}")
        self.params = params.copy()
        self._bind_views()

    def _bind_views(self):
        self.weights, self.biases = [], []
        off = 0
        for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            self.weights.append(self.params[off:off + i * o].reshape(i, o))
            off += i * o
            self.biases.append(self.params[off:off + o])
            off += o

    @classmethod
    def init(cls, layer_sizes, activations, seed) -> "Network":
        """Fan-in scaled uniform init: every parameter ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
        net = cls(layer_sizes, activations)
        rng = np.random.default_rng(seed)
        for w, b in zip(net.weights, net.biases):
            bound = 1.0 / np.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
        return net

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def architecture(self) -> dict:
        return {"layer_sizes": list(self.layer_sizes), "activations": list(self.activations)}

    def same_architecture(self, other) -> bool:
        return self.layer_sizes == other.layer_sizes and self.activations == other.activations

    def clone(self) -> "Network":
        return Network(self.layer_sizes, self.activations, self.params)

    def load_params(self, params):
        params = np.asarray(params, dtype=np.float64)
        if params.shape != self.params.shape:
            raise ShapeError(f"expected {self.params.shape}, got {params.shape}")
        self.params[...] = params

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"input width {x.shape[-1]} does not match network input {self.in_dim}")
        return x, single

    def forward(self, x, train: bool = False):
        """Evaluate the network.

        Accepts a single vector or a batch (rows). With ``train=True`` also
        returns the activation cache that ``backward`` needs.
        """
        h, single = self._check_input(x)
        cache = [h]
        for w, b, act in zip(self.weights, self.biases, self.activations):
            h = h @ w + b
            if act == "relu":
                np.maximum(h, 0.0, out=h)
            elif act == "tanh":
                np.tanh(h, out=h)
            cache.append(h)
        out = h[0] if single else h
        if train:
            return out, (cache, single)
        return out

    __call__ = forward

    def backward(self, cache, grad_out):
        """Reverse-mode pass; returns (flat parameter gradient, gradient wrt input)."""
        if cache is None:
            raise ValueError("backward needs the cache from forward(..., train=True)")
        acts, single = cache
        g = np.asarray(grad_out, dtype=np.float64)
        if single:
            g = g[None, :]
        if g.shape != acts[-1].shape:
            raise ShapeError(f"output gradient shape {g.shape} != output shape {acts[-1].shape}")
        grad = np.empty_like(self.params)
        off_end = grad.size
        for layer in range(len(self.weights) - 1, -1, -1):
            a_out = acts[layer + 1]
            act = self.activations[layer]
            if act == "relu":
                g = g * (a_out > 0.0)
            elif act == "tanh":
                g = g * (1.0 - a_out * a_out)
            w = self.weights[layer]
            i, o = w.shape
            grad[off_end - o:off_end] = g.sum(axis=0)
            off_end -= o
            grad[off_end - i * o:off_end] = (acts[layer].T @ g).ravel()
            off_end -= i * o
            g = g @ w.T
        return grad, (g[0] if single else g)


def mse_loss(pred, target):
    """Mean squared error over all elements and its gradient wrt ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} and target {target.shape} differ")
    diff = pred - target
    n = diff.size
    return float(np.mean(diff * diff)), 2.0 * diff / n


class Adam:
    def __init__(self, n_params: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    @classmethod
    def for_network(cls, net: Network, **kw) -> "Adam":
        return cls(net.n_params, **kw)

    def hyperparameters(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}

    def step(self, net: Network, grad) -> None:
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.m.shape or net.params.shape != self.m.shape:
            raise ShapeError(f"gradient {grad.shape} / params {net.params.shape} vs optimizer {self.m.shape}")
        t = self.t + 1
        bc2 = np.sqrt(1.0 - self.beta2 ** t)
        lr_t = self.lr * bc2 / (1.0 - self.beta1 ** t)
        status = kernels.adam_update(net.params, np.ascontiguousarray(grad), self.m, self.v,
                                     self.beta1, self.beta2, lr_t, self.eps * bc2)
        if status == 1:
            raise NonFiniteError("non-finite gradient passed to Adam")
        self.t = t
        if status == 2:
            raise NonFiniteError("parameters became non-finite after Adam step")


def adam_step(net: Network, grad, state: Adam) -> None:
    state.step(net, grad)


def soft_update(target: Network, online: Network, tau: float) -> None:
    if not target.same_architecture(online):
        raise ShapeError("soft_update needs identical architectures")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    kernels.soft_update(target.params, online.params, float(tau))


# --- checkpoint container -------------------------------------------------
#
# layout: MAGIC(8) | u16 version | u32 header_len | header JSON (utf-8)
#         | float64 little-endian blob | u32 crc32 of everything before it

def save_checkpoint(path, entries: dict, meta: dict | None = None) -> None:
    header = {"entries": [], "meta": meta or {}}
    chunks = []
    off = 0
    for name, obj in entries.items():
        if isinstance(obj, Network):
            data = obj.params
            rec = {"name": name, "kind": "network", **obj.architecture()}
        elif isinstance(obj, Adam):
            data = np.concatenate([obj.m, obj.v])
            rec = {"name": name, "kind": "adam", "t": obj.t, **obj.hyperparameters()}
        else:
            raise TypeError(f"cannot checkpoint {type(obj).__name__}")
        rec["offset"] = off
        rec["length"] = int(data.size)
        off += data.size
        header["entries"].append(rec)
        chunks.append(np.asarray(data, dtype="<f8"))
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = np.concatenate(chunks).astype("<f8").tobytes() if chunks else b""
    body = CHECKPOINT_MAGIC + struct.pack("<HI", CHECKPOINT_VERSION, len(hbytes)) + hbytes + blob
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def read_checkpoint_header(data: bytes) -> tuple[dict, int]:
    if len(data) < len(CHECKPOINT_MAGIC) + 10:
        raise CheckpointError("checkpoint truncated: shorter than the fixed header")
    if data[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic bytes)")
    version, hlen = struct.unpack_from("<HI", data, 8)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format_version {version}")
    start = 14
    if len(data) < start + hlen + 4:
        raise CheckpointError("checkpoint truncated inside the header")
    try:
        header = json.loads(data[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    return header, start + hlen


def load_checkpoint(path) -> tuple[dict, dict]:
    """Return ({name: Network | Adam}, meta); raises CheckpointError on any corruption."""
    data = Path(path).read_bytes()
    header, blob_start = read_checkpoint_header(data)
    total = sum(e["length"] for e in header["entries"])
    expected = blob_start + 8 * total + 4
    if len(data) != expected:
        raise CheckpointError(f"checkpoint truncated or padded: {len(data)} bytes, expected {expected}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise CheckpointError("checkpoint checksum mismatch (corrupted payload)")
    blob = np.frombuffer(data, dtype="<f8", count=total, offset=blob_start).astype(np.float64)
    out = {}
    for e in header["entries"]:
        chunk = blob[e["offset"]:e["offset"] + e["length"]]
        if e["kind"] == "network":
            out[e["name"]] = Network(e["layer_sizes"], e["activations"], chunk)
        elif e["kind"] == "adam":
            n = e["length"] // 2
            opt = Adam(n, lr=e["lr"], beta1=e["beta1"], beta2=e["beta2"], eps=e["eps"])
            opt.m[...] = chunk[:n]
            opt.v[...] = chunk[n:]
            opt.t = int(e["t"])
            out[e["name"]] = opt
        else:
            raise CheckpointError(f"unknown entry kind {e['kind']!r}")
    return out, header["meta"]
