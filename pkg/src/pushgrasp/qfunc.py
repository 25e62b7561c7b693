"""Pixel-wise Q function: a small fully convolutional trunk shared across
the 16 rotated copies of the input, trained one executed pixel at a time.

Parameters live in one flat float64 vector together with Adam moments, so
checkpoints are a straight byte dump and finite-difference checks can poke
any coordinate.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import percept
from .config import QConfig
from .errors import CorruptFile, NonFiniteLoss, ShapeMismatch, VersionMismatch

CHECKPOINT_MAGIC = b"PGQCKPT\0"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    c_in: int
    c_out: int
    ksize: int
    dilation: int
    relu: bool

    @property
    def n_weights(self) -> int:
        return self.c_out * self.c_in * self.ksize * self.ksize

    @property
    def n_params(self) -> int:
        return self.n_weights + self.c_out


@dataclass
class ParamSet:
    theta: np.ndarray
    m: np.ndarray
    v: np.ndarray
    step: int
    layers: tuple
    grid_size: int
    kind: str = "grasp"

    @property
    def c_in(self) -> int:
        return self.layers[0].c_in

    def copy(self) -> "ParamSet":
        return ParamSet(self.theta.copy(), self.m.copy(), self.v.copy(), self.step,
                        self.layers, self.grid_size, self.kind)

    def views(self):
        """Per-layer (weight, bias) views into ``theta``."""
        out, off = [], 0
        for spec in self.layers:
            w = self.theta[off:off + spec.n_weights].reshape(spec.c_out, spec.c_in,
                                                            spec.ksize, spec.ksize)
            off += spec.n_weights
            b = self.theta[off:off + spec.c_out]
            off += spec.c_out
            out.append((w, b))
        return out

    def checksum(self) -> str:
        return hashlib.sha256(self.theta.tobytes()).hexdigest()


@dataclass
class QMapSet:
    values: np.ndarray  # (16, H, W)
    kind: str

    def max_in(self, mask) -> float:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            return -math.inf
        return float(self.values[:, mask].max())


@dataclass(frozen=True)
class TrainStep:
    pixel: tuple
    target: float
    q: float
    loss: float


def build_layers(c_in: int, cfg: QConfig | None = None) -> tuple:
    cfg = cfg or QConfig()
    layers = []
    prev = c_in
    for ch, dil in zip(cfg.channels, cfg.dilations):
        layers.append(LayerSpec(prev, int(ch), 3, int(dil), True))
        prev = int(ch)
    layers.append(LayerSpec(prev, 1, 1, 1, False))
    return tuple(layers)


def init_params(c_in: int, grid_size: int, cfg: QConfig | None = None, kind: str = "grasp",
                seed: int | None = None) -> ParamSet:
    """Fan-in scaled uniform weights, zero biases."""
    cfg = cfg or QConfig()
    layers = build_layers(c_in, cfg)
    rng = np.random.default_rng(cfg.init_seed if seed is None else seed)
    chunks = []
    for spec in layers:
        fan_in = spec.c_in * spec.ksize * spec.ksize
        bound = math.sqrt(6.0 / fan_in) if spec.relu else 1.0 / math.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, spec.n_weights))
        chunks.append(np.zeros(spec.c_out))
    theta = np.concatenate(chunks)
    return ParamSet(theta, np.zeros_like(theta), np.zeros_like(theta), 0, layers, grid_size, kind)


# ---------------------------------------------------------------------------
# Convolution on a padded, flattened layout.  Activations are stored as
# (C, M + N*Hp*Wp + M) with a zero frame of width P around every image and a
# margin M on both ends, so each kernel tap is a constant offset into the flat
# axis and a convolution is a sum of plain matrix products over shifted views.

@dataclass(frozen=True)
class _Frame:
    n: int
    h: int
    w: int
    pad: int

    @property
    def hp(self):
        return self.h + 2 * self.pad

    @property
    def wp(self):
        return self.w + 2 * self.pad

    @property
    def length(self):
        return self.n * self.hp * self.wp

    @property
    def margin(self):
        return self.pad * self.wp + self.pad

    def interior(self) -> np.ndarray:
        m = np.zeros((self.n, self.hp, self.wp))
        m[:, self.pad:self.pad + self.h, self.pad:self.pad + self.w] = 1.0
        return m.ravel()

    def embed(self, x: np.ndarray) -> np.ndarray:
        """(C, N, H, W) -> padded flat buffer."""
        c = x.shape[0]
        buf = np.zeros((c, self.length + 2 * self.margin))
        core = buf[:, self.margin:self.margin + self.length].reshape(c, self.n, self.hp, self.wp)
        core[:, :, self.pad:self.pad + self.h, self.pad:self.pad + self.w] = x
        return buf

    def extract(self, flat: np.ndarray) -> np.ndarray:
        """(C, length) -> (C, N, H, W)."""
        v = flat.reshape(flat.shape[0], self.n, self.hp, self.wp)
        return v[:, :, self.pad:self.pad + self.h, self.pad:self.pad + self.w]

    def offsets(self, k: int, d: int):
        r = k // 2
        return [(ky * k + kx, ((ky - r) * self.wp + (kx - r)) * d)
                for ky in range(k) for kx in range(k)]



def trunk(params: ParamSet, x: np.ndarray, keep: bool = False):
    """Run the trunk on (N, C, H, W) inputs; returns (N, H, W) maps."""
    N, C, H, W = x.shape
    pad = max(s.dilation * (s.ksize // 2) for s in params.layers)
    frame = _Frame(N, H, W, pad)
    L, M = frame.length, frame.margin
    inner = frame.interior()
    buf = frame.embed(np.ascontiguousarray(x.transpose(1, 0, 2, 3)))
    cache = []
    for spec, (w, b) in zip(params.layers, params.views()):
        taps = np.ascontiguousarray(w.transpose(2, 3, 0, 1)).reshape(-1, spec.c_out, spec.c_in)
        z = np.zeros((spec.c_out, L))
        for t, off in frame.offsets(spec.ksize, spec.dilation):
            z += taps[t] @ buf[:, M + off:M + off + L]
        z += b[:, None]
        z *= inner
        if keep:
            cache.append((buf, z))
        nxt = np.zeros((spec.c_out, L + 2 * M))
        nxt[:, M:M + L] = np.maximum(z, 0.0) if spec.relu else z
        buf = nxt
    out = frame.extract(buf[:, M:M + L])[0]
    return (out, (frame, cache)) if keep else out


def trunk_backward(params: ParamSet, cache, dout: np.ndarray) -> np.ndarray:
    frame, layers = cache
    L, M = frame.length, frame.margin
    inner = frame.interior()
    grad = np.zeros_like(params.theta)
    offsets = []
    off = 0
    for spec in params.layers:
        offsets.append(off)
        off += spec.n_params
    g = frame.embed(dout[None])[:, M:M + L]
    views = params.views()
    for li in range(len(params.layers) - 1, -1, -1):
        spec = params.layers[li]
        buf, z = layers[li]
        if spec.relu:
            g = g * (z > 0.0)
        g = g * inner
        w = views[li][0]
        taps_t = np.ascontiguousarray(w.transpose(2, 3, 1, 0)).reshape(-1, spec.c_in, spec.c_out)
        gw = np.empty((spec.ksize * spec.ksize, spec.c_out, spec.c_in))
        dbuf = np.zeros_like(buf) if li > 0 else None
        for t, shift in frame.offsets(spec.ksize, spec.dilation):
            sl = slice(M + shift, M + shift + L)
            gw[t] = g @ buf[:, sl].T
            if dbuf is not None:
                dbuf[:, sl] += taps_t[t] @ g
        o = offsets[li]
        gw = gw.reshape(spec.ksize, spec.ksize, spec.c_out, spec.c_in).transpose(2, 3, 0, 1)
        grad[o:o + spec.n_weights] = gw.ravel()
        grad[o + spec.n_weights:o + spec.n_params] = g.sum(axis=1)
        if dbuf is not None:
            g = dbuf[:, M:M + L]
    return grad


# ---------------------------------------------------------------------------
# public operations

def _check_stack(params: ParamSet, stack: np.ndarray):
    n = params.grid_size
    if stack.shape[1:] != (params.c_in, n, n):
        raise ShapeMismatch(f"stack {stack.shape} does not match (16, {params.c_in}, {n}, {n})")


def forward(params: ParamSet, stack: np.ndarray) -> QMapSet:
    """Q maps for all 16 rotations of one observation; maps are rotated back
    to the observation frame."""
    _check_stack(params, stack)
    maps = trunk(params, stack)
    values = np.stack([percept.unrotate_k(maps[k], k) for k in range(len(maps))])
    return QMapSet(values, params.kind)


def forward_planes(params: ParamSet, planes: np.ndarray) -> QMapSet:
    return forward(params, percept.rotate_stack(planes))


def td_target(reward: float, next_q_max: float, gamma: float) -> float:
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    return reward + gamma * next_q_max


def huber(e: float, delta: float = 1.0):
    a = abs(e)
    if a <= delta:
        return 0.5 * e * e, e
    return delta * (a - 0.5 * delta), math.copysign(delta, e)


def pixel_loss_and_grad(params: ParamSet, planes: np.ndarray, pixel, target: float,
                        delta: float = 1.0):
    """Huber loss at one executed (k, row, col) and its parameter gradient.

    Only the executed pixel carries loss; the gradient reaches the trunk
    through the (at most four) bilinear taps that produce that pixel.
    """
    k, row, col = (int(v) for v in pixel)
    n = params.grid_size
    if not (0 <= row < n and 0 <= col < n):
        raise ValueError(f"pixel {(row, col)} outside {n}x{n} grid")
    x = percept.rotate_k(planes, k)[None]
    out, cache = trunk(params, x, keep=True)
    taps = percept.unrotate_taps(k, row, col, n)
    terms = [(out[0, r, c] if ok else 0.0) * w for r, c, w, ok in taps]
    q = terms[0] if len(terms) == 1 else ((terms[0] + terms[1]) + terms[2]) + terms[3]
    q = float(q)
    loss, dq = huber(q - target, delta)
    dout = np.zeros_like(out)
    for r, c, w, ok in taps:
        if ok:
            dout[0, r, c] += dq * w
    grad = trunk_backward(params, cache, dout)
    return loss, q, grad


def adam_step(params: ParamSet, grad: np.ndarray, cfg: QConfig) -> None:
    g = grad + cfg.weight_decay * params.theta
    params.step += 1
    params.m *= cfg.beta1
    params.m += (1.0 - cfg.beta1) * g
    params.v *= cfg.beta2
    params.v += (1.0 - cfg.beta2) * g * g
    mhat = params.m / (1.0 - cfg.beta1 ** params.step)
    vhat = params.v / (1.0 - cfg.beta2 ** params.step)
    params.theta -= cfg.lr * mhat / (np.sqrt(vhat) + cfg.adam_eps)


def train_on(params: ParamSet, planes: np.ndarray, pixel, target: float,
             cfg: QConfig | None = None):
    """One Adam step on the single-pixel Huber loss.  Returns (params, TrainStep)
    with the loss measured before the update."""
    cfg = cfg or QConfig()
    if not math.isfinite(target):
        raise NonFiniteLoss(f"target {target} is not finite")
    loss, q, grad = pixel_loss_and_grad(params, planes, pixel, target, cfg.huber_delta)
    if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
        raise NonFiniteLoss(f"loss {loss} at pixel {tuple(pixel)}")
    adam_step(params, grad, cfg)
    return params, TrainStep(tuple(int(v) for v in pixel), float(target), q, float(loss))


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(params: ParamSet, path) -> None:
    meta = {
        "grid_size": params.grid_size,
        "kind": params.kind,
        "step": params.step,
        "n_params": int(params.theta.size),
        "layers": [[s.c_in, s.c_out, s.ksize, s.dilation, s.relu] for s in params.layers],
    }
    blob = json.dumps(meta, sort_keys=True).encode()
    payload = (blob + params.theta.astype("<f8").tobytes() + params.m.astype("<f8").tobytes()
               + params.v.astype("<f8").tobytes())
    head = CHECKPOINT_MAGIC + struct.pack("<III", CHECKPOINT_VERSION, len(blob), zlib.crc32(payload))
    Path(path).write_bytes(head + payload)


def load_checkpoint(path, grid_size: int | None = None, c_in: int | None = None) -> ParamSet:
    data = Path(path).read_bytes()
    hsize = len(CHECKPOINT_MAGIC) + 12
    if len(data) < hsize or not data.startswith(CHECKPOINT_MAGIC):
        raise CorruptFile(f"{path}: not a checkpoint")
    version, blen, crc = struct.unpack("<III", data[len(CHECKPOINT_MAGIC):hsize])
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    payload = data[hsize:]
    if zlib.crc32(payload) != crc:
        raise CorruptFile(f"{path}: checksum mismatch")
    try:
        meta = json.loads(payload[:blen])
    except ValueError:
        raise CorruptFile(f"{path}: bad metadata") from None
    n = meta["n_params"]
    arrays = payload[blen:]
    if len(arrays) != 3 * 8 * n:
        raise CorruptFile(f"{path}: expected {3 * 8 * n} parameter bytes, found {len(arrays)}")
    if grid_size is not None and meta["grid_size"] != grid_size:
        raise VersionMismatch(f"{path}: grid {meta['grid_size']} does not match configured {grid_size}")
    layers = tuple(LayerSpec(*l) for l in meta["layers"])
    if c_in is not None and layers[0].c_in != c_in:
        raise VersionMismatch(f"{path}: {layers[0].c_in} input channels, expected {c_in}")
    vec = np.frombuffer(arrays, dtype="<f8").astype(np.float64)
    return ParamSet(vec[:n].copy(), vec[n:2 * n].copy(), vec[2 * n:].copy(), meta["step"],
                    layers, meta["grid_size"], meta["kind"])
