"""Adam optimization, the two-stage schedule (reconstruction-only
pre-training, then the full joint loss), and binary checkpoints.

Training is always full batch: the self-expressive layers couple all n
samples jointly, so mini-batching is ill-defined for this objective.
"""

import logging
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import (
    ArgumentError,
    ChecksumError,
    ConsistencyError,
    DivergenceError,
    FormatError,
    ShapeError,
    VersionError,
)
from .model import Hyperparams, ModelState

log = logging.getLogger("dualse.trainer")

CHECKPOINT_MAGIC = b"DUALSECK"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    pretrain_epochs: int = 500
    finetune_epochs: int = 1000
    lr: float = 1e-3
    seed: int = 0
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    log_every: int = 0

    def __post_init__(self):
        if self.pretrain_epochs < 0 or self.finetune_epochs < 0:
            raise ArgumentError("epoch counts must be >= 0")
        if not self.lr > 0:
            raise ArgumentError(f"lr must be > 0, got {self.lr}")


class AdamState:
    """First/second moment accumulators for a named parameter set."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ArgumentError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}


def adam_step(s, params, grads):
    """One Adam update, in place on the parameter arrays.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  bias-corrected m_hat,
    v_hat;  p <- p - lr * m_hat / (sqrt(v_hat) + eps).
    """
    s.t += 1
    bc1 = 1.0 - s.beta1 ** s.t
    bc2 = 1.0 - s.beta2 ** s.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        m = s.m[name]
        v = s.v[name]
        m *= s.beta1
        m += (1.0 - s.beta1) * g
        v *= s.beta2
        v += (1.0 - s.beta2) * (g * g)
        p -= s.lr * (m / bc1) / (np.sqrt(v / bc2) + s.eps)
    return params


def _ae_params(state):
    return {
        name: p
        for name, p in state.params().items()
        if name.startswith("enc.") or name.startswith("dec.")
    }


def pretrain(state, data, cfg):
    """Train encoder/decoder only against the reconstruction loss.

    Returns ``(state, history)`` with one loss value per epoch (measured
    before that epoch's update). The coefficient and attention parameters
    are untouched.
    """
    x = data.features
    history = []
    if cfg.pretrain_epochs == 0:
        return state, history
    ae_params = _ae_params(state)
    adam = AdamState(ae_params, lr=cfg.lr)
    for epoch in range(cfg.pretrain_epochs):
        loss, grads = model.ae_forward_backward(state, x)
        if not np.isfinite(loss):
            raise DivergenceError(f"pretrain epoch {epoch}: loss {loss}")
        history.append(loss)
        adam_step(adam, ae_params, grads)
        if cfg.log_every and epoch % cfg.log_every == 0:
            log.info("pretrain epoch %d: recon loss %.6g", epoch, loss)
    return state, history


def finetune(state, data, cfg):
    """Train every parameter against the full joint loss.

    Returns ``(state, history)`` with one LossTerms row per epoch
    (measured before that epoch's update).
    """
    x = data.features
    hp = cfg.hyperparams
    history = []
    if cfg.finetune_epochs == 0:
        return state, history
    params = state.params()
    adam = AdamState(params, lr=cfg.lr)
    for epoch in range(cfg.finetune_epochs):
        cache = model.forward(state, x, hp)
        if not np.isfinite(cache.total):
            raise DivergenceError(f"finetune epoch {epoch}: loss {cache.total}")
        history.append(cache.terms)
        grads = model.backward(state, cache, x, hp)
        adam_step(adam, params, grads)
        if cfg.log_every and epoch % cfg.log_every == 0:
            log.info("finetune epoch %d: total loss %.6g", epoch, cache.total)
    return state, history


def save_checkpoint(state, path):
    """Write all parameters: magic, u32 version, per-tensor
    (name, dims, float64-LE payload), trailing CRC32 of the body."""
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION)]
    params = state.params()
    chunks.append(struct.pack("<I", len(params)))
    for name, tensor in params.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", tensor.ndim))
        chunks.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    body = b"".join(chunks)
    with open(path, "wb") as f:
        f.write(body)
        f.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def load_checkpoint(path):
    """Read a checkpoint back into a ModelState; round-trips bitwise."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(CHECKPOINT_MAGIC) + 12:
        raise ChecksumError(f"{path}: truncated checkpoint ({len(blob)} bytes)")
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint file (bad magic)")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ChecksumError(f"{path}: CRC mismatch, file corrupt or truncated")
    offset = len(CHECKPOINT_MAGIC)
    (version,) = struct.unpack_from("<I", body, offset)
    offset += 4
    if version != CHECKPOINT_VERSION:
        raise VersionError(
            f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    (count,) = struct.unpack_from("<I", body, offset)
    offset += 4
    tensors = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", body, offset)
            offset += 2
            name = body[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<B", body, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", body, offset)
            offset += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            payload = body[offset:offset + 8 * size]
            if len(payload) != 8 * size:
                raise ChecksumError(f"{path}: tensor {name!r} payload truncated")
            offset += 8 * size
            tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    except struct.error as exc:
        raise ChecksumError(f"{path}: malformed tensor table ({exc})") from None
    if offset != len(body):
        raise ChecksumError(f"{path}: {len(body) - offset} unexpected trailing bytes")
    return _state_from_tensors(tensors, path)


def _state_from_tensors(tensors, path):
    def stack(prefix):
        layers = []
        i = 0
        while f"{prefix}.{i}.w" in tensors:
            w = tensors[f"{prefix}.{i}.w"]
            b = tensors.get(f"{prefix}.{i}.b")
            if b is None:
                raise ConsistencyError(f"{path}: missing {prefix}.{i}.b")
            layers.append([w, b])
            i += 1
        if not layers:
            raise ConsistencyError(f"{path}: no {prefix} layers found")
        return layers

    for required in ("coeff_attr", "coeff_struct", "attn_w"):
        if required not in tensors:
            raise ConsistencyError(f"{path}: missing tensor {required!r}")
    state = ModelState(
        encoder=stack("enc"),
        decoder=stack("dec"),
        coeff_attr=tensors["coeff_attr"],
        coeff_struct=tensors["coeff_struct"],
        attn_w=tensors["attn_w"],
    )
    expected = {f"enc.{i}.{s}" for i in range(len(state.encoder)) for s in "wb"}
    expected |= {f"dec.{i}.{s}" for i in range(len(state.decoder)) for s in "wb"}
    expected |= {"coeff_attr", "coeff_struct", "attn_w"}
    extra = set(tensors) - expected
    if extra:
        raise ConsistencyError(f"{path}: unexpected tensors {sorted(extra)}")
    return state
