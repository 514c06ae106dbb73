"""The differentiable pipeline: affine auto-encoder, two self-expressive
coefficient layers (attribute and structure), attention-based graph fusion,
the total training loss, and analytic gradients for every parameter.

Data flows column-per-sample: the input x is (d_in x n), the latent z is
(d x n), and the coefficient matrices are (n x n). The total loss is

    0.5*||x - recon||_F^2                      reconstruction
    + ||coeff_attr||_F^2                       attribute coefficient decay
    + gamma * ||z - z @ coeff_attr||_F^2       attribute self-expression
    + lambda1 * ||coeff_struct||_F^2           structure coefficient decay
    + lambda2 * ||zs - zs @ coeff_struct||_F^2 structure self-expression

where zs is derived from coeff_attr (or z) per the structure variant. The
fused graph feeds spectral clustering only; it carries no loss term unless
``fusion_in_loss`` is enabled, so by default the attention weights receive
zero gradient.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ConsistencyError, NumericError, ShapeError

LEAKY_SLOPE = 0.2
COEFF_INIT_SCALE = 1e-4

STRUCTURE_VARIANTS = ("mixed_symmetric", "cosine", "raw", "abs_symmetric")
SYMMETRIC_VARIANTS = ("mixed_symmetric", "cosine", "abs_symmetric")


@dataclass
class Hyperparams:
    """Loss weights and structural switches.

    ``zs_grad`` controls whether the structure self-expression loss
    back-propagates through the construction of the structure matrix into
    its source (coefficients or latent); with it off the structure matrix
    is treated as a constant of the backward pass. ``fusion_in_loss`` adds
    lambda2 * ||zs - zs @ fused||_F^2 so the attention weights train;
    off by default.
    """

    gamma: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    structure_variant: str = "mixed_symmetric"
    zs_grad: bool = True
    fusion_in_loss: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ArgumentError(f"gamma must be finite and > 0, got {self.gamma}")
        for name, v in (("lambda1", self.lambda1), ("lambda2", self.lambda2)):
            if not (np.isfinite(v) and v >= 0):
                raise ArgumentError(f"{name} must be finite and >= 0, got {v}")
        if self.structure_variant not in STRUCTURE_VARIANTS:
            raise ArgumentError(
                f"structure_variant {self.structure_variant!r} not one of {STRUCTURE_VARIANTS}"
            )


@dataclass
class ModelState:
    """All trainable parameters.

    ``encoder`` and ``decoder`` are lists of [weight, bias] pairs; a layer
    maps (out_dim x in_dim) @ (in_dim x n) + bias. ReLU follows every layer
    except the last of each stack, so latent values and reconstructions may
    be negative. ``coeff_attr`` and ``coeff_struct`` are the (n x n)
    self-expressive layers (no bias, no activation); ``attn_w`` is the
    (2n x 2) fusion attention weight.
    """

    encoder: list
    decoder: list
    coeff_attr: np.ndarray
    coeff_struct: np.ndarray
    attn_w: np.ndarray

    @property
    def n_samples(self):
        return self.coeff_attr.shape[0]

    @property
    def input_dim(self):
        return self.encoder[0][0].shape[1]

    @property
    def latent_dim(self):
        return self.encoder[-1][0].shape[0]

    def params(self):
        """Ordered name -> array view of every trainable tensor."""
        out = {}
        for i, (w, b) in enumerate(self.encoder):
            out[f"enc.{i}.w"] = w
            out[f"enc.{i}.b"] = b
        for i, (w, b) in enumerate(self.decoder):
            out[f"dec.{i}.w"] = w
            out[f"dec.{i}.b"] = b
        out["coeff_attr"] = self.coeff_attr
        out["coeff_struct"] = self.coeff_struct
        out["attn_w"] = self.attn_w
        return out

    def copy(self):
        return copy.deepcopy(self)


def init_state(input_dim, hidden_dims, n_samples, seed):
    """Fresh parameters: fan-in-scaled Gaussian weights (variance 2/fan_in)
    for the affine stacks and the attention weight, zero biases, and tiny
    uniform coefficients in [-1e-4, 1e-4] (exact zeros would make the
    default structure matrix identically zero and stall that branch)."""
    if not hidden_dims:
        raise ArgumentError("hidden_dims must name at least one layer width")
    if min(hidden_dims) < 1 or input_dim < 1 or n_samples < 1:
        raise ArgumentError("layer widths, input_dim and n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    dims = [input_dim, *hidden_dims]

    def affine(d_out, d_in):
        w = rng.standard_normal((d_out, d_in)) * np.sqrt(2.0 / d_in)
        return [w, np.zeros(d_out)]

    encoder = [affine(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]
    rev = dims[::-1]
    decoder = [affine(rev[i + 1], rev[i]) for i in range(len(rev) - 1)]
    coeff_attr = rng.uniform(-COEFF_INIT_SCALE, COEFF_INIT_SCALE, (n_samples, n_samples))
    coeff_struct = rng.uniform(-COEFF_INIT_SCALE, COEFF_INIT_SCALE, (n_samples, n_samples))
    attn_w = rng.standard_normal((2 * n_samples, 2)) * np.sqrt(2.0 / (2 * n_samples))
    return ModelState(
        encoder=encoder,
        decoder=decoder,
        coeff_attr=coeff_attr,
        coeff_struct=coeff_struct,
        attn_w=attn_w,
    )


def _run_stack(layers, x, name):
    out, _, _ = _run_stack_cached(layers, x, name)
    return out


def _run_stack_cached(layers, x, name):
    x = np.asarray(x, dtype=np.float64)
    inputs = []
    preacts = []
    h = x
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        if w.shape[1] != h.shape[0]:
            raise ShapeError(
                f"{name} layer {i} expects {w.shape[1]} input rows, got {h.shape[0]}"
            )
        inputs.append(h)
        pre = w @ h + b[:, None]
        preacts.append(pre)
        h = np.maximum(pre, 0.0) if i < last else pre
    return h, inputs, preacts


def _stack_backward(layers, inputs, preacts, g_out):
    grads = [None] * len(layers)
    g = g_out
    last = len(layers) - 1
    for i in range(last, -1, -1):
        g_pre = g if i == last else g * (preacts[i] > 0.0)
        w, _ = layers[i]
        grads[i] = (g_pre @ inputs[i].T, g_pre.sum(axis=1))
        g = w.T @ g_pre
    return grads, g


def encode(encoder_layers, x):
    """Run the encoder stack; ReLU after every layer except the last."""
    return _run_stack(encoder_layers, x, "encoder")


def decode(decoder_layers, z):
    """Run the decoder stack; ReLU after every layer except the last."""
    return _run_stack(decoder_layers, z, "decoder")


def ae_loss(x, x_hat):
    """0.5 * squared Frobenius distance between input and reconstruction."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    diff = x - x_hat
    return 0.5 * float((diff * diff).sum())


def attribute_se_loss(z_a, coeff):
    """Unweighted attribute terms: (||coeff||_F^2, ||z_a - z_a@coeff||_F^2).

    The caller applies the gamma weight. No zero-diagonal constraint is
    imposed: the coefficient decay already rules out the identity solution.
    """
    z_a = np.asarray(z_a, dtype=np.float64)
    coeff = np.asarray(coeff, dtype=np.float64)
    if coeff.ndim != 2 or coeff.shape[0] != coeff.shape[1] or coeff.shape[0] != z_a.shape[1]:
        raise ShapeError(
            f"coefficients must be square of size n={z_a.shape[1]}, got {coeff.shape}"
        )
    resid = z_a - z_a @ coeff
    return float((coeff * coeff).sum()), float((resid * resid).sum())


def structure_se_loss(z_s, coeff):
    """Unweighted structure terms: (||coeff||_F^2, ||z_s - z_s@coeff||_F^2).

    The caller applies the lambda1/lambda2 weights.
    """
    z_s = np.asarray(z_s, dtype=np.float64)
    coeff = np.asarray(coeff, dtype=np.float64)
    if z_s.shape != coeff.shape or z_s.ndim != 2 or z_s.shape[0] != z_s.shape[1]:
        raise ShapeError(f"expected matching square matrices, got {z_s.shape} and {coeff.shape}")
    resid = z_s - z_s @ coeff
    return float((coeff * coeff).sum()), float((resid * resid).sum())


def build_structure_matrix(coeff_attr, z, variant):
    """Construct the (n x n) structure matrix fed to the second
    self-expressive layer.

    * ``mixed_symmetric``: (C + C.T) / 2 of the attribute coefficients,
      keeping signs (the default; negative couplings stay informative).
    * ``cosine``: (z.T @ z) normalized by the squared Frobenius norm of z.
    * ``raw``: the attribute coefficients unchanged.
    * ``abs_symmetric``: (|C| + |C.T|) / 2, signs discarded.
    """
    coeff_attr = np.asarray(coeff_attr, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if coeff_attr.ndim != 2 or coeff_attr.shape[0] != coeff_attr.shape[1]:
        raise ShapeError(f"coefficients must be square, got {coeff_attr.shape}")
    if z.shape[1] != coeff_attr.shape[0]:
        raise ShapeError(
            f"latent has {z.shape[1]} columns, coefficients are {coeff_attr.shape}"
        )
    if variant == "mixed_symmetric":
        return (coeff_attr + coeff_attr.T) / 2.0
    if variant == "cosine":
        norm_sq = float((z * z).sum())
        if norm_sq == 0.0:
            raise NumericError("cosine structure matrix undefined for a zero latent matrix")
        gram = z.T @ z
        # mathematically symmetric; average away BLAS rounding asymmetry
        return (gram + gram.T) / (2.0 * norm_sq)
    if variant == "raw":
        return coeff_attr.copy()
    if variant == "abs_symmetric":
        return (np.abs(coeff_attr) + np.abs(coeff_attr.T)) / 2.0
    raise ArgumentError(f"unknown structure_variant {variant!r}")


def _softmax_rows(u):
    shifted = u - u.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def attention_weights(coeff_attr, coeff_struct, w):
    """Per-sample fusion weights, one strictly positive unit-norm pair per row.

    Pipeline: [coeff_attr coeff_struct] @ w -> LeakyReLU(0.2) -> row softmax
    -> row l2 normalization. Softmax uses max subtraction for overflow
    safety.
    """
    coeff_attr = np.asarray(coeff_attr, dtype=np.float64)
    coeff_struct = np.asarray(coeff_struct, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n = coeff_attr.shape[0]
    if coeff_attr.shape != (n, n) or coeff_struct.shape != (n, n):
        raise ShapeError(
            f"coefficient matrices must both be ({n}, {n}), got "
            f"{coeff_attr.shape} and {coeff_struct.shape}"
        )
    if w.shape != (2 * n, 2):
        raise ShapeError(f"attention weight must be ({2 * n}, 2), got {w.shape}")
    t = np.hstack([coeff_attr, coeff_struct]) @ w
    u = np.where(t > 0.0, t, LEAKY_SLOPE * t)
    s = _softmax_rows(u)
    return s / np.sqrt((s * s).sum(axis=1, keepdims=True))


def fuse(coeff_attr, coeff_struct, m):
    """Row-weighted sum: row i of the output is
    m[i,0] * row i of coeff_attr + m[i,1] * row i of coeff_struct."""
    coeff_attr = np.asarray(coeff_attr, dtype=np.float64)
    coeff_struct = np.asarray(coeff_struct, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    n = coeff_attr.shape[0]
    if coeff_attr.shape != (n, n) or coeff_struct.shape != (n, n):
        raise ShapeError(
            f"coefficient matrices must both be ({n}, {n}), got "
            f"{coeff_attr.shape} and {coeff_struct.shape}"
        )
    if m.shape != (n, 2):
        raise ShapeError(f"fusion weights must be ({n}, 2), got {m.shape}")
    return m[:, :1] * coeff_attr + m[:, 1:] * coeff_struct


@dataclass
class LossTerms:
    """The five unweighted loss terms, plus the fused self-expression term
    that is only active under ``fusion_in_loss``."""

    ae: float
    attr_reg: float
    attr_se: float
    struct_reg: float
    struct_se: float
    fused_se: float = 0.0

    def total(self, hp):
        t = (
            self.ae
            + self.attr_reg
            + hp.gamma * self.attr_se
            + hp.lambda1 * self.struct_reg
            + hp.lambda2 * self.struct_se
        )
        if hp.fusion_in_loss:
            t += hp.lambda2 * self.fused_se
        return t


@dataclass
class ForwardCache:
    """Every intermediate of one full forward pass, consumed by backward."""

    latent: np.ndarray
    recon: np.ndarray
    attr_recon: np.ndarray
    structure: np.ndarray
    struct_recon: np.ndarray
    attn: np.ndarray
    fused: np.ndarray
    terms: LossTerms
    total: float
    enc_inputs: list = field(repr=False, default_factory=list)
    enc_preacts: list = field(repr=False, default_factory=list)
    dec_inputs: list = field(repr=False, default_factory=list)
    dec_preacts: list = field(repr=False, default_factory=list)


def _check_fusion_invariants(m, z_s, variant):
    if (m <= 0.0).any():
        raise NumericError("attention weights must be strictly positive")
    norms = np.sqrt((m * m).sum(axis=1))
    if np.abs(norms - 1.0).max() > 1e-12:
        raise NumericError("attention weight rows must have unit Euclidean norm")
    if variant in SYMMETRIC_VARIANTS and not np.array_equal(z_s, z_s.T):
        raise NumericError(f"structure matrix not symmetric under variant {variant!r}")


def forward(state, x, hp):
    """Run the whole pipeline and collect every loss term.

    Raises if the attention rows are not strictly positive unit vectors or
    if the structure matrix of a symmetric variant comes out asymmetric.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"input must be 2-D, got ndim={x.ndim}")
    if x.shape[1] != state.n_samples:
        raise ShapeError(
            f"input has {x.shape[1]} samples but coefficients are sized {state.n_samples}"
        )
    z, enc_inputs, enc_preacts = _run_stack_cached(state.encoder, x, "encoder")
    recon, dec_inputs, dec_preacts = _run_stack_cached(state.decoder, z, "decoder")
    ae = ae_loss(x, recon)
    ca = state.coeff_attr
    cs = state.coeff_struct
    n = z.shape[1]
    if ca.shape != (n, n) or cs.shape != (n, n):
        raise ShapeError(
            f"coefficients must be square of size n={n}, got {ca.shape} and {cs.shape}"
        )
    attr_recon = z @ ca
    attr_resid = z - attr_recon
    attr_reg = float((ca * ca).sum())
    attr_se = float((attr_resid * attr_resid).sum())
    z_s = build_structure_matrix(ca, z, hp.structure_variant)
    struct_recon = z_s @ cs
    struct_resid = z_s - struct_recon
    struct_reg = float((cs * cs).sum())
    struct_se = float((struct_resid * struct_resid).sum())
    m = attention_weights(ca, cs, state.attn_w)
    fused = fuse(ca, cs, m)
    _check_fusion_invariants(m, z_s, hp.structure_variant)
    fused_se = 0.0
    if hp.fusion_in_loss:
        fused_resid = z_s - z_s @ fused
        fused_se = float((fused_resid * fused_resid).sum())
    terms = LossTerms(
        ae=ae,
        attr_reg=attr_reg,
        attr_se=attr_se,
        struct_reg=struct_reg,
        struct_se=struct_se,
        fused_se=fused_se,
    )
    return ForwardCache(
        latent=z,
        recon=recon,
        attr_recon=attr_recon,
        structure=z_s,
        struct_recon=struct_recon,
        attn=m,
        fused=fused,
        terms=terms,
        total=terms.total(hp),
        enc_inputs=enc_inputs,
        enc_preacts=enc_preacts,
        dec_inputs=dec_inputs,
        dec_preacts=dec_preacts,
    )


def backward(state, cache, x, hp):
    """Analytic gradients of the total loss for every parameter.

    Returns a dict keyed like ``ModelState.params()``. The structure matrix
    is a function of the attribute coefficients (or of the latent, for the
    cosine variant); that chain is included unless ``hp.zs_grad`` is off.
    Without ``fusion_in_loss`` the attention weight gradient is exactly
    zero because no loss term contains the fused graph.
    """
    x = np.asarray(x, dtype=np.float64)
    n = state.n_samples
    if cache.latent.shape[1] != x.shape[1] or cache.recon.shape != x.shape:
        raise ConsistencyError(
            f"cache shapes {cache.recon.shape} do not match input {x.shape}"
        )
    if cache.structure.shape != (n, n):
        raise ConsistencyError(
            f"cache structure matrix {cache.structure.shape} does not match n={n}"
        )
    ca = state.coeff_attr
    cs = state.coeff_struct
    z = cache.latent
    z_s = cache.structure
    r_attr = z - cache.attr_recon
    r_struct = z_s - cache.struct_recon

    g_recon = cache.recon - x
    dec_grads, g_z = _stack_backward(state.decoder, cache.dec_inputs, cache.dec_preacts, g_recon)

    g_ca = 2.0 * ca - (2.0 * hp.gamma) * (z.T @ r_attr)
    g_z = g_z + (2.0 * hp.gamma) * (r_attr - r_attr @ ca.T)
    g_cs = (2.0 * hp.lambda1) * cs - (2.0 * hp.lambda2) * (z_s.T @ r_struct)
    g_zs = (2.0 * hp.lambda2) * (r_struct - r_struct @ cs.T)
    g_w = np.zeros_like(state.attn_w)

    if hp.fusion_in_loss:
        m = cache.attn
        fused = cache.fused
        r_fused = z_s - z_s @ fused
        g_cf = -(2.0 * hp.lambda2) * (z_s.T @ r_fused)
        g_zs = g_zs + (2.0 * hp.lambda2) * (r_fused - r_fused @ fused.T)
        g_ca = g_ca + m[:, :1] * g_cf
        g_cs = g_cs + m[:, 1:] * g_cf
        g_m = np.stack([(g_cf * ca).sum(axis=1), (g_cf * cs).sum(axis=1)], axis=1)
        # back through row-l2(softmax(leaky(concat @ w)))
        concat = np.hstack([ca, cs])
        t = concat @ state.attn_w
        u = np.where(t > 0.0, t, LEAKY_SLOPE * t)
        s = _softmax_rows(u)
        r_norm = np.sqrt((s * s).sum(axis=1, keepdims=True))
        g_s = (g_m - m * (m * g_m).sum(axis=1, keepdims=True)) / r_norm
        g_u = s * (g_s - (g_s * s).sum(axis=1, keepdims=True))
        g_t = g_u * np.where(t > 0.0, 1.0, LEAKY_SLOPE)
        g_w = concat.T @ g_t
        g_concat = g_t @ state.attn_w.T
        g_ca = g_ca + g_concat[:, :n]
        g_cs = g_cs + g_concat[:, n:]

    if hp.zs_grad:
        variant = hp.structure_variant
        if variant == "mixed_symmetric":
            g_ca = g_ca + (g_zs + g_zs.T) / 2.0
        elif variant == "raw":
            g_ca = g_ca + g_zs
        elif variant == "abs_symmetric":
            g_ca = g_ca + np.sign(ca) * (g_zs + g_zs.T) / 2.0
        elif variant == "cosine":
            norm_sq = float((z * z).sum())
            inner = float((g_zs * z_s).sum())
            g_z = g_z + (z @ (g_zs + g_zs.T)) / norm_sq - (2.0 * inner / norm_sq) * z

    enc_grads, _ = _stack_backward(state.encoder, cache.enc_inputs, cache.enc_preacts, g_z)

    grads = {}
    for i, (gw, gb) in enumerate(enc_grads):
        grads[f"enc.{i}.w"] = gw
        grads[f"enc.{i}.b"] = gb
    for i, (gw, gb) in enumerate(dec_grads):
        grads[f"dec.{i}.w"] = gw
        grads[f"dec.{i}.b"] = gb
    grads["coeff_attr"] = g_ca
    grads["coeff_struct"] = g_cs
    grads["attn_w"] = g_w
    return grads


def ae_forward_backward(state, x):
    """Reconstruction loss and encoder/decoder gradients only.

    The pre-training path: no (n x n) products, so it is much cheaper than
    a full forward/backward.
    """
    x = np.asarray(x, dtype=np.float64)
    z, enc_inputs, enc_preacts = _run_stack_cached(state.encoder, x, "encoder")
    recon, dec_inputs, dec_preacts = _run_stack_cached(state.decoder, z, "decoder")
    loss = ae_loss(x, recon)
    g_recon = recon - x
    dec_grads, g_z = _stack_backward(state.decoder, dec_inputs, dec_preacts, g_recon)
    enc_grads, _ = _stack_backward(state.encoder, enc_inputs, enc_preacts, g_z)
    grads = {}
    for i, (gw, gb) in enumerate(enc_grads):
        grads[f"enc.{i}.w"] = gw
        grads[f"enc.{i}.b"] = gb
    for i, (gw, gb) in enumerate(dec_grads):
        grads[f"dec.{i}.w"] = gw
        grads[f"dec.{i}.b"] = gb
    return loss, grads
