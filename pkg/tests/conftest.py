import numpy as np
import pytest

from dualse import model


def flatten_params(params):
    return np.concatenate([p.ravel() for p in params.values()])


def write_params(state, vec):
    params = state.params()
    i = 0
    for p in params.values():
        p[...] = vec[i:i + p.size].reshape(p.shape)
        i += p.size


def random_instance(seed, n=8, d_in=5, dims=(4, 3), coeff_scale=0.2, bias_scale=0.1):
    """A fully randomized model + input. Biases are randomized so no ReLU
    pre-activation sits exactly on its kink (zero biases park dead samples
    at 0, where one-sided derivatives differ and finite differences are
    meaningless)."""
    state = model.init_state(d_in, dims, n, seed)
    rng = np.random.default_rng(seed + 1)
    for w, b in state.encoder + state.decoder:
        b[...] = rng.standard_normal(b.shape) * bias_scale
    state.coeff_attr[...] = rng.standard_normal((n, n)) * coeff_scale
    state.coeff_struct[...] = rng.standard_normal((n, n)) * coeff_scale
    state.attn_w[...] = rng.standard_normal((2 * n, 2)) * 0.5
    x = rng.standard_normal((d_in, n))
    return state, x


def total_loss_fn(state, x, hp, frozen_zs=None):
    """Loss as a function of the flat parameter vector.

    With ``frozen_zs`` the structure matrix is held constant (the
    stop-gradient reading of the structure branch), matching what the
    analytic gradients compute when hp.zs_grad is off.
    """

    def f(vec):
        s2 = state.copy()
        write_params(s2, vec)
        if frozen_zs is None:
            return model.forward(s2, x, hp).total
        z = model.encode(s2.encoder, x)
        recon = model.decode(s2.decoder, z)
        total = model.ae_loss(x, recon)
        reg_a, se_a = model.attribute_se_loss(z, s2.coeff_attr)
        reg_s, se_s = model.structure_se_loss(frozen_zs, s2.coeff_struct)
        total += reg_a + hp.gamma * se_a + hp.lambda1 * reg_s + hp.lambda2 * se_s
        if hp.fusion_in_loss:
            m = model.attention_weights(s2.coeff_attr, s2.coeff_struct, s2.attn_w)
            fused = model.fuse(s2.coeff_attr, s2.coeff_struct, m)
            resid = frozen_zs - frozen_zs @ fused
            total += hp.lambda2 * float((resid * resid).sum())
        return total

    return f


@pytest.fixture
def tiny_instance():
    return random_instance(321)
