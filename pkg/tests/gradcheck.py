"""Gradient-check harness shared by the model tests and the acceptance suite.

Both sides of the comparison run in float64: the analytic backward pass (the
model code is dtype-generic) and the central-difference oracle. Per-coordinate
relative error uses denominator max(|a|, |b|, h): the oracle cannot resolve
gradient coordinates below its own step size.
"""

import numpy as np

from trustnet.model import (
    Batch,
    ModelParams,
    backward,
    backward_simple,
    batch_loss,
    forward_simple_batch,
    pack_params,
    unpack_params,
)
from trustnet.numerics import finite_diff_gradient

FD_STEP = 1e-4


def random_case(rng, max_dim=8, max_hidden=4, max_batch=8, max_users=10):
    """One random small configuration: float64 params/embeddings and a batch.

    Embeddings with any |v_r - v_s| coordinate inside (0, 10h] are resampled:
    a central difference straddling the kink of abs() measures a blended
    slope there, not the subgradient. Exact ties are fine (both sides give 0)
    and are unit-tested separately.
    """
    dim = int(rng.integers(1, max_dim + 1))
    hidden = int(rng.integers(1, max_hidden + 1))
    n_users = int(rng.integers(2, max_users + 1))
    batch_size = int(rng.integers(1, max_batch + 1))
    params = ModelParams(
        w_star=rng.normal(scale=0.6, size=(hidden, dim)),
        w_plus=rng.normal(scale=0.6, size=(hidden, dim)),
        b1=rng.normal(scale=0.3, size=hidden),
        u_out=rng.normal(scale=0.6, size=(2, hidden)),
        b2=rng.normal(scale=0.3, size=2),
    )
    trustor = rng.integers(0, n_users, size=batch_size)
    trustee = (trustor + rng.integers(1, n_users, size=batch_size)) % n_users
    labels = rng.integers(0, 2, size=batch_size)
    batch = Batch(trustor=trustor, trustee=trustee, label=labels.astype(np.int64))
    margin = 10 * FD_STEP
    while True:
        embeddings = rng.normal(scale=0.5, size=(n_users, dim))
        gaps = np.abs(embeddings[batch.trustor] - embeddings[batch.trustee])
        if not np.any((gaps > 0) & (gaps <= margin)):
            return params, embeddings, batch


def pack_gradients(grads, n_users, dim):
    """Flatten a Gradients object in pack_params order (embedding rows scattered)."""
    emb_full = np.zeros((n_users, dim), dtype=np.float64)
    emb_full[grads.emb_ids] = grads.emb_grads
    parts = [grads.w_star, grads.w_plus, grads.b1, grads.u_out, grads.b2, emb_full]
    return np.concatenate([np.asarray(p, dtype=np.float64).ravel() for p in parts])


def relative_error(analytic, numeric, floor=FD_STEP):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def joint_model_max_error(rng):
    """Max relative error between backward() and the oracle for one random case."""
    params, embeddings, batch = random_case(rng)
    n_users, dim = embeddings.shape
    hidden = params.hidden

    def loss_at(theta):
        p, e = unpack_params(theta, dim, hidden, n_users)
        return batch_loss(batch, p, e)

    theta0 = pack_params(params, embeddings)
    numeric = finite_diff_gradient(loss_at, theta0, h=FD_STEP)
    analytic = pack_gradients(backward(batch, params, embeddings), n_users, dim)
    return relative_error(analytic, numeric)


def simple_model_max_error(rng):
    """Same check for the dot-product baseline (embeddings are the only parameters)."""
    _, embeddings, batch = random_case(rng)
    n_users, dim = embeddings.shape

    def loss_at(theta):
        emb = theta.reshape(n_users, dim)
        p1 = forward_simple_batch(batch.trustor, batch.trustee, emb)
        picked = np.where(batch.label == 1, p1, 1.0 - p1)
        return float(-np.mean(np.log(picked)))

    numeric = finite_diff_gradient(loss_at, embeddings.ravel().copy(), h=FD_STEP)
    grads = backward_simple(batch, embeddings)
    emb_full = np.zeros((n_users, dim), dtype=np.float64)
    emb_full[grads.emb_ids] = grads.emb_grads
    return relative_error(emb_full.ravel(), numeric)
