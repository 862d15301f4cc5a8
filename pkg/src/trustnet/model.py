"""Joint user-embedding + trust-classifier model.

Two user vectors v_r (trustor) and v_s (trustee) are combined into a Hadamard
feature v_r * v_s and an absolute-difference feature |v_r - v_s|; a one-hidden
layer network with a two-way softmax scores the pair:

    h = tanh(W* (v_r * v_s) + W+ |v_r - v_s| + b1)
    p = softmax(U h + b2)

trained by minimizing the mean negative log-likelihood with plain SGD,
pairing every positive training edge with one freshly sampled non-edge per
epoch. Gradients are hand-derived, including the two embedding rows of each
example. Both features are symmetric in (r, s), so the model's output is
pair-symmetric by construction — a documented limitation for directed trust.

The Simple-NN baseline scores a pair by the dot product of the two embeddings
mapped through softmax([0, z]) (equivalently sigmoid), with the embeddings as
the only parameters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, NumericError
from .graph import EdgeSplit, TrustGraph, sample_negative_pairs
from .numerics import DTYPE, init_glorot, init_uniform_embedding, make_rng, sigmoid, softmax

MODEL_MAGIC = b"TRUSTNET1"

ARCH_JOINT = "joint"
ARCH_SIMPLE = "simple"


@dataclass
class TrainConfig:
    """Hyperparameters; defaults follow the tuned values used for evaluation."""

    lr: float = 0.4
    dim: int = 64
    hidden: int = 32
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0
    init: str = "random"        # "random" or the path of the seeding embedding file
    arch: str = ARCH_JOINT

    def validate(self) -> None:
        if self.lr <= 0:
            raise DataError(f"lr must be positive, got {self.lr}")
        if min(self.dim, self.hidden, self.batch_size) < 1:
            raise DataError("dim, hidden and batch_size must be >= 1")
        if self.epochs < 0:
            raise DataError(f"epochs must be >= 0, got {self.epochs}")
        if self.arch not in (ARCH_JOINT, ARCH_SIMPLE):
            raise DataError(f"unknown arch {self.arch!r}")


@dataclass
class ModelParams:
    """Classifier parameters: W* and W+ (hidden x dim), b1, U (2 x hidden), b2."""

    w_star: np.ndarray
    w_plus: np.ndarray
    b1: np.ndarray
    u_out: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, dim: int, hidden: int, rng: np.random.Generator) -> "ModelParams":
        # Glorot for the weight matrices, zero biases; the embedding init is
        # handled separately by the caller.
        return cls(
            w_star=init_glorot(hidden, dim, rng),
            w_plus=init_glorot(hidden, dim, rng),
            b1=np.zeros(hidden, dtype=DTYPE),
            u_out=init_glorot(2, hidden, rng),
            b2=np.zeros(2, dtype=DTYPE),
        )

    @classmethod
    def zeros(cls, dim: int, hidden: int, dtype=DTYPE) -> "ModelParams":
        return cls(
            w_star=np.zeros((hidden, dim), dtype=dtype),
            w_plus=np.zeros((hidden, dim), dtype=dtype),
            b1=np.zeros(hidden, dtype=dtype),
            u_out=np.zeros((2, hidden), dtype=dtype),
            b2=np.zeros(2, dtype=dtype),
        )

    @property
    def dim(self) -> int:
        return int(self.w_star.shape[1])

    @property
    def hidden(self) -> int:
        return int(self.w_star.shape[0])

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "w_star": self.w_star,
            "w_plus": self.w_plus,
            "b1": self.b1,
            "u_out": self.u_out,
            "b2": self.b2,
        }

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(**{k: v.astype(dtype) for k, v in self.tensors().items()})

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.tensors().items()})


def pack_params(params: ModelParams, embeddings: np.ndarray) -> np.ndarray:
    """Flatten all trainable tensors into one float64 vector (for the oracle)."""
    parts = [t.ravel() for t in params.tensors().values()] + [embeddings.ravel()]
    return np.concatenate(parts).astype(np.float64)


def unpack_params(
    theta: np.ndarray, dim: int, hidden: int, n: int
) -> tuple[ModelParams, np.ndarray]:
    """Inverse of pack_params; preserves theta's dtype."""
    sizes = [hidden * dim, hidden * dim, hidden, 2 * hidden, 2, n * dim]
    shapes = [(hidden, dim), (hidden, dim), (hidden,), (2, hidden), (2,), (n, dim)]
    out = []
    pos = 0
    for size, shape in zip(sizes, shapes):
        out.append(theta[pos:pos + size].reshape(shape))
        pos += size
    if pos != theta.size:
        raise ValueError(f"theta has {theta.size} entries, expected {pos}")
    return ModelParams(*out[:5]), out[5]


@dataclass
class Batch:
    """A mini-batch of training examples: label 1 = trust edge, 0 = sampled non-edge."""

    trustor: np.ndarray
    trustee: np.ndarray
    label: np.ndarray

    def __len__(self) -> int:
        return int(self.trustor.shape[0])


@dataclass
class Gradients:
    """Gradients of the mean NLL for the classifier and the touched embedding rows."""

    w_star: np.ndarray
    w_plus: np.ndarray
    b1: np.ndarray
    u_out: np.ndarray
    b2: np.ndarray
    emb_ids: np.ndarray    # unique user ids appearing in the batch
    emb_grads: np.ndarray  # (len(emb_ids), dim), accumulated over repeats


def compute_features(v_r: np.ndarray, v_s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hadamard feature v_r * v_s and absolute-difference feature |v_r - v_s|.

    Works on single vectors or (batch, dim) stacks; both features are
    symmetric in the two arguments.
    """
    v_r = np.asarray(v_r)
    v_s = np.asarray(v_s)
    if v_r.shape != v_s.shape:
        raise ValueError(f"dimension mismatch: {v_r.shape} vs {v_s.shape}")
    return v_r * v_s, np.abs(v_r - v_s)


def _check_ids(ids: np.ndarray, n: int) -> None:
    if ids.size and (int(ids.min()) < 0 or int(ids.max()) >= n):
        raise DataError(f"user id out of range [0, {n})")


def forward_batch(
    trustor: np.ndarray,
    trustee: np.ndarray,
    params: ModelParams,
    embeddings: np.ndarray,
) -> tuple[np.ndarray, dict]:
    """Batched forward pass; returns (probabilities (B, 2), cache for backward)."""
    trustor = np.asarray(trustor)
    trustee = np.asarray(trustee)
    _check_ids(trustor, embeddings.shape[0])
    _check_ids(trustee, embeddings.shape[0])
    v_r = embeddings[trustor]
    v_s = embeddings[trustee]
    h_star, h_plus = compute_features(v_r, v_s)
    pre = h_star @ params.w_star.T + h_plus @ params.w_plus.T + params.b1
    h = np.tanh(pre)
    logits = h @ params.u_out.T + params.b2
    p = softmax(logits, axis=-1)
    cache = {
        "trustor": trustor, "trustee": trustee,
        "v_r": v_r, "v_s": v_s,
        "h_star": h_star, "h_plus": h_plus, "h": h, "p": p,
    }
    return p, cache


def forward(
    r: int, s: int, params: ModelParams, embeddings: np.ndarray
) -> tuple[np.ndarray, dict]:
    """Single-pair forward pass: probability distribution over {no-trust, trust}."""
    p, cache = forward_batch(
        np.asarray([r], dtype=np.int64), np.asarray([s], dtype=np.int64), params, embeddings
    )
    return p[0], cache


def batch_loss(batch: Batch, params: ModelParams, embeddings: np.ndarray) -> float:
    """Mean negative log-likelihood of the true labels over the batch."""
    if len(batch) == 0:
        raise DataError("batch_loss: empty batch")
    p, _ = forward_batch(batch.trustor, batch.trustee, params, embeddings)
    return _nll(p, batch.label)


def _nll(p: np.ndarray, labels: np.ndarray) -> float:
    picked = p[np.arange(p.shape[0]), labels].astype(np.float64)
    # guard against float32 underflow of extremely confident wrong predictions
    picked = np.maximum(picked, np.finfo(np.float64).tiny)
    return float(-np.mean(np.log(picked)))


def backward(
    batch: Batch,
    params: ModelParams,
    embeddings: np.ndarray,
    cache: dict | None = None,
) -> Gradients:
    """Hand-derived gradients of the mean NLL wrt all classifier parameters
    and the embedding rows touched by the batch.

    At the logits the gradient is (p - onehot(y)) / N per example; |v_r - v_s|
    uses the subgradient sign(v_r - v_s) with sign(0) = 0. Gradients of users
    appearing multiple times in the batch accumulate.
    """
    if cache is None:
        _, cache = forward_batch(batch.trustor, batch.trustee, params, embeddings)
    n_examples = len(batch)
    p, h, h_star, h_plus = cache["p"], cache["h"], cache["h_star"], cache["h_plus"]
    v_r, v_s = cache["v_r"], cache["v_s"]

    dlogits = p.copy()
    dlogits[np.arange(n_examples), batch.label] -= 1.0
    dlogits /= n_examples

    du = dlogits.T @ h
    db2 = dlogits.sum(axis=0)
    dh = dlogits @ params.u_out
    dpre = dh * (1.0 - h * h)

    dw_star = dpre.T @ h_star
    dw_plus = dpre.T @ h_plus
    db1 = dpre.sum(axis=0)

    dh_star = dpre @ params.w_star
    dh_plus = dpre @ params.w_plus
    sgn = np.sign(v_r - v_s)
    dv_r = dh_star * v_s + dh_plus * sgn
    dv_s = dh_star * v_r - dh_plus * sgn

    ids = np.concatenate([cache["trustor"], cache["trustee"]])
    contrib = np.concatenate([dv_r, dv_s], axis=0)
    uniq, inverse = np.unique(ids, return_inverse=True)
    acc = np.zeros((uniq.size, embeddings.shape[1]), dtype=contrib.dtype)
    np.add.at(acc, inverse, contrib)

    return Gradients(
        w_star=dw_star, w_plus=dw_plus, b1=db1, u_out=du, b2=db2,
        emb_ids=uniq, emb_grads=acc,
    )


def sgd_step(
    params: ModelParams | None,
    embeddings: np.ndarray,
    grads: Gradients,
    lr: float,
) -> None:
    """In-place SGD update: theta <- theta - lr * grad.

    Only embedding rows present in grads.emb_ids change. The tensors modified
    by this step are checked for non-finite values afterwards.
    """
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if params is not None:
        for name, tensor in params.tensors().items():
            tensor -= lr * getattr(grads, name)
            if not np.all(np.isfinite(tensor)):
                raise NumericError(f"non-finite values in {name} after sgd_step")
    embeddings[grads.emb_ids] -= lr * grads.emb_grads
    if not np.all(np.isfinite(embeddings[grads.emb_ids])):
        raise NumericError("non-finite values in embeddings after sgd_step")


def make_epoch_batches(
    train_edges: np.ndarray,
    graph: TrustGraph,
    rng: np.random.Generator,
    batch_size: int,
):
    """Yield one epoch of shuffled mini-batches.

    Each positive training edge is paired with one freshly sampled non-edge
    (sampled against the full positive edge set), the 2*|train| examples are
    shuffled, and chunks of ``batch_size`` are yielded (last may be smaller).
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    m = train_edges.shape[0]
    negatives = sample_negative_pairs(graph, rng, m)
    trustor = np.concatenate([train_edges[:, 0], negatives[:, 0]])
    trustee = np.concatenate([train_edges[:, 1], negatives[:, 1]])
    label = np.concatenate([
        np.ones(m, dtype=np.int64), np.zeros(m, dtype=np.int64)
    ])
    perm = rng.permutation(2 * m)
    trustor, trustee, label = trustor[perm], trustee[perm], label[perm]
    for start in range(0, 2 * m, batch_size):
        end = min(start + batch_size, 2 * m)
        yield Batch(trustor[start:end], trustee[start:end], label[start:end])


# ---------------------------------------------------------------------------
# Simple-NN baseline: p = softmax([0, v_r . v_s])
# ---------------------------------------------------------------------------

def simple_nn_forward(r: int, s: int, embeddings: np.ndarray) -> np.ndarray:
    """Dot-product baseline: two-class distribution softmax([0, v_r . v_s])."""
    p1 = forward_simple_batch(
        np.asarray([r], dtype=np.int64), np.asarray([s], dtype=np.int64), embeddings
    )[0]
    return np.asarray([1.0 - p1, p1], dtype=embeddings.dtype)


def forward_simple_batch(
    trustor: np.ndarray, trustee: np.ndarray, embeddings: np.ndarray
) -> np.ndarray:
    """p_trust for each pair under the dot-product baseline (= sigmoid(v_r . v_s))."""
    trustor = np.asarray(trustor)
    trustee = np.asarray(trustee)
    _check_ids(trustor, embeddings.shape[0])
    _check_ids(trustee, embeddings.shape[0])
    z = np.einsum("bd,bd->b", embeddings[trustor], embeddings[trustee])
    return sigmoid(z)


def backward_simple(batch: Batch, embeddings: np.ndarray) -> Gradients:
    """Gradients of the mean NLL for the dot-product baseline (embeddings only)."""
    trustor = np.asarray(batch.trustor)
    trustee = np.asarray(batch.trustee)
    v_r = embeddings[trustor]
    v_s = embeddings[trustee]
    p1 = sigmoid(np.einsum("bd,bd->b", v_r, v_s))
    dz = (p1 - batch.label) / len(batch)
    dv_r = dz[:, None] * v_s
    dv_s = dz[:, None] * v_r
    ids = np.concatenate([trustor, trustee])
    contrib = np.concatenate([dv_r, dv_s], axis=0)
    uniq, inverse = np.unique(ids, return_inverse=True)
    acc = np.zeros((uniq.size, embeddings.shape[1]), dtype=contrib.dtype)
    np.add.at(acc, inverse, contrib)
    empty = np.zeros(0, dtype=embeddings.dtype)
    return Gradients(
        w_star=empty, w_plus=empty, b1=empty, u_out=empty, b2=empty,
        emb_ids=uniq, emb_grads=acc,
    )


# ---------------------------------------------------------------------------
# Trained model container, prediction, serialization
# ---------------------------------------------------------------------------

@dataclass
class TrustModel:
    """A trained (or initialized) model plus the raw-id mapping it was built with."""

    embeddings: np.ndarray
    params: ModelParams | None   # None for the simple dot-product architecture
    raw_ids: np.ndarray
    _raw_to_dense: dict = field(default=None, repr=False)

    @property
    def arch(self) -> str:
        return ARCH_SIMPLE if self.params is None else ARCH_JOINT

    @property
    def n(self) -> int:
        return int(self.embeddings.shape[0])

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])

    @property
    def raw_to_dense(self) -> dict:
        if self._raw_to_dense is None:
            self._raw_to_dense = {int(raw): i for i, raw in enumerate(self.raw_ids)}
        return self._raw_to_dense

    def prob_trust(self, trustor: np.ndarray, trustee: np.ndarray) -> np.ndarray:
        """p(trust) for dense-id pair arrays, evaluated in chunks."""
        trustor = np.atleast_1d(np.asarray(trustor))
        trustee = np.atleast_1d(np.asarray(trustee))
        out = np.empty(trustor.shape[0], dtype=np.float32)
        chunk = 1 << 18
        for start in range(0, trustor.shape[0], chunk):
            r = trustor[start:start + chunk]
            s = trustee[start:start + chunk]
            if self.params is None:
                out[start:start + chunk] = forward_simple_batch(r, s, self.embeddings)
            else:
                p, _ = forward_batch(r, s, self.params, self.embeddings)
                out[start:start + chunk] = p[:, 1]
        return out

    def predict_batch(self, trustor, trustee, threshold: float = 0.5) -> np.ndarray:
        """Binary labels (1 = trust) for dense-id pairs; ties go to trust."""
        return (self.prob_trust(trustor, trustee) >= threshold).astype(np.int64)

    def save(self, path) -> None:
        save_model(self, path)

    @classmethod
    def load(cls, path) -> "TrustModel":
        return load_model(path)


def predict(
    r: int,
    s: int,
    params: ModelParams | None,
    embeddings: np.ndarray,
    threshold: float = 0.5,
) -> tuple[int, float]:
    """Predict one dense-id pair: (label, p_trust); label 1 iff p_trust >= threshold."""
    if params is None:
        p_trust = float(
            forward_simple_batch(
                np.asarray([r], dtype=np.int64), np.asarray([s], dtype=np.int64), embeddings
            )[0]
        )
    else:
        p, _ = forward(r, s, params, embeddings)
        p_trust = float(p[1])
    return (1 if p_trust >= threshold else 0), p_trust


@dataclass
class TrainResult:
    model: TrustModel
    loss_trace: list[float]


def train(
    graph: TrustGraph,
    split: EdgeSplit,
    config: TrainConfig,
    pretrained: np.ndarray | None = None,
) -> TrainResult:
    """Run the full SGD training loop; deterministic given (inputs, config.seed).

    RNG consumption order: embedding init (when random), classifier init,
    then per-epoch negative sampling and shuffling. Returns the model and the
    per-epoch mean-NLL trace.
    """
    config.validate()
    rng = make_rng(config.seed)
    if pretrained is not None:
        if pretrained.shape != (graph.n, config.dim):
            raise DataError(
                f"pretrained embeddings have shape {pretrained.shape}, "
                f"expected ({graph.n}, {config.dim})"
            )
        embeddings = np.ascontiguousarray(pretrained, dtype=DTYPE).copy()
    else:
        embeddings = init_uniform_embedding(graph.n, config.dim, rng)
    params = None
    if config.arch == ARCH_JOINT:
        params = ModelParams.init(config.dim, config.hidden, rng)

    trace: list[float] = []
    for _ in range(config.epochs):
        total = 0.0
        seen = 0
        for batch in make_epoch_batches(split.train, graph, rng, config.batch_size):
            if params is not None:
                p, cache = forward_batch(batch.trustor, batch.trustee, params, embeddings)
                loss = _nll(p, batch.label)
                grads = backward(batch, params, embeddings, cache=cache)
            else:
                p1 = forward_simple_batch(batch.trustor, batch.trustee, embeddings)
                p = np.stack([1.0 - p1, p1], axis=1)
                loss = _nll(p, batch.label)
                grads = backward_simple(batch, embeddings)
            sgd_step(params, embeddings, grads, config.lr)
            total += loss * len(batch)
            seen += len(batch)
        trace.append(total / seen)
    model = TrustModel(embeddings=embeddings, params=params, raw_ids=graph.raw_ids)
    return TrainResult(model=model, loss_trace=trace)


def save_model(model: TrustModel, path) -> None:
    """Write the bit-exact model file.

    Layout: magic "TRUSTNET1"; u32 LE n, d, n_h; float32 LE row-major arrays
    embeddings[n*d], W*[n_h*d], W+[n_h*d], b1[n_h], U[2*n_h], b2[2]; then the
    raw-id mapping as u64 LE (raw_id, dense_id) pairs in dense order. The
    simple architecture is encoded as n_h = 0 (empty classifier arrays, b2
    written as zeros).
    """
    n, d = model.embeddings.shape
    if model.params is None:
        n_h = 0
        arrays = [
            model.embeddings,
            np.zeros((0, d), dtype=DTYPE), np.zeros((0, d), dtype=DTYPE),
            np.zeros(0, dtype=DTYPE), np.zeros((2, 0), dtype=DTYPE),
            np.zeros(2, dtype=DTYPE),
        ]
    else:
        n_h = model.params.hidden
        arrays = [
            model.embeddings,
            model.params.w_star, model.params.w_plus, model.params.b1,
            model.params.u_out, model.params.b2,
        ]
    mapping = np.empty((n, 2), dtype="<u8")
    mapping[:, 0] = model.raw_ids
    mapping[:, 1] = np.arange(n, dtype=np.uint64)
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<III", n, d, n_h))
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        fh.write(mapping.tobytes())


def load_model(path) -> TrustModel:
    """Read a model file; validates magic and the exact total length."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:9] != MODEL_MAGIC:
        raise DataError(f"{path}: bad magic, not a trustnet model file")
    if len(blob) < 9 + 12:
        raise DataError(f"{path}: truncated header")
    n, d, n_h = struct.unpack("<III", blob[9:21])
    float_count = n * d + 2 * n_h * d + n_h + 2 * n_h + 2
    expected = 21 + 4 * float_count + 16 * n
    if len(blob) != expected:
        raise DataError(
            f"{path}: wrong length {len(blob)}, expected {expected} for n={n} d={d} n_h={n_h}"
        )
    floats = np.frombuffer(blob, dtype="<f4", count=float_count, offset=21)
    shapes = [(n, d), (n_h, d), (n_h, d), (n_h,), (2, n_h), (2,)]
    arrays = []
    pos = 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(floats[pos:pos + size].reshape(shape).copy())
        pos += size
    mapping = np.frombuffer(blob, dtype="<u8", offset=21 + 4 * float_count).reshape(n, 2)
    if not np.array_equal(mapping[:, 1], np.arange(n, dtype=np.uint64)):
        raise DataError(f"{path}: id mapping is not in dense order")
    params = None
    if n_h > 0:
        params = ModelParams(*arrays[1:])
    return TrustModel(embeddings=arrays[0], params=params, raw_ids=mapping[:, 0].copy())
