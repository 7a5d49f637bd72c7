"""Attention-based LSTM encoder-decoder with hand-written backpropagation.

Gate parameters are stored stacked in the order input, forget, output,
candidate: ``W`` is ``(4H, in)``, ``U`` is ``(4H, H)``, ``b`` is ``(4H,)``.
Use :meth:`LstmParams.gate` for per-gate views.

The decoder consumes ``concat(embedding[y_prev], a_t)`` and starts from the
encoder's final hidden/cell state.  Attention scores are raw inner products
between the previous decoder hidden vector and each encoder hidden vector.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import BOS, EOS, Vocabulary
from .errors import FormatError, InvalidInputError, NumericalError, ShapeError
from .numeric import SeededRng, log_softmax, sigmoid, softmax

GATES = ("i", "f", "o", "c")
PARAM_ORDER = (
    "embedding",
    "enc_W", "enc_U", "enc_b",
    "dec_W", "dec_U", "dec_b",
    "out_proj", "out_bias",
)
MAGIC = b"S2SA"
FORMAT_VERSION = 1


@dataclass
class LstmParams:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        H4, _ = self.W.shape
        if H4 % 4 or self.U.shape != (H4, H4 // 4) or self.b.shape != (H4,):
            raise ShapeError(f"inconsistent LSTM shapes W {self.W.shape}, U {self.U.shape}, b {self.b.shape}")

    @property
    def hidden_dim(self) -> int:
        return self.U.shape[1]

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str):
        """``(W_g, U_g, b_g)`` views for gate ``name`` in ``GATES``."""
        k = GATES.index(name)
        H = self.hidden_dim
        sl = slice(k * H, (k + 1) * H)
        return self.W[sl], self.U[sl], self.b[sl]


@dataclass
class RecurrentState:
    h: np.ndarray
    c: np.ndarray


@dataclass
class EncoderStates:
    hidden: np.ndarray  # (N_X, H), row i is h_{i+1,X}
    final_cell: np.ndarray

    def __len__(self) -> int:
        return self.hidden.shape[0]

    @property
    def final_state(self) -> RecurrentState:
        return RecurrentState(self.hidden[-1].copy(), self.final_cell.copy())


class ModelParams:
    """All trainable tensors.  ``tensors()`` exposes them by name, in checkpoint order."""

    def __init__(self, embedding, encoder: LstmParams, decoder: LstmParams, out_proj, out_bias):
        self.embedding = embedding
        self.encoder = encoder
        self.decoder = decoder
        self.out_proj = out_proj
        self.out_bias = out_bias
        V, D = embedding.shape
        H = encoder.hidden_dim
        if encoder.input_dim != D:
            raise ShapeError(f"encoder input {encoder.input_dim} != embedding dim {D}")
        if decoder.hidden_dim != H:
            raise ShapeError("decoder hidden dim must equal encoder hidden dim")
        if decoder.input_dim != D + H:
            raise ShapeError(f"decoder input {decoder.input_dim} != emb+hidden {D + H}")
        if out_proj.shape != (V, H) or out_bias.shape != (V,):
            raise ShapeError(f"output projection {out_proj.shape}/{out_bias.shape} does not match |V|={V}, H={H}")

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    @property
    def emb_dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.encoder.hidden_dim

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "embedding": self.embedding,
            "enc_W": self.encoder.W, "enc_U": self.encoder.U, "enc_b": self.encoder.b,
            "dec_W": self.decoder.W, "dec_U": self.decoder.U, "dec_b": self.decoder.b,
            "out_proj": self.out_proj, "out_bias": self.out_bias,
        }

    @classmethod
    def from_tensors(cls, t: dict[str, np.ndarray]) -> "ModelParams":
        return cls(
            t["embedding"],
            LstmParams(t["enc_W"], t["enc_U"], t["enc_b"]),
            LstmParams(t["dec_W"], t["dec_U"], t["dec_b"]),
            t["out_proj"], t["out_bias"],
        )

    @staticmethod
    def shapes(vocab_size: int, emb_dim: int, hidden_dim: int) -> dict[str, tuple[int, ...]]:
        V, D, H = vocab_size, emb_dim, hidden_dim
        return {
            "embedding": (V, D),
            "enc_W": (4 * H, D), "enc_U": (4 * H, H), "enc_b": (4 * H,),
            "dec_W": (4 * H, D + H), "dec_U": (4 * H, H), "dec_b": (4 * H,),
            "out_proj": (V, H), "out_bias": (V,),
        }

    @classmethod
    def zeros(cls, vocab_size: int, emb_dim: int, hidden_dim: int) -> "ModelParams":
        return cls.from_tensors({k: np.zeros(s) for k, s in cls.shapes(vocab_size, emb_dim, hidden_dim).items()})

    @classmethod
    def initialize(cls, vocab_size: int, emb_dim: int, hidden_dim: int, seed: int = 0, scale: float = 0.08) -> "ModelParams":
        """Uniform in ``[-scale, scale]``, drawn tensor by tensor in checkpoint order."""
        rng = SeededRng(seed)
        return cls.from_tensors(
            {k: rng.uniform(-scale, scale, s) for k, s in cls.shapes(vocab_size, emb_dim, hidden_dim).items()}
        )

    def copy(self) -> "ModelParams":
        return ModelParams.from_tensors({k: v.copy() for k, v in self.tensors().items()})

    def num_parameters(self) -> int:
        return sum(v.size for v in self.tensors().values())

    def equals(self, other: "ModelParams") -> bool:
        a, b = self.tensors(), other.tensors()
        return all(a[k].shape == b[k].shape and np.array_equal(a[k], b[k]) for k in PARAM_ORDER)


# ---------------------------------------------------------------- forward

def _lstm(p: LstmParams, x, h_prev, c_prev):
    H = p.hidden_dim
    z = p.W @ x + p.U @ h_prev + p.b
    i = sigmoid(z[:H])
    f = sigmoid(z[H:2 * H])
    o = sigmoid(z[2 * H:3 * H])
    g = np.tanh(z[3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x, h_prev, c_prev, i, f, o, g, tc)


def lstm_step(p: LstmParams, e_t, prev: RecurrentState) -> RecurrentState:
    e_t = np.asarray(e_t, dtype=np.float64)
    if e_t.shape != (p.input_dim,) or prev.h.shape != (p.hidden_dim,) or prev.c.shape != (p.hidden_dim,):
        raise ShapeError(
            f"lstm_step: input {e_t.shape}, h {prev.h.shape}, c {prev.c.shape} vs "
            f"params in={p.input_dim} hidden={p.hidden_dim}"
        )
    h, c, _ = _lstm(p, e_t, prev.h, prev.c)
    return RecurrentState(h, c)


def _check_ids(m: ModelParams, ids) -> list[int]:
    ids = [int(i) for i in ids]
    for i in ids:
        if not 0 <= i < m.vocab_size:
            raise IndexError(f"token id {i} out of range for |V|={m.vocab_size}")
    return ids


def encode(m: ModelParams, message_ids: Sequence[int]) -> EncoderStates:
    ids = _check_ids(m, message_ids)
    if not ids:
        raise InvalidInputError("cannot encode an empty message")
    H = m.hidden_dim
    h, c = np.zeros(H), np.zeros(H)
    hs = np.empty((len(ids), H))
    for t, x in enumerate(ids):
        h, c, _ = _lstm(m.encoder, m.embedding[x], h, c)
        hs[t] = h
    return EncoderStates(hs, c)


def attention(h_prev, enc: EncoderStates):
    """Returns ``(alphas, a_t)``: softmax of inner products and the weighted sum of encoder states."""
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if h_prev.shape != (enc.hidden.shape[1],):
        raise ShapeError(f"attention query {h_prev.shape} vs encoder states {enc.hidden.shape}")
    alphas = softmax(enc.hidden @ h_prev)
    return alphas, alphas @ enc.hidden


def decoder_step(m: ModelParams, y_prev_id: int, prev: RecurrentState, a_t):
    """One decoder step; returns ``(new_state, logits)``."""
    (y_prev_id,) = _check_ids(m, [y_prev_id])
    a_t = np.asarray(a_t, dtype=np.float64)
    if a_t.shape != (m.hidden_dim,):
        raise ShapeError(f"context vector {a_t.shape} vs hidden dim {m.hidden_dim}")
    x = np.concatenate([m.embedding[y_prev_id], a_t])
    h, c, _ = _lstm(m.decoder, x, prev.h, prev.c)
    return RecurrentState(h, c), m.out_proj @ h + m.out_bias


def _targets(response_ids):
    inputs = [BOS] + list(response_ids)
    targets = list(response_ids) + [EOS]
    return inputs, targets


def sequence_loss(m: ModelParams, message_ids, response_ids, first_context=None) -> float:
    """Mean per-token cross entropy under teacher forcing (targets end with EOS).

    ``first_context`` replaces the soft-attention ``a_1`` when given; training
    never sets it.
    """
    return -sequence_log_prob(m, message_ids, response_ids, first_context) / (len(response_ids) + 1)


def sequence_log_prob(m: ModelParams, message_ids, response_ids, first_context=None, include_eos: bool = True) -> float:
    """``log P(response + EOS | message)`` summed over steps."""
    ids = _check_ids(m, response_ids)
    enc = encode(m, message_ids)
    state = enc.final_state
    inputs, targets = _targets(ids)
    if not include_eos:
        targets = targets[:-1]
    total = 0.0
    for t, (y_in, y_out) in enumerate(zip(inputs, targets)):
        if t == 0 and first_context is not None:
            a = np.asarray(first_context, dtype=np.float64)
        else:
            _, a = attention(state.h, enc)
        state, logits = decoder_step(m, y_in, state, a)
        total += log_softmax(logits)[y_out]
    return float(total)


# ---------------------------------------------------------------- backward

def _lstm_backward(p: LstmParams, cache, dh, dc, gW, gU, gb):
    """Accumulates parameter grads; returns ``(dx, dh_prev, dc_prev)``."""
    x, h_prev, c_prev, i, f, o, g, tc = cache
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc * tc)
    dz = np.concatenate([
        dc * g * i * (1.0 - i),
        dc * c_prev * f * (1.0 - f),
        do * o * (1.0 - o),
        dc * i * (1.0 - g * g),
    ])
    gW += np.outer(dz, x)
    gU += np.outer(dz, h_prev)
    gb += dz
    return p.W.T @ dz, p.U.T @ dz, dc * f


def loss_and_grads(
    m: ModelParams,
    message_ids,
    response_ids,
    rng: SeededRng | None = None,
    dropout: float = 0.0,
    grads: dict[str, np.ndarray] | None = None,
    scale: float = 1.0,
):
    """Mean per-token loss and its gradient with respect to every tensor.

    Dropout (inverted, rate ``dropout``) is applied to embedding outputs and
    to the decoder hidden vector before the output projection when ``rng`` is
    given.  Gradients, multiplied by ``scale``, are added into ``grads`` if
    supplied.
    """
    msg = _check_ids(m, message_ids)
    resp = _check_ids(m, response_ids)
    if not msg:
        raise InvalidInputError("cannot encode an empty message")
    T = m.tensors()
    if grads is None:
        grads = {k: np.zeros_like(v) for k, v in T.items()}
    use_drop = rng is not None and dropout > 0.0
    D, H = m.emb_dim, m.hidden_dim
    E = m.embedding

    # encoder
    h, c = np.zeros(H), np.zeros(H)
    enc_caches, enc_masks = [], []
    N = len(msg)
    Hx = np.empty((N, H))
    for t, x in enumerate(msg):
        mask = rng.dropout_mask(D, dropout) if use_drop else None
        e = E[x] * mask if use_drop else E[x]
        h, c, cache = _lstm(m.encoder, e, h, c)
        enc_caches.append(cache)
        enc_masks.append(mask)
        Hx[t] = h

    # decoder
    inputs, targets = _targets(resp)
    steps = len(targets)
    dec = []
    loss = 0.0
    for y_in, y_out in zip(inputs, targets):
        alphas = softmax(Hx @ h)
        a = alphas @ Hx
        emask = rng.dropout_mask(D, dropout) if use_drop else None
        e = E[y_in] * emask if use_drop else E[y_in]
        h_prev = h
        h, c, cache = _lstm(m.decoder, np.concatenate([e, a]), h, c)
        omask = rng.dropout_mask(H, dropout) if use_drop else None
        hd = h * omask if use_drop else h
        logp = log_softmax(m.out_proj @ hd + m.out_bias)
        loss -= logp[y_out]
        dec.append((y_in, y_out, alphas, h_prev, cache, emask, omask, hd, logp))
    loss /= steps
    if not math.isfinite(loss):
        raise NumericalError("non-finite loss")

    dHx = np.zeros_like(Hx)
    dh_next, dc_next = np.zeros(H), np.zeros(H)
    gE = grads["embedding"]
    for y_in, y_out, alphas, h_prev, cache, emask, omask, hd, logp in reversed(dec):
        dlogits = np.exp(logp)
        dlogits[y_out] -= 1.0
        dlogits *= scale / steps
        grads["out_proj"] += np.outer(dlogits, hd)
        grads["out_bias"] += dlogits
        dhd = m.out_proj.T @ dlogits
        dh = (dhd * omask if use_drop else dhd) + dh_next
        dx, dh_prev, dc_next = _lstm_backward(
            m.decoder, cache, dh, dc_next, grads["dec_W"], grads["dec_U"], grads["dec_b"]
        )
        de, da = dx[:D], dx[D:]
        gE[y_in] += de * emask if use_drop else de
        # a = alphas @ Hx ; scores = Hx @ h_prev
        dalpha = Hx @ da
        dHx += np.outer(alphas, da)
        dscores = alphas * (dalpha - alphas @ dalpha)
        dHx += np.outer(dscores, h_prev)
        dh_next = dh_prev + Hx.T @ dscores

    # bridge: decoder initial state is the encoder's final state
    dh_rec = dh_next
    dc_rec = dc_next
    for t in range(N - 1, -1, -1):
        dh = dHx[t] + dh_rec
        dx, dh_rec, dc_rec = _lstm_backward(
            m.encoder, enc_caches[t], dh, dc_rec, grads["enc_W"], grads["enc_U"], grads["enc_b"]
        )
        gE[msg[t]] += dx * enc_masks[t] if use_drop else dx
    return float(loss), grads


# ---------------------------------------------------------------- training

@dataclass
class TrainConfig:
    learning_rate: float = 0.2
    batch_size: int = 128
    dropout_rate: float = 0.2
    max_epochs: int = 10
    adadelta_rho: float = 0.95
    adadelta_eps: float = 1e-6
    seed: int = 0
    grad_clip: float = 0.0  # global-norm threshold; 0 disables

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 0:
            raise InvalidInputError(f"invalid training configuration {self}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidInputError("dropout_rate must be in [0, 1)")
        if not 0.0 < self.adadelta_rho < 1.0 or self.adadelta_eps <= 0:
            raise InvalidInputError("adadelta_rho must be in (0, 1) and adadelta_eps positive")


@dataclass
class AdaDeltaState:
    sq_grad: dict[str, np.ndarray] = field(default_factory=dict)
    sq_delta: dict[str, np.ndarray] = field(default_factory=dict)


def adadelta_update(params: ModelParams, grads, state: AdaDeltaState, cfg: TrainConfig):
    """In-place AdaDelta step scaled by ``cfg.learning_rate``.

    The running average of squared updates tracks the unscaled step.
    """
    rho, eps, lr = cfg.adadelta_rho, cfg.adadelta_eps, cfg.learning_rate
    for name, p in params.tensors().items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {name}")
        eg = state.sq_grad.setdefault(name, np.zeros_like(p))
        ed = state.sq_delta.setdefault(name, np.zeros_like(p))
        eg *= rho
        eg += (1.0 - rho) * g * g
        delta = np.sqrt(ed + eps) / np.sqrt(eg + eps) * g
        ed *= rho
        ed += (1.0 - rho) * delta * delta
        p -= lr * delta
    return params, state


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float

    def line(self) -> str:
        return f"{self.epoch}\t{self.train_loss:.6f}\t{self.valid_loss:.6f}"


@dataclass
class TrainResult:
    params: ModelParams
    log: list[EpochRecord]
    best_epoch: int  # 0 when no epoch ran


def mean_loss(m: ModelParams, pairs) -> float:
    if not pairs:
        return float("nan")
    return sum(sequence_loss(m, x, y) for x, y in pairs) / len(pairs)


def best_epoch(valid_losses: Sequence[float]) -> int:
    """1-based epoch with the lowest validation loss; earliest wins ties."""
    best = min(range(len(valid_losses)), key=lambda k: (valid_losses[k], k))
    return best + 1


def train(
    m: ModelParams,
    train_set: Sequence[tuple[Sequence[int], Sequence[int]]],
    valid_set: Sequence[tuple[Sequence[int], Sequence[int]]],
    cfg: TrainConfig,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """Mini-batch AdaDelta with dropout; keeps the epoch with minimal validation loss.

    ``train_set``/``valid_set`` hold ``(message_ids, response_ids)``.  When
    ``valid_set`` is empty, the dropout-free training loss is used for
    selection.  ``m`` is not modified.
    """
    if not train_set:
        raise InvalidInputError("training set is empty")
    params = m.copy()
    best = params.copy()
    best_valid = math.inf
    best_ep = 0
    rng = SeededRng(cfg.seed)
    opt = AdaDeltaState()
    log: list[EpochRecord] = []
    n = len(train_set)
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size), start=1):
            batch = order[start:start + cfg.batch_size]
            grads = {k: np.zeros_like(v) for k, v in params.tensors().items()}
            for j in batch:
                x, y = train_set[j]
                try:
                    loss, _ = loss_and_grads(params, x, y, rng, cfg.dropout_rate, grads, 1.0 / len(batch))
                except NumericalError as exc:
                    raise NumericalError(f"divergence at epoch {epoch}, batch {b}: {exc}") from exc
                total += loss
            if cfg.grad_clip > 0:
                norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
                if norm > cfg.grad_clip:
                    for g in grads.values():
                        g *= cfg.grad_clip / norm
            try:
                adadelta_update(params, grads, opt, cfg)
            except NumericalError as exc:
                raise NumericalError(f"divergence at epoch {epoch}, batch {b}: {exc}") from exc
        valid = mean_loss(params, valid_set) if valid_set else mean_loss(params, train_set)
        if not math.isfinite(valid):
            raise NumericalError(f"divergence at epoch {epoch}: validation loss {valid}")
        rec = EpochRecord(epoch, total / n, valid)
        log.append(rec)
        if on_epoch:
            on_epoch(rec)
        if valid < best_valid:
            best_valid, best_ep = valid, epoch
            best = params.copy()
    return TrainResult(best, log, best_ep)


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(m: ModelParams, vocab: Vocabulary, path) -> None:
    """Binary layout (little-endian)::

        b"S2SA"  uint32 version
        uint32 n_tokens, uint32 capacity, then per token: uint32 byte length + UTF-8 bytes
        uint32 vocab_size, uint32 emb_dim, uint32 hidden_dim
        float64 tensors in PARAM_ORDER, each row-major
    """
    if len(vocab) != m.vocab_size:
        raise ShapeError(f"vocabulary size {len(vocab)} != model |V| {m.vocab_size}")
    out = bytearray(MAGIC)
    out += struct.pack("<I", FORMAT_VERSION)
    out += struct.pack("<II", len(vocab), vocab.capacity)
    for tok in vocab.id_to_token:
        raw = tok.encode("utf-8")
        out += struct.pack("<I", len(raw)) + raw
    out += struct.pack("<III", m.vocab_size, m.emb_dim, m.hidden_dim)
    tensors = m.tensors()
    for name in PARAM_ORDER:
        out += np.ascontiguousarray(tensors[name], dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(out))


def load_checkpoint(path) -> tuple[ModelParams, Vocabulary]:
    data = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"{path}: truncated checkpoint")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if take(4) != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic)")
    (version,) = struct.unpack("<I", take(4))
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    n_tokens, capacity = struct.unpack("<II", take(8))
    tokens = []
    for _ in range(n_tokens):
        (n,) = struct.unpack("<I", take(4))
        try:
            tokens.append(take(n).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: corrupt vocabulary block") from exc
    vocab = Vocabulary(tokens, capacity)
    V, D, H = struct.unpack("<III", take(12))
    if V != n_tokens:
        raise FormatError(f"{path}: |V|={V} but vocabulary has {n_tokens} tokens")
    tensors = {}
    for name, shape in ModelParams.shapes(V, D, H).items():
        count = int(np.prod(shape))
        tensors[name] = np.frombuffer(take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} trailing bytes")
    return ModelParams.from_tensors(tensors), vocab
