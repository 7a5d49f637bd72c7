"""Dense float64 arithmetic, activations and gradient checking.

Vectors and matrices are plain ``numpy.ndarray`` objects (1-d and 2-d,
dtype float64).  Everything here is pure: same inputs give bitwise-identical
outputs.
"""
from __future__ import annotations

import math
from typing import Callable, Mapping

import numpy as np

from .errors import NumericalError, ShapeError

RNG_ALGORITHM = "PCG64"


def as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError(f"expected a non-empty vector, got shape {v.shape}")
    return v


def affine(W, x, b) -> np.ndarray:
    """``W @ x + b`` with shape checking."""
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if W.ndim != 2 or x.ndim != 1 or b.ndim != 1 or W.shape[1] != x.shape[0] or W.shape[0] != b.shape[0]:
        raise ShapeError(
            f"affine: W {W.shape} incompatible with x {x.shape} and b {b.shape}"
        )
    return W @ x + b


def sigmoid(x) -> np.ndarray:
    # tanh form never overflows and stays in [0, 1]
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def tanh(x) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def softmax(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ShapeError("softmax of an empty vector")
    z = np.exp(s - s.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def log_softmax(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ShapeError("log_softmax of an empty vector")
    shifted = s - s.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class SeededRng:
    """Reproducible random source backed by numpy's PCG64 bit generator.

    PCG64 output for a given seed is fixed by numpy's stream-compatibility
    policy, so draws match across platforms.  Not thread-safe; use one
    instance per thread.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int | tuple | list = 0):
        self.seed = seed
        entropy = [int(s) & 0xFFFFFFFFFFFFFFFF for s in seed] if isinstance(seed, (tuple, list)) else int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def integer(self, low: int, high: int) -> int:
        """Uniform integer in ``[low, high)``."""
        return int(self._gen.integers(low, high))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def dropout_mask(self, shape, rate: float) -> np.ndarray:
        """Inverted-dropout mask: kept units scaled by ``1 / (1 - rate)``."""
        if rate <= 0.0:
            return np.ones(shape)
        keep = self._gen.random(shape) >= rate
        return keep / (1.0 - rate)


ParamSet = Mapping[str, np.ndarray]


def grad_check(
    loss_fn: Callable[[ParamSet], float],
    params: ParamSet,
    epsilon: float = 1e-5,
    grads: ParamSet | None = None,
    grad_fn: Callable[[ParamSet], ParamSet] | None = None,
) -> float:
    """Largest relative error between analytic and central-difference gradients.

    ``params`` maps names to float64 arrays which are perturbed in place and
    restored.  Analytic gradients come from ``grads`` or ``grad_fn(params)``.
    The relative error per scalar is ``|ga - gn| / max(|ga|, |gn|, 1e-8)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if grads is None:
        if grad_fn is None:
            raise ValueError("grad_check needs grads or grad_fn")
        grads = grad_fn(params)
    worst = 0.0
    for name, arr in params.items():
        g_a = np.asarray(grads[name], dtype=np.float64)
        if g_a.shape != arr.shape:
            raise ShapeError(f"gradient for {name} has shape {g_a.shape}, parameter {arr.shape}")
        flat = arr.flat
        g_flat = g_a.reshape(-1)
        for k in range(arr.size):
            orig = flat[k]
            flat[k] = orig + epsilon
            up = float(loss_fn(params))
            flat[k] = orig - epsilon
            down = float(loss_fn(params))
            flat[k] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise NumericalError(f"non-finite loss probing {name}[{k}]")
            g_n = (up - down) / (2.0 * epsilon)
            denom = max(abs(g_flat[k]), abs(g_n), 1e-8)
            worst = max(worst, abs(g_flat[k] - g_n) / denom)
    return worst
