"""Single OS-ELM autoencoder with batch-size-one sequential training.

The hidden layer is a fixed random projection ``sigmoid(x @ alpha + b)``;
only the output weights ``beta`` are learned.  With one sample per step the
recursive least-squares gain needs a scalar reciprocal instead of a matrix
inverse::

    h = sigmoid(x @ alpha + b)
    s = 1 + h P h^T
    P <- P - (P h^T)(h P) / s
    beta <- beta + P h^T (t - h beta)

Starting from ``P = I/delta`` and ``beta = 0`` the recursion reproduces the
ridge solution ``(delta I + H^T H)^-1 H^T T`` over all samples seen so far.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import ConfigurationError, InvalidInputError, NumericalFailureError

DEFAULT_DELTA = 1e-2

Array = npt.NDArray[np.floating]


def _check_dtype(dtype) -> np.dtype:
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise InvalidInputError(f"dtype must be float32 or float64, got {dtype}")
    return dtype


def sigmoid(z: Array) -> Array:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class HiddenProjection:
    """Shared input-to-hidden weights (n x N) and bias (N,)."""

    alpha: Array
    b: Array
    seed: int | None = None
    activation: str = "sigmoid"

    def __post_init__(self) -> None:
        alpha = np.asarray(self.alpha)
        b = np.asarray(self.b)
        if alpha.ndim != 2 or b.shape != (alpha.shape[1],):
            raise InvalidInputError(f"alpha {alpha.shape} and b {b.shape} are inconsistent")
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(b))):
            raise InvalidInputError("projection contains non-finite values")
        if self.activation != "sigmoid":
            raise ConfigurationError("only the sigmoid activation is supported")
        alpha.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return int(self.alpha.shape[0])

    @property
    def N(self) -> int:
        return int(self.alpha.shape[1])

    @property
    def dtype(self) -> np.dtype:
        return self.alpha.dtype

    def hidden(self, x: Array) -> Array:
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[-1] != self.n:
            raise InvalidInputError(f"input length {x.shape[-1]} != n={self.n}")
        return sigmoid(x @ self.alpha + self.b)


def init_projection(seed: int, n: int, N: int, dtype=np.float64) -> HiddenProjection:
    """Draw alpha and b i.i.d. uniform on [-1, 1] from ``seed``."""
    if n < 1 or N < 1:
        raise InvalidInputError(f"dimensions must be positive, got n={n}, N={N}")
    dtype = _check_dtype(dtype)
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(-1.0, 1.0, size=(n, N))
    b = rng.uniform(-1.0, 1.0, size=N)
    return HiddenProjection(alpha.astype(dtype), b.astype(dtype), seed=seed)


def hidden(proj: HiddenProjection, x: Array) -> Array:
    return proj.hidden(x)


@dataclass
class OselmInstance:
    """Trainable state of one autoencoder: beta (N x m), P (N x N)."""

    beta: Array
    P: Array
    trained_count: int = 0
    _ph: Array = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        N = self.beta.shape[0]
        if self.beta.ndim != 2 or self.P.shape != (N, N):
            raise InvalidInputError(f"beta {self.beta.shape} and P {self.P.shape} are inconsistent")
        self._ph = np.empty(N, dtype=self.beta.dtype)

    @property
    def N(self) -> int:
        return int(self.beta.shape[0])

    @property
    def m(self) -> int:
        return int(self.beta.shape[1])

    def predict(self, h: Array) -> Array:
        h = np.asarray(h, dtype=self.beta.dtype)
        if h.shape[-1] != self.N:
            raise InvalidInputError(f"hidden length {h.shape[-1]} != N={self.N}")
        return h @ self.beta

    def update_hidden(self, h: Array, t: Array) -> None:
        """One recursive step given an already computed hidden vector."""
        beta, P = self.beta, self.P
        t = np.asarray(t, dtype=beta.dtype)
        if t.shape != (self.m,):
            raise InvalidInputError(f"target length {t.shape} != m={self.m}")
        step = self.trained_count + 1
        ph = np.dot(P, h, out=self._ph)
        s = 1.0 + float(h @ ph)
        if not np.isfinite(s):
            raise NumericalFailureError("non-finite gain denominator", step)
        if s < 1.0 - 1e-9:
            raise NumericalFailureError(f"gain denominator {s} < 1; P lost positive definiteness", step)
        with np.errstate(over="ignore", invalid="ignore"):  # checked just below
            P -= np.outer(ph, ph / s)
            # re-symmetrize; rank-1 downdates drift otherwise (worst in float32)
            P += P.T
            P *= 0.5
            err = t - h @ beta
            beta += np.outer(P @ h, err)
        if not (np.isfinite(beta).all() and np.isfinite(P).all()):
            raise NumericalFailureError("non-finite weights after update", step)
        self.trained_count = step

    def seq_update(self, proj: HiddenProjection, x: Array, t: Array) -> "OselmInstance":
        if proj.N != self.N:
            raise ConfigurationError(f"projection N={proj.N} != instance N={self.N}")
        self.update_hidden(proj.hidden(x), t)
        return self

    def copy(self) -> "OselmInstance":
        return OselmInstance(self.beta.copy(), self.P.copy(), self.trained_count)


def init_instance(N: int, m: int, delta: float = DEFAULT_DELTA, dtype=np.float64) -> OselmInstance:
    if not delta > 0:
        raise InvalidInputError(f"delta must be positive, got {delta}")
    if N < 1 or m < 1:
        raise InvalidInputError(f"dimensions must be positive, got N={N}, m={m}")
    dtype = _check_dtype(dtype)
    return OselmInstance(
        beta=np.zeros((N, m), dtype=dtype),
        P=np.eye(N, dtype=dtype) / dtype.type(delta),
    )


def batch_init(
    proj: HiddenProjection, X: Array, T: Array | None = None, delta: float = DEFAULT_DELTA
) -> OselmInstance:
    """Regularized normal-equations fit over an initial block of samples.

    Leaves the instance in the same state the sequential recursion would
    reach after feeding the block one row at a time.
    """
    X = np.atleast_2d(np.asarray(X, dtype=proj.dtype))
    T = X if T is None else np.atleast_2d(np.asarray(T, dtype=proj.dtype))
    if X.shape[0] != T.shape[0]:
        raise InvalidInputError("X and T must have the same number of rows")
    if not delta > 0:
        raise InvalidInputError(f"delta must be positive, got {delta}")
    H = proj.hidden(X)
    A = H.T @ H + delta * np.eye(proj.N, dtype=proj.dtype)
    P = np.linalg.inv(A)
    P = 0.5 * (P + P.T)
    beta = np.linalg.solve(A, H.T @ T)
    return OselmInstance(beta.astype(proj.dtype), P.astype(proj.dtype), trained_count=int(X.shape[0]))


def predict(inst: OselmInstance, h: Array) -> Array:
    return inst.predict(h)


def loss(y: Array, t: Array) -> float:
    """Mean squared error over output units."""
    y = np.asarray(y)
    t = np.asarray(t)
    if y.shape != t.shape:
        raise InvalidInputError(f"shape mismatch {y.shape} vs {t.shape}")
    d = y - t
    return float(np.mean(d * d))


def anomaly_score(proj: HiddenProjection, inst: OselmInstance, x: Array) -> float:
    if proj.n != inst.m:
        raise ConfigurationError(f"autoencoder needs n == m, got n={proj.n}, m={inst.m}")
    x = np.asarray(x, dtype=proj.dtype)
    return loss(inst.predict(proj.hidden(x)), x)


def seq_update(proj: HiddenProjection, inst: OselmInstance, x: Array, t: Array) -> OselmInstance:
    return inst.seq_update(proj, x, t)
