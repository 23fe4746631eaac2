"""Dense linear-algebra substrate: float32 tensors, cosine similarity,
covariance estimation, and Mahalanobis distance.

Storage is 32-bit; every accumulation runs in 64-bit. All values are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

__all__ = [
    "FeatureTensor",
    "CovKind",
    "CovarianceEstimate",
    "cosine",
    "estimate_covariance",
    "default_ridge",
    "mahalanobis",
]


class FeatureTensor:
    """A dense row-major 2-D array of finite 32-bit floats.

    Rows are feature vectors (image regions or caption words); columns are
    the shared embedding dimensions.
    """

    __slots__ = ("_data",)

    def __init__(self, data) -> None:
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim != 2:
            raise UsageError(f"feature tensor must be 2-D, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise UsageError(f"feature tensor must be non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise UsageError(f"feature tensor contains non-finite value at flat index {bad}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self._data = arr

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def data(self) -> np.ndarray:
        """The underlying read-only float32 array, shape (rows, cols)."""
        return self._data

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureTensor):
            return NotImplemented
        return self._data.shape == other._data.shape and bool(
            np.array_equal(self._data, other._data)
        )

    def __hash__(self):
        return hash((self._data.shape, self._data.tobytes()))

    def __repr__(self) -> str:
        return f"FeatureTensor(rows={self.rows}, cols={self.cols})"


def _as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        v = v.reshape(-1)
    return v


def cosine(x, y) -> float:
    """Cosine similarity x.y / (|x||y|), in [-1, 1].

    Returns 0.0 when either vector has zero norm: degenerate vectors arise
    legitimately (zero residuals, empty contexts) and must not abort a batch.
    """
    xv = _as_vector(x)
    yv = _as_vector(y)
    if xv.shape != yv.shape:
        raise UsageError(f"cosine: dimension mismatch {xv.shape} vs {yv.shape}")
    nx2 = float(np.dot(xv, xv))
    ny2 = float(np.dot(yv, yv))
    if nx2 == 0.0 or ny2 == 0.0:
        return 0.0
    # sqrt of the product of squared norms: exact 1.0 for identical vectors
    c = float(np.dot(xv, yv) / np.sqrt(nx2 * ny2))
    return max(-1.0, min(1.0, c))


class CovKind(enum.Enum):
    IDENTITY = "identity"
    DIAGONAL = "diagonal"
    SHRINKAGE_FULL = "shrinkage-full"


@dataclass(frozen=True)
class CovarianceEstimate:
    """A regularized covariance S, held in a form that evaluates
    ``sqrt(x^T S^-1 x)`` without a dense inversion for identity/diagonal kinds.

    ``warning`` is set when a degenerate sample set forced an identity
    fallback.
    """

    dim: int
    kind: CovKind
    ridge: float
    warning: bool = False
    inv_diag: np.ndarray | None = field(default=None, repr=False)
    whitener: np.ndarray | None = field(default=None, repr=False)

    def quad_form_sqrt(self, x: np.ndarray) -> float:
        """sqrt(x^T S^-1 x) for a 1-D float64 vector x."""
        if self.kind is CovKind.IDENTITY:
            return float(np.linalg.norm(x))
        if self.kind is CovKind.DIAGONAL:
            return float(np.sqrt(np.dot(x * self.inv_diag, x)))
        return float(np.linalg.norm(self.whitener @ x))

    def quad_form_sqrt_rows(self, x: np.ndarray) -> np.ndarray:
        """Row-wise sqrt(x_i^T S^-1 x_i) for a K x dim matrix."""
        if self.kind is CovKind.IDENTITY:
            return np.linalg.norm(x, axis=1)
        if self.kind is CovKind.DIAGONAL:
            return np.sqrt(np.einsum("ij,ij->i", x * self.inv_diag, x))
        return np.linalg.norm(self.whitener @ x.T, axis=0)


def default_ridge(samples) -> float:
    """Default regularization: 1e-3 of the mean per-dimension variance
    (plus a tiny floor so all-constant samples still yield a positive ridge).
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.shape[0] < 2:
        return 1e-3 * 1e-12
    var = arr.var(axis=0, ddof=1)
    return float(1e-3 * (var.mean() + 1e-12))


def estimate_covariance(
    samples, kind: CovKind, ridge: float | None = 0.0, gamma: float = 0.5
) -> CovarianceEstimate:
    """Estimate a covariance from a K x D sample matrix.

    Kinds:
      identity        S = I
      diagonal        S = diag(per-dimension unbiased variance) + ridge*I
      shrinkage-full  S = (1-gamma)*Cov + gamma*diag(Cov) + ridge*I

    ``ridge=None`` selects the data-driven default (see ``default_ridge``).
    Fewer than 2 samples cannot support a non-identity estimate; the result
    falls back to identity with ``warning`` set. Construction rejects any S
    that is not positive definite.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise UsageError(f"covariance samples must be a K x D matrix with K >= 1, got shape {arr.shape}")
    if ridge is not None and ridge < 0.0:
        raise UsageError(f"ridge must be non-negative, got {ridge}")
    if not 0.0 <= gamma <= 1.0:
        raise UsageError(f"shrinkage gamma must be in [0, 1], got {gamma}")
    dim = arr.shape[1]

    if kind is CovKind.IDENTITY:
        return CovarianceEstimate(dim=dim, kind=kind, ridge=0.0)
    if arr.shape[0] < 2:
        return CovarianceEstimate(dim=dim, kind=CovKind.IDENTITY, ridge=0.0, warning=True)

    var = arr.var(axis=0, ddof=1)
    if ridge is None:
        ridge = float(1e-3 * (var.mean() + 1e-12))
    if kind is CovKind.DIAGONAL:
        diag = var + ridge
        if np.any(diag <= 0.0):
            raise UsageError(
                "diagonal covariance is not positive definite; "
                "a dimension has zero variance and ridge is 0"
            )
        return CovarianceEstimate(dim=dim, kind=kind, ridge=ridge, inv_diag=_frozen(1.0 / diag))

    if kind is CovKind.SHRINKAGE_FULL:
        cov = np.cov(arr, rowvar=False, ddof=1).reshape(dim, dim)
        s = (1.0 - gamma) * cov + gamma * np.diag(np.diag(cov)) + ridge * np.eye(dim)
        try:
            chol = np.linalg.cholesky(s)
        except np.linalg.LinAlgError:
            raise UsageError("shrinkage covariance is not positive definite; increase ridge") from None
        # Triangular inverse computed once so each distance is a mat-vec.
        whitener = np.linalg.inv(chol)
        return CovarianceEstimate(dim=dim, kind=kind, ridge=ridge, whitener=_frozen(whitener))

    raise UsageError(f"unknown covariance kind: {kind!r}")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def mahalanobis(p, q, estimate: CovarianceEstimate) -> float:
    """sqrt((p-q)^T S^-1 (p-q)); zero exactly when p equals q."""
    pv = _as_vector(p)
    qv = _as_vector(q)
    if pv.shape != qv.shape:
        raise UsageError(f"mahalanobis: dimension mismatch {pv.shape} vs {qv.shape}")
    if pv.shape[0] != estimate.dim:
        raise UsageError(
            f"mahalanobis: vectors have dimension {pv.shape[0]} but covariance has {estimate.dim}"
        )
    return estimate.quad_form_sqrt(pv - qv)
