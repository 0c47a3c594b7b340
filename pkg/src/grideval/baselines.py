"""Set-level baseline metrics: within-grid diversity and Fréchet distance
between two embedding populations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalError
from .metrics import pairwise_similarity_matrix
from .types import Embedding, GridCase

DEFAULT_COV_EPS = 1e-6


def _stack(embeddings) -> np.ndarray:
    rows = [
        e.vector if isinstance(e, Embedding) else np.asarray(e, dtype=np.float64)
        for e in embeddings
    ]
    if not rows:
        raise InvalidInputError("expected at least one embedding")
    dims = {r.shape for r in rows}
    if len(dims) != 1 or rows[0].ndim != 1:
        raise InvalidInputError(
            f"embeddings must share one dimension, got shapes {sorted(dims)}"
        )
    return np.stack(rows).astype(np.float64)


@dataclass(frozen=True)
class GaussianSummary:
    """First and second moments of an embedding population.

    The covariance is expected post-regularization: symmetric within
    1e-10 with a nonnegative diagonal.
    """

    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "sample_count", int(self.sample_count))
        if mean.ndim != 1:
            raise InvalidInputError("mean must be a 1-D vector")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise InvalidInputError(
                f"covariance shape {cov.shape} does not match dimension {d}"
            )
        if self.sample_count < 2:
            raise InvalidInputError("sample_count must be >= 2")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidInputError("moments must be finite")
        if float(np.max(np.abs(cov - cov.T))) > 1e-10:
            raise InvalidInputError("covariance must be symmetric within 1e-10")
        if float(np.min(np.diag(cov))) < 0.0:
            raise InvalidInputError("covariance diagonal must be nonnegative")

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def diversity(case: GridCase) -> float:
    """Mean pairwise cosine similarity across a grid's images.

    Averages all k*(k-1)/2 unordered pairs. Higher similarity means the
    grid is less diverse, so comparisons treat lower values as better.
    """
    k = case.size
    if k < 2:
        raise InvalidInputError("diversity requires at least two images")
    sim = pairwise_similarity_matrix(case.embedding_matrix())
    iu = np.triu_indices(k, 1)
    return float(np.mean(sim[iu]))


def gaussian_summary(embeddings, eps: float = DEFAULT_COV_EPS) -> GaussianSummary:
    """Fit mean and covariance to an embedding population.

    Sample covariance uses the n-1 denominator, is symmetrized, and gets
    eps on the diagonal. The regularization is always applied: grids are
    far smaller than the embedding dimension, so the raw covariance is
    rank-deficient and the distance computation needs the ridge.
    """
    mat = _stack(embeddings)
    n, d = mat.shape
    if n < 2:
        raise InvalidInputError("gaussian_summary requires >= 2 embeddings")
    mean = mat.mean(axis=0)
    cov = np.atleast_2d(np.cov(mat, rowvar=False, ddof=1))
    cov = (cov + cov.T) / 2.0 + float(eps) * np.eye(d)
    return GaussianSummary(mean=mean, covariance=cov, sample_count=n)


def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    try:
        vals, vecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance eigendecomposition failed: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise NumericalError("covariance eigendecomposition is non-finite")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    """Fréchet distance between two Gaussian summaries.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), with the
    cross-term trace computed from the eigenvalues of the symmetric
    product S_a^(1/2) S_b S_a^(1/2) (clamped at zero before the square
    root). Lower means the populations are more similar.
    """
    if a.dim != b.dim:
        raise InvalidInputError(
            f"dimension mismatch: {a.dim} vs {b.dim}"
        )
    diff = a.mean - b.mean
    a_half = _psd_sqrt(a.covariance)
    # overflow surfaces as a non-finite eigenvalue check below, so the
    # runtime warning would only duplicate the NumericalError
    with np.errstate(over="ignore", invalid="ignore"):
        middle = a_half @ b.covariance @ a_half
        middle = (middle + middle.T) / 2.0
    try:
        vals = np.linalg.eigvalsh(middle)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"cross-covariance eigendecomposition failed: {exc}"
        ) from exc
    if not np.all(np.isfinite(vals)):
        raise NumericalError(
            "cross-covariance eigendecomposition is non-finite; "
            "check the input moments for overflow"
        )
    trace_sqrt = float(np.sum(np.sqrt(np.clip(vals, 0.0, None))))
    value = (
        float(diff @ diff)
        + float(np.trace(a.covariance))
        + float(np.trace(b.covariance))
        - 2.0 * trace_sqrt
    )
    if value < -1e-8:
        raise NumericalError(f"distance collapsed below zero: {value}")
    return max(value, 0.0)


def population_fid_report(preferred, not_preferred, targets,
                          eps: float = DEFAULT_COV_EPS):
    """Fréchet distances from the target population to each side of a
    preference split: (distance to preferred, distance to not-preferred).
    The lower component marks the better set.
    """
    ref = gaussian_summary(targets, eps)
    return (
        frechet_distance(ref, gaussian_summary(preferred, eps)),
        frechet_distance(ref, gaussian_summary(not_preferred, eps)),
    )
