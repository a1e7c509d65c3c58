"""PCA over flattened state matrices and Gaussian-mixture clustering.

The PCA path is built for wide matrices (rows far fewer than columns):
the eigendecomposition runs on the small Gram matrix and the
eigenvectors are lifted back to feature space. Clustering is a plain
full-covariance EM over 2-D score scatters.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.special import logsumexp

from .binio import read_hnst, write_hnst
from .errors import DomainError, ShapeError
from .images import atomic_write_text

COV_EIGENVALUE_FLOOR = 1e-6
EM_TOL = 1e-6
EM_MAX_ITER = 200


class StateMatrix:
    """Rows of flattened spatio-temporal states."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ShapeError(f"state matrix must be 2-D, got {values.shape}")
        if values.shape[0] < 2:
            raise DomainError("state matrix needs at least 2 rows")
        if not np.all(np.isfinite(values)):
            raise DomainError("state matrix must be finite")
        self.values = values

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]

    def save(self, path):
        write_hnst(path, self.values)

    @classmethod
    def load(cls, path):
        values, _ = read_hnst(path)
        return cls(values.astype(float))


def _as_matrix(X):
    return np.asarray(getattr(X, "values", X), dtype=float)


@dataclass(frozen=True)
class PcaModel:
    components: np.ndarray               # (k, d), orthonormal rows
    explained_variance: np.ndarray       # covariance eigenvalues, descending
    explained_variance_ratio: np.ndarray
    mean: np.ndarray
    scale: np.ndarray = None             # per-feature std when standardized

    def __post_init__(self):
        comps = self.components
        gram = comps @ comps.T
        if np.max(np.abs(gram - np.eye(len(comps)))) > 1e-8:
            raise DomainError("components are not orthonormal")
        ratios = self.explained_variance_ratio
        if np.any(np.diff(ratios) > 1e-12):
            raise DomainError("explained variance ratios must not increase")

    @property
    def n_components(self):
        return self.components.shape[0]

    def to_json(self):
        obj = {
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "explained_variance_ratio":
                self.explained_variance_ratio.tolist(),
            "mean": self.mean.tolist(),
            "scale": None if self.scale is None else self.scale.tolist(),
        }
        return json.dumps(obj, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        scale = obj.get("scale")
        return cls(np.asarray(obj["components"], dtype=float),
                   np.asarray(obj["explained_variance"], dtype=float),
                   np.asarray(obj["explained_variance_ratio"], dtype=float),
                   np.asarray(obj["mean"], dtype=float),
                   None if scale is None else np.asarray(scale, dtype=float))

    def save(self, path):
        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def pca_fit(X, k, standardize=False):
    """Top-k principal components of the rows of X.

    Centering only by default; set standardize=True to divide each
    column by its standard deviation first. Sign convention: the
    largest-magnitude entry of every component is positive.
    """
    X = _as_matrix(X)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DomainError("input matrix must be finite")
    n, d = X.shape
    limit = min(n - 1, d)
    if not 1 <= k <= limit:
        raise DomainError(f"k={k} outside [1, min(rows-1, cols)]=[1, {limit}]")

    mean = X.mean(axis=0)
    Xc = X - mean
    scale = None
    if standardize:
        scale = Xc.std(axis=0, ddof=1)
        scale = np.where(scale == 0.0, 1.0, scale)
        Xc = Xc / scale

    total_var = float(np.sum(Xc * Xc)) / (n - 1)
    if n < d:
        # Gram trick: Xc Xcᵀ u = μ u  ⟹  C (Xcᵀu/√μ) = (μ/(n-1)) (Xcᵀu/√μ)
        w, u = np.linalg.eigh(Xc @ Xc.T)
        order = np.argsort(w)[::-1][:k]
        w = np.maximum(w[order], 0.0)
        comps = (Xc.T @ u[:, order]) / np.sqrt(np.maximum(w, 1e-300))
        comps = comps.T
        eigvals = w / (n - 1)
    else:
        cov = (Xc.T @ Xc) / (n - 1)
        w, v = np.linalg.eigh(cov)
        order = np.argsort(w)[::-1][:k]
        eigvals = np.maximum(w[order], 0.0)
        comps = v[:, order].T

    # QR cleanup so near-null components stay orthonormal too
    q, r = np.linalg.qr(comps.T)
    comps = (q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))).T
    for i in range(k):
        if comps[i, np.argmax(np.abs(comps[i]))] < 0:
            comps[i] = -comps[i]

    if total_var > 0:
        ratios = eigvals / total_var
    else:
        ratios = np.zeros(k)
    return PcaModel(comps, eigvals, ratios, mean, scale)


def pca_project(model, X):
    """Component scores of X under a fitted model."""
    X = _as_matrix(X)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.components.shape[1]:
        raise ShapeError(f"expected {model.components.shape[1]} columns, "
                         f"got {X.shape[1]}")
    Xc = X - model.mean
    if model.scale is not None:
        Xc = Xc / model.scale
    scores = Xc @ model.components.T
    return scores[0] if single else scores


def pca_reconstruct(model, scores):
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    if scores.shape[1] != model.n_components:
        raise ShapeError(f"expected {model.n_components} score columns, "
                         f"got {scores.shape[1]}")
    Xc = scores @ model.components
    if model.scale is not None:
        Xc = Xc * model.scale
    return Xc + model.mean


def scores_to_csv(scores):
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    header = ",".join(f"pc{i + 1}" for i in range(scores.shape[1]))
    lines = [header]
    for row in scores:
        lines.append(",".join(format(v, ".10g") for v in row))
    return "\n".join(lines) + "\n"


@dataclass
class GmmModel:
    weights: np.ndarray       # (K,)
    means: np.ndarray         # (K, 2)
    covariances: np.ndarray   # (K, 2, 2), SPD
    log_likelihoods: tuple    # total log-likelihood per EM iteration

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.covariances = np.asarray(self.covariances, dtype=float)
        if np.any(self.weights <= 0):
            raise DomainError("mixture weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise DomainError("mixture weights must sum to 1")
        for cov in self.covariances:
            if np.min(np.linalg.eigvalsh(cov)) < COV_EIGENVALUE_FLOOR * 0.5:
                raise DomainError("covariance below the eigenvalue floor")

    @property
    def n_components(self):
        return len(self.weights)

    def log_responsibilities(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        parts = np.empty((points.shape[0], self.n_components))
        for j in range(self.n_components):
            parts[:, j] = (math.log(self.weights[j])
                           + _log_gauss(points, self.means[j],
                                        self.covariances[j]))
        norm = logsumexp(parts, axis=1)
        return parts - norm[:, None], norm

    def responsibilities(self, points):
        log_resp, _ = self.log_responsibilities(points)
        return np.exp(log_resp)

    def predict(self, points):
        log_resp, _ = self.log_responsibilities(points)
        return np.argmax(log_resp, axis=1)

    def log_likelihood(self, points):
        _, norm = self.log_responsibilities(points)
        return float(norm.sum())

    def to_json(self):
        obj = {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "log_likelihoods": list(self.log_likelihoods),
        }
        return json.dumps(obj, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(np.asarray(obj["weights"], dtype=float),
                   np.asarray(obj["means"], dtype=float),
                   np.asarray(obj["covariances"], dtype=float),
                   tuple(obj["log_likelihoods"]))

    def save(self, path):
        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _log_gauss(points, mean, cov):
    d = points.shape[1]
    lo = np.linalg.cholesky(cov)
    sol = sla.solve_triangular(lo, (points - mean).T, lower=True)
    maha = np.sum(sol * sol, axis=0)
    logdet = 2.0 * float(np.sum(np.log(np.diag(lo))))
    return -0.5 * (d * math.log(2.0 * math.pi) + logdet + maha)


def _floor_spd(cov):
    cov = (cov + cov.T) / 2.0
    w, v = np.linalg.eigh(cov)
    if w[0] >= COV_EIGENVALUE_FLOOR:
        return cov
    w = np.maximum(w, COV_EIGENVALUE_FLOOR)
    return (v * w) @ v.T


def _kmeanspp_centers(points, k, rng):
    n = points.shape[0]
    centers = [points[int(rng.integers(n))]]
    for _ in range(1, k):
        d2 = np.min([np.sum((points - c) ** 2, axis=1) for c in centers],
                    axis=0)
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(points[idx])
    return np.array(centers)


def gmm_fit(points, k=10, seed=0):
    """Full-covariance Gaussian mixture fitted by EM.

    Initialization picks spread-out seed means (squared-distance
    weighted sampling). Iteration stops when the total log-likelihood
    improves by less than EM_TOL or after EM_MAX_ITER rounds. Covariance
    eigenvalues are floored at COV_EIGENVALUE_FLOOR to survive collapsed
    clusters.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ShapeError(f"expected (n, 2) points, got {points.shape}")
    n = points.shape[0]
    if k < 1:
        raise DomainError("need at least one mixture component")
    if n < k:
        raise DomainError(f"{n} samples cannot support {k} components")

    rng = np.random.default_rng(seed)
    means = _kmeanspp_centers(points, k, rng)
    base_cov = _floor_spd(np.cov(points.T) if n > 1 else np.eye(2))
    covs = np.repeat(base_cov[None], k, axis=0)
    weights = np.full(k, 1.0 / k)

    trace = []
    for _ in range(EM_MAX_ITER):
        model = GmmModel(weights, means, covs, ())
        log_resp, norm = model.log_responsibilities(points)
        loglik = float(norm.sum())
        if trace and loglik - trace[-1] < EM_TOL:
            trace.append(loglik)
            break
        trace.append(loglik)

        resp = np.exp(log_resp)
        nk = np.maximum(resp.sum(axis=0), 1e-12)
        weights = nk / n
        weights = weights / weights.sum()
        means = (resp.T @ points) / nk[:, None]
        covs = np.empty((k, 2, 2))
        for j in range(k):
            diff = points - means[j]
            covs[j] = _floor_spd((diff * resp[:, j:j + 1]).T @ diff / nk[j])

    return GmmModel(weights, means, covs, tuple(trace))
