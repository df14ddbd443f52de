"""Linear discriminant analysis: Fisher projection, Gaussian equal-covariance
classification, and projection-based feature importance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, eigh, solve_triangular

from .features import FeatureMatrix, FeatureVector


RANK_TOL = 1e-9     # eigenvalues below this fraction of the largest are dropped
COND_TOL = 1e-6     # smallest/largest Cholesky diagonal below this counts as singular


class LdaError(ValueError):
    pass


def scatter_matrices(matrix: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Between-class and within-class scatter (unnormalised sums)."""
    x, y = matrix.values, matrix.labels
    mu = x.mean(axis=0)
    d = x.shape[1]
    sb = np.zeros((d, d))
    sw = np.zeros((d, d))
    for c in np.unique(y):
        xc = x[y == c]
        mc = xc.mean(axis=0)
        diff = (mc - mu)[:, None]
        sb += xc.shape[0] * (diff @ diff.T)
        centered = xc - mc
        sw += centered.T @ centered
    # exact symmetry
    return (sb + sb.T) / 2, (sw + sw.T) / 2


def importance(projection: np.ndarray) -> np.ndarray:
    """phi_j = sum over discriminant directions of |W_jc|."""
    w = np.asarray(projection, dtype=np.float64)
    if w.ndim == 1:
        w = w[:, None]
    return np.abs(w).sum(axis=1)


@dataclass(frozen=True, eq=False)
class LdaModel:
    classes: np.ndarray
    class_means: np.ndarray          # (k, d), raw feature space
    global_mean: np.ndarray          # (d,)
    projection: np.ndarray           # (d, r), raw feature space, unit columns
    scaled_projection: np.ndarray    # (d, r), standardized feature space, unit columns
    eigenvalues: np.ndarray          # (r,)
    class_priors: np.ndarray         # (k,)
    offset: np.ndarray               # standardization centre
    scale: np.ndarray                # standardization scale
    pooled_covariance_inverse: np.ndarray  # standardized space, regularized
    feature_ids: tuple[str, ...] = ()

    @property
    def rank(self) -> int:
        return self.projection.shape[1]

    @property
    def feature_importance(self) -> np.ndarray:
        return importance(self.scaled_projection)

    def _coefficients(self):
        mz = (self.class_means - self.offset) / self.scale
        coef = mz @ self.pooled_covariance_inverse          # (k, d)
        intercept = -0.5 * np.einsum("kd,kd->k", coef, mz) + np.log(self.class_priors)
        return coef, intercept

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.class_means.shape[1]:
            raise LdaError(f"expected {self.class_means.shape[1]} features, got {x.shape[1]}")
        coef, intercept = self._coefficients()
        z = (x - self.offset) / self.scale
        return z @ coef.T + intercept

    def predict_many(self, x: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum: ties go to the lowest class index
        return self.classes[np.argmax(self.decision_function(x), axis=1)]

    def transform(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(x) @ self.projection


def _standardize(x: np.ndarray):
    offset = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[~(scale > 0)] = 1.0
    return offset, scale


def _fix_signs(w: np.ndarray) -> np.ndarray:
    if w.size == 0:
        return w
    rows = np.argmax(np.abs(w), axis=0)
    signs = np.sign(w[rows, np.arange(w.shape[1])])
    signs[signs == 0] = 1.0
    return w * signs


def _unit_columns(w: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(w, axis=0)
    norms[norms == 0] = 1.0
    return w / norms


def fit(matrix: FeatureMatrix, ridge: float = 1e-6) -> LdaModel:
    """Fit LDA.

    Features are standardized internally so the ridge term (``ridge`` times
    the mean diagonal of the within-class scatter) and the importances are
    unit-free.  The generalized eigenproblem is reduced to a symmetric one via
    the Cholesky factor of the regularized within-class scatter.
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    x, y = matrix.values, matrix.labels
    n, d = x.shape
    if n == 0 or d == 0:
        raise LdaError("empty feature matrix")
    classes, counts = np.unique(y, return_counts=True)
    k = classes.size
    offset, scale = _standardize(x)
    z = FeatureMatrix((x - offset) / scale, y, matrix.feature_ids)
    sb, sw = scatter_matrices(z)
    base = np.trace(sw) / d
    reg = sw + ridge * (base if base > 0 else 1.0) * np.eye(d)

    try:
        chol = cholesky(reg, lower=True)
    except LinAlgError:
        raise LdaError("within-class scatter is singular; increase the ridge") from None
    diag = np.diag(chol)
    if np.min(diag) <= COND_TOL * np.max(diag):
        raise LdaError("within-class scatter is singular to working precision; increase the ridge")

    r = min(k - 1, d)
    if r > 0:
        # L^-1 S_B L^-T u = lambda u,  W = L^-T u
        tmp = solve_triangular(chol, sb, lower=True)
        c = solve_triangular(chol, tmp.T, lower=True)
        c = (c + c.T) / 2
        evals, evecs = eigh(c)
        order = np.argsort(evals)[::-1][:r]
        # rank-deficient S_B: directions without between-class spread carry no information
        keep = evals[order] > RANK_TOL * max(evals[order[0]], 0.0)
        order = order[keep]
        evals = evals[order]
        wz = solve_triangular(chol.T, evecs[:, order], lower=False)
    else:
        evals = np.zeros(0)
        wz = np.zeros((d, 0))
    wz = _fix_signs(_unit_columns(wz))
    w_raw = _fix_signs(_unit_columns(wz / scale[:, None]))

    class_means = np.vstack([x[y == c].mean(axis=0) for c in classes])
    return LdaModel(
        classes=classes,
        class_means=class_means,
        global_mean=x.mean(axis=0),
        projection=w_raw,
        scaled_projection=wz,
        eigenvalues=evals,
        class_priors=counts / n,
        offset=offset,
        scale=scale,
        pooled_covariance_inverse=cho_solve((chol, True), np.eye(d)) * max(n - k, 1),
        feature_ids=matrix.feature_ids,
    )


def predict(model: LdaModel, features) -> int:
    """Class with the largest linear Gaussian discriminant."""
    v = features.values if isinstance(features, FeatureVector) else np.asarray(features)
    if v.ndim != 1:
        raise LdaError("predict takes a single feature vector; use predict_many for batches")
    return int(model.predict_many(v[None, :])[0])


def accuracy(model: LdaModel, test: FeatureMatrix) -> float:
    if test.n == 0:
        raise ValueError("empty test set")
    return float(np.mean(model.predict_many(test.values) == test.labels))
