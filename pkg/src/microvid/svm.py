"""RBF soft-margin SVM trained by SMO with second-order working-set selection."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    d = np.sum(A**2, axis=1)[:, None] - 2.0 * A @ B.T + np.sum(B**2, axis=1)[None, :]
    return np.exp(-gamma * np.maximum(d, 0.0))


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int = 1_000_000):
    """Solve min ½αᵀQα − Σα s.t. yᵀα = 0, 0 ≤ α ≤ C with Q = yyᵀ∘K.

    Working pairs are chosen as in LIBSVM (maximal violating ``i``, then the
    ``j`` with the largest second-order gain).  Returns ``(alpha, rho,
    n_iter)``; the decision function is ``Σ αᵢyᵢK(xᵢ,x) − rho``.
    """
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    while it < max_iter:
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, yG, -np.inf)))
        m = yG[i]
        if m - np.min(np.where(low, yG, np.inf)) < tol:
            break
        b = m - yG
        cand = low & (b > 0)
        a = QD[i] + QD - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        j = int(np.argmin(np.where(cand, -(b * b) / a, np.inf)))
        it += 1

        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(QD[i] + QD[j] + 2.0 * Q[i, j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = max(QD[i] + QD[j] - 2.0 * Q[i, j], TAU)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        G += Q[i] * (ni - ai) + Q[j] * (nj - aj)
        alpha[i], alpha[j] = ni, nj
    return alpha, _rho(alpha, y, G, C), it


def _rho(alpha, y, G, C) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yG[free].mean())
    at_upper = alpha >= C
    # bounds on rho from the KKT conditions of bounded variables
    ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (~at_upper & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    if not np.isfinite(ub):
        return float(lb)
    if not np.isfinite(lb):
        return float(ub)
    return float((ub + lb) / 2.0)


def platt_fit(f: np.ndarray, y: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Sigmoid ``1 / (1 + exp(A f + B))`` fitted by Newton's method with backtracking.

    Follows the numerically careful variant of Lin, Lin and Weng, with
    regularized targets ``(N+ + 1)/(N+ + 2)`` and ``1/(N- + 2)``.
    """
    pos = y > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    t = np.where(pos, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    A, B = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    sigma, min_step, eps = 1e-12, 1e-10, 1e-5

    def objective(A, B):
        fApB = f * A + B
        return float(np.sum(np.where(fApB >= 0, t * fApB + np.log1p(np.exp(-np.abs(fApB))),
                                     (t - 1) * fApB + np.log1p(np.exp(-np.abs(fApB))))))

    fval = objective(A, B)
    for _ in range(max_iter):
        fApB = f * A + B
        e = np.exp(-np.abs(fApB))
        p = np.where(fApB >= 0, e / (1 + e), 1 / (1 + e))
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + np.sum(f * f * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(f * d2)
        d1 = t - p
        g1, g2 = np.sum(f * d1), np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        else:
            break
    return float(A), float(B)


def sigmoid_score(f, A: float, B: float) -> np.ndarray:
    fApB = np.asarray(f, dtype=np.float64) * A + B
    e = np.exp(-np.abs(fApB))
    return np.where(fApB >= 0, e / (1 + e), 1 / (1 + e))


class KernelSVC(ClassifierMixin, BaseEstimator):
    """Binary RBF SVM with Platt-calibrated scores.

    ``gamma=None`` means ``1 / n_features``.  ``predict_proba`` returns the
    calibrated probability of ``classes_[1]`` in the second column.
    """

    def __init__(self, C=1.0, gamma=None, tol=1e-3, max_iter=1_000_000):
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise ValueError(f"need exactly two classes to train, got {len(self.classes_)}")
        ys = np.where(y == self.classes_[1], 1.0, -1.0)
        self.n_features_in_ = X.shape[1]
        self.gamma_ = 1.0 / X.shape[1] if self.gamma is None else float(self.gamma)
        K = rbf_kernel(X, X, self.gamma_)
        alpha, rho, self.n_iter_ = smo(K, ys, float(self.C), self.tol, self.max_iter)
        sv = alpha > 0
        self.support_ = np.nonzero(sv)[0]
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (alpha * ys)[sv]
        self.intercept_ = -rho
        f = K[:, sv] @ self.dual_coef_ - rho
        self.prob_a_, self.prob_b_ = platt_fit(f, ys)
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "dual_coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        if len(self.dual_coef_) == 0:
            return np.full(X.shape[0], self.intercept_)
        return rbf_kernel(X, self.support_vectors_, self.gamma_) @ self.dual_coef_ + self.intercept_

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, self.classes_[1], self.classes_[0])

    def predict_proba(self, X) -> np.ndarray:
        p = sigmoid_score(self.decision_function(X), self.prob_a_, self.prob_b_)
        return np.column_stack([1.0 - p, p])

    def to_dict(self) -> dict:
        check_is_fitted(self, "dual_coef_")
        return {
            "C": float(self.C),
            "gamma": self.gamma_,
            "tol": float(self.tol),
            "classes": self.classes_.tolist(),
            "support_vectors": self.support_vectors_.tolist(),
            "dual_coef": self.dual_coef_.tolist(),
            "intercept": self.intercept_,
            "prob_a": self.prob_a_,
            "prob_b": self.prob_b_,
            "n_features": self.n_features_in_,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSVC":
        m = cls(C=d["C"], gamma=d["gamma"], tol=d["tol"])
        m.classes_ = np.array(d["classes"])
        m.gamma_ = float(d["gamma"])
        m.n_features_in_ = int(d["n_features"])
        m.support_vectors_ = np.array(d["support_vectors"], dtype=np.float64).reshape(-1, m.n_features_in_)
        m.dual_coef_ = np.array(d["dual_coef"], dtype=np.float64)
        m.intercept_ = float(d["intercept"])
        m.prob_a_, m.prob_b_ = float(d["prob_a"]), float(d["prob_b"])
        return m
