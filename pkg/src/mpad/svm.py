"""RBF-kernel support vector machine trained from scratch.

The dual problem

    maximize  sum(a) - 1/2 * sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t.      0 <= a_i <= C,  sum_i a_i y_i = 0

is solved by pairwise coordinate steps on the maximal-violating pair
(first index wins ties, which makes training deterministic for a fixed
sample order). Decision values are then passed through a sigmoid
1 / (1 + exp(A f + B)) fitted on the training decisions by regularized
maximum likelihood, giving attack scores in [0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import FormatError, MpadError
from .features import CHANNELS, FeatureVector

MODEL_VERSION = 1

KKT_TOLERANCE = 1e-3
SV_ALPHA_THRESHOLD = 1e-8

LABEL_SIGNS = {"bona_fide": -1, "attack": 1}


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> float:
    """exp(-gamma * ||a - b||^2)"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"kernel input dims differ: {a.shape} vs {b.shape}")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    d = a - b
    return math.exp(-gamma * float(np.dot(d, d)))


def _kernel_matrix(x: np.ndarray, z: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(z * z, axis=1)[None, :]
        - 2.0 * (x @ z.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def resolve_gamma(x: np.ndarray, gamma) -> float:
    """Resolve gamma="scale" to 1 / (dim * variance of all feature values)."""
    if isinstance(gamma, str):
        if gamma != "scale":
            raise ValueError(f"gamma must be a positive number or 'scale', got {gamma!r}")
        var = float(x.var())
        return 1.0 / (x.shape[1] * var) if var > 0 else 1.0
    g = float(gamma)
    if g <= 0:
        raise ValueError("gamma must be positive")
    return g


@dataclass(frozen=True)
class TrainDiagnostics:
    dual_objective: float
    iterations: int
    kkt_gap: float
    training_accuracy: float


@dataclass(frozen=True, eq=False)
class TrainedDetector:
    """Dual SVM solution plus sigmoid score calibration."""

    support_vectors: np.ndarray      # (m, dim)
    dual_coefficients: np.ndarray    # (m,), alpha_i * y_i
    bias: float
    gamma: float
    C: float
    calibration: tuple[float, float]  # sigmoid (A, B)
    feature_channel: str
    feature_dim: int
    diagnostics: TrainDiagnostics | None = field(default=None, repr=False)

    def __post_init__(self):
        sv = np.asarray(self.support_vectors, dtype=np.float64)
        coef = np.asarray(self.dual_coefficients, dtype=np.float64)
        if sv.ndim != 2 or sv.shape[1] != self.feature_dim:
            raise ValueError(f"support vectors must be (m, {self.feature_dim})")
        if coef.shape != (sv.shape[0],):
            raise ValueError("one dual coefficient per support vector required")
        if not (np.all(np.isfinite(sv)) and np.all(np.isfinite(coef))):
            raise ValueError("model parameters must be finite")
        if self.gamma <= 0 or self.C <= 0:
            raise ValueError("gamma and C must be positive")
        if np.any(np.abs(coef) > self.C * (1 + 1e-9)):
            raise ValueError("dual coefficients exceed the box constraint")
        if abs(float(coef.sum())) > 1e-6 * max(1.0, self.C):
            raise ValueError("dual coefficients do not sum to zero")
        if self.feature_channel not in CHANNELS:
            raise ValueError(f"unknown feature channel {self.feature_channel!r}")
        sv = sv.copy()
        coef = coef.copy()
        sv.flags.writeable = False
        coef.flags.writeable = False
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coefficients", coef)

    @property
    def n_support(self) -> int:
        return self.support_vectors.shape[0]


def _smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int):
    """Maximal-violating-pair SMO on a precomputed kernel matrix."""
    n = y.size
    Q = K * np.outer(y, y)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of (1/2) a'Qa - sum(a)
    iterations = 0
    gap = np.inf
    for iterations in range(1, max_iter + 1):
        viol = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.argmax(np.where(up, viol, -np.inf)))
        j = int(np.argmin(np.where(low, viol, np.inf)))
        gap = viol[i] - viol[j]
        if gap <= tol:
            break

        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 0:
            eta = 1e-12
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / eta
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            else:
                if ai < 0:
                    ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            else:
                if aj > C:
                    aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / eta
            s = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if s > C:
                if ai > C:
                    ai, aj = C, s - C
            else:
                if aj < 0:
                    aj, ai = 0.0, s
            if s > C:
                if aj > C:
                    aj, ai = C, s - C
            else:
                if ai < 0:
                    ai, aj = 0.0, s
        alpha[i], alpha[j] = ai, aj
        G += Q[:, i] * (ai - old_i) + Q[:, j] * (aj - old_j)
    return alpha, max(gap, 0.0), iterations


def _bias_from_solution(alpha: np.ndarray, y: np.ndarray, u: np.ndarray, C: float) -> float:
    atol = min(SV_ALPHA_THRESHOLD, C / 2)
    free = (alpha > atol) & (alpha < C - atol)
    residual = y - u
    if free.any():
        return float(residual[free].mean())
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    hi = residual[up].max() if up.any() else 0.0
    lo = residual[low].min() if low.any() else 0.0
    return float((hi + lo) / 2.0)


def _sigmoid_fit(decisions: np.ndarray, y: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Regularized ML fit of P(attack | f) = 1 / (1 + exp(A f + B)).

    Newton iterations with backtracking on the cross-entropy against the
    smoothed targets (N+ + 1)/(N+ + 2) and 1/(N- + 2); the smoothing is the
    regularizer.
    """
    f = np.asarray(decisions, dtype=np.float64)
    pos = y > 0
    n_pos = int(pos.sum())
    n_neg = f.size - n_pos
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(pos, hi, lo)

    def objective(a: float, b: float) -> float:
        fab = a * f + b
        pos_f = fab >= 0
        out = np.empty_like(fab)
        out[pos_f] = t[pos_f] * fab[pos_f] + np.log1p(np.exp(-fab[pos_f]))
        out[~pos_f] = (t[~pos_f] - 1.0) * fab[~pos_f] + np.log1p(np.exp(fab[~pos_f]))
        return float(np.sum(out))

    def sigmoid(fab: np.ndarray) -> np.ndarray:
        # P(attack | f) = 1 / (1 + exp(fab)), computed without overflow
        out = np.empty_like(fab)
        pos_f = fab >= 0
        e = np.exp(-fab[pos_f])
        out[pos_f] = e / (1.0 + e)
        out[~pos_f] = 1.0 / (1.0 + np.exp(fab[~pos_f]))
        return out

    A = 0.0
    B = math.log((n_neg + 1.0) / (n_pos + 1.0))
    fval = objective(A, B)
    sigma = 1e-12
    for _ in range(max_iter):
        fab = A * f + B
        p = sigmoid(fab)
        q = 1.0 - p
        d2 = p * q
        h11 = float(np.dot(f * f, d2)) + sigma
        h22 = float(np.sum(d2)) + sigma
        h21 = float(np.dot(f, d2))
        d1 = t - p
        g1 = float(np.dot(f, d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            newA, newB = A + step * dA, B + step * dB
            newf = objective(newA, newB)
            if newf < fval + 1e-4 * step * gd:
                A, B, fval = newA, newB, newf
                break
            step /= 2.0
        else:
            break
    return A, B


def train(
    samples: Iterable[tuple[FeatureVector, str]],
    C: float = 1.0,
    gamma="scale",
    tol: float = KKT_TOLERANCE,
    max_iter: int | None = None,
) -> TrainedDetector:
    """Train the detector on (feature, label) pairs.

    Labels are 'bona_fide' (-1) or 'attack' (+1); both classes must be
    present. Training is single-threaded and deterministic for a fixed
    sample order.
    """
    samples = list(samples)
    if not samples:
        raise MpadError("no training samples")
    channel = samples[0][0].channel
    dim = samples[0][0].dim
    x = np.empty((len(samples), dim), dtype=np.float64)
    y = np.empty(len(samples), dtype=np.float64)
    for k, (feat, label) in enumerate(samples):
        if feat.channel != channel or feat.dim != dim:
            raise MpadError("training features must share one channel and dimension")
        if label not in LABEL_SIGNS:
            raise MpadError(f"unknown training label {label!r}")
        x[k] = feat.values
        y[k] = LABEL_SIGNS[label]
    if not np.all(np.isfinite(x)):
        raise MpadError("training features contain non-finite values")
    if np.all(y > 0) or np.all(y < 0):
        raise MpadError("training requires at least one sample of each class")
    if C <= 0:
        raise MpadError("C must be positive")

    g = resolve_gamma(x, gamma)
    K = _kernel_matrix(x, x, g)
    if max_iter is None:
        max_iter = max(10_000, 200 * len(samples))
    alpha, gap, iterations = _smo(K, y, float(C), tol, max_iter)

    coef = alpha * y
    u = K @ coef
    bias = _bias_from_solution(alpha, y, u, float(C))
    decisions = u + bias
    accuracy = float(np.mean(np.where(decisions >= 0, 1.0, -1.0) == y))
    A, B = _sigmoid_fit(decisions, y)
    objective = float(alpha.sum() - 0.5 * np.dot(coef, u))

    keep = alpha > SV_ALPHA_THRESHOLD
    return TrainedDetector(
        support_vectors=x[keep],
        dual_coefficients=coef[keep],
        bias=bias,
        gamma=g,
        C=float(C),
        calibration=(A, B),
        feature_channel=channel,
        feature_dim=dim,
        diagnostics=TrainDiagnostics(
            dual_objective=objective,
            iterations=iterations,
            kkt_gap=gap,
            training_accuracy=accuracy,
        ),
    )


def decision_value(model: TrainedDetector, feature: FeatureVector) -> float:
    """Uncalibrated decision f(x); positive means attack-like."""
    if feature.channel != model.feature_channel:
        raise MpadError(
            f"feature channel {feature.channel!r} does not match model channel {model.feature_channel!r}"
        )
    if feature.dim != model.feature_dim:
        raise MpadError(f"feature dim {feature.dim} does not match model dim {model.feature_dim}")
    k = _kernel_matrix(feature.values[None, :], model.support_vectors, model.gamma)[0]
    return float(np.dot(model.dual_coefficients, k) + model.bias)


def calibrated_score(model: TrainedDetector, decision: float) -> float:
    a, b = model.calibration
    fab = a * decision + b
    if fab >= 0:
        e = math.exp(-fab)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(fab))


def score(model: TrainedDetector, feature: FeatureVector) -> float:
    """Calibrated attack score in [0, 1]; higher means more attack-like."""
    return calibrated_score(model, decision_value(model, feature))


# ---------------------------------------------------------------------------
# model file: versioned JSON document


def save_model(model: TrainedDetector, path) -> None:
    if model.n_support == 0:
        raise MpadError("refusing to save a model with zero support vectors")
    doc = {
        "version": MODEL_VERSION,
        "channel": model.feature_channel,
        "dim": model.feature_dim,
        "gamma": model.gamma,
        "C": model.C,
        "bias": model.bias,
        "calibration": {"A": model.calibration[0], "B": model.calibration[1]},
        "support_vectors": [[float(v) for v in row] for row in model.support_vectors],
        "dual_coefficients": [float(v) for v in model.dual_coefficients],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path) -> TrainedDetector:
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"model file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{p}: malformed model file: {exc}") from None
    if not isinstance(doc, dict):
        raise FormatError(f"{p}: malformed model file: expected an object")
    version = doc.get("version")
    if version != MODEL_VERSION:
        raise FormatError(f"{p}: unsupported model version {version!r} (expected {MODEL_VERSION})")
    try:
        calibration = (float(doc["calibration"]["A"]), float(doc["calibration"]["B"]))
        model = TrainedDetector(
            support_vectors=np.array(doc["support_vectors"], dtype=np.float64),
            dual_coefficients=np.array(doc["dual_coefficients"], dtype=np.float64),
            bias=float(doc["bias"]),
            gamma=float(doc["gamma"]),
            C=float(doc["C"]),
            calibration=calibration,
            feature_channel=str(doc["channel"]),
            feature_dim=int(doc["dim"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{p}: malformed model file: {exc}") from None
    return model
