"""Turning continuous features into discrete symbols.

Scalar features (log-energy, F0) are rounded to the nearest integer. MFCC
vectors go through a diagonal-covariance Gaussian mixture fitted by EM and
are replaced with the index of their highest-posterior component.
"""

import csv
import json
import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import InputError, check_symbols

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
SOURCES = ("mfcc_id", "energy", "f0", "voicing")


def round_quantize(value):
    """Nearest integer, ties away from zero. Works element-wise on arrays."""
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InputError("cannot quantize non-finite values")
    out = (np.sign(arr) * np.floor(np.abs(arr) + 0.5)).astype(np.int64)
    return out if arr.ndim else int(out)


@dataclass(frozen=True)
class QuantizedSequence:
    symbols: np.ndarray
    alphabet_size: int
    source: str = ""
    speaker: str = ""

    def __post_init__(self):
        symbols = check_symbols(self.symbols)
        if symbols.min() < 0 or symbols.max() >= self.alphabet_size:
            raise InputError("symbols must lie in [0, alphabet_size)")
        object.__setattr__(self, "symbols", symbols)

    def __len__(self):
        return self.symbols.shape[0]


def compact_alphabet(symbols, source="", speaker=""):
    """Relabel raw integer symbols as 0..G-1 in order of first appearance."""
    raw = check_symbols(symbols)
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty_like(first)
    rank[np.argsort(first, kind="stable")] = np.arange(first.shape[0])
    return QuantizedSequence(rank[inverse.reshape(-1)], int(first.shape[0]), source, speaker)


def write_sequence_csv(path, seq, frame_index=None):
    if frame_index is None:
        frame_index = np.arange(len(seq))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_index", "symbol"])
        for i, s in zip(frame_index, seq.symbols):
            writer.writerow([int(i), int(s)])


class RoundingQuantizer(TransformerMixin, BaseEstimator):
    """Stateless rounding of a scalar feature column to integers."""

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return round_quantize(X)


def _log_gaussians(X, means, variances):
    """(n, K) diagonal Gaussian log-densities."""
    log_det = np.sum(np.log(variances), axis=1)
    quad = np.empty((X.shape[0], means.shape[0]))
    for j in range(means.shape[0]):
        diff = X - means[j]
        quad[:, j] = (diff * diff) @ (1.0 / variances[j])
    return -0.5 * (X.shape[1] * np.log(2.0 * np.pi) + log_det + quad)


def _logsumexp_rows(a):
    top = a.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(a - top).sum(axis=1, keepdims=True))).ravel()


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[i] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[i]) ** 2, axis=1))
    return centers


class GmmQuantizer(BaseEstimator):
    """Diagonal Gaussian mixture used as an MFCC vector quantizer.

    Parameters
    ----------
    n_components : int, default=40
        Number of mixture components (codebook size).
    random_state : int, default=0
        Seed for k-means++ initialisation and empty-component re-seeding.
    max_iter : int, default=200
    tol : float, default=1e-6
        EM stops once the mean log-likelihood improves by less than
        ``tol * |previous|``.
    var_floor : float, default=1e-6
        Variance floor, relative to the global per-dimension variance.
    speaker : str, optional
        Speaker tag. A tagged model refuses to quantize data for another speaker.

    Attributes
    ----------
    weights_, means_, variances_ : ndarray
        Mixture parameters.
    log_likelihood_history_ : list of float
        Mean per-vector log-likelihood at every E-step.
    train_log_likelihood_ : float
        Last entry of the history; the fitted parameters achieve it.
    reseeded_ : list of (iteration, component)
    """

    def __init__(self, n_components=40, random_state=0, max_iter=200, tol=1e-6,
                 var_floor=1e-6, speaker=None):
        self.n_components = n_components
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol = tol
        self.var_floor = var_floor
        self.speaker = speaker

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        k = int(self.n_components)
        if k < 1:
            raise InputError("n_components must be >= 1")
        n_distinct = np.unique(X, axis=0).shape[0]
        if n_distinct < k:
            raise InputError(f"need at least {k} distinct vectors, got {n_distinct}")
        rng = np.random.default_rng(self.random_state)
        n, d = X.shape
        global_var = X.var(axis=0)
        floor = np.maximum(self.var_floor * global_var, np.finfo(np.float64).tiny)

        weights = np.full(k, 1.0 / k)
        means = X[rng.integers(n)][None, :].copy() if k == 1 else _kmeanspp(X, k, rng)
        variances = np.tile(np.maximum(global_var, floor), (k, 1))

        history = []
        self.reseeded_ = []
        converged = False
        for it in range(int(self.max_iter)):
            log_joint = _log_gaussians(X, means, variances) + np.log(weights)
            log_norm = _logsumexp_rows(log_joint)
            history.append(float(log_norm.mean()))
            if it > 0 and history[-1] - history[-2] < self.tol * abs(history[-2]):
                converged = True
                break
            resp = np.exp(log_joint - log_norm[:, None])
            nk = resp.sum(axis=0)
            for j in np.flatnonzero(nk < 10 * np.finfo(np.float64).eps * n):
                point = int(rng.integers(n))
                logger.warning("component %d emptied at iteration %d; re-seeding at vector %d",
                               j, it, point)
                self.reseeded_.append((it, int(j)))
                resp[:, j] = 0.0
                resp[point, :] = 0.0
                resp[point, j] = 1.0
                nk = resp.sum(axis=0)
            weights = nk / n
            means = (resp.T @ X) / nk[:, None]
            variances = np.empty_like(means)
            for j in range(k):
                diff = X - means[j]
                variances[j] = (resp[:, j] @ (diff * diff)) / nk[j]
            variances = np.maximum(variances, floor)
        else:
            # max_iter reached: report the likelihood of the final parameters
            log_joint = _log_gaussians(X, means, variances) + np.log(weights)
            history.append(float(_logsumexp_rows(log_joint).mean()))

        self.weights_ = weights
        self.means_ = means
        self.variances_ = variances
        self.log_likelihood_history_ = history
        self.train_log_likelihood_ = history[-1]
        self.n_iter_ = len(history)
        self.converged_ = converged
        self.n_features_in_ = d
        return self

    def _check_speaker(self, speaker):
        if speaker is not None and self.speaker is not None and speaker != self.speaker:
            raise InputError(f"model fitted for speaker {self.speaker!r}, got data for {speaker!r}")

    def _log_joint(self, X):
        check_is_fitted(self, "means_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.means_.shape[1]:
            raise InputError(f"expected {self.means_.shape[1]} features, got {X.shape[1]}")
        return _log_gaussians(X, self.means_, self.variances_) + np.log(self.weights_)

    def predict(self, X, speaker=None):
        """Index of the highest-posterior component; ties go to the lowest index."""
        self._check_speaker(speaker)
        return np.argmax(self._log_joint(X), axis=1)

    def predict_proba(self, X, speaker=None):
        self._check_speaker(speaker)
        log_joint = self._log_joint(X)
        return np.exp(log_joint - _logsumexp_rows(log_joint)[:, None])

    def score_samples(self, X):
        return _logsumexp_rows(self._log_joint(X))

    def quantize(self, X, speaker=None):
        """Component ids wrapped as a :class:`QuantizedSequence` over K symbols."""
        ids = self.predict(X, speaker)
        return QuantizedSequence(ids, int(self.n_components), "mfcc_id",
                                 speaker if speaker is not None else (self.speaker or ""))

    def to_dict(self):
        check_is_fitted(self, "means_")
        return {
            "version": MODEL_FORMAT_VERSION,
            "speaker": self.speaker,
            "K": int(self.n_components),
            "seed": self.random_state,
            "weights": self.weights_.tolist(),
            "means": self.means_.tolist(),
            "variances": self.variances_.tolist(),
            "train_log_likelihood": self.train_log_likelihood_,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("version") != MODEL_FORMAT_VERSION:
            raise InputError(f"unsupported model version {data.get('version')!r}")
        model = cls(n_components=data["K"], random_state=data["seed"], speaker=data["speaker"])
        model.weights_ = np.asarray(data["weights"], dtype=np.float64)
        model.means_ = np.asarray(data["means"], dtype=np.float64)
        model.variances_ = np.asarray(data["variances"], dtype=np.float64)
        model.train_log_likelihood_ = data["train_log_likelihood"]
        model.n_features_in_ = model.means_.shape[1]
        if model.means_.shape != model.variances_.shape or model.weights_.shape[0] != data["K"]:
            raise InputError("model arrays have inconsistent shapes")
        return model

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
