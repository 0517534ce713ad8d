"""Discrete entropy estimation with the Chao-Shen coverage-adjusted estimator.

All entropies are in bits.
"""

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from ._validation import InputError, check_paired, check_symbols, dense_codes

ESTIMATORS = ("chao-shen", "plugin")


@dataclass(frozen=True)
class CountTable:
    counts: np.ndarray

    @classmethod
    def from_counts(cls, counts):
        if isinstance(counts, CountTable):
            return counts
        if isinstance(counts, Mapping):
            counts = list(counts.values())
        arr = np.asarray(counts)
        if arr.ndim != 1 or (arr.size and not np.all(arr == np.round(arr))) or np.any(arr < 0):
            raise InputError("counts must be a 1-D array of non-negative integers")
        return cls(arr.astype(np.int64))

    @classmethod
    def from_symbols(cls, symbols):
        _, counts = np.unique(check_symbols(symbols), return_counts=True)
        return cls(counts.astype(np.int64))

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def singletons(self):
        return int(np.count_nonzero(self.counts == 1))


def empirical_pmf(symbols):
    """Relative frequency of each distinct symbol, in sorted symbol order.

    Returns
    -------
    values : ndarray
        The distinct symbols.
    p : ndarray
        Their empirical probabilities; sums to 1.
    """
    symbols = check_symbols(symbols)
    values, counts = np.unique(symbols, return_counts=True)
    return values, counts / symbols.shape[0]


def _effective_singletons(m, n):
    # all-singleton samples would give zero coverage; use n - 1 instead
    return np.where(m == n, n - 1, m)


def good_turing_pmf(counts):
    """Coverage-discounted frequencies ``(1 - m/n) * c/n``.

    ``m`` is the number of symbols seen exactly once. When every symbol is a
    singleton, ``m`` is replaced with ``n - 1`` so the estimate stays non-zero.
    """
    table = CountTable.from_counts(counts)
    n = table.n
    if n < 1:
        raise InputError("need at least one observation")
    m = _effective_singletons(table.singletons, n)
    coverage = 1.0 - m / n
    return coverage * table.counts / n


def chao_shen_entropy(counts):
    """Chao-Shen entropy estimate (bits) from a table of symbol counts.

    Each observed symbol contributes
    ``-p log2 p / (1 - (1 - p)**n)`` with ``p`` the Good-Turing probability.

    Examples
    --------
    >>> round(chao_shen_entropy([2, 2]), 6)
    1.066667
    """
    table = CountTable.from_counts(counts)
    n = table.n
    p = good_turing_pmf(table)[table.counts > 0]
    terms = -p * np.log2(p) / (1.0 - (1.0 - p) ** n)
    return float(max(terms.sum(), 0.0))


def plugin_entropy(counts):
    """Maximum-likelihood entropy, no bias correction."""
    table = CountTable.from_counts(counts)
    c = table.counts[table.counts > 0]
    p = c / c.sum()
    return float(max(-(p * np.log2(p)).sum(), 0.0))


class JointCounter:
    """Precomputed conditioning cells for repeated H(Y|X) evaluations.

    ``x`` is fixed; :meth:`entropy` takes any Y sequence over the same frames,
    which is how the permutation loop re-evaluates shuffled copies cheaply.
    """

    def __init__(self, x, y_alphabet_size, estimator="chao-shen"):
        if estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
        self.x_codes, self.n_cells = dense_codes(check_symbols(x, "x sequence"))
        self.n_y = int(y_alphabet_size)
        self.N = self.x_codes.shape[0]
        self.cell_sizes = np.bincount(self.x_codes, minlength=self.n_cells).astype(np.float64)
        self.cell_weights = self.cell_sizes / self.N
        self.estimator = estimator
        self._base = self.x_codes * self.n_y

    def joint_counts(self, y_codes):
        """Dense (n_cells, n_y) contingency table."""
        flat = np.bincount(self._base + y_codes, minlength=self.n_cells * self.n_y)
        return flat.reshape(self.n_cells, self.n_y)

    def entropy(self, y_codes):
        flat = np.bincount(self._base + y_codes, minlength=self.n_cells * self.n_y)
        nz = np.flatnonzero(flat)
        c = flat[nz].astype(np.float64)
        cell = nz // self.n_y
        n_j = self.cell_sizes[cell]
        p = c / n_j
        if self.estimator == "plugin":
            terms = -p * np.log2(p)
        else:
            m = np.bincount(cell, weights=(c == 1).astype(np.float64), minlength=self.n_cells)
            m = _effective_singletons(m, self.cell_sizes)
            p = (1.0 - m[cell] / n_j) * p
            terms = -p * np.log2(p) / (1.0 - (1.0 - p) ** n_j)
        h_cell = np.bincount(cell, weights=terms, minlength=self.n_cells)
        return float(max(np.dot(self.cell_weights, h_cell), 0.0))


def conditional_entropy(x_seq, y_seq, estimator="chao-shen"):
    """Estimate H(Y|X) as the X-frequency-weighted average of per-cell entropies.

    Parameters
    ----------
    x_seq, y_seq : array_like of int or QuantizedSequence
        Paired symbol sequences of equal length.
    estimator : {"chao-shen", "plugin"}
        Per-cell entropy estimator. ``"plugin"`` is the uncorrected
        maximum-likelihood form.
    """
    x, y = check_paired(x_seq, y_seq)
    y_codes, n_y = dense_codes(y)
    return JointCounter(x, n_y, estimator).entropy(y_codes)


def effective_cardinality(h):
    """``2 ** h`` for an entropy ``h`` in bits."""
    if np.any(np.asarray(h) < 0):
        raise InputError("entropy must be non-negative")
    return np.power(2.0, h)
