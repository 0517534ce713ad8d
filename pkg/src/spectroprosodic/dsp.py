"""Short-time features: framing, log-energy and MFCCs.

The MFCC chain is pre-emphasis, Hamming window, zero-padded magnitude DFT,
a unit-peak triangular mel filterbank over the non-redundant half of the
spectrum, and a DCT of the log filterbank outputs that keeps coefficients
1..13 (the zeroth, level-like coefficient is not produced).
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ConfigurationError, InputError, check_frames, check_signal

ENERGY_FLOOR = 1e-12
FILTERBANK_FLOOR = 1e-12


@dataclass(frozen=True)
class SignalBuffer:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise InputError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", check_signal(self.samples))


@dataclass(frozen=True)
class FramedSignal:
    """Frames stacked row-wise with their offsets and centre times."""

    frames: np.ndarray
    start_index: np.ndarray
    center_time: np.ndarray

    def __len__(self):
        return self.frames.shape[0]


def frame_signal(signal, frame_len, hop, sample_rate=None):
    """Cut a signal into overlapping frames, discarding a trailing partial frame.

    Parameters
    ----------
    signal : SignalBuffer or array_like
        The signal. A bare array needs ``sample_rate``.
    frame_len, hop : int
        Frame length and hop, in samples.
    sample_rate : float, optional
        Only used when ``signal`` is not a :class:`SignalBuffer`.

    Returns
    -------
    FramedSignal
    """
    if isinstance(signal, SignalBuffer):
        samples, fs = signal.samples, signal.sample_rate
    else:
        if sample_rate is None:
            raise ConfigurationError("sample_rate is required for a bare array")
        samples, fs = check_signal(signal), float(sample_rate)
    frame_len, hop = int(frame_len), int(hop)
    if frame_len < 1:
        raise ConfigurationError("frame_len must be >= 1")
    if not 1 <= hop <= frame_len:
        raise ConfigurationError("hop must satisfy 1 <= hop <= frame_len")
    n = samples.shape[0]
    if n < frame_len:
        raise InputError(f"signal of {n} samples is shorter than one frame ({frame_len})")
    count = (n - frame_len) // hop + 1
    starts = np.arange(count, dtype=np.int64) * hop
    idx = starts[:, None] + np.arange(frame_len)[None, :]
    centers = (starts + frame_len / 2.0) / fs
    return FramedSignal(samples[idx], starts, centers)


def log_energy(frame, floor=ENERGY_FLOOR):
    """Natural log of the frame's sum of squares, floored at ``ln(floor)``.

    Accepts one frame or a 2-D stack of frames.
    """
    frame = np.asarray(frame, dtype=np.float64)
    energy = np.sum(frame * frame, axis=-1)
    return np.log(np.maximum(energy, floor))


def pre_emphasis(frame, alpha=0.97):
    """First-order high-pass ``s[n] - alpha*s[n-1]``; the first sample passes through."""
    if not 0 <= alpha < 1:
        raise ConfigurationError(f"pre-emphasis alpha must be in [0, 1), got {alpha}")
    frame = np.asarray(frame, dtype=np.float64)
    out = frame.copy()
    out[..., 1:] -= alpha * frame[..., :-1]
    return out


def hamming(length):
    if length < 2:
        raise ConfigurationError("window length must be >= 2")
    n = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))


def apply_window(frame):
    frame = np.asarray(frame, dtype=np.float64)
    return frame * hamming(frame.shape[-1])


def magnitude_spectrum(frame, nfft=512):
    """Unnormalised |DFT| of the frame zero-padded to ``nfft`` points (all bins)."""
    frame = np.asarray(frame, dtype=np.float64)
    if nfft < frame.shape[-1]:
        raise ConfigurationError(f"nfft={nfft} is shorter than the frame ({frame.shape[-1]})")
    return np.abs(np.fft.fft(frame, n=nfft, axis=-1))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular filters over DFT bins ``0..nfft//2``.

    ``weights`` has shape (num_filters, nfft//2 + 1); ``boundary_bins`` holds the
    num_filters + 2 bin indices the triangles are anchored on.
    """

    weights: np.ndarray
    center_freqs_hz: np.ndarray
    boundary_bins: np.ndarray
    sample_rate: float
    nfft: int

    @property
    def num_filters(self):
        return self.weights.shape[0]


def build_mel_filterbank(sample_rate=20000, nfft=512, num_filters=23, f_low=0.0, f_high=None):
    """Unit-peak triangular filters whose edges are equidistant on the mel scale.

    Edge frequencies are snapped to the nearest DFT bin; filter ``h`` rises
    from edge ``h-1`` to 1 at edge ``h`` and falls back to 0 at edge ``h+1``.

    Raises
    ------
    ConfigurationError
        If the frequency range is invalid or two edges land on the same bin.
    """
    if f_high is None:
        f_high = sample_rate / 2.0
    if not 0 <= f_low < f_high <= sample_rate / 2.0:
        raise ConfigurationError(
            f"need 0 <= f_low < f_high <= fs/2, got f_low={f_low}, f_high={f_high}"
        )
    if num_filters < 1:
        raise ConfigurationError("num_filters must be >= 1")
    mel_edges = np.linspace(hz_to_mel(f_low), hz_to_mel(f_high), num_filters + 2)
    hz_edges = mel_to_hz(mel_edges)
    bins = np.rint(hz_edges * nfft / sample_rate).astype(np.int64)
    if np.any(np.diff(bins) <= 0):
        raise ConfigurationError(
            f"{num_filters} filters need finer DFT resolution than nfft={nfft} at fs={sample_rate}"
        )
    n_bins = nfft // 2 + 1
    weights = np.zeros((num_filters, n_bins))
    k = np.arange(n_bins)
    for h in range(num_filters):
        lo, mid, hi = bins[h], bins[h + 1], bins[h + 2]
        rise = (k - lo) / (mid - lo)
        fall = (hi - k) / (hi - mid)
        weights[h] = np.clip(np.minimum(rise, fall), 0.0, None)
    weights.setflags(write=False)
    return MelFilterbank(weights, hz_edges[1:-1], bins, float(sample_rate), int(nfft))


def mel_energies(spectrum, fb, floor=FILTERBANK_FLOOR):
    """Weighted sums ``fb_h = sum_l W_h[l] F_l`` floored at ``floor``.

    ``spectrum`` may be the full ``nfft``-point magnitude or just its first
    ``nfft//2 + 1`` bins; the redundant upper half is ignored.
    """
    spectrum = np.asarray(spectrum, dtype=np.float64)
    n_bins = fb.weights.shape[1]
    if spectrum.shape[-1] not in (n_bins, fb.nfft):
        raise InputError(
            f"spectrum has {spectrum.shape[-1]} bins, filterbank expects {n_bins} or {fb.nfft}"
        )
    out = spectrum[..., :n_bins] @ fb.weights.T
    return np.maximum(out, floor)


def dct_basis(num_inputs, num_coeffs=13):
    """Rows ``z = 1..num_coeffs`` of ``cos(pi*z*(h-0.5)/H)`` for ``h = 1..H``."""
    z = np.arange(1, num_coeffs + 1)[:, None]
    h = np.arange(1, num_inputs + 1)[None, :]
    return np.cos(np.pi * z * (h - 0.5) / num_inputs)


def dct_mfcc(filterbank_energies, num_coeffs=13):
    fb = np.asarray(filterbank_energies, dtype=np.float64)
    if np.any(fb <= 0):
        raise InputError("filterbank energies must be positive; floor them first")
    return np.log(fb) @ dct_basis(fb.shape[-1], num_coeffs).T


class MfccExtractor(TransformerMixin, BaseEstimator):
    """Turn raw frames into 13 MFCCs each.

    ``fit`` only builds the filterbank, so the transformer is usable in a
    pipeline; ``transform`` maps an (n_frames, frame_len) array to
    (n_frames, n_mfcc).

    Parameters
    ----------
    sample_rate : float, default=20000
    nfft : int, default=512
    n_mels : int, default=23
    n_mfcc : int, default=13
    preemphasis : float, default=0.97
    f_low, f_high : float
        Filterbank frequency range; ``f_high=None`` means Nyquist.
    """

    def __init__(self, sample_rate=20000, nfft=512, n_mels=23, n_mfcc=13,
                 preemphasis=0.97, f_low=0.0, f_high=None):
        self.sample_rate = sample_rate
        self.nfft = nfft
        self.n_mels = n_mels
        self.n_mfcc = n_mfcc
        self.preemphasis = preemphasis
        self.f_low = f_low
        self.f_high = f_high

    def fit(self, X=None, y=None):
        if X is not None:
            X = check_frames(X, min_length=2)
            if X.shape[1] > self.nfft:
                raise ConfigurationError(f"frames of {X.shape[1]} samples exceed nfft={self.nfft}")
            self.n_features_in_ = X.shape[1]
        self.filterbank_ = build_mel_filterbank(
            self.sample_rate, self.nfft, self.n_mels, self.f_low, self.f_high
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "filterbank_")
        X = check_frames(X, min_length=2)
        emphasized = pre_emphasis(X, self.preemphasis)
        spectrum = magnitude_spectrum(apply_window(emphasized), self.nfft)
        return dct_mfcc(mel_energies(spectrum, self.filterbank_), self.n_mfcc)


def extract_features(signal, frame_ms=20.0, overlap=0.5, extractor=None):
    """Frame ``signal`` and return (FramedSignal, log_energy, mfcc).

    Log-energy is taken on the raw frame, before any MFCC preprocessing.
    """
    if extractor is None:
        extractor = MfccExtractor(sample_rate=signal.sample_rate)
    if extractor.sample_rate != signal.sample_rate:
        raise ConfigurationError(
            f"extractor expects {extractor.sample_rate} Hz, signal is {signal.sample_rate} Hz"
        )
    frame_len = int(round(frame_ms * 1e-3 * signal.sample_rate))
    hop = int(round(frame_len * (1.0 - overlap)))
    framed = frame_signal(signal, frame_len, hop)
    if not hasattr(extractor, "filterbank_"):
        extractor.fit()
    return framed, log_energy(framed.frames), extractor.transform(framed.frames)
