"""Frame-synchronous F0 contours from glottal-closure F0 labels."""

from dataclasses import dataclass

import numpy as np

from ._validation import InputError

DEFAULT_MAX_GAP = 0.033


@dataclass(frozen=True)
class F0Contour:
    f0_per_frame: np.ndarray
    voicing_per_frame: np.ndarray

    def __len__(self):
        return self.f0_per_frame.shape[0]


def _check_labels(times, f0):
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    f0 = np.asarray(f0, dtype=np.float64).reshape(-1)
    if times.shape != f0.shape:
        raise InputError("label times and f0 values differ in length")
    if np.any(times < 0) or np.any(f0 < 0):
        raise InputError("label times and f0 values must be non-negative")
    if np.any(np.diff(times) <= 0):
        raise InputError("label times must be strictly increasing")
    return times, f0


def voiced_regions(times, f0, max_gap=DEFAULT_MAX_GAP):
    """Group labels into voiced runs.

    A run is a maximal stretch of consecutive labels with positive F0 whose
    spacing never exceeds ``max_gap`` seconds. A zero-F0 label ends a run.

    Returns
    -------
    list of (start_index, stop_index)
        Half-open index ranges into the label arrays; the region spans
        ``times[start]`` to ``times[stop - 1]``.
    """
    if not max_gap > 0:
        raise InputError("max_gap must be positive")
    times, f0 = _check_labels(times, f0)
    regions = []
    start = None
    for i in range(times.shape[0]):
        if f0[i] <= 0:
            if start is not None:
                regions.append((start, i))
                start = None
            continue
        if start is not None and times[i] - times[i - 1] > max_gap:
            regions.append((start, i))
            start = None
        if start is None:
            start = i
    if start is not None:
        regions.append((start, times.shape[0]))
    return regions


def voiced_intervals(times, f0, max_gap=DEFAULT_MAX_GAP):
    times = np.asarray(times, dtype=np.float64)
    return [(times[a], times[b - 1]) for a, b in voiced_regions(times, f0, max_gap)]


def interpolate_f0(times, f0, frame_times, max_gap=DEFAULT_MAX_GAP):
    """Linearly interpolate labelled F0 onto frame times inside voiced regions.

    Frames outside every region get 0 Hz.
    """
    times, f0 = _check_labels(times, f0)
    frame_times = np.asarray(frame_times, dtype=np.float64).reshape(-1)
    if np.any(np.diff(frame_times) < 0):
        raise InputError("frame times must be non-decreasing")
    out = np.zeros(frame_times.shape[0])
    for a, b in voiced_regions(times, f0, max_gap):
        t0, t1 = times[a], times[b - 1]
        inside = (frame_times >= t0) & (frame_times <= t1)
        if np.any(inside):
            out[inside] = np.interp(frame_times[inside], times[a:b], f0[a:b])
    return F0Contour(out, voicing_index(out))


def voicing_index(f0):
    """1 where F0 is non-zero, else 0."""
    arr = np.asarray(f0, dtype=np.float64)
    if np.any(arr < 0):
        raise InputError("F0 must be non-negative")
    bits = (arr != 0).astype(np.int64)
    return bits if arr.ndim else int(bits)


def read_f0_labels(path):
    """Read a ``time_seconds f0_hz`` label file; ``#`` lines are comments."""
    times, values = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected 'time f0', got {line!r}")
            times.append(float(parts[0]))
            values.append(float(parts[1]))
    times, values = _check_labels(times, values)
    return times, values


def write_f0_labels(path, times, f0):
    with open(path, "w") as fh:
        fh.write("# time_seconds f0_hz\n")
        for t, v in zip(times, f0):
            fh.write(f"{t:.6f} {v:.3f}\n")
