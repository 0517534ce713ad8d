"""Corpus ingestion, per-speaker feature assembly and synthetic fixtures.

Corpus layout
-------------
A manifest is a JSON object mapping each speaker to a list of utterances::

    {"female": [{"id": "f01", "audio": "female/f01.wav", "labels": "female/f01.f0"}]}

Relative paths resolve against the manifest's directory. Audio is mono 16-bit
PCM WAV; label files hold ``time_seconds f0_hz`` pairs, one per line.
"""

import csv
import json
import logging
import os
import wave
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import InputError
from .dsp import MfccExtractor, SignalBuffer, extract_features
from .prosody import interpolate_f0, read_f0_labels, write_f0_labels
from .quantization import compact_alphabet, round_quantize

logger = logging.getLogger(__name__)

FEATURES = ("f0", "energy", "voicing")
VOICED_ONLY = ("f0", "energy")


class AudioFormatError(InputError):
    """Audio file rejected; ``code`` is one of the ``*_CODE`` constants."""

    UNSUPPORTED = "unsupported-format"
    RATE_MISMATCH = "rate-mismatch"
    CHANNELS = "multi-channel"

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class ExtractionConfig:
    sample_rate_hz: float = 20000
    frame_ms: float = 20.0
    overlap: float = 0.5
    nfft: int = 512
    num_mel_filters: int = 23
    num_mfcc: int = 13
    preemphasis: float = 0.97
    max_gap_s: float = 0.033

    def extractor(self):
        return MfccExtractor(sample_rate=self.sample_rate_hz, nfft=self.nfft,
                             n_mels=self.num_mel_filters, n_mfcc=self.num_mfcc,
                             preemphasis=self.preemphasis)


@dataclass(frozen=True)
class Utterance:
    id: str
    speaker: str
    audio_path: str
    label_path: str


def load_audio(path, expected_rate):
    """Read a mono 16-bit PCM WAV as floats in [-1, 1)."""
    try:
        with wave.open(os.fspath(path), "rb") as wf:
            channels, width, rate = wf.getnchannels(), wf.getsampwidth(), wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise AudioFormatError(AudioFormatError.UNSUPPORTED, f"{path}: {exc}") from exc
    if width != 2:
        raise AudioFormatError(AudioFormatError.UNSUPPORTED,
                               f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if channels != 1:
        raise AudioFormatError(AudioFormatError.CHANNELS, f"{path}: {channels} channels, need mono")
    if rate != expected_rate:
        raise AudioFormatError(AudioFormatError.RATE_MISMATCH,
                               f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return SignalBuffer(samples, float(rate))


def write_wav(path, samples, sample_rate):
    pcm = np.clip(np.round(np.asarray(samples) * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(os.fspath(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate))
        wf.writeframes(pcm.tobytes())


def load_manifest(path):
    """Return ``{speaker: [Utterance, ...]}`` with absolute paths."""
    root = os.path.dirname(os.path.abspath(path))
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InputError(f"{path}: manifest must map speakers to utterance lists")
    corpus = {}
    for speaker, entries in data.items():
        utts = []
        for entry in entries:
            try:
                uid, audio, labels = entry["id"], entry["audio"], entry["labels"]
            except (KeyError, TypeError) as exc:
                raise InputError(f"{path}: bad entry for speaker {speaker!r}: {entry!r}") from exc
            utts.append(Utterance(str(uid), speaker, os.path.join(root, audio),
                                  os.path.join(root, labels)))
        corpus[speaker] = utts
    return corpus


@dataclass
class UtteranceFeatures:
    """Frame-level features of one utterance."""

    id: str
    center_time: np.ndarray
    log_energy: np.ndarray
    mfcc: np.ndarray
    f0: np.ndarray
    voicing: np.ndarray

    def __len__(self):
        return self.center_time.shape[0]

    @property
    def columns(self):
        n_mfcc = self.mfcc.shape[1]
        return (["frame_index", "center_time_s", "log_energy"]
                + [f"mfcc_{z}" for z in range(1, n_mfcc + 1)] + ["f0_hz", "voicing"])

    def rows(self):
        for i in range(len(self)):
            yield ([i, float(self.center_time[i]), float(self.log_energy[i])]
                   + [float(v) for v in self.mfcc[i]] + [float(self.f0[i]), int(self.voicing[i])])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns)
            writer.writerows([repr(v) if isinstance(v, float) else v for v in row]
                             for row in self.rows())

    def write_jsonl(self, path):
        cols = self.columns
        with open(path, "w") as fh:
            for row in self.rows():
                fh.write(json.dumps(dict(zip(cols, row))) + "\n")

    @classmethod
    def read_csv(cls, path, uid=None):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            table = np.array([[float(v) for v in row] for row in reader], dtype=np.float64)
        n_mfcc = sum(1 for h in header if h.startswith("mfcc_"))
        if table.size == 0:
            table = np.zeros((0, len(header)))
        if uid is None:
            uid = os.path.splitext(os.path.basename(path))[0]
        return cls(uid, table[:, 1], table[:, 2], table[:, 3:3 + n_mfcc],
                   table[:, 3 + n_mfcc], table[:, 4 + n_mfcc].astype(np.int64))


def extract_utterance(utt, config=ExtractionConfig(), extractor=None):
    signal = load_audio(utt.audio_path, config.sample_rate_hz)
    if extractor is None:
        extractor = config.extractor().fit()
    framed, energy, mfcc = extract_features(signal, config.frame_ms, config.overlap, extractor)
    times, f0 = read_f0_labels(utt.label_path)
    contour = interpolate_f0(times, f0, framed.center_time, config.max_gap_s)
    return UtteranceFeatures(utt.id, framed.center_time, energy, mfcc,
                             contour.f0_per_frame, contour.voicing_per_frame)


@dataclass
class SpeakerDataset:
    """Concatenated frames of one speaker, utterances in id order."""

    speaker: str
    utterance_ids: list
    frame_counts: list
    log_energy: np.ndarray
    mfcc: np.ndarray
    f0: np.ndarray
    voicing: np.ndarray

    def __len__(self):
        return self.log_energy.shape[0]

    @classmethod
    def concatenate(cls, speaker, features):
        features = sorted(features, key=lambda f: f.id)
        if not features:
            raise InputError(f"speaker {speaker!r} has no utterances")
        return cls(
            speaker,
            [f.id for f in features],
            [len(f) for f in features],
            np.concatenate([f.log_energy for f in features]),
            np.concatenate([f.mfcc for f in features]),
            np.concatenate([f.f0 for f in features]),
            np.concatenate([f.voicing for f in features]),
        )


def build_speaker_dataset(utterances, config=ExtractionConfig()):
    """Extract every utterance of one speaker and concatenate in id order."""
    utterances = sorted(utterances, key=lambda u: u.id)
    if not utterances:
        raise InputError("no utterances given")
    speakers = {u.speaker for u in utterances}
    if len(speakers) != 1:
        raise InputError(f"utterances mix speakers: {sorted(speakers)}")
    extractor = config.extractor().fit()
    features = []
    for utt in utterances:
        try:
            features.append(extract_utterance(utt, config, extractor))
        except (InputError, OSError) as exc:
            raise InputError(f"utterance {utt.id!r}: {exc}") from exc
    return SpeakerDataset.concatenate(utterances[0].speaker, features)


def prepare_sequences(dataset, feature, quantizer):
    """Quantized MFCC ids and prosodic symbols for one (speaker, feature) test.

    For ``f0`` and ``energy`` the unvoiced frames are dropped from both
    sequences together; ``voicing`` keeps every frame.
    """
    if feature not in FEATURES:
        raise InputError(f"unknown feature {feature!r}; choose from {FEATURES}")
    if quantizer.speaker is not None and quantizer.speaker != dataset.speaker:
        raise InputError(
            f"quantizer belongs to speaker {quantizer.speaker!r}, dataset to {dataset.speaker!r}"
        )
    keep = dataset.f0 != 0 if feature in VOICED_ONLY else np.ones(len(dataset), dtype=bool)
    if not np.any(keep):
        raise InputError(f"speaker {dataset.speaker!r}: no frames left for feature {feature!r}")
    x = quantizer.quantize(dataset.mfcc[keep], speaker=dataset.speaker)
    if feature == "f0":
        raw = round_quantize(dataset.f0[keep])
    elif feature == "energy":
        raw = round_quantize(dataset.log_energy[keep])
    else:
        raw = dataset.voicing[keep]
    y = compact_alphabet(raw, source=feature, speaker=dataset.speaker)
    return x, y


# -- synthetic fixtures ------------------------------------------------------

_SPEAKER_F0 = {"female": 210.0, "male": 115.0}


def _segments(rng, duration, voiced_fraction, per_second=3.0):
    """Alternating (start, stop, voiced) spans starting and ending unvoiced."""
    n_voiced = max(1, int(round(per_second * duration)))
    voiced = rng.dirichlet(np.full(n_voiced, 6.0)) * voiced_fraction * duration
    unvoiced = rng.dirichlet(np.full(n_voiced + 1, 6.0)) * (1.0 - voiced_fraction) * duration
    spans, t = [], 0.0
    for i in range(n_voiced):
        spans.append((t, t + unvoiced[i], False))
        t += unvoiced[i]
        spans.append((t, t + voiced[i], True))
        t += voiced[i]
    spans.append((t, duration, False))
    return spans


def synth_utterance(rng, duration_s, base_f0, voiced_fraction=0.6, sample_rate=20000):
    """Harmonic voiced spans with noise in between, plus glottal-pulse F0 labels.

    Spectral tilt and level follow the F0 trajectory, so the fixture carries a
    real spectral-prosodic dependence.
    """
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    label_t, label_f0 = [], []
    nyquist = sample_rate / 2.0
    for start, stop, voiced in _segments(rng, duration_s, voiced_fraction):
        a, b = int(round(start * sample_rate)), min(int(round(stop * sample_rate)), n)
        if b <= a:
            continue
        if not voiced:
            out[a:b] = 0.02 * rng.standard_normal(b - a)
            if label_t:
                label_t.append(t[a])
                label_f0.append(0.0)
            continue
        tt = t[a:b] - t[a]
        rate, phase0 = rng.uniform(0.5, 2.0), rng.uniform(0, 2 * np.pi)
        f0 = base_f0 * (1.0 + 0.2 * np.sin(2 * np.pi * rate * tt + phase0))
        cycles = np.cumsum(f0) / sample_rate
        rel = (f0 - base_f0) / base_f0
        level = 0.3 * (1.0 + 1.5 * rel)
        tilt = 1.0 - 2.0 * rel
        sig = np.zeros(b - a)
        for h in range(1, int(nyquist * 0.8 // (base_f0 * 1.2)) + 1):
            sig += np.where(h * f0 < nyquist, h ** (-tilt), 0.0) * np.sin(2 * np.pi * h * cycles)
        out[a:b] = level * sig / 4.0 + 0.002 * rng.standard_normal(b - a)
        pulses = np.flatnonzero(np.diff(np.floor(cycles)) > 0) + 1
        for p in pulses:
            label_t.append(t[a + p])
            label_f0.append(float(f0[p]))
    peak = np.max(np.abs(out))
    if peak > 0.9:
        out *= 0.9 / peak
    return out, np.array(label_t), np.array(label_f0)


def synth_fixture(out_dir, seed=7, num_utterances=2, duration_s=1.0, voiced_fraction=0.6,
                  speakers=("female", "male"), sample_rate=20000):
    """Write a small synthetic corpus and its manifest; return the manifest path.

    Output is a deterministic function of the arguments.
    """
    os.makedirs(out_dir, exist_ok=True)
    manifest = {}
    for s_idx, speaker in enumerate(speakers):
        base = _SPEAKER_F0.get(speaker, 150.0)
        os.makedirs(os.path.join(out_dir, speaker), exist_ok=True)
        entries = []
        for u in range(num_utterances):
            rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(s_idx, u)))
            audio, lt, lf = synth_utterance(rng, duration_s, base, voiced_fraction, sample_rate)
            uid = f"{speaker[0]}{u + 1:03d}"
            rel_audio = f"{speaker}/{uid}.wav"
            rel_labels = f"{speaker}/{uid}.f0"
            write_wav(os.path.join(out_dir, rel_audio), audio, sample_rate)
            write_f0_labels(os.path.join(out_dir, rel_labels), lt, lf)
            entries.append({"id": uid, "audio": rel_audio, "labels": rel_labels})
        manifest[speaker] = entries
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def config_dict(config):
    return asdict(config)
