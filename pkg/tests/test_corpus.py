import hashlib
import json
import os
import wave

import numpy as np
import pytest

from spectroprosodic._validation import InputError
from spectroprosodic.corpus import (
    AudioFormatError,
    ExtractionConfig,
    SpeakerDataset,
    Utterance,
    UtteranceFeatures,
    build_speaker_dataset,
    extract_utterance,
    load_audio,
    load_manifest,
    prepare_sequences,
    synth_fixture,
    write_wav,
)
from spectroprosodic.prosody import read_f0_labels
from spectroprosodic.quantization import GmmQuantizer


def digest_tree(root):
    h = hashlib.sha256()
    for dirpath, _, files in sorted(os.walk(root)):
        for name in sorted(files):
            path = os.path.join(dirpath, name)
            h.update(os.path.relpath(path, root).encode())
            with open(path, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    return load_manifest(synth_fixture(root, seed=7, num_utterances=2, duration_s=1.0))


class TestAudio:
    def test_roundtrip(self, tmp_path):
        x = np.sin(np.arange(2000) / 10) * 0.5
        write_wav(tmp_path / "a.wav", x, 20000)
        sig = load_audio(tmp_path / "a.wav", 20000)
        assert sig.sample_rate == 20000
        np.testing.assert_allclose(sig.samples, x, atol=1 / 32767)

    def test_rate_mismatch(self, tmp_path):
        write_wav(tmp_path / "a.wav", np.zeros(100), 16000)
        with pytest.raises(AudioFormatError) as info:
            load_audio(tmp_path / "a.wav", 20000)
        assert info.value.code == AudioFormatError.RATE_MISMATCH

    def test_stereo(self, tmp_path):
        with wave.open(str(tmp_path / "s.wav"), "wb") as wf:
            wf.setnchannels(2)
            wf.setsampwidth(2)
            wf.setframerate(20000)
            wf.writeframes(b"\0" * 400)
        with pytest.raises(AudioFormatError) as info:
            load_audio(tmp_path / "s.wav", 20000)
        assert info.value.code == AudioFormatError.CHANNELS

    def test_not_wav(self, tmp_path):
        (tmp_path / "x.wav").write_bytes(b"garbage")
        with pytest.raises(AudioFormatError) as info:
            load_audio(tmp_path / "x.wav", 20000)
        assert info.value.code == AudioFormatError.UNSUPPORTED


class TestFixture:
    def test_layout(self, tmp_path):
        manifest = synth_fixture(tmp_path, seed=7, num_utterances=2, duration_s=1.0)
        corpus = load_manifest(manifest)
        assert sorted(corpus) == ["female", "male"]
        for utts in corpus.values():
            assert len(utts) == 2
            for u in utts:
                assert os.path.exists(u.audio_path) and os.path.exists(u.label_path)

    def test_byte_identical(self, tmp_path):
        synth_fixture(tmp_path / "a", seed=7, num_utterances=2, duration_s=1.0)
        synth_fixture(tmp_path / "b", seed=7, num_utterances=2, duration_s=1.0)
        synth_fixture(tmp_path / "c", seed=8, num_utterances=2, duration_s=1.0)
        assert digest_tree(tmp_path / "a") == digest_tree(tmp_path / "b")
        assert digest_tree(tmp_path / "a") != digest_tree(tmp_path / "c")

    def test_labels_consistent_with_audio(self, corpus):
        utt = corpus["female"][0]
        times, f0 = read_f0_labels(utt.label_path)
        voiced = f0 > 0
        assert np.all((f0[voiced] > 150) & (f0[voiced] < 270))
        # label spacing inside voiced runs equals the local period
        t, v = times[voiced], f0[voiced]
        gaps = np.diff(t)
        inside = gaps < 0.02
        np.testing.assert_allclose(gaps[inside], 1 / v[1:][inside], rtol=0.05)

    @pytest.mark.parametrize("fraction", [0.6, 0.4])
    def test_voiced_fraction(self, tmp_path, fraction):
        manifest = synth_fixture(tmp_path, seed=3, num_utterances=3, duration_s=2.0,
                                 voiced_fraction=fraction, speakers=("male",))
        ds = build_speaker_dataset(load_manifest(manifest)["male"])
        assert abs(ds.voicing.mean() - fraction) <= 0.1


class TestDataset:
    def test_frame_counts(self, corpus):
        ds = build_speaker_dataset(corpus["female"])
        assert ds.frame_counts == [99, 99]
        assert len(ds) == 198
        assert ds.mfcc.shape == (198, 13)

    def test_order_independent(self, corpus):
        a = build_speaker_dataset(corpus["male"])
        b = build_speaker_dataset(corpus["male"][::-1])
        assert a.utterance_ids == b.utterance_ids
        np.testing.assert_array_equal(a.mfcc, b.mfcc)

    def test_empty(self):
        with pytest.raises(InputError):
            build_speaker_dataset([])

    def test_mixed_speakers(self, corpus):
        with pytest.raises(InputError):
            build_speaker_dataset(corpus["male"] + corpus["female"])

    def test_missing_labels_named(self, corpus, tmp_path):
        u = corpus["male"][0]
        broken = Utterance("zz9", "male", u.audio_path, str(tmp_path / "missing.f0"))
        with pytest.raises(InputError, match="zz9"):
            build_speaker_dataset([broken])

    def test_feature_csv_roundtrip(self, corpus, tmp_path):
        feats = extract_utterance(corpus["female"][0])
        feats.write_csv(tmp_path / "f.csv")
        header = (tmp_path / "f.csv").read_text().splitlines()[0].split(",")
        assert header[:3] == ["frame_index", "center_time_s", "log_energy"]
        assert header[3:16] == [f"mfcc_{z}" for z in range(1, 14)]
        assert header[16:] == ["f0_hz", "voicing"]
        back = UtteranceFeatures.read_csv(tmp_path / "f.csv")
        np.testing.assert_array_equal(back.mfcc, feats.mfcc)
        np.testing.assert_array_equal(back.f0, feats.f0)
        feats.write_jsonl(tmp_path / "f.jsonl")
        first = json.loads((tmp_path / "f.jsonl").read_text().splitlines()[0])
        assert list(first)[:4] == ["frame_index", "center_time_s", "log_energy", "mfcc_1"]


def toy_dataset(f0):
    f0 = np.asarray(f0, dtype=float)
    n = f0.shape[0]
    rng = np.random.default_rng(0)
    return SpeakerDataset("female", ["u"], [n], rng.normal(0, 3, n), rng.standard_normal((n, 13)),
                          f0, (f0 > 0).astype(int))


class TestPrepareSequences:
    f0 = [0, 100, 0, 120, 130, 0, 0, 140, 150, 160]

    @pytest.fixture
    def quantizer(self):
        return GmmQuantizer(2, speaker="female").fit(toy_dataset(self.f0).mfcc)

    def test_voiced_only(self, quantizer):
        ds = toy_dataset(self.f0)
        for feature in ("f0", "energy"):
            x, y = prepare_sequences(ds, feature, quantizer)
            assert len(x) == len(y) == 6
        x, y = prepare_sequences(ds, "f0", quantizer)
        np.testing.assert_array_equal(x.symbols, quantizer.predict(ds.mfcc[ds.f0 > 0]))
        assert y.alphabet_size == 6

    def test_voicing_keeps_all(self, quantizer):
        x, y = prepare_sequences(toy_dataset(self.f0), "voicing", quantizer)
        assert len(x) == len(y) == 10

    def test_all_unvoiced(self, quantizer):
        with pytest.raises(InputError):
            prepare_sequences(toy_dataset(np.zeros(10)), "f0", quantizer)

    def test_speaker_mismatch(self, quantizer):
        ds = toy_dataset(self.f0)
        ds.speaker = "male"
        with pytest.raises(InputError):
            prepare_sequences(ds, "voicing", quantizer)

    def test_unknown_feature(self, quantizer):
        with pytest.raises(InputError):
            prepare_sequences(toy_dataset(self.f0), "duration", quantizer)


def test_extraction_config_rate_check(corpus):
    with pytest.raises(InputError):
        extract_utterance(corpus["male"][0], ExtractionConfig(sample_rate_hz=16000))
