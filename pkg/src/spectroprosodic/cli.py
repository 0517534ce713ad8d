"""``spt`` command line: fixture, extract, train-quantizer, test, report."""

import argparse
import dataclasses
import json
import logging
import os
import sys
import zlib
from dataclasses import dataclass, field

import numpy as np

from ._validation import InputError
from .corpus import (
    FEATURES,
    ExtractionConfig,
    SpeakerDataset,
    UtteranceFeatures,
    extract_utterance,
    load_manifest,
    prepare_sequences,
    synth_fixture,
)
from .perm_test import DEFAULT_TRIALS, TestReport, run_test
from .quantization import GmmQuantizer, write_sequence_csv

logger = logging.getLogger("spectroprosodic")

# keys that change where or how fast results are produced, never what they are
_NON_RESULT_KEYS = ("out", "threads")


@dataclass
class RunConfig:
    manifest: str = ""
    out: str = "spt-out"
    sample_rate_hz: float = 20000
    frame_ms: float = 20.0
    overlap: float = 0.5
    nfft: int = 512
    num_mel_filters: int = 23
    num_mfcc: int = 13
    preemphasis: float = 0.97
    max_gap_s: float = 0.033
    components: int = 40
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    features: list = field(default_factory=lambda: list(FEATURES))
    speakers: list = field(default_factory=lambda: ["all"])
    threads: int = 1

    def validate(self):
        if not 0 <= self.overlap < 1:
            raise InputError("overlap must be in [0, 1)")
        if self.frame_ms <= 0 or self.sample_rate_hz <= 0:
            raise InputError("frame_ms and sample_rate_hz must be positive")
        if self.components < 1 or self.trials < 1 or self.threads < 1:
            raise InputError("components, trials and threads must be >= 1")
        bad = [f for f in self.features if f not in FEATURES]
        if bad:
            raise InputError(f"unknown features {bad}; choose from {list(FEATURES)}")
        return self

    @property
    def extraction(self):
        names = {f.name for f in dataclasses.fields(ExtractionConfig)}
        return ExtractionConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def fingerprint_dict(self):
        data = dataclasses.asdict(self)
        for key in _NON_RESULT_KEYS:
            data.pop(key)
        return data


def derive_seed(seed, *names):
    """Stable 32-bit seed for one pipeline stage (e.g. ``"gmm", "female"``)."""
    keys = [int(seed)] + [zlib.crc32(str(n).encode()) for n in names]
    return int(np.random.SeedSequence(keys).generate_state(1)[0])


def _select(requested, available, what):
    if requested in (None, "all", ["all"]):
        return list(available)
    requested = [requested] if isinstance(requested, str) else list(requested)
    missing = [r for r in requested if r not in available]
    if missing:
        raise InputError(f"unknown {what}: {missing}; available: {list(available)}")
    return requested


def _feature_dir(cfg, speaker):
    return os.path.join(cfg.out, "features", speaker)


def _model_path(cfg, speaker):
    return os.path.join(cfg.out, "models", f"{speaker}.json")


def _extract_speaker(cfg, speaker, utterances, fmt="csv"):
    """Write per-utterance caches; returns the list of failure messages."""
    os.makedirs(_feature_dir(cfg, speaker), exist_ok=True)
    extraction = cfg.extraction
    extractor = extraction.extractor().fit()
    failures = []
    for utt in sorted(utterances, key=lambda u: u.id):
        try:
            feats = extract_utterance(utt, extraction, extractor)
        except (InputError, OSError) as exc:
            failures.append(f"{speaker}/{utt.id}: {exc}")
            continue
        base = os.path.join(_feature_dir(cfg, speaker), utt.id)
        if fmt in ("csv", "both"):
            feats.write_csv(base + ".csv")
        if fmt in ("jsonl", "both"):
            feats.write_jsonl(base + ".jsonl")
    return failures


def _load_dataset(cfg, speaker, utterances):
    paths = [os.path.join(_feature_dir(cfg, speaker), u.id + ".csv") for u in utterances]
    if not all(os.path.exists(p) for p in paths):
        failures = _extract_speaker(cfg, speaker, utterances)
        if failures:
            raise InputError("; ".join(failures))
    feats = [UtteranceFeatures.read_csv(p, u.id) for p, u in zip(paths, utterances)]
    return SpeakerDataset.concatenate(speaker, feats)


def _train(cfg, speaker, dataset):
    model = GmmQuantizer(n_components=cfg.components, random_state=derive_seed(cfg.seed, "gmm", speaker),
                         speaker=speaker).fit(dataset.mfcc)
    os.makedirs(os.path.dirname(_model_path(cfg, speaker)), exist_ok=True)
    model.save(_model_path(cfg, speaker))
    seq_dir = os.path.join(cfg.out, "sequences")
    os.makedirs(seq_dir, exist_ok=True)
    write_sequence_csv(os.path.join(seq_dir, f"{speaker}_mfcc_id.csv"),
                       model.quantize(dataset.mfcc, speaker))
    logger.info("%s: GMM K=%d, %d iterations, mean log-likelihood %.4f",
                speaker, cfg.components, model.n_iter_, model.train_log_likelihood_)
    return model


def cmd_fixture(args, cfg):
    path = synth_fixture(cfg.out, seed=cfg.seed, num_utterances=args.utterances,
                         duration_s=args.duration, voiced_fraction=args.voiced_fraction,
                         sample_rate=int(cfg.sample_rate_hz))
    print(path)
    return 0


def cmd_extract(args, cfg):
    corpus = load_manifest(cfg.manifest)
    failures = []
    for speaker in _select(cfg.speakers, corpus, "speakers"):
        failures += _extract_speaker(cfg, speaker, corpus[speaker], args.format)
    for msg in failures:
        print(f"error: {msg}", file=sys.stderr)
    return 1 if failures else 0


def cmd_train_quantizer(args, cfg):
    corpus = load_manifest(cfg.manifest)
    for speaker in _select(cfg.speakers, corpus, "speakers"):
        utts = sorted(corpus[speaker], key=lambda u: u.id)
        _train(cfg, speaker, _load_dataset(cfg, speaker, utts))
    return 0


def cmd_test(args, cfg):
    corpus = load_manifest(cfg.manifest)
    report_dir = os.path.join(cfg.out, "reports")
    os.makedirs(report_dir, exist_ok=True)
    rows = []
    for speaker in _select(cfg.speakers, corpus, "speakers"):
        utts = sorted(corpus[speaker], key=lambda u: u.id)
        dataset = _load_dataset(cfg, speaker, utts)
        if os.path.exists(_model_path(cfg, speaker)):
            model = GmmQuantizer.load(_model_path(cfg, speaker))
        else:
            model = _train(cfg, speaker, dataset)
        for feature in cfg.features:
            x, y = prepare_sequences(dataset, feature, model)
            report = run_test(x, y, cfg.trials, derive_seed(cfg.seed, "perm", speaker, feature),
                              speaker=speaker, feature=feature, n_jobs=cfg.threads,
                              config=cfg.fingerprint_dict())
            stem = os.path.join(report_dir, f"{speaker}_{feature}")
            report.save(stem + ".json")
            report.null.write_histogram_csv(stem + "_hist.csv")
            rows.append(report)
    print(f"{'speaker':<10} {'feature':<8} {'N':>7} {'c_test':>10} {'null mean':>10} "
          f"{'p_count':>8}  p-value")
    for r in rows:
        print(f"{r.speaker:<10} {r.feature:<8} {r.n_frames:>7d} {r.c_test:>10.3f} "
              f"{r.null_summary['mean']:>10.3f} {r.p_count:>8d}  {r.p_value_text}")
    return 0


def cmd_report(args, cfg):
    for path in args.reports:
        r = TestReport.load(path)
        s = r.null_summary
        print(f"{path}\n  speaker {r.speaker}, feature {r.feature}, {r.n_frames} frames, "
              f"estimator {r.estimator}\n"
              f"  C_test = {r.c_test:.4f}  (H = {r.h_test_bits:.4f} bits)\n"
              f"  null over D={r.D}: min {s['min']:.4f}, mean {s['mean']:.4f} "
              f"+/- {s['std']:.4f}, max {s['max']:.4f}\n"
              f"  {r.p_count} null samples <= C_test; {r.p_value_text} "
              f"(bound {r.p_value_bound:.3g})")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig keys")
    common.add_argument("--manifest", help="corpus manifest JSON")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="top-level seed (env SPT_SEED overrides)")
    common.add_argument("--trials", type=int, help="number of permutations D")
    common.add_argument("--components", type=int, help="GMM components K")
    common.add_argument("--feature", choices=list(FEATURES) + ["all"])
    common.add_argument("--speaker", help="speaker id or 'all'")
    common.add_argument("--threads", type=int, help="worker threads for permutations")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="spt", description="Test MFCC / prosody independence with permutation nulls.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("fixture", parents=[common], help="write a synthetic corpus")
    p.add_argument("--utterances", type=int, default=4)
    p.add_argument("--duration", type=float, default=3.0, help="seconds per utterance")
    p.add_argument("--voiced-fraction", type=float, default=0.6)
    p.set_defaults(func=cmd_fixture)
    p = sub.add_parser("extract", parents=[common], help="compute per-utterance features")
    p.add_argument("--format", choices=["csv", "jsonl", "both"], default="csv")
    p.set_defaults(func=cmd_extract)
    p = sub.add_parser("train-quantizer", parents=[common], help="fit per-speaker GMMs")
    p.set_defaults(func=cmd_train_quantizer)
    p = sub.add_parser("test", parents=[common], help="run permutation tests")
    p.set_defaults(func=cmd_test)
    p = sub.add_parser("report", parents=[common], help="pretty-print JSON reports")
    p.add_argument("reports", nargs="+")
    p.set_defaults(func=cmd_report)
    return parser


def resolve_config(args, environ=os.environ):
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(json.load(fh))
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    for key in ("manifest", "out", "seed", "trials", "components", "threads"):
        if getattr(args, key) is not None:
            values[key] = getattr(args, key)
    if args.feature is not None:
        values["features"] = list(FEATURES) if args.feature == "all" else [args.feature]
    if args.speaker is not None:
        values["speakers"] = [args.speaker]
    if environ.get("SPT_SEED"):
        values["seed"] = int(environ["SPT_SEED"])
    cfg = RunConfig(**values).validate()
    if args.command in ("extract", "train-quantizer", "test") and not cfg.manifest:
        raise InputError("--manifest (or 'manifest' in --config) is required")
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except (InputError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
