"""Spectral-prosodic independence testing on MFCC sequences."""

__version__ = "0.1.0"

from .dsp import MelFilterbank, MfccExtractor, build_mel_filterbank, frame_signal
from .info_theory import (
    chao_shen_entropy,
    conditional_entropy,
    effective_cardinality,
    empirical_pmf,
    good_turing_pmf,
)
from .perm_test import NullDistribution, PermutationIndependenceTest, TestReport, run_test
from .prosody import F0Contour, interpolate_f0, voicing_index
from .quantization import GmmQuantizer, QuantizedSequence, RoundingQuantizer

__all__ = [
    "F0Contour",
    "GmmQuantizer",
    "MelFilterbank",
    "MfccExtractor",
    "NullDistribution",
    "PermutationIndependenceTest",
    "QuantizedSequence",
    "RoundingQuantizer",
    "TestReport",
    "build_mel_filterbank",
    "chao_shen_entropy",
    "conditional_entropy",
    "effective_cardinality",
    "empirical_pmf",
    "frame_signal",
    "good_turing_pmf",
    "interpolate_f0",
    "run_test",
    "voicing_index",
]
