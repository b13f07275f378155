"""Longitudinal cohort model, selection, labels, splitting, synthesis and file I/O."""

from hmtl.cohort.io import read_cohort, write_cohort
from hmtl.cohort.labels import (
    build_labels,
    classify_and_trim,
    forward_fill_diagnosis,
    normalize_diagnosis,
    select_cohort,
    select_subject,
)
from hmtl.cohort.split import split_cohort, split_sizes
from hmtl.cohort.synth import SynthConfig, generate_synthetic_cohort
from hmtl.cohort.types import Cohort, LabeledSequence, Subject, Visit

__all__ = [
    "Cohort",
    "LabeledSequence",
    "Subject",
    "SynthConfig",
    "Visit",
    "build_labels",
    "classify_and_trim",
    "forward_fill_diagnosis",
    "generate_synthetic_cohort",
    "normalize_diagnosis",
    "read_cohort",
    "select_cohort",
    "select_subject",
    "split_cohort",
    "split_sizes",
    "write_cohort",
]
