"""Corpus toolkit for multilingual polarization detection datasets.

Augmentation, deterministic assembly and validation sampling, shared-task
scoring, and an appraisal-feature classifier, all seeded and reproducible.
"""

__version__ = "0.1.0"
