"""qaforge: curation and evaluation toolkit for QA fine-tuning datasets."""

__version__ = "0.1.0"
