"""Speech emotion recognition experiments on ShEMO-format corpora."""

__version__ = "0.1.0"
