"""Paired-comparison ranking: Bradley-Terry MLE, grouped lasso and empirical Bayes."""

__version__ = "0.3.0"
