"""Signature-kernel two-sample testing of stochastic-process samples."""
