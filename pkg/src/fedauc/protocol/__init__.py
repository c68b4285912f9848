"""Secure AUC protocols: semi-honest and verifiable (malicious-aggregator)."""
