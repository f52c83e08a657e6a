"""Flow-based intrusion detection: benign-only detector ensemble with
weighted voting, pseudo-label refinement, and local/global explanations."""

__version__ = "0.1.0"
