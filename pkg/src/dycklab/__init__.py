"""Information-cost trade-offs for Augmented Index and streaming Dyck(2) checkers."""

__version__ = "0.1.0"
