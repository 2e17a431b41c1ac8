"""Aggregate spread pulse modulation: sparse pulse trains hidden by large-TBP shaping."""

__version__ = "0.1.0"
