"""Verilog dataset construction: ingest, filter, dedup, compile-gate,
label, layer, and emit a loss-weighted curriculum manifest."""

__version__ = "0.1.0"
