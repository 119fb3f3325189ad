"""Streaming ETL for full bitcoin-style blockchain data."""

__version__ = "0.1.0"
