"""Packet-level simulator and cost model for fast vertical handoffs."""

__version__ = "0.1.0"
