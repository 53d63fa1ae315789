"""Secrecy-energy-efficient precoding for multi-user MISO visible light links."""

__version__ = "0.1.0"
