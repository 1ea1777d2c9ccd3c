"""Distributed subgradient method with double averaging."""
