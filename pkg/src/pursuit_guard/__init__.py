"""Decentralized interception, coverage and obstacle-navigation laws for planar robot teams."""

__version__ = "0.1.0"
