"""Pricing of reusable resources in Erlang loss systems: dynamic vs static policies."""

__version__ = "0.1.0"
