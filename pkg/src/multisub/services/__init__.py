"""Shared services for multisub."""
