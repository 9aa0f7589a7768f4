"""CLI commands for multisub."""
