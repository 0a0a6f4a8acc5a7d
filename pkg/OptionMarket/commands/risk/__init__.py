"""Risk commands."""
