"""Market commands."""
