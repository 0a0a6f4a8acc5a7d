"""Options commands."""
