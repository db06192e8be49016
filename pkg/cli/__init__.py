"""Command-line surface for the checker."""
