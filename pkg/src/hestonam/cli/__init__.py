"""Command-line interface for hestonam."""
