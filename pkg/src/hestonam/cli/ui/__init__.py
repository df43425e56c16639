"""Rich presentation helpers."""
