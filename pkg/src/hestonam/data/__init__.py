"""Parameter models and the boundary store."""
