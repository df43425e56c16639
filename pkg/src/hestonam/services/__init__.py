"""Pricing pipeline orchestration."""
