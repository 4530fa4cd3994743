"""Labelling, switch-aware counter instrumentation and coverage reports."""
