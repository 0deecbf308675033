"""Shared utilities: configuration, random streams, telemetry and result handling."""
