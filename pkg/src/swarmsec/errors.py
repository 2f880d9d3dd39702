class SwarmSecError(Exception):
    """Base class for package errors."""


class ConfigError(SwarmSecError, ValueError):
    """Invalid or unsatisfiable configuration."""


class TrainingError(SwarmSecError, RuntimeError):
    """Numerical failure during learning (non-finite loss or gradient)."""


class CheckpointError(SwarmSecError, IOError):
    """Checkpoint file missing, corrupted or inconsistent with its config."""
