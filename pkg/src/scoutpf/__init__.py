"""Scout particle filtering on truncated Taylor polynomial maps."""

__version__ = "0.1.0"
