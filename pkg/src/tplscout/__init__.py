"""Database-less identification of third-party library origins."""

__version__ = "0.1.0"
