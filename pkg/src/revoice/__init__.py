"""Speech restoration toolkit: bandwidth extension and enhancement."""

__version__ = "0.1.0"
