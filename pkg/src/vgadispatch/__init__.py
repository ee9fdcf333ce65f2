"""Station-based mobility-on-demand dispatch and batch fleet simulation."""

__version__ = "0.1.0"
