"""Random linear network coding schemes on a time-slotted lossy-link simulator."""

__version__ = "0.1.0"
