"""Hardware-free lab for metadata analysis of encrypted VoLTE traffic."""

__version__ = "0.1.0"
