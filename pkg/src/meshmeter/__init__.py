"""meshmeter: peer-to-peer mesh RTT/jitter measurement suite."""

__version__ = "0.1.0"
