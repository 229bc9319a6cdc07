"""HTM-based anomaly detection and failure prediction for cloud KPIs."""

__version__ = "0.1.0"
