"""Hybrid cluster-based anomaly detection for imbalanced IoT flow data."""
