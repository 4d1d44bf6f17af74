"""Vertical-handover policy engine and mobility simulator for hybrid LiFi/WiFi attocells."""

from lifiho.core import EwmaFilter, MetricSample, ewma_update, rng_stream

__version__ = "0.1.0"

__all__ = ["EwmaFilter", "MetricSample", "ewma_update", "rng_stream", "__version__"]
