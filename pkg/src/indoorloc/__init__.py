"""Indoor localization workbench: fingerprint databases, geomagnetic maps,
random-waypoint traces and from-scratch LSTM/CNN localizers."""

__version__ = "0.1.0"
