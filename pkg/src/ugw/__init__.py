"""Two-factor (smart card + password) user/gateway authentication on elliptic curves, over MQTT."""

__version__ = "0.1.0"
