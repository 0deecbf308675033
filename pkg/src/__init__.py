"""SIM-MIMO: stacked intelligent metasurface transceiver simulator"""

__version__ = "0.2.0"
