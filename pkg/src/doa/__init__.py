"""Direction-of-arrival quadrant classification with a receive-side SIM."""
