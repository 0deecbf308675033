"""Physical layer: SIM geometry, wave propagation through the layers, wireless channels."""
