"""Numpy graph neural network: layers, model, optimizer and checkpoints."""
