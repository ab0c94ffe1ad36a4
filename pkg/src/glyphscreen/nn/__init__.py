from . import engine, layers, optim, serialize

__all__ = ["engine", "layers", "optim", "serialize"]
