"""eqlab: numerical checks of learnability limits for equivariant gradient descent."""

__version__ = "0.1.0"
