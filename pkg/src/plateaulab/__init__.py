"""plateaulab: a statevector lab for gradient-flatness experiments on layered
variational circuits, with closed-form variance bounds, Haar-moment oracles,
and a variable-shot autoencoder training harness."""

__version__ = "0.1.0"
