"""(7,4) autoencoder transceiver with an input-agnostic WGAN perturbation attack.

Everything runs on a small float64 numpy network core (``advlink.numerics``)
with hand-written backward passes.
"""

__version__ = "0.1.0"
