"""Monte Carlo estimation of Betti numbers of nodal sets of Gaussian random fields."""

__version__ = "0.1.0"
