"""Reliable event rates for small-area disease mapping.

The package bundles exact conjugate reliability assessment, informativeness
bounds for CAR disease-mapping models, a Metropolis-within-Gibbs sampler for
the standard and restricted binomial-logit CAR models, and the command-line
surface tying them together. Nothing performs I/O on import.
"""

__all__ = [
    "__version__",
]

__version__ = "0.1.0"
