import numpy as np


def random_correlation(rng, m, extra=2):
    """Random correlation matrix with exact unit diagonal and exact symmetry."""
    a = rng.standard_normal((m, m + extra))
    s = a @ a.T
    d = 1.0 / np.sqrt(np.diag(s))
    c = s * d[:, None] * d[None, :]
    c = (c + c.T) / 2
    np.fill_diagonal(c, 1.0)
    return c


def example_kappa_full(rho):
    """Tail order of the full 3-set for the example matrix while all three bounds bind."""
    return (3 - (4 * np.sqrt(2) - 1) * rho) / (1 + rho - 4 * rho**2)
