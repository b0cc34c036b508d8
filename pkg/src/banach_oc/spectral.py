"""Function calculus on the unit circle sampled on a uniform grid.

States of the neural-field model are real arrays whose last axis holds the
samples at the grid nodes ``theta_j = 2*pi*j/n``. Leading axes are treated
as a batch, which lets several states be advanced through one vectorized
integration.
"""
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


class GridMismatchError(ValueError):
    """Raised when two grid functions do not live on the same grid."""


class ResolutionError(ValueError):
    """Raised when a Fourier basis cannot be resolved on the grid."""


@dataclass(frozen=True)
class CircleGrid:
    n: int = 256

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 4, got {self.n}")

    @property
    def dtheta(self):
        return TWO_PI / self.n

    @property
    def theta(self):
        return TWO_PI * np.arange(self.n) / self.n


def as_grid_function(grid, values):
    """Validate ``values`` as samples on ``grid`` and return a float array."""
    y = np.asarray(values, dtype=float)
    if y.shape[-1:] != (grid.n,):
        raise GridMismatchError(f"expected {grid.n} samples, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("grid function contains non-finite values")
    return y


def quadrature(y):
    """Rectangle rule for the integral over [0, 2pi) along the last axis."""
    y = np.asarray(y, dtype=float)
    return TWO_PI / y.shape[-1] * np.sum(y, axis=-1)


def dft(y):
    return np.fft.rfft(y, axis=-1)


def idft(c, n):
    return np.fft.irfft(c, n=n, axis=-1)


def circular_convolution(w, y):
    """Sampled ``(w * y)(theta) = int w(theta - s) y(s) ds`` computed in Fourier space.

    ``w`` is a single kernel of length n; ``y`` may carry leading batch axes.
    """
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    n = w.shape[-1]
    if y.shape[-1] != n:
        raise GridMismatchError(f"kernel has {n} samples but argument has {y.shape[-1]}")
    return idft(dft(w) * dft(y), n) * (TWO_PI / n)


def convolution_operator(w):
    """Return ``y -> w * y`` with the kernel spectrum computed once."""
    w = np.asarray(w, dtype=float)
    n = w.shape[-1]
    w_hat = dft(w) * (TWO_PI / n)

    def apply(y):
        if np.shape(y)[-1] != n:
            raise GridMismatchError(f"kernel has {n} samples but argument has {np.shape(y)[-1]}")
        return idft(w_hat * dft(y), n)

    return apply


def fourier_basis(grid, K):
    """Orthonormal trigonometric basis ``[phi_0, phi_1^c, phi_1^s, ..., phi_K^c, phi_K^s]``.

    Returns an array of shape ``(2K+1, n)``.
    """
    if K < 0 or 4 * K >= grid.n:
        raise ResolutionError(f"K={K} is not resolvable on a grid of {grid.n} nodes")
    theta = grid.theta
    rows = [np.full(grid.n, 1.0 / np.sqrt(TWO_PI))]
    for k in range(1, K + 1):
        rows.append(np.cos(k * theta) / np.sqrt(np.pi))
        rows.append(np.sin(k * theta) / np.sqrt(np.pi))
    return np.array(rows)
