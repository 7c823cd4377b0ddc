"""Fourier representation of real periodic fields on the unit torus.

Fields live on an n x n collocation grid covering [0,1]^2.  A scalar
field is stored as its complex Fourier coefficients in numpy's fft
layout, shape (n, n), normalized so that coeffs[0, 0] equals the
spatial mean of the field.  A vector field stacks two scalars into
shape (2, n, n).  Array axis 0 of a physical field is x1, axis 1 is x2,
and the wavenumber attached to integer mode k is 2*pi*k.

Quadratic products are evaluated pointwise on a 3/2 zero-padded
collocation grid and truncated back to the base grid.  For fields
confined to the 2/3-rule dealias mask this evaluation is exact, which
is what makes the discrete advection identities hold at roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "to_spectral",
    "to_physical",
    "derivative",
    "gradient",
    "laplacian",
    "divergence",
    "curl2d",
    "leray_project",
    "advect",
    "apply_mask",
    "symmetrize",
    "l2_norm",
    "h1_seminorm",
    "h2_seminorm",
    "norms",
    "inner",
    "mean_value",
    "max_divergence",
    "max_asymmetry",
    "pad_spectrum",
    "truncate_spectrum",
    "to_quadrature",
    "from_quadrature",
]


@dataclass(frozen=True)
class Grid:
    """Collocation grid and wavenumber tables for the unit torus.

    Parameters
    ----------
    n : int
        Number of collocation points per direction.  Must be even and
        at least 8 so that the dealias mask and the 3/2 quadrature grid
        are well defined.
    length : float
        Side length of the periodic box.  Only the unit box is
        supported.

    Attributes
    ----------
    kx, ky : ndarray, shape (n, n)
        Wavenumbers 2*pi*k1 and 2*pi*k2 in fft layout.
    k2 : ndarray, shape (n, n)
        |2*pi*k|^2, the (negated) Laplacian symbol.
    dealias_mask : ndarray of bool, shape (n, n)
        True where 3*|k1| < n and 3*|k2| < n (the 2/3 rule).
    nquad : int
        Size of the 3/2 zero-padded quadrature grid.
    """

    n: int
    length: float = 1.0

    def __post_init__(self):
        if self.n % 2 != 0 or self.n < 8:
            raise ValueError(f"grid size must be even and >= 8, got {self.n}")
        if self.length != 1.0:
            raise ValueError("only the unit torus (length 1.0) is supported")
        m1 = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        mx, my = np.meshgrid(m1, m1, indexing="ij")
        object.__setattr__(self, "modes_x", mx)
        object.__setattr__(self, "modes_y", my)
        object.__setattr__(self, "kx", 2.0 * np.pi * mx.astype(float))
        object.__setattr__(self, "ky", 2.0 * np.pi * my.astype(float))
        object.__setattr__(self, "k2", self.kx**2 + self.ky**2)
        mask = (3 * np.abs(mx) < self.n) & (3 * np.abs(my) < self.n)
        object.__setattr__(self, "dealias_mask", mask)
        object.__setattr__(self, "nquad", 3 * self.n // 2)
        xi = np.arange(self.n) / self.n
        x1, x2 = np.meshgrid(xi, xi, indexing="ij")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)

    @property
    def kmax_retained(self) -> int:
        """Largest integer mode magnitude inside the dealias mask."""
        return (self.n - 1) // 3

    def scalar_shape(self):
        return (self.n, self.n)

    def vector_shape(self):
        return (2, self.n, self.n)


def _require_scalar(grid: Grid, f_hat):
    if f_hat.shape != grid.scalar_shape():
        raise ValueError(
            f"expected scalar coefficients of shape {grid.scalar_shape()}, "
            f"got {f_hat.shape}"
        )


def _require_vector(grid: Grid, v_hat):
    if v_hat.shape != grid.vector_shape():
        raise ValueError(
            f"expected vector coefficients of shape {grid.vector_shape()}, "
            f"got {v_hat.shape}"
        )


def to_spectral(grid: Grid, samples) -> np.ndarray:
    """Forward transform of real samples; coeffs[0,0] is the mean."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape not in (grid.scalar_shape(), grid.vector_shape()):
        raise ValueError(
            f"sample array shape {samples.shape} does not match grid n={grid.n}"
        )
    return np.fft.fft2(samples, norm="forward")

def to_physical(grid: Grid, coeffs) -> np.ndarray:
    """Inverse transform back to real collocation samples."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape not in (grid.scalar_shape(), grid.vector_shape()):
        raise ValueError(
            f"coefficient array shape {coeffs.shape} does not match grid n={grid.n}"
        )
    return np.fft.ifft2(coeffs, norm="forward").real


def derivative(grid: Grid, f_hat, axis: int) -> np.ndarray:
    """Partial derivative along axis 0 (x1) or 1 (x2), as a multiplier."""
    if axis == 0:
        return 1j * grid.kx * f_hat
    if axis == 1:
        return 1j * grid.ky * f_hat
    raise ValueError(f"axis must be 0 or 1, got {axis}")


def gradient(grid: Grid, f_hat) -> np.ndarray:
    _require_scalar(grid, np.asarray(f_hat))
    return np.stack([derivative(grid, f_hat, 0), derivative(grid, f_hat, 1)])


def laplacian(grid: Grid, f_hat) -> np.ndarray:
    return -grid.k2 * f_hat


def divergence(grid: Grid, v_hat) -> np.ndarray:
    v_hat = np.asarray(v_hat)
    _require_vector(grid, v_hat)
    return derivative(grid, v_hat[0], 0) + derivative(grid, v_hat[1], 1)


def curl2d(grid: Grid, v_hat) -> np.ndarray:
    """Scalar curl d1 v2 - d2 v1 of a planar vector field."""
    v_hat = np.asarray(v_hat)
    _require_vector(grid, v_hat)
    return derivative(grid, v_hat[1], 0) - derivative(grid, v_hat[0], 1)


def leray_project(grid: Grid, v_hat, zero_mean: bool = True) -> np.ndarray:
    """Remove the gradient part of a vector field mode by mode.

    Applies I - k k^T / |k|^2 at every nonzero wavenumber.  The k = 0
    mode carries the spatial mean; constants are divergence free, so it
    is either kept as is or zeroed when ``zero_mean`` is set.
    """
    v_hat = np.asarray(v_hat)
    _require_vector(grid, v_hat)
    k2 = grid.k2.copy()
    k2[0, 0] = 1.0  # avoid 0/0 at the mean mode; fixed up below
    kdotv = (grid.kx * v_hat[0] + grid.ky * v_hat[1]) / k2
    out = np.stack([v_hat[0] - grid.kx * kdotv, v_hat[1] - grid.ky * kdotv])
    if zero_mean:
        out[:, 0, 0] = 0.0
    else:
        out[:, 0, 0] = v_hat[:, 0, 0]
    return out


def apply_mask(grid: Grid, f_hat) -> np.ndarray:
    """Zero every mode outside the 2/3-rule dealias mask."""
    return np.where(grid.dealias_mask, f_hat, 0.0)


def symmetrize(f_hat) -> np.ndarray:
    """Project onto conjugate-symmetric (real-field) coefficients."""
    f_hat = np.asarray(f_hat)
    n = f_hat.shape[-1]
    idx = (-np.arange(n)) % n
    reflected = f_hat[..., idx, :][..., :, idx]
    return 0.5 * (f_hat + np.conj(reflected))


def max_asymmetry(f_hat) -> float:
    """Largest deviation from conjugate symmetry, for invariant checks."""
    f_hat = np.asarray(f_hat)
    n = f_hat.shape[-1]
    idx = (-np.arange(n)) % n
    reflected = f_hat[..., idx, :][..., :, idx]
    return float(np.max(np.abs(f_hat - np.conj(reflected))))


# ---------------------------------------------------------------------------
# dealiased products on the 3/2 quadrature grid


def pad_spectrum(f_hat, m: int) -> np.ndarray:
    """Embed an n-grid spectrum into an m-grid spectrum (m >= n)."""
    f_hat = np.asarray(f_hat)
    n = f_hat.shape[-1]
    if m < n:
        raise ValueError(f"cannot pad from {n} down to {m}")
    shifted = np.fft.fftshift(f_hat, axes=(-2, -1))
    out = np.zeros(f_hat.shape[:-2] + (m, m), dtype=complex)
    lo = (m - n) // 2
    out[..., lo : lo + n, lo : lo + n] = shifted
    return np.fft.ifftshift(out, axes=(-2, -1))


def truncate_spectrum(f_hat, n: int) -> np.ndarray:
    """Drop all modes of an m-grid spectrum outside the n-grid range."""
    f_hat = np.asarray(f_hat)
    m = f_hat.shape[-1]
    if n > m:
        raise ValueError(f"cannot truncate from {m} up to {n}")
    shifted = np.fft.fftshift(f_hat, axes=(-2, -1))
    lo = (m - n) // 2
    out = shifted[..., lo : lo + n, lo : lo + n]
    return np.fft.ifftshift(out, axes=(-2, -1))


def to_quadrature(grid: Grid, f_hat) -> np.ndarray:
    """Physical samples of a spectral field on the 3/2 padded grid."""
    return np.fft.ifft2(pad_spectrum(f_hat, grid.nquad), norm="forward").real


def from_quadrature(grid: Grid, samples) -> np.ndarray:
    """Transform padded-grid samples and truncate to the base grid."""
    return truncate_spectrum(np.fft.fft2(samples, norm="forward"), grid.n)


def advect(grid: Grid, u_hat, f_hat) -> np.ndarray:
    """(u . grad) f with the product formed on the padded grid.

    ``f_hat`` may be a scalar (n, n) or vector (2, n, n) spectrum.  The
    result is the exact spectrum of the pointwise product truncated to
    the base grid; no dealias mask is applied here.
    """
    u_hat = np.asarray(u_hat)
    f_hat = np.asarray(f_hat)
    _require_vector(grid, u_hat)
    u1 = to_quadrature(grid, u_hat[0])
    u2 = to_quadrature(grid, u_hat[1])

    def one(g_hat):
        g1 = to_quadrature(grid, derivative(grid, g_hat, 0))
        g2 = to_quadrature(grid, derivative(grid, g_hat, 1))
        return from_quadrature(grid, u1 * g1 + u2 * g2)

    if f_hat.ndim == 2:
        _require_scalar(grid, f_hat)
        return one(f_hat)
    _require_vector(grid, f_hat)
    return np.stack([one(f_hat[0]), one(f_hat[1])])


# ---------------------------------------------------------------------------
# norms and inner products (Plancherel, mean-normalized coefficients)


def l2_norm(f_hat) -> float:
    return float(np.sqrt(np.sum(np.abs(f_hat) ** 2)))


def h1_seminorm(grid: Grid, f_hat) -> float:
    return float(np.sqrt(np.sum(grid.k2 * np.abs(f_hat) ** 2)))


def h2_seminorm(grid: Grid, f_hat) -> float:
    return float(np.sqrt(np.sum(grid.k2**2 * np.abs(f_hat) ** 2)))


def norms(grid: Grid, f_hat):
    """(L2 norm, H1 seminorm, H2 seminorm) of a field."""
    return l2_norm(f_hat), h1_seminorm(grid, f_hat), h2_seminorm(grid, f_hat)


def inner(f_hat, g_hat) -> float:
    """L2 pairing of two real fields from their coefficients."""
    return float(np.sum(np.conj(f_hat) * np.asarray(g_hat)).real)


def mean_value(f_hat) -> float:
    """Spatial mean of a scalar field (the k = 0 coefficient)."""
    f_hat = np.asarray(f_hat)
    if f_hat.ndim != 2:
        raise ValueError("mean_value expects scalar coefficients")
    return float(f_hat[0, 0].real)


def max_divergence(grid: Grid, v_hat) -> float:
    """sup norm of the physical divergence, for solenoidality checks."""
    return float(np.max(np.abs(to_physical(grid, divergence(grid, v_hat)))))
