import logging
import math
from collections.abc import Callable

import numpy as np
from scipy.linalg import LinAlgError, cholesky

from .errors import NonPositiveDefiniteError, ParameterError

"""Samplers of centred Gaussian vectors on simulation grids.

Small site sets use a Cholesky factor of the dense covariance matrix; regular lattices above
`CHOLESKY_MAX_SITES` use circulant embedding, which yields two independent fields per FFT.
"""

CHOLESKY_MAX_SITES = 2500
CHOLESKY_JITTER = 1e-10
EMBEDDING_TOLERANCE = 1e-8


class CholeskySampler:
    def __init__(self, covariance: np.ndarray) -> None:
        size = covariance.shape[0]
        try:
            self.factor: np.ndarray = cholesky(covariance + CHOLESKY_JITTER * np.eye(size), lower=True)
        except LinAlgError as e:
            msg = f"covariance matrix over {size} sites is not positive definite"
            raise NonPositiveDefiniteError(msg) from e
        self.size: int = size
        logging.debug(f"factorised covariance over {size} sites")

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """count independent vectors, as a (count, size) array."""
        return rng.standard_normal((count, self.size)) @ self.factor.T

    def __repr__(self) -> str:
        return f"CholeskySampler({self.size} sites)"


class CirculantSampler:
    """Stationary field on an n1 x n2 lattice of spacing `step`, restricted to `mask`."""

    def __init__(self, correlation: Callable[[np.ndarray], np.ndarray], shape: tuple[int, int], step: float,
                 mask: np.ndarray, max_padding: int = 8) -> None:
        self.shape: tuple[int, int] = shape
        self.mask: np.ndarray = mask

        padding = 2
        while True:
            m1, m2 = padding * shape[0], padding * shape[1]
            k1 = np.minimum(np.arange(m1), m1 - np.arange(m1))
            k2 = np.minimum(np.arange(m2), m2 - np.arange(m2))
            distances = step * np.hypot(k1[:, None], k2[None, :])
            eigenvalues = np.fft.fft2(correlation(distances)).real
            if eigenvalues.min() >= -EMBEDDING_TOLERANCE * eigenvalues.max():
                break
            if padding >= max_padding:
                msg = f"circulant embedding of a {shape} lattice is not positive (min eigenvalue {eigenvalues.min()})"
                raise NonPositiveDefiniteError(msg)
            logging.debug(f"negative eigenvalue {eigenvalues.min()} with padding {padding}, enlarging embedding")
            padding *= 2

        self.embedding: tuple[int, int] = (m1, m2)
        self.scale: np.ndarray = np.sqrt(np.maximum(eigenvalues, 0.0) / (m1 * m2))
        self.size: int = int(mask.sum())
        logging.debug(f"circulant embedding {self.embedding} for lattice {shape}")

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        fields = []
        m1, m2 = self.embedding
        for _ in range(math.ceil(count / 2)):
            noise = rng.standard_normal((m1, m2)) + 1j * rng.standard_normal((m1, m2))
            transformed = np.fft.fft2(self.scale * noise)[: self.shape[0], : self.shape[1]]
            fields.append(transformed.real[self.mask])
            fields.append(transformed.imag[self.mask])
        return np.array(fields[:count])

    def __repr__(self) -> str:
        return f"CirculantSampler({self.size} sites, embedding {self.embedding})"


def stationary_sampler(correlation: Callable[[np.ndarray], np.ndarray], points: np.ndarray,
                       lattice: tuple[tuple[int, int], float, np.ndarray] | None = None) -> CholeskySampler | CirculantSampler:
    """Sampler of a unit-variance stationary isotropic field with the given correlation function."""
    if len(points) <= CHOLESKY_MAX_SITES or lattice is None:
        distances = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
        return CholeskySampler(correlation(distances))

    shape, step, mask = lattice
    return CirculantSampler(correlation, shape, step, mask)


def intrinsic_sampler(variogram: Callable[[np.ndarray], np.ndarray], points: np.ndarray,
                      max_sites: int = 4 * CHOLESKY_MAX_SITES) -> CholeskySampler:
    """Sampler of W - W(points[0]) for a field W with stationary increments and semivariogram γ.

    Cov(W(x), W(y)) = γ(x - x0) + γ(y - x0) - γ(x - y); the first site is pinned at 0 and left out of the
    factorisation.
    """
    if len(points) > max_sites:
        msg = f"intrinsic fields are sampled by Cholesky factorisation, {len(points)} sites exceed {max_sites}"
        raise ParameterError(msg)

    others = points[1:] - points[0]
    from_origin = variogram(np.linalg.norm(others, axis=-1))
    between = variogram(np.linalg.norm(others[:, None, :] - others[None, :, :], axis=-1))
    return CholeskySampler(from_origin[:, None] + from_origin[None, :] - between)
