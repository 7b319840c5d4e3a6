"""Particle-in-a-box spatial basis, Gauss-Legendre quadrature and the
complex-scaled field-free eigenproblem."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.special

from .errors import EigenSolverError
from .model import PotentialModel

EVEN, ODD = 0, 1


@dataclass(frozen=True)
class BasisSpec:
    """Spatial box, Floquet channel window and quadrature sizes.

    Attributes:
        box_length: Box extent L; functions live on [-L/2, L/2].
        n_box: Number of sine functions.
        n_channels: Channels run over n_f in [-n_channels, n_channels].
        n_quad: Gauss-Legendre nodes on the box.
        m_projected: Field-free eigenvectors kept per channel (0 keeps the
            full box basis).
    """

    box_length: float = 200.0
    n_box: int = 400
    n_channels: int = 24
    n_quad: int = 1200
    m_projected: int = 0

    def __post_init__(self):
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        if self.n_box < 3:
            raise ValueError(f"n_box must be >= 3, got {self.n_box}")
        if self.n_channels < 0:
            raise ValueError(f"n_channels must be >= 0, got {self.n_channels}")
        if self.n_quad < 2 * self.n_box:
            raise ValueError(f"n_quad={self.n_quad} must be at least 2*n_box={2 * self.n_box}")
        if not 0 <= self.m_projected <= self.n_box:
            raise ValueError(f"m_projected must lie in [0, n_box], got {self.m_projected}")


def box_function(k: int, box_length: float, x):
    """Normalized sine ``sqrt(2/L) sin(k pi (x + L/2) / L)``."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * box_length
    if np.any(np.abs(x) > half * (1 + 1e-12)):
        raise ValueError(f"x outside the box [-{half}, {half}]")
    return math.sqrt(2.0 / box_length) * np.sin(k * math.pi * (x + half) / box_length)


@functools.lru_cache(maxsize=8)
def gauss_legendre(box_length: float, n_quad: int):
    x, w = scipy.special.roots_legendre(n_quad)
    half = 0.5 * box_length
    x, w = half * x, half * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def spatial_quadrature(f, box_length: float, n_quad: int):
    """Integrate ``f`` over [-L/2, L/2] with n_quad Gauss-Legendre nodes.

    Exact for polynomials up to degree ``2 * n_quad - 1``.
    """
    x, w = gauss_legendre(box_length, n_quad)
    return np.sum(w * f(x))


class BoxBasis:
    """Box functions tabulated on the quadrature nodes.

    ``values[q, i]`` is box function ``k = i + 1`` at node ``q``. Odd ``k``
    are even about the box centre, even ``k`` are odd.
    """

    def __init__(self, spec: BasisSpec):
        self.spec = spec
        self.length = spec.box_length
        self.nodes, self.weights = gauss_legendre(spec.box_length, spec.n_quad)
        self.k = np.arange(1, spec.n_box + 1)
        self.values = box_function(self.k[None, :], self.length, self.nodes[:, None])
        self.kinetic = 0.5 * (self.k * math.pi / self.length) ** 2
        self.parity = np.where(self.k % 2 == 1, EVEN, ODD)

    @property
    def size(self) -> int:
        return self.spec.n_box

    def parity_indices(self, parity: int) -> np.ndarray:
        return np.flatnonzero(self.parity == parity)

    def integrate(self, node_values):
        return np.sum(self.weights * node_values, axis=-1)

    def matrix(self, node_values, left=None, right=None):
        """Matrix of a multiplicative operator given its values on the nodes.

        ``left``/``right`` are node-tabulated function sets (default: the box
        functions themselves).
        """
        left = self.values if left is None else left
        right = self.values if right is None else right
        return left.T @ (right * (self.weights * node_values)[:, None])

    def evaluate(self, coefficients):
        """Node values of functions given by box coefficients (last axis)."""
        return np.asarray(coefficients) @ self.values.T


@functools.lru_cache(maxsize=16)
def _cached_basis(spec: BasisSpec) -> BoxBasis:
    return BoxBasis(spec)


def box_basis(spec: BasisSpec) -> BoxBasis:
    return _cached_basis(spec)


def c_normalize(vectors):
    """Scale columns so that ``v.T @ v == 1`` (bilinear, no conjugation).

    The remaining sign is fixed so that the largest-magnitude entry has a
    positive real part.
    """
    vectors = np.array(vectors, dtype=complex, copy=True)
    single = vectors.ndim == 1
    if single:
        vectors = vectors[:, None]
    norms = np.sqrt(np.sum(vectors * vectors, axis=0))
    # self-orthogonal (defective) directions cannot be c-normalized; leave them as they are
    vectors /= np.where(np.abs(norms) > 1e-150, norms, 1.0)
    lead = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    vectors *= np.where(lead.real < 0, -1.0, 1.0)
    return vectors[:, 0] if single else vectors


def sort_spectrum(values):
    """Indices ordering eigenvalues by ascending real, then imaginary part."""
    values = np.asarray(values)
    return np.lexsort((values.imag, values.real))


@dataclass(frozen=True)
class FieldFreeSolution:
    energies: np.ndarray
    vectors: np.ndarray
    theta: float
    parities: np.ndarray

    @property
    def ground_energy(self) -> complex:
        return self.energies[0]

    @property
    def ground_vector(self) -> np.ndarray:
        return self.vectors[:, 0]

    def bound_energies(self, threshold: float = 0.0) -> np.ndarray:
        """Negative-energy states (real part below threshold, |Im| tiny)."""
        e = self.energies
        return e[(e.real < threshold) & (np.abs(e.imag) < 1e-6)]


def field_free_matrix(model: PotentialModel, basis: BoxBasis, theta: float, parity=None):
    """``exp(-2i theta) T + V(x exp(i theta))`` in the box basis (or one parity block)."""
    z = basis.nodes * np.exp(1j * theta)
    idx = slice(None) if parity is None else basis.parity_indices(parity)
    values = basis.values[:, idx]
    h = basis.matrix(model.value(z), values, values)
    h[np.diag_indices_from(h)] += np.exp(-2j * theta) * basis.kinetic[idx]
    return h


def _eig(h):
    if not np.all(np.isfinite(h)):
        raise EigenSolverError("non-finite entries in matrix", shape=h.shape)
    try:
        return scipy.linalg.eig(h, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(str(exc), shape=h.shape, norm=float(np.linalg.norm(h))) from exc


def solve_field_free(model: PotentialModel, spec: BasisSpec, theta: float = 0.0) -> FieldFreeSolution:
    """Diagonalize the complex-scaled atomic Hamiltonian in the box basis.

    Each parity block is solved separately (the potential is even), so every
    eigenvector has exact parity. Eigenpairs are sorted by real then
    imaginary part and c-normalized.
    """
    basis = box_basis(spec)
    energies, vectors, parities = [], [], []
    for parity in (EVEN, ODD):
        idx = basis.parity_indices(parity)
        e, c = _eig(field_free_matrix(model, basis, theta, parity))
        full = np.zeros((basis.size, len(e)), dtype=complex)
        full[idx] = c
        energies.append(e)
        vectors.append(full)
        parities.append(np.full(len(e), parity))
    energies = np.concatenate(energies)
    vectors = np.concatenate(vectors, axis=1)
    parities = np.concatenate(parities)
    order = sort_spectrum(energies)
    return FieldFreeSolution(
        energies=energies[order],
        vectors=c_normalize(vectors[:, order]),
        theta=theta,
        parities=parities[order],
    )
