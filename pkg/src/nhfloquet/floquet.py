"""Complex-scaled Floquet operator in the acceleration (Kramers-Henneberger) frame.

The wavefunction is expanded as ``exp(-iEt) sum_n exp(i n omega t) phi_n(x)``,
so channel ``n`` carries ``+n*omega`` on the diagonal and local kinetic energy
``E - n*omega``: photon absorption populates negative ``n``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import EVEN, ODD, BasisSpec, BoxBasis, FieldFreeSolution, box_basis, solve_field_free
from .errors import DimensionError, TimeQuadratureWarning
from .model import Gauge, LaserField, PotentialModel

THETA_CAP = 0.35


@dataclass(frozen=True)
class FloquetProblem:
    """Everything needed to build one Floquet matrix.

    Attributes:
        parity_adapted: Restrict channel ``n`` to box functions of parity
            ``(-1)**n``. This is the generalized-parity class of the field-free
            ground state and halves the matrix dimension.
        channel_offset: Shift of the channel window, used for replica checks.
    """

    model: PotentialModel = field(default_factory=PotentialModel)
    laser: LaserField = field(default_factory=LaserField)
    spec: BasisSpec = field(default_factory=BasisSpec)
    theta: float = 0.20
    gauge: Gauge = Gauge.ACCELERATION
    parity_adapted: bool = True
    n_t_factor: int = 8
    dimension_cap: int = 20000
    channel_offset: int = 0

    def __post_init__(self):
        if not 0 <= self.theta <= THETA_CAP:
            raise ValueError(f"theta={self.theta} outside [0, {THETA_CAP}]")
        if self.n_t_factor < 2:
            raise ValueError("n_t_factor must be >= 2")
        object.__setattr__(self, "gauge", Gauge(self.gauge))

    @property
    def channels(self) -> np.ndarray:
        n = self.spec.n_channels
        return np.arange(-n, n + 1) + self.channel_offset

    @property
    def n_t(self) -> int:
        return self.n_t_factor * (2 * self.spec.n_channels + 1)

    def replace(self, **changes) -> FloquetProblem:
        from dataclasses import replace

        return replace(self, **changes)


def fourier_on_nodes(func, z, alpha0: float, n_t: int, m_max: int):
    """Time-Fourier components of ``func(z + alpha0 cos(t))`` on a node set.

    Returns an array of shape ``(len(z), 2*m_max + 1)``; column ``m_max + m``
    holds ``(1/T) int_0^T func(z + alpha0 cos wt) exp(-i m w t) dt`` from the
    n_t-point trapezoid rule. The second return value is the largest change
    of those components when n_t is doubled.
    """
    if 2 * m_max >= n_t:
        raise ValueError(f"n_t={n_t} too small for harmonics up to {m_max}")
    fine = 2 * n_t
    t = 2.0 * math.pi * np.arange(fine) / fine
    samples = func(z[:, None] + alpha0 * np.cos(t)[None, :])
    coarse = np.fft.fft(samples[:, ::2], axis=1) / n_t
    dense = np.fft.fft(samples, axis=1) / fine
    m = np.arange(-m_max, m_max + 1)
    out = coarse[:, m % n_t]
    change = float(np.max(np.abs(out - dense[:, m % fine]), initial=0.0))
    return out, change


class FloquetMatrix:
    """Block representation of the Floquet operator.

    Channel ``n`` is represented on the spatial function set
    ``self.spatial[n]`` (box coefficients as columns). Distinct spatial
    blocks are cached by ``(n' - n, parity', parity)``; the dense matrix is
    only built on request.
    """

    def __init__(self, problem: FloquetProblem, field_free: FieldFreeSolution | None = None):
        self.problem = problem
        spec = problem.spec
        self.basis: BoxBasis = box_basis(spec)
        self.field_free = field_free or solve_field_free(problem.model, spec, problem.theta)
        self.channels = problem.channels
        self.omega = problem.laser.omega_ir
        self.z = self.basis.nodes * np.exp(1j * problem.theta)

        self._sets = self._spatial_sets()
        self.set_of = {int(n): self._set_key(n) for n in self.channels}
        sizes = [self._sets[self.set_of[int(n)]].shape[1] for n in self.channels]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.dimension = int(self.offsets[-1])
        if self.dimension > problem.dimension_cap:
            raise DimensionError(
                f"Floquet dimension {self.dimension} exceeds cap {problem.dimension_cap}"
            )

        m_max = 2 * spec.n_channels
        self.potential_nodes, change = fourier_on_nodes(
            problem.model.value, self.z, problem.laser.alpha0, problem.n_t, m_max
        )
        self.time_quadrature_change = change
        if change > 1e-10:
            warnings.warn(
                f"time quadrature not converged: Fourier components change by {change:.2e} "
                f"when n_t={problem.n_t} is doubled",
                TimeQuadratureWarning,
                stacklevel=2,
            )
        self._node_values = {k: self.basis.values @ s for k, s in self._sets.items()}
        self._kinetic = {
            k: s.T @ (np.exp(-2j * problem.theta) * self.basis.kinetic[:, None] * s)
            for k, s in self._sets.items()
        }
        self._blocks: dict = {}

    def _set_key(self, n):
        return int(n) % 2 if self.problem.parity_adapted else "all"

    def _spatial_sets(self):
        """Column sets (box coefficients) spanning each channel's spatial space."""
        spec, basis, ff = self.problem.spec, self.basis, self.field_free
        if spec.m_projected:
            keep = np.arange(spec.m_projected)
            if not self.problem.parity_adapted:
                return {"all": ff.vectors[:, keep]}
            return {p: ff.vectors[:, keep[ff.parities[keep] == p]] for p in (EVEN, ODD)}
        eye = np.eye(basis.size)
        if not self.problem.parity_adapted:
            return {"all": eye}
        return {p: eye[:, basis.parity_indices(p)] for p in (EVEN, ODD)}

    def spatial(self, n) -> np.ndarray:
        return self._sets[self.set_of[int(n)]]

    def node_values(self, n) -> np.ndarray:
        return self._node_values[self.set_of[int(n)]]

    def potential_block(self, m: int, row_key, col_key) -> np.ndarray:
        key = (int(m), row_key, col_key)
        if key not in self._blocks:
            m_max = (self.potential_nodes.shape[1] - 1) // 2
            self._blocks[key] = self.basis.matrix(
                self.potential_nodes[:, m_max + m],
                self._node_values[row_key],
                self._node_values[col_key],
            )
        return self._blocks[key]

    def block(self, row_channel, col_channel) -> np.ndarray:
        rk, ck = self.set_of[int(row_channel)], self.set_of[int(col_channel)]
        blk = self.potential_block(row_channel - col_channel, rk, ck)
        if row_channel == col_channel:
            blk = blk + self._kinetic[rk] + row_channel * self.omega * np.eye(blk.shape[0])
        return blk

    def channel_slice(self, n) -> slice:
        i = int(n) - int(self.channels[0])
        return slice(self.offsets[i], self.offsets[i + 1])

    def dense(self, order: str = "C") -> np.ndarray:
        out = np.empty((self.dimension, self.dimension), dtype=complex, order=order)
        for n1 in self.channels:
            for n2 in self.channels:
                out[self.channel_slice(n1), self.channel_slice(n2)] = self.block(n1, n2)
        return out

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v)
        y = np.zeros(v.shape, dtype=complex)
        for n1 in self.channels:
            rows = self.channel_slice(n1)
            for n2 in self.channels:
                y[rows] += self.block(n1, n2) @ v[self.channel_slice(n2)]
        return y

    def to_box(self, vector) -> np.ndarray:
        """Split a Floquet vector into per-channel box coefficients ``(n_ch, n_box)``."""
        vector = np.asarray(vector)
        out = np.zeros((len(self.channels), self.basis.size), dtype=complex)
        for i, n in enumerate(self.channels):
            out[i] = self.spatial(n) @ vector[self.channel_slice(n)]
        return out

    def from_box(self, components) -> np.ndarray:
        """Inverse of :meth:`to_box` for vectors inside the channel spaces."""
        v = np.zeros(self.dimension, dtype=complex)
        for i, n in enumerate(self.channels):
            v[self.channel_slice(n)] = self.spatial(n).T @ components[i]
        return v


def potential_fourier_blocks(problem: FloquetProblem, m_range) -> list[np.ndarray]:
    """Full box-basis matrices of the time-Fourier components ``V_m`` of
    ``V(x e^{i theta} + alpha0 cos wt)``."""
    basis = box_basis(problem.spec)
    m_range = list(m_range)
    m_max = max(abs(m) for m in m_range)
    z = basis.nodes * np.exp(1j * problem.theta)
    n_t = max(problem.n_t, 2 * m_max + 2)
    nodes, change = fourier_on_nodes(problem.model.value, z, problem.laser.alpha0, n_t, m_max)
    if change > 1e-10:
        warnings.warn(f"time quadrature change {change:.2e} on doubling", TimeQuadratureWarning, stacklevel=2)
    return [basis.matrix(nodes[:, m_max + m]) for m in m_range]


def assemble_floquet(problem: FloquetProblem, field_free: FieldFreeSolution | None = None) -> FloquetMatrix:
    """Build the block Floquet operator.

    Block ``(n', n)`` is ``exp(-2i theta) T delta + V_{n'-n} + n omega delta``.
    """
    return FloquetMatrix(problem, field_free)
