"""Observables from a single resonance Floquet state.

All channel integrals are c-products on the rotated contour: neither factor is
conjugated, and the basis coefficients already carry the contour Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import box_basis, c_normalize, sort_spectrum
from .errors import ChannelError, ConvergenceError
from .floquet import fourier_on_nodes
from .model import Gauge, LaserField, PotentialModel
from .resonance import ResonanceSolution

FORCES = ("displaced", "static")
WINDOWS = ("full", "interior")


@dataclass(frozen=True)
class AmplitudeTable:
    """Photon-transfer amplitudes ``A(n_f, N)``; ``values[i, j]`` is row
    ``rows[i]`` (channel) and column ``cols[j]`` (photon number)."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    operator: str = "displaced"

    def __post_init__(self):
        if self.values.shape != (len(self.rows), len(self.cols)):
            raise ValueError("amplitude table shape does not match its index sets")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("amplitude table has non-finite entries")

    def column(self, N: int) -> np.ndarray:
        j = np.flatnonzero(self.cols == N)
        if not len(j):
            raise ChannelError(f"photon number {N} not in table (1..{self.cols.max()})")
        return self.values[:, j[0]]


@dataclass(frozen=True)
class SpectrumSeries:
    kind: str
    N: np.ndarray
    values: np.ndarray
    flags: np.ndarray | None = None

    @property
    def log10(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log10(self.values)

    def at(self, N: int) -> float:
        return float(self.values[np.flatnonzero(self.N == N)[0]])

    def as_dict(self) -> dict[int, float]:
        return {int(n): float(v) for n, v in zip(self.N, self.values)}


@dataclass(frozen=True)
class NaturalExpansion:
    """``A(n_f, N) = sum_l d_l f_l(N) g_l(n_f)``.

    ``photon_modes[:, l]`` is ``f_l`` over the table columns and
    ``channel_modes[:, l]`` is ``g_l`` over the table rows.
    """

    weights: np.ndarray
    photon_modes: np.ndarray
    channel_modes: np.ndarray
    convention: str
    photon_numbers: np.ndarray
    channels: np.ndarray
    degenerate: np.ndarray = field(default=None)

    @property
    def occupations(self) -> np.ndarray:
        return np.abs(self.weights) ** 2

    @property
    def rank(self) -> int:
        return len(self.weights)

    def reconstruct(self) -> np.ndarray:
        """Rebuild the table as ``(rows, cols)``."""
        return (self.channel_modes * self.weights) @ self.photon_modes.T


# ---------------------------------------------------------------- amplitudes


def _operator_nodes(res: ResonanceSolution, model: PotentialModel, operator: str):
    """Time-Fourier node values ``O_j(x)`` of the transition operator, ``j = -J..J``."""
    problem = res.problem
    basis = box_basis(problem.spec)
    z = basis.nodes * np.exp(1j * problem.theta)
    if operator == "length":
        return z[:, None], 0
    if operator == "static":
        return model.force(z)[:, None], 0
    if operator != "displaced":
        raise ValueError(f"unknown amplitude operator {operator!r}")
    span = 2 * problem.spec.n_channels
    nodes, _ = fourier_on_nodes(model.force, z, problem.laser.alpha0, max(problem.n_t, 2 * span + 2), span)
    return nodes, span


def _resolve_operator(res: ResonanceSolution, force: str) -> str:
    if res.problem.gauge is Gauge.LENGTH:
        return "length"
    if force not in FORCES:
        raise ValueError(f"force must be one of {FORCES}, got {force!r}")
    return force


def _channel_nodes(res: ResonanceSolution) -> np.ndarray:
    return box_basis(res.problem.spec).evaluate(res.components)


def amplitude(
    res: ResonanceSolution,
    model: PotentialModel | None,
    n_f: int,
    N: int,
    force: str = "displaced",
    method: str = "quadrature",
) -> complex:
    """Amplitude for transferring ``N`` photons from channel ``n_f`` to ``n_f + N``.

    With ``force="displaced"`` the operator is the electron acceleration in the
    acceleration frame, ``-V'(x + alpha0 cos wt)``, whose Fourier components
    ``F_j`` couple ``n_f`` to ``n_f + N + j``. ``force="static"`` uses
    ``-V'(x)`` alone. ``method="matrix"`` evaluates the same quantity as
    ``c^T F_j c`` with ``F_j`` assembled independently by integrating
    ``V_j`` against derivatives of basis products.
    """
    model = model or res.problem.model
    lo, hi = int(res.channels[0]), int(res.channels[-1])
    if N < 1:
        raise ChannelError(f"photon number must be >= 1, got {N}")
    if not (lo <= n_f <= hi and lo <= n_f + N <= hi):
        raise ChannelError(f"channels {n_f} and {n_f + N} must lie in [{lo}, {hi}]")
    operator = _resolve_operator(res, force)
    if method == "matrix":
        return _amplitude_matrix(res, model, n_f, N, operator)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    basis = box_basis(res.problem.spec)
    op, span = _operator_nodes(res, model, operator)
    right = basis.evaluate(res.component(n_f)) * basis.weights
    total = 0j
    for j in range(-span, span + 1):
        m = n_f + N + j
        if lo <= m <= hi:
            total += np.sum(basis.evaluate(res.component(m)) * op[:, span + j] * right)
    return complex(total)


def operator_matrix(res: ResonanceSolution, model: PotentialModel, j: int, operator: str) -> np.ndarray:
    """Box-basis matrix of the ``j``-th Fourier component of the transition
    operator, built without evaluating the force itself.

    Uses ``F(x e^{i theta} + c) = -e^{-i theta} d/dx V(x e^{i theta} + c)`` and
    integration by parts against the box functions (which vanish at the
    walls).
    """
    problem = res.problem
    basis = box_basis(problem.spec)
    z = basis.nodes * np.exp(1j * problem.theta)
    if operator == "length":
        return basis.matrix(z) if j == 0 else np.zeros((basis.size, basis.size), complex)
    if operator == "static":
        if j:
            return np.zeros((basis.size, basis.size), complex)
        pot = model.value(z)
    else:
        span = max(abs(j), 1)
        nodes, _ = fourier_on_nodes(model.value, z, problem.laser.alpha0, max(problem.n_t, 2 * span + 2), span)
        pot = nodes[:, span + j]
    kpi = basis.k * math.pi / basis.length
    deriv = math.sqrt(2.0 / basis.length) * kpi[None, :] * np.cos(np.outer(basis.nodes + 0.5 * basis.length, kpi))
    wv = (basis.weights * pot)[:, None]
    m = deriv.T @ (wv * basis.values)
    return np.exp(-1j * problem.theta) * (m + m.T)


def _amplitude_matrix(res, model, n_f, N, operator):
    lo, hi = int(res.channels[0]), int(res.channels[-1])
    span = 0 if operator in ("static", "length") else 2 * res.problem.spec.n_channels
    total = 0j
    for j in range(-span, span + 1):
        m = n_f + N + j
        if lo <= m <= hi:
            total += res.component(m) @ operator_matrix(res, model, j, operator) @ res.component(n_f)
    return complex(total)


def amplitude_table(
    res: ResonanceSolution,
    model: PotentialModel | None = None,
    n_photons: int = 21,
    force: str = "displaced",
    window: str = "full",
) -> AmplitudeTable:
    """All amplitudes ``A(n_f, N)`` for ``N = 1..n_photons``.

    ``window="full"`` keeps every channel of the truncated expansion as a row
    (components outside the window are zero). ``window="interior"`` keeps
    only rows with ``n_f + n_photons`` inside the window.
    """
    model = model or res.problem.model
    operator = _resolve_operator(res, force)
    if window not in WINDOWS:
        raise ValueError(f"window must be one of {WINDOWS}, got {window!r}")
    channels = [int(n) for n in res.channels]
    lo, hi = channels[0], channels[-1]
    if window == "interior":
        rows = np.arange(lo + n_photons, hi - n_photons + 1)
        if not len(rows):
            raise ChannelError(f"interior window empty for {n_photons} photons in channels [{lo}, {hi}]")
    else:
        rows = np.array(channels)
    basis = box_basis(res.problem.spec)
    phi = _channel_nodes(res)
    op, span = _operator_nodes(res, model, operator)
    wphi = phi * basis.weights
    # kernel[j][m, n] = (phi_m | O_j | phi_n) over all channel pairs
    kernel = np.einsum("mq,qj,nq->jmn", phi, op, wphi, optimize=True)
    cols = np.arange(1, n_photons + 1)
    values = np.zeros((len(rows), len(cols)), dtype=complex)
    for i, n in enumerate(rows):
        for c, N in enumerate(cols):
            total = 0j
            for j in range(-span, span + 1):
                m = n + N + j
                if lo <= m <= hi:
                    total += kernel[span + j, m - lo, n - lo]
            values[i, c] = total
    return AmplitudeTable(rows=np.asarray(rows), cols=cols, values=values, operator=operator)


def total_amplitude(table: AmplitudeTable, N: int) -> complex:
    return complex(np.sum(table.column(N)))


def hgs(table: AmplitudeTable) -> SpectrumSeries:
    """Harmonic spectrum ``P(N) = |sum_n A(n, N)|^2``."""
    totals = table.values.sum(axis=0)
    return SpectrumSeries("HGS", table.cols.copy(), np.abs(totals) ** 2)


def photon_sd(table: AmplitudeTable, N: int) -> float:
    """``| sqrt( sum_n A(n,N)^2 - (sum_n A(n,N))^2 ) |`` with complex squares."""
    col = table.column(N)
    return float(abs(np.sqrt(np.sum(col * col) - np.sum(col) ** 2 + 0j)))


def sd_series(table: AmplitudeTable) -> SpectrumSeries:
    """Photon-number SD for every column; even N are flagged."""
    values = np.array([photon_sd(table, int(N)) for N in table.cols])
    return SpectrumSeries("SD", table.cols.copy(), values, flags=(table.cols % 2 == 0))


# -------------------------------------------------------- natural expansion


def natural_expansion(table: AmplitudeTable, convention: str = "c-product") -> NaturalExpansion:
    """Separable expansion of the amplitude table, ordered by ``|d_l|^2``.

    ``"c-product"`` diagonalizes the complex-symmetric product ``M M^T``
    (``M`` indexed by photon number, then channel) with c-normalized photon
    modes; the channel modes follow from ``F^{-1} M``. ``"standard-svd"`` is
    the ordinary singular value decomposition.
    """
    m = table.values.T
    if convention == "standard-svd":
        u, s, vh = np.linalg.svd(m, full_matrices=False)
        weights, photon, channel = s.astype(complex), u, vh.T
    elif convention == "c-product":
        lam, f = np.linalg.eig(m @ m.T)
        order = sort_spectrum(lam)
        lam, f = lam[order], c_normalize(f[:, order])
        coeffs = np.linalg.solve(f, m)
        weights = np.sqrt(lam.astype(complex))
        safe = np.where(weights == 0, 1.0, weights)
        photon, channel = f, (coeffs / safe[:, None]).T
        # M M^T has rank <= number of channels; drop the null photon modes
        keep = np.argsort(-np.abs(weights), kind="stable")[: min(m.shape)]
        weights, photon, channel = weights[keep], photon[:, keep], channel[:, keep]
    else:
        raise ValueError(f"unknown convention {convention!r}")
    order = np.argsort(-np.abs(weights) ** 2, kind="stable")
    weights, photon, channel = weights[order], photon[:, order], channel[:, order]
    occ = np.abs(weights) ** 2
    gaps = -np.diff(occ)
    scale = occ[0] if len(occ) and occ[0] > 0 else 1.0
    degenerate = np.zeros(len(occ), dtype=bool)
    close = gaps < 1e-12 * scale
    degenerate[:-1] |= close
    degenerate[1:] |= close
    return NaturalExpansion(
        weights=weights,
        photon_modes=photon,
        channel_modes=channel,
        convention=convention,
        photon_numbers=table.cols.copy(),
        channels=table.rows.copy(),
        degenerate=degenerate,
    )


def photon_distributions(expansion: NaturalExpansion, modes=(1,)) -> list[SpectrumSeries]:
    """Partial distributions ``|f_l(N)|^2`` for the requested ``l`` (1-based)
    followed by the total ``sum_l |d_l f_l(N)|^2``."""
    out = []
    for l in modes:
        if not 1 <= l <= expansion.rank:
            raise ValueError(f"mode l={l} outside 1..{expansion.rank}")
        out.append(SpectrumSeries(f"Prob_partial({l})", expansion.photon_numbers, np.abs(expansion.photon_modes[:, l - 1]) ** 2))
    total = np.sum(np.abs(expansion.photon_modes * expansion.weights) ** 2, axis=1)
    out.append(SpectrumSeries("Prob_total", expansion.photon_numbers, total))
    return out


# ----------------------------------------------------------------------- ATI


def ati_channel_momentum(laser: LaserField, e_bound: float, N: int) -> float | None:
    """``k_N = sqrt(2 (N omega - |E_bound|))``, or ``None`` for a closed channel."""
    if N < 1:
        raise ChannelError(f"photon number must be >= 1, got {N}")
    if e_bound >= 0:
        raise ValueError(f"bound energy must be negative, got {e_bound}")
    excess = N * laser.omega_ir - abs(e_bound)
    return math.sqrt(2.0 * excess) if excess > 0 else None


@dataclass(frozen=True)
class AtiChannel:
    """One ATI channel.

    ``k`` is the momentum from the field-free ground energy, ``k_floquet``
    the on-shell momentum ``sqrt(2 (Re E + N omega))`` of the resonance
    channel (``None`` when that channel is still closed). ``t`` is the
    outgoing-wave transition amplitude that fixes ``gamma = 2 |t|^2`` (both
    escape directions); ``t_force`` is the force matrix element against the
    plane wave of momentum ``k``.
    """

    N: int
    k: float
    k_floquet: float | None
    t: complex
    t_force: complex
    gamma: float


def _plane_wave_integral(res, k, node_values, what):
    problem = res.problem
    basis = box_basis(problem.spec)
    theta = problem.theta
    z = basis.nodes * np.exp(1j * theta)
    integrand = basis.weights * np.sqrt(1.0 / k) * np.exp(1j * k * z) * node_values
    density = np.abs(integrand / basis.weights)
    peak = density.max()
    if peak > 0 and max(density[0], density[-1]) > 1e-8 * peak:
        raise ConvergenceError(f"{what} integrand does not decay on the rotated contour (k={k:.4g})")
    # vectors hold exp(i theta/2) phi(x e^{i theta}); dz = e^{i theta} dx
    return complex(np.exp(0.5j * theta) * np.sum(integrand))


def _source_nodes(res: ResonanceSolution, model: PotentialModel, n: int) -> np.ndarray:
    """``sum_m V_{n-m}(x) phi_m(x)``: the coupling that feeds channel ``n``."""
    problem = res.problem
    basis = box_basis(problem.spec)
    z = basis.nodes * np.exp(1j * problem.theta)
    span = 2 * problem.spec.n_channels
    pot, _ = fourier_on_nodes(model.value, z, problem.laser.alpha0, max(problem.n_t, 2 * span + 2), span)
    phi = _channel_nodes(res)
    out = np.zeros(basis.nodes.shape, dtype=complex)
    for i, m in enumerate(res.channels):
        j = n - int(m)
        if -span <= j <= span:
            out += pot[:, span + j] * phi[i]
    return out


def ati_channel(res: ResonanceSolution, N: int, model: PotentialModel | None = None, e_bound: float | None = None) -> AtiChannel:
    model = model or res.problem.model
    laser = res.problem.laser
    e_bound = res.ground_energy.real if e_bound is None else e_bound
    k = ati_channel_momentum(laser, e_bound, N)
    if k is None:
        raise ChannelError(f"ATI channel N={N} is closed (N*omega < |E_bound|)")
    n = -N  # absorbing N photons lowers the channel index with +n*omega on the diagonal
    basis = box_basis(res.problem.spec)
    phi_n = basis.evaluate(res.component(n))
    t_force = _plane_wave_integral(res, k, model.force(basis.nodes * np.exp(1j * res.problem.theta)) * phi_n, "force")
    excess = res.quasi_energy.real + N * laser.omega_ir
    if excess <= 0:
        return AtiChannel(N, k, None, 0j, t_force, 0.0)
    k_floquet = math.sqrt(2.0 * excess)
    t = _plane_wave_integral(res, k_floquet, _source_nodes(res, model, n), "source")
    return AtiChannel(N, k, k_floquet, t, t_force, 2.0 * abs(t) ** 2)


def ati_partial_width(res: ResonanceSolution, model: PotentialModel | None = None, laser: LaserField | None = None, N: int = 9) -> float:
    """Partial width of the N-photon ionization channel (closed channels raise)."""
    if laser is not None and laser != res.problem.laser:
        raise ValueError("laser does not match the resonance's Floquet problem")
    return ati_channel(res, N, model).gamma


def ati_spectrum(res: ResonanceSolution, n_photons: int, model: PotentialModel | None = None) -> list[AtiChannel]:
    """All open channels up to ``n_photons``."""
    laser = res.problem.laser
    out = []
    for N in range(1, n_photons + 1):
        if ati_channel_momentum(laser, res.ground_energy.real, N) is not None:
            out.append(ati_channel(res, N, model))
    return out


def ati_sd_overlay(res: ResonanceSolution, model=None, laser=None, N_range=(), table: AmplitudeTable | None = None, force: str = "displaced"):
    """Aligned ``(ATI, SD)`` series on one photon-number grid.

    Closed ATI channels contribute zero.
    """
    N_range = np.asarray(list(N_range), dtype=int)
    if not len(N_range):
        empty = np.zeros(0)
        return SpectrumSeries("ATI", N_range, empty), SpectrumSeries("SD", N_range, empty)
    if table is None:
        table = amplitude_table(res, model, n_photons=int(N_range.max()), force=force)
    ati = []
    for N in N_range:
        k = ati_channel_momentum(res.problem.laser, res.ground_energy.real, int(N))
        ati.append(0.0 if k is None else ati_channel(res, int(N), model).gamma)
    sd = [photon_sd(table, int(N)) for N in N_range]
    return SpectrumSeries("ATI", N_range, np.array(ati)), SpectrumSeries("SD", N_range.copy(), np.array(sd))


def cutoff_order(series: SpectrumSeries, start: int = 3) -> int | None:
    """Odd harmonic after which the spectrum drops most steeply (log scale).

    ``None`` when fewer than two odd orders from ``start`` on are present.
    """
    odd = {int(n): v for n, v in zip(series.N, series.values) if n % 2 == 1 and n >= start}
    keys = sorted(odd)
    drops = {
        n: math.log10(max(odd[n], 1e-300)) - math.log10(max(odd[n + 2], 1e-300))
        for n in keys
        if n + 2 in odd
    }
    return max(drops, key=drops.get) if drops else None
