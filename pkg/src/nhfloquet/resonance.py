"""Diagonalization of the Floquet matrix and selection of the ground resonance."""

from __future__ import annotations

import functools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .basis import c_normalize, sort_spectrum
from .errors import AmbiguousSelectionWarning, ConvergenceError, DefectiveMatrixWarning, EigenSolverError
from .floquet import FloquetMatrix, FloquetProblem, assemble_floquet

CONDITION_LIMIT = 1e12


@dataclass
class Eigenpairs:
    """Eigenvalues with c-normalized right eigenvectors (columns).

    ``conditions`` holds ``|v|^2 / |v^T v|``, the eigenvalue condition
    number of a complex-symmetric matrix.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    conditions: np.ndarray
    method: str = "dense"

    def __len__(self):
        return len(self.values)


def _operator(matrix):
    if isinstance(matrix, FloquetMatrix):
        return matrix.matvec, matrix.dimension
    matrix = np.asarray(matrix)
    return (lambda v: matrix @ v), matrix.shape[0]


def _dense_fortran(matrix):
    # LAPACK works in place only on Fortran-ordered input; avoids a second copy.
    if isinstance(matrix, FloquetMatrix):
        return matrix.dense(order="F")
    return np.array(matrix, dtype=complex, order="F")


def _finish(values, vectors, matvec, method, chunk: int = 256) -> Eigenpairs:
    # column chunks keep the peak at two copies of the eigenvector matrix
    n = len(values)
    order = sort_spectrum(values)
    values = values[order]
    out = np.empty(vectors.shape, dtype=complex)
    conditions = np.empty(n)
    residuals = np.empty(n)
    for start in range(0, n, chunk):
        cols = slice(start, start + chunk)
        block = vectors[:, order[cols]]
        bilinear = np.abs(np.sum(block * block, axis=0))
        conditions[cols] = np.sum(np.abs(block) ** 2, axis=0) / np.where(bilinear > 0, bilinear, np.finfo(float).tiny)
        block = c_normalize(block)
        residuals[cols] = np.linalg.norm(matvec(block) - block * values[cols], axis=0) / np.linalg.norm(block, axis=0)
        out[:, cols] = block
    if np.any(conditions > CONDITION_LIMIT):
        warnings.warn(
            f"eigenvector condition estimate {conditions.max():.2e} exceeds {CONDITION_LIMIT:.0e}; "
            "matrix may be defective",
            DefectiveMatrixWarning,
            stacklevel=3,
        )
    return Eigenpairs(values, out, residuals, conditions, method)


def diagonalize(matrix, method: str = "dense", sigma: complex | None = None, k: int = 12, v0=None) -> Eigenpairs:
    """Eigendecomposition of a (complex, non-Hermitian) Floquet matrix.

    Arguments:
        matrix: A :class:`FloquetMatrix` or a plain square array.
        method: ``"dense"`` (LAPACK, all pairs) or ``"shift-invert"``
            (ARPACK on the LU-factored shifted matrix, ``k`` pairs nearest
            ``sigma``).
        v0: Start vector for ARPACK; fixed by default so reruns are
            bit-identical.
    """
    matvec, dim = _operator(matrix)
    if method == "dense":
        a = _dense_fortran(matrix)
        if not np.all(np.isfinite(a)):
            raise EigenSolverError("non-finite matrix entries", shape=a.shape)
        try:
            values, vectors = scipy.linalg.eig(a, overwrite_a=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise EigenSolverError(str(exc), shape=a.shape) from exc
        del a
        eigs = _finish(values, vectors, matvec, method)
        return eigs

    if method != "shift-invert":
        raise ValueError(f"unknown method {method!r}")
    if sigma is None:
        raise ValueError("shift-invert needs a shift sigma")
    k = min(k, dim - 2)
    a = _dense_fortran(matrix)
    a[np.diag_indices_from(a)] -= sigma
    try:
        lu = scipy.linalg.lu_factor(a, overwrite_a=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(str(exc), shape=(dim, dim), sigma=sigma) from exc
    solve = functools.partial(scipy.linalg.lu_solve, lu, check_finite=False)
    op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=solve, dtype=complex)
    if v0 is None:
        v0 = np.cos(np.arange(dim) * 0.618) + 0.5j
    try:
        nu, vectors = scipy.sparse.linalg.eigs(op, k=k, which="LM", v0=v0, tol=1e-14, maxiter=20 * dim)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise EigenSolverError("ARPACK did not converge", k=k, sigma=sigma, converged=len(exc.eigenvalues)) from exc
    del solve, op, lu, a
    return _finish(sigma + 1.0 / nu, vectors, matvec, method)


@dataclass
class ResonanceSolution:
    """The complex-scaled Floquet resonance dominated by the field-free ground state.

    ``components[i]`` holds the box coefficients of channel ``channels[i]``;
    they represent ``exp(i theta/2) phi_n(x exp(i theta))`` on the real box
    and are c-normalized as a whole.
    """

    quasi_energy: complex
    components: np.ndarray
    channels: np.ndarray
    theta_used: float
    dominance: float
    problem: FloquetProblem
    residual: float = float("nan")
    runner_up: tuple | None = None
    ground_energy: complex = complex("nan")
    theta_star: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def gamma(self) -> float:
        return -2.0 * self.quasi_energy.imag

    def component(self, n) -> np.ndarray:
        i = int(n) - int(self.channels[0])
        if 0 <= i < len(self.channels):
            return self.components[i]
        return np.zeros(self.components.shape[1], dtype=complex)

    def channel_norms(self) -> dict[int, complex]:
        return {int(n): complex(c @ c) for n, c in zip(self.channels, self.components)}

    def total_norm(self) -> complex:
        return complex(np.sum(self.components * self.components))

    def to_dict(self) -> dict:
        norms = self.channel_norms()
        return {
            "E": {"re": self.quasi_energy.real, "im": self.quasi_energy.imag},
            "Gamma": self.gamma,
            "theta_used": self.theta_used,
            "theta_star": self.theta_star,
            "dominance": self.dominance,
            "residual": self.residual,
            "channel_norms": {str(n): {"re": v.real, "im": v.imag} for n, v in norms.items()},
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def fold_quasi_energy(energy: complex, reference: float, omega: float) -> int:
    """Integer shift ``k`` with ``Re(E - k omega)`` in ``[ref - w/2, ref + w/2)``."""
    return math.floor((energy.real - (reference - 0.5 * omega)) / omega)


def select_resonance(
    eigs: Eigenpairs, matrix: FloquetMatrix, ground_vector, ambiguity: float = 0.10
) -> ResonanceSolution:
    """Pick the eigenvector whose channel-0 component has the largest
    c-overlap with the field-free ground state, then fold its quasi-energy
    into the Brillouin zone centred on the field-free ground energy."""
    ground_vector = np.asarray(ground_vector)
    n0 = matrix.channel_slice(0)
    g0 = matrix.spatial(0).T @ ground_vector
    overlaps = np.abs(g0 @ eigs.vectors[n0])
    order = np.argsort(-overlaps, kind="stable")
    best = int(order[0])
    runner_up = None
    if len(order) > 1:
        second = int(order[1])
        runner_up = (complex(eigs.values[second]), float(overlaps[second]))
        if overlaps[second] >= (1 - ambiguity) * overlaps[best]:
            warnings.warn(
                f"ambiguous resonance selection: E={eigs.values[best]:.10g} (overlap {overlaps[best]:.4f}) "
                f"vs E={eigs.values[second]:.10g} (overlap {overlaps[second]:.4f})",
                AmbiguousSelectionWarning,
                stacklevel=2,
            )
    energy = complex(eigs.values[best])
    components = matrix.to_box(eigs.vectors[:, best])
    channels = np.array(matrix.channels)

    shift = fold_quasi_energy(energy, matrix.field_free.ground_energy.real, matrix.omega)
    if shift:
        energy -= shift * matrix.omega
        rolled = np.zeros_like(components)
        if shift > 0:
            rolled[:-shift] = components[shift:]
        else:
            rolled[-shift:] = components[:shift]
        components = rolled
    return ResonanceSolution(
        quasi_energy=energy,
        components=components,
        channels=channels,
        theta_used=matrix.problem.theta,
        dominance=float(overlaps[best]),
        problem=matrix.problem,
        residual=float(eigs.residuals[best]),
        runner_up=runner_up,
        ground_energy=complex(matrix.field_free.ground_energy),
        diagnostics={"method": eigs.method, "n_pairs": len(eigs), "condition": float(eigs.conditions[best])},
    )


def default_shift(matrix: FloquetMatrix) -> complex:
    """Field-free ground energy lowered by the ponderomotive energy.

    In the acceleration frame the free-electron threshold stays at zero, so
    the dressed ground state sits close to ``E1 - Up``.
    """
    return complex(matrix.field_free.ground_energy.real - matrix.problem.laser.ponderomotive_energy)


def solve_resonance(
    problem: FloquetProblem, method: str = "shift-invert", n_eigs: int = 12, sigma: complex | None = None
) -> ResonanceSolution:
    matrix = assemble_floquet(problem)
    if sigma is None:
        sigma = default_shift(matrix)
    eigs = diagonalize(matrix, method=method, sigma=sigma, k=n_eigs)
    return select_resonance(eigs, matrix, matrix.field_free.ground_vector)


@dataclass
class ThetaTrajectory:
    thetas: np.ndarray
    energies: np.ndarray
    solutions: list
    theta_star: float
    derivative: np.ndarray

    @property
    def star_index(self) -> int:
        return int(np.argmin(np.abs(self.thetas - self.theta_star)))

    @property
    def star(self) -> ResonanceSolution:
        return self.solutions[self.star_index]

    def rows(self):
        return list(zip(self.thetas.tolist(), self.energies.tolist()))


def theta_trajectory(
    problem: FloquetProblem,
    thetas,
    method: str = "shift-invert",
    n_eigs: int = 12,
    stationary_tol: float = 1e-4,
    map_fn=map,
) -> ThetaTrajectory:
    """Resonance eigenvalue as a function of the rotation angle.

    The stationary angle minimizes ``|dE/dtheta|`` (central differences on
    interior points). Raises :class:`ConvergenceError` when even the
    flattest point moves faster than ``stationary_tol`` a.u. per radian.
    """
    thetas = np.asarray(sorted(thetas), dtype=float)
    if len(thetas) < 3:
        raise ValueError("theta trajectory needs at least 3 angles")
    solutions = list(
        map_fn(_solve_at, [(problem.replace(theta=float(t)), method, n_eigs) for t in thetas])
    )
    energies = np.array([s.quasi_energy for s in solutions])
    derivative = (energies[2:] - energies[:-2]) / (thetas[2:] - thetas[:-2])
    i = int(np.argmin(np.abs(derivative)))
    if abs(derivative[i]) > stationary_tol:
        raise ConvergenceError(
            f"no stationary point in theta range [{thetas[0]}, {thetas[-1]}]: "
            f"min |dE/dtheta| = {abs(derivative[i]):.2e}; extend the scan range"
        )
    theta_star = float(thetas[i + 1])
    for s in solutions:
        s.theta_star = theta_star
    return ThetaTrajectory(thetas, energies, solutions, theta_star, derivative)


def _solve_at(args):
    problem, method, n_eigs = args
    return solve_resonance(problem, method=method, n_eigs=n_eigs)
