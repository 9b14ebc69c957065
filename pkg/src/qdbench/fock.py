"""Truncated Fock-space linear algebra: operators, canonical states, fidelity.

Conventions used throughout the package:

* Quadratures are scaled so the vacuum has Var(x) = Var(p) = 1/2, i.e.
  x = (a + a^dag)/sqrt(2) and p = (a - a^dag)/(i sqrt(2)).
* Phase-space rotations are U(theta) = exp(-i theta n) with n the number
  operator.  Flipping this sign silently transposes the index conventions of
  the block-circulant standard form in :mod:`qdbench.blocksym`, so it is fixed
  here once and for all.
"""

from __future__ import annotations

import json
import logging
import math

import numpy as np

log = logging.getLogger(__name__)

# Validation tolerances for density matrices (see DensityMatrix).
HERMITICITY_TOL = 1e-10
PSD_TOL = 1e-9
TRACE_TOL = 1e-9

__all__ = [
    "FockOperator",
    "DensityMatrix",
    "TruncationError",
    "number_operator",
    "rotation",
    "destroy",
    "quadratures",
    "displacement",
    "coherent_state",
    "noisy_coherent",
    "fidelity",
    "trace_norm",
    "purity",
    "hermitian_part_error",
    "eigh_hermitian",
]


class TruncationError(ValueError):
    """Raised when a state cannot be represented faithfully at the cutoff."""

    def __init__(self, message, deficit=None):
        super().__init__(message)
        self.deficit = deficit


def hermitian_part_error(a: np.ndarray) -> float:
    """Max-norm deviation of ``a`` from its Hermitian part."""
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def eigh_hermitian(a: np.ndarray, check: bool = True, tol: float = HERMITICITY_TOL):
    """Eigendecomposition of a Hermitian matrix, ascending eigenvalues.

    Thin deterministic wrapper around LAPACK; raises if ``a`` is not
    Hermitian within ``tol`` (skipped when ``check`` is False).
    """
    if check:
        err = hermitian_part_error(a)
        if err > tol:
            raise ValueError(f"matrix is not Hermitian (deviation {err:.3e} > {tol:.1e})")
    w, v = np.linalg.eigh((a + a.conj().T) / 2.0)
    return w, v


class FockOperator:
    """A dense operator on the truncated Fock space |0>, ..., |D-1>."""

    __slots__ = ("dim", "matrix")

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"operator must be a square matrix, got shape {matrix.shape}")
        if matrix.shape[0] < 1:
            raise ValueError("operator dimension must be at least 1")
        self.dim = matrix.shape[0]
        self.matrix = matrix

    def dagger(self) -> "FockOperator":
        return FockOperator(self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return hermitian_part_error(self.matrix) <= tol

    def __matmul__(self, other):
        other_mat = other.matrix if isinstance(other, FockOperator) else other
        return FockOperator(self.matrix @ other_mat)

    def __repr__(self):
        return f"FockOperator(dim={self.dim})"


class DensityMatrix:
    """A validated quantum state on the truncated Fock space.

    Validation enforces Hermiticity (max deviation <= 1e-10), positive
    semidefiniteness (min eigenvalue >= -1e-9; eigenvalues in (-1e-9, 0) are
    clipped to zero with a logged warning, since numerically reconstructed
    states are PSD only approximately) and unit trace (|Tr - 1| <= 1e-9).

    ``allow_sub_normalized=True`` admits matrices whose trace falls short of
    one because of Fock-space truncation; the shortfall is recorded in
    ``trace_deficit``.
    """

    __slots__ = ("dim", "matrix", "trace_deficit")

    def __init__(self, matrix: np.ndarray, allow_sub_normalized: bool = False):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {matrix.shape}")
        herm_err = hermitian_part_error(matrix)
        if herm_err > HERMITICITY_TOL:
            raise ValueError(f"density matrix is not Hermitian (deviation {herm_err:.3e})")
        matrix = (matrix + matrix.conj().T) / 2.0

        w, v = np.linalg.eigh(matrix)
        min_eig = float(w[0])
        if min_eig < -PSD_TOL:
            raise ValueError(f"density matrix is not PSD (min eigenvalue {min_eig:.3e})")
        if min_eig < 0.0:
            if min_eig < -1e-13:  # below plain rounding noise: worth telling the user
                log.warning("clipping %d slightly negative eigenvalue(s) (min %.3e) to zero",
                            int(np.sum(w < 0)), min_eig)
            w = np.clip(w, 0.0, None)
            matrix = (v * w) @ v.conj().T
            matrix = (matrix + matrix.conj().T) / 2.0

        tr = float(np.real(np.trace(matrix)))
        deficit = 1.0 - tr
        if abs(deficit) > TRACE_TOL and not allow_sub_normalized:
            raise ValueError(f"density matrix trace {tr!r} is not 1 within {TRACE_TOL:.1e}")
        if allow_sub_normalized and deficit < -TRACE_TOL:
            raise ValueError(f"density matrix trace {tr!r} exceeds 1")

        self.dim = matrix.shape[0]
        self.matrix = matrix
        self.trace_deficit = deficit

    @property
    def op(self) -> FockOperator:
        return FockOperator(self.matrix)

    def expectation(self, operator) -> float:
        """Real expectation value Tr(rho O) of a Hermitian operator."""
        mat = operator.matrix if isinstance(operator, FockOperator) else np.asarray(operator)
        return float(np.real(np.trace(self.matrix @ mat)))

    def mean_photon(self) -> float:
        return self.expectation(number_operator(self.dim))

    def quadrature_moments(self) -> dict:
        """First and raw second moments of x and p (vacuum variance 1/2 units)."""
        x, p = quadratures(self.dim)
        xm, pm = x.matrix, p.matrix
        return {
            "x": self.expectation(xm),
            "p": self.expectation(pm),
            "xx": self.expectation(xm @ xm),
            "pp": self.expectation(pm @ pm),
        }

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, payload: dict, allow_sub_normalized: bool = False) -> "DensityMatrix":
        try:
            dim = int(payload["dim"])
            re = np.asarray(payload["re"], dtype=float)
            im = np.asarray(payload["im"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed density-matrix JSON: {exc}") from exc
        if re.shape != (dim, dim) or im.shape != (dim, dim):
            raise ValueError(
                f"density-matrix JSON arrays must be {dim}x{dim}, got {re.shape} and {im.shape}")
        return cls(re + 1j * im, allow_sub_normalized=allow_sub_normalized)

    @classmethod
    def load(cls, path, allow_sub_normalized: bool = False) -> "DensityMatrix":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls.from_json_dict(payload, allow_sub_normalized=allow_sub_normalized)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, trace_deficit={self.trace_deficit:.2e})"


def number_operator(dim: int) -> FockOperator:
    """diag(0, 1, ..., D-1)."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    return FockOperator(np.diag(np.arange(dim, dtype=float)).astype(complex))


def rotation(theta: float, dim: int) -> FockOperator:
    """Phase-space rotation U(theta) = exp(-i theta n), diagonal in Fock basis."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    phases = np.exp(-1j * theta * np.arange(dim))
    return FockOperator(np.diag(phases))


def destroy(dim: int) -> FockOperator:
    """Annihilation operator a with a|n> = sqrt(n)|n-1>."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    return FockOperator(np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex))


def quadratures(dim: int):
    """Quadrature pair (x, p) with vacuum variance 1/2 each.

    Returns the truncated-matrix operators; the canonical commutator
    [x, p] = i holds exactly on the interior levels only (the top Fock level
    carries the usual truncation artifact).
    """
    if dim < 2:
        raise ValueError("quadratures need at least 2 Fock levels")
    a = destroy(dim).matrix
    x = (a + a.conj().T) / math.sqrt(2.0)
    p = (a - a.conj().T) / (1j * math.sqrt(2.0))
    return FockOperator(x), FockOperator(p)


def displacement(alpha: complex, dim: int) -> FockOperator:
    """Displacement D(alpha) = exp(alpha a^dag - conj(alpha) a), exactly unitary.

    Built by exponentiating the truncated generator through a Hermitian
    eigendecomposition, so the result is unitary at any cutoff even though it
    only approximates the infinite-dimensional displacement.
    """
    a = destroy(dim).matrix
    k = alpha * a.conj().T - np.conj(alpha) * a
    h = -1j * k  # Hermitian
    w, v = eigh_hermitian(h, check=False)
    return FockOperator((v * np.exp(1j * w)) @ v.conj().T)


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    n = np.arange(dim)
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, dim, dtype=float)))))
    if alpha == 0:
        amps = np.zeros(dim, dtype=complex)
        amps[0] = 1.0
        return amps
    log_mod = -abs(alpha) ** 2 / 2.0 + n * math.log(abs(alpha)) - log_fact / 2.0
    return np.exp(log_mod) * np.exp(1j * n * np.angle(alpha))


def _check_truncation(alpha: complex, dim: int, deficit: float, deficit_tol: float) -> None:
    if abs(alpha) ** 2 > dim / 4.0:
        raise TruncationError(
            f"|alpha|^2 = {abs(alpha)**2:.4g} exceeds the truncation guard D/4 = {dim / 4.0:.4g} "
            f"(trace deficit {deficit:.3e})", deficit=deficit)
    if deficit > deficit_tol:
        raise TruncationError(
            f"truncation at D = {dim} leaves trace deficit {deficit:.3e} > {deficit_tol:.1e}",
            deficit=deficit)


def coherent_state(alpha: complex, dim: int, deficit_tol: float = 1e-8) -> DensityMatrix:
    """Pure coherent state |alpha><alpha| truncated at ``dim`` Fock levels.

    The amplitude guard |alpha|^2 <= D/4 and the trace-deficit bound
    ``deficit_tol`` are both enforced; violation raises TruncationError with
    the computed deficit.  The truncated amplitudes are kept verbatim (no
    renormalization), so the recorded deficit is exactly the lost tail weight.
    """
    amps = _coherent_amplitudes(alpha, dim)
    deficit = 1.0 - float(np.sum(np.abs(amps) ** 2))
    _check_truncation(alpha, dim, deficit, deficit_tol)
    return DensityMatrix(np.outer(amps, amps.conj()), allow_sub_normalized=True)


def noisy_coherent(alpha: complex, excess: float, dim: int,
                   deficit_tol: float = 1e-8) -> DensityMatrix:
    """Displaced thermal state: coherent amplitude ``alpha`` plus isotropic noise.

    ``excess`` is the thermal mean photon number nu >= 0; the state has
    quadrature variances (1 + 2 nu)/2 in both x and p and mean photon number
    |alpha|^2 + nu (up to truncation tails).
    """
    if excess < 0:
        raise ValueError("excess noise must be nonnegative")
    if excess == 0:
        return coherent_state(alpha, dim, deficit_tol=deficit_tol)
    nu = float(excess)
    n = np.arange(dim)
    therm = np.exp(n * math.log(nu / (1.0 + nu)) - math.log(1.0 + nu))
    deficit_th = 1.0 - float(np.sum(therm))
    _check_truncation(alpha, dim, deficit_th, deficit_tol)
    d = displacement(alpha, dim).matrix
    rho = (d * therm) @ d.conj().T
    return DensityMatrix(rho, allow_sub_normalized=True)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(matrix)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho0: DensityMatrix, rho1: DensityMatrix) -> float:
    """Uhlmann fidelity F = [Tr sqrt(sqrt(rho0) rho1 sqrt(rho0))]^2.

    The matrix square roots come from Hermitian eigendecompositions; the
    outer trace is evaluated as the nuclear norm of sqrt(rho1) sqrt(rho0),
    which avoids the sqrt-of-noise blowup that eigenvalues of the triple
    product suffer near zero.  Symmetric in its arguments to ~1e-12.
    """
    if rho0.dim != rho1.dim:
        raise ValueError(f"dimension mismatch: {rho0.dim} vs {rho1.dim}")
    s0 = _psd_sqrt(rho0.matrix)
    s1 = _psd_sqrt(rho1.matrix)
    root = float(np.sum(np.linalg.svd(s1 @ s0, compute_uv=False)))
    return min(root ** 2, 1.0 + 1e-12)


def trace_norm(a) -> float:
    """Sum of singular values; for Hermitian input, the sum of |eigenvalues|."""
    mat = a.matrix if isinstance(a, FockOperator) else np.asarray(a, dtype=complex)
    if mat.size == 0:
        return 0.0
    if hermitian_part_error(mat) <= 1e-12 * max(1.0, float(np.max(np.abs(mat)))):
        return float(np.sum(np.abs(np.linalg.eigvalsh(mat))))
    return float(np.sum(np.linalg.svd(mat, compute_uv=False)))


def purity(rho: DensityMatrix) -> float:
    """Tr(rho^2)."""
    return float(np.real(np.trace(rho.matrix @ rho.matrix)))
