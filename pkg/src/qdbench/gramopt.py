"""Choosing purifications: Gram-matrix optimization and CPTP-order tests.

Given test states rho_0 .. rho_{M-1}, the benchmark works with purifications
|G_k> whose pairwise overlaps Z_kl = <G_k|G_l> form the Gram matrix.  The
overlaps are free parameters constrained only through the input-side bipartite
matrix rho_in, whose diagonal blocks are the test states and whose block
traces are the overlaps: Tr(block_kl) = Z_lk.

``optimize_gram`` maximizes the linear surrogate

    h = sum_{k>l} (Re Z_kl + Im Z_kl)

over all positive semidefinite rho_in compatible with the test states.  This
is a practical, SDP-representable stand-in for the Gram purity; an optional
quadratic refinement (iterated linearization of the purity itself) is
available behind ``refine_purity``.

``cptp_reachable`` tests the partial order on Gram matrices induced by
channels: states with Gram G can be mapped by some channel onto states with
Gram D exactly when G = P o D (Hadamard product) for a PSD P with unit
diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocksym import BipartiteBlockMatrix, StandardForm, from_standard_form
from .fock import DensityMatrix, fidelity, rotation
from .sdp import SDPConfig, SDPProblem, SDPStatus

__all__ = [
    "GramMatrix",
    "GramOptResult",
    "CPTPOrderResult",
    "optimize_gram",
    "gram_purity",
    "purity_upper_bound",
    "cptp_reachable",
    "rotation_ensemble",
    "is_rotation_generated",
]

GRAM_PSD_TOL = 1e-9
GRAM_DIAG_TOL = 1e-10


class GramMatrix:
    """Hermitian PSD matrix of purification overlaps Z_kl = <G_k|G_l>.

    Proper purification Grams have unit diagonal; ``require_unit_diagonal``
    can be dropped for raw block-trace matrices (e.g. reduced matrices of
    unnormalized grids), in which case only Hermiticity/PSD are enforced.
    """

    __slots__ = ("m", "z")

    def __init__(self, z: np.ndarray, require_unit_diagonal: bool = True):
        z = np.asarray(z, dtype=complex)
        if z.ndim != 2 or z.shape[0] != z.shape[1]:
            raise ValueError(f"Gram matrix must be square, got {z.shape}")
        herm = float(np.max(np.abs(z - z.conj().T)))
        if herm > 1e-10:
            raise ValueError(f"Gram matrix is not Hermitian (deviation {herm:.3e})")
        z = (z + z.conj().T) / 2.0
        min_eig = float(np.linalg.eigvalsh(z)[0])
        if min_eig < -GRAM_PSD_TOL * max(1.0, float(np.max(np.abs(np.diag(z).real)))):
            raise ValueError(f"Gram matrix is not PSD (min eigenvalue {min_eig:.3e})")
        if require_unit_diagonal:
            diag_err = float(np.max(np.abs(np.diag(z) - 1.0)))
            if diag_err > GRAM_DIAG_TOL:
                raise ValueError(f"Gram diagonal deviates from 1 by {diag_err:.3e}")
            if float(np.max(np.abs(z))) > 1.0 + GRAM_PSD_TOL:
                raise ValueError("Gram entries must have modulus <= 1")
        self.m = z.shape[0]
        self.z = z

    @property
    def rho_a(self) -> np.ndarray:
        """Reduced register state: rho_A[k,l] = Z_lk / M."""
        return self.z.T / self.m

    @classmethod
    def from_rho_a(cls, rho_a: np.ndarray, require_unit_diagonal: bool = True) -> "GramMatrix":
        rho_a = np.asarray(rho_a, dtype=complex)
        return cls(rho_a.T * rho_a.shape[0], require_unit_diagonal=require_unit_diagonal)

    def circulant_profile(self) -> np.ndarray:
        """zeta_d = Z[d, 0]; the full matrix is circulant iff Z[a,b] = zeta_{a-b mod M}."""
        return self.z[:, 0].copy()

    def circulant_deviation(self) -> float:
        zeta = self.circulant_profile()
        idx = np.mod(np.subtract.outer(np.arange(self.m), np.arange(self.m)), self.m)
        return float(np.max(np.abs(self.z - zeta[idx])))

    def purity(self) -> float:
        return gram_purity(self)

    def to_json_dict(self) -> dict:
        return {"m": self.m, "re": self.z.real.tolist(), "im": self.z.imag.tolist()}

    @classmethod
    def from_json_dict(cls, payload: dict, require_unit_diagonal: bool = True) -> "GramMatrix":
        m = int(payload["m"])
        re = np.asarray(payload["re"], dtype=float)
        im = np.asarray(payload["im"], dtype=float)
        if re.shape != (m, m) or im.shape != (m, m):
            raise ValueError(f"Gram JSON arrays must be {m}x{m}")
        return cls(re + 1j * im, require_unit_diagonal=require_unit_diagonal)

    def __repr__(self):
        return f"GramMatrix(m={self.m})"


def gram_purity(gram: GramMatrix) -> float:
    """P = (1/M^2) sum_kl |Z_kl|^2 = Tr(rho_A^2)."""
    return float(np.sum(np.abs(gram.z) ** 2)) / gram.m**2


def purity_upper_bound(test_states) -> float:
    """(1/M^2) sum_kl F(rho_k, rho_l): pairwise-fidelity bound on the Gram purity."""
    m = len(test_states)
    total = float(m)  # diagonal terms F(rho, rho) = 1
    for k in range(m):
        for l in range(k + 1, m):
            total += 2.0 * fidelity(test_states[k], test_states[l])
    return total / m**2


def rotation_ensemble(seed: DensityMatrix, m: int) -> list:
    """Test states rho_k = U^k rho_0 U^{-k}, U = rotation(2 pi / M)."""
    if m < 1:
        raise ValueError("ensemble size must be >= 1")
    u = rotation(2.0 * np.pi / m, seed.dim).matrix
    states = [seed]
    current = seed.matrix
    for _ in range(m - 1):
        current = u @ current @ u.conj().T
        states.append(DensityMatrix(current, allow_sub_normalized=True))
    return states


def is_rotation_generated(states, tol: float = 1e-8) -> bool:
    """True when rho_k = U^k rho_0 U^{-k} within tol for all k."""
    m = len(states)
    u = rotation(2.0 * np.pi / m, states[0].dim).matrix
    current = states[0].matrix
    for k in range(1, m):
        current = u @ current @ u.conj().T
        if float(np.max(np.abs(states[k].matrix - current))) > tol:
            return False
    return True


@dataclass
class GramOptResult:
    gram: GramMatrix
    rho_in: BipartiteBlockMatrix
    h_value: float
    purity: float
    purity_upper_bound: float
    diagnostics: dict

    def __post_init__(self):
        if self.purity > self.purity_upper_bound + 1e-6:
            raise ValueError(
                f"achieved purity {self.purity:.8f} exceeds the pairwise-fidelity bound "
                f"{self.purity_upper_bound:.8f}")


def _alignment_phases(states) -> np.ndarray:
    """Per-state phases making nearest-neighbour overlap proxies real positive.

    Proxy overlap: principal eigenvectors with a deterministic gauge.  Any
    choice of phases yields a valid Gram (purification vectors are only
    defined up to phase); this one just centres the optimizer's search where
    the overlaps' imaginary parts are small.
    """
    m = len(states)
    vecs = []
    for st in states:
        w, v = np.linalg.eigh(st.matrix)
        vec = v[:, -1]
        pivot = int(np.argmax(np.abs(vec)))
        gauge = vec[pivot] / abs(vec[pivot])
        vecs.append(vec / gauge)
    phases = np.zeros(m)
    for k in range(1, m):
        ov = complex(np.vdot(vecs[k - 1], vecs[k]))
        step = np.angle(ov) if abs(ov) > 1e-12 else 0.0
        phases[k] = phases[k - 1] - step
    return phases


def _check_gram_solution(sol) -> None:
    """The block-diagonal input is always feasible, so anything short of an
    accurate iterate is a solver failure.  Degenerate instances (orthogonal
    supports, pure states) may stop just shy of the target tolerance; those
    near-converged iterates are accepted."""
    if sol.status is SDPStatus.OPTIMAL:
        return
    if max(sol.primal_residual, sol.dual_residual) <= 1e-6:
        return
    raise RuntimeError(
        f"Gram optimization solver failed with status {sol.status.value} "
        f"(residuals {sol.primal_residual:.2e}/{sol.dual_residual:.2e}; "
        f"the block-diagonal input is always feasible)")


def _solve_general(states, weights, phases, config) -> tuple:
    """Maximize sum_{k>l} Re(weights[k,l] * Z'_kl) over compatible rho_in.

    Z' is the Gram in the frame rotated by the given per-state phases.
    Returns (z_rotated, rho_in_blocks, objective_value, solution).
    """
    m = len(states)
    d = states[0].dim
    u_phase = np.exp(1j * phases)

    prob = SDPProblem()
    prob.add_variable("rho_in", m * d)

    c_obj = np.zeros((m * d, m * d), dtype=complex)
    idx = np.arange(d)
    for k in range(m):
        for l in range(k):
            u_kl = u_phase[l] / u_phase[k]
            c = 0.5 * m * weights[k, l] * u_kl
            c_obj[k * d + idx, l * d + idx] = c
            c_obj[l * d + idx, k * d + idx] = np.conj(c)
    prob.set_objective({"rho_in": c_obj}, maximize=True)

    for k, st in enumerate(states):
        prob.fix_diagonal_subblock("rho_in", k * d, st.matrix / m, label=f"test-state-{k}")

    sol = prob.solve(config)
    _check_gram_solution(sol)
    t_mat = sol.variables["rho_in"]
    blocks = m * np.transpose(t_mat.reshape(m, d, m, d), (0, 2, 1, 3))
    # rotate into the chosen frame: block'_kl = e^{i(phi_k - phi_l)} block_kl
    frame = np.outer(u_phase, u_phase.conj())
    blocks = blocks * frame[:, :, None, None]
    z_rot = np.einsum("lkii->kl", blocks)  # Z'_kl = Tr block'_lk
    return z_rot, blocks, sol.objective, sol


def _symmetric_objective(m, d, weights_d) -> np.ndarray:
    """Diagonal objective coefficients for the standard-form variables.

    Objective sum_{d*} (M-d*) Re(w_{d*} zeta'_{d*}) expressed on the diagonals
    of the E_k: coeff[k, j] multiplying [E_k]_{jj}.
    """
    coeff = np.zeros((m, d))
    omega = np.exp(2j * np.pi / m)
    for k in range(m):
        for j in range(d):
            val = 0.0
            for dist in range(1, m):
                val += (m - dist) * np.real(np.conj(weights_d[dist]) * omega ** (dist * (k - j)))
            coeff[k, j] = val
    return coeff


def _solve_symmetric(states, weights_d, config) -> tuple:
    """Symmetric-sector version: variables are the standard-form blocks E_k."""
    m = len(states)
    d = states[0].dim

    prob = SDPProblem()
    for k in range(m):
        prob.add_variable(f"E{k}", d)
    coeff = _symmetric_objective(m, d, weights_d)
    prob.set_objective({f"E{k}": np.diag(coeff[k]).astype(complex) for k in range(m)},
                       maximize=True)
    prob.add_entry_equalities({f"E{k}": 1.0 for k in range(m)}, states[0].matrix,
                              label="seed-state")
    sol = prob.solve(config)
    _check_gram_solution(sol)
    e = np.stack([sol.variables[f"E{k}"] for k in range(m)])
    omega = np.exp(2j * np.pi / m)
    diags = np.real(np.einsum("kjj->kj", e))
    g = np.array([np.sum(diags * omega ** (dist * (np.arange(m)[:, None] - np.arange(d)[None, :])))
                  for dist in range(m)])
    zeta = np.conj(g)
    idx = np.mod(np.subtract.outer(np.arange(m), np.arange(m)), m)
    z = zeta[idx]
    blocks = from_standard_form(StandardForm(e, check=False)).blocks
    return z, blocks, sol.objective, sol


def optimize_gram(test_states, symmetric: bool = False, *, pre_rotate: bool = True,
                  refine_purity: bool = False, max_refine_iters: int = 8,
                  solver_config: SDPConfig | None = None) -> GramOptResult:
    """Choose purification overlaps for the given test states.

    Maximizes h = sum_{k>l} (Re Z_kl + Im Z_kl) over all PSD input matrices
    whose diagonal blocks are exactly the test states.  With ``symmetric``
    set (valid only for rotation-generated ensembles, verified to 1e-8), the
    variable is parameterized in the standard form, cutting the free
    parameters from O(M^2) blocks to M blocks.

    ``pre_rotate`` applies the diagonal phase freedom of the purifications to
    put the achievable overlap phases near zero before optimizing (general
    path only: the symmetric sector admits only the M discrete phase shifts,
    of which the identity is used).  ``refine_purity`` runs a few rounds of
    iterated linearization of the Gram purity on top of the h optimum; each
    round cannot decrease the purity.
    """
    m = len(test_states)
    if m < 2:
        raise ValueError("need at least 2 test states")
    dims = {st.dim for st in test_states}
    if len(dims) != 1:
        raise ValueError(f"test states have mixed dimensions {dims}")
    config = solver_config or SDPConfig()

    if symmetric:
        if not is_rotation_generated(test_states):
            raise ValueError("symmetric optimization requires a rotation-generated ensemble "
                             "(rho_k = U^k rho_0 U^-k within 1e-8)")
        weights = np.full(m, 1.0 - 1.0j)  # h objective, per circulant distance

        def solve_again(w):
            return _solve_symmetric(test_states, w, config)

        def weights_from_z(zz):
            return np.conj(zz[:, 0])

        z, blocks, h_value, sol = _solve_symmetric(test_states, weights, config)
    else:
        phases = _alignment_phases(test_states) if pre_rotate else np.zeros(m)
        weights = np.full((m, m), 1.0 - 1.0j)

        def solve_again(w):
            return _solve_general(test_states, w, phases, config)

        def weights_from_z(zz):
            return np.conj(zz)

        z, blocks, h_value, sol = _solve_general(test_states, weights, phases, config)

    diagnostics = {
        "solver_status": sol.status.value,
        "solver_iterations": sol.iterations,
        "primal_residual": sol.primal_residual,
        "dual_residual": sol.dual_residual,
        "refine_rounds": 0,
    }

    if refine_purity:
        best_purity = float(np.sum(np.abs(z) ** 2)) / m**2
        for round_idx in range(max_refine_iters):
            z_new, blocks_new, _, sol_new = solve_again(weights_from_z(z))
            new_purity = float(np.sum(np.abs(z_new) ** 2)) / m**2
            diagnostics["refine_rounds"] = round_idx + 1
            if new_purity <= best_purity + 1e-10:
                break
            z, blocks = z_new, blocks_new
            best_purity = new_purity

    # Clean tiny numerical diagonal drift before validation.
    z = z.copy()
    np.fill_diagonal(z, 1.0)
    gram = GramMatrix(z)
    rho_in = BipartiteBlockMatrix(blocks, check=False)
    return GramOptResult(
        gram=gram,
        rho_in=rho_in,
        h_value=float(h_value),
        purity=gram_purity(gram),
        purity_upper_bound=purity_upper_bound(test_states),
        diagnostics=diagnostics,
    )


@dataclass
class CPTPOrderResult:
    feasible: bool
    witness: np.ndarray | None
    slack: float
    reason: str

    def __bool__(self):
        return self.feasible


def cptp_reachable(g: GramMatrix, d: GramMatrix, tol: float = 1e-9,
                   solver_config: SDPConfig | None = None) -> CPTPOrderResult:
    """Feasibility of G = P o D with P PSD and unit diagonal.

    Feasible exactly when a channel maps states realizing Gram G onto states
    realizing Gram D.  Entries of P are pinned wherever D_kl != 0; remaining
    entries are completed by maximizing the minimum eigenvalue of P (a small
    SDP).  Returns the witness P when feasible.
    """
    if g.m != d.m:
        raise ValueError(f"Gram size mismatch: {g.m} vs {d.m}")
    m = g.m
    zero_tol = 1e-12

    p_fixed = np.eye(m, dtype=complex)
    free_mask = np.zeros((m, m), dtype=bool)
    for k in range(m):
        for l in range(k + 1, m):
            dv, gv = d.z[k, l], g.z[k, l]
            if abs(dv) <= zero_tol:
                if abs(gv) > tol:
                    return CPTPOrderResult(
                        False, None, -np.inf,
                        f"entry ({k},{l}): D is zero but G = {gv:.3e} != 0")
                free_mask[k, l] = free_mask[l, k] = True
            else:
                val = gv / dv
                p_fixed[k, l] = val
                p_fixed[l, k] = np.conj(val)

    if not free_mask.any():
        min_eig = float(np.linalg.eigvalsh(p_fixed)[0])
        if min_eig >= -tol:
            return CPTPOrderResult(True, p_fixed, min_eig, "determined entrywise; PSD")
        return CPTPOrderResult(False, None, min_eig,
                               f"determined entrywise; min eigenvalue {min_eig:.3e} < 0")

    # Complete the free entries: maximize t s.t. P >= t I  via  Q = P - t I >= 0.
    prob = SDPProblem()
    prob.add_variable("Q", m)
    prob.add_variable("t_pos", 1)
    prob.add_variable("t_neg", 1)
    prob.set_objective({"t_pos": np.eye(1), "t_neg": -np.eye(1)}, maximize=True)
    for k in range(m):
        row = prob.new_equality_row(1.0, label=f"diag-{k}")
        prob.row_add_real_part(row, "Q", k, k, 1.0)
        prob.row_add_real_part(row, "t_pos", 0, 0, 1.0)
        prob.row_add_real_part(row, "t_neg", 0, 0, -1.0)
    for k in range(m):
        for l in range(k + 1, m):
            if free_mask[k, l]:
                continue
            z = p_fixed[k, l]
            row_re = prob.new_equality_row(float(z.real), label=f"fixed-re-{k}-{l}")
            prob.row_add_real_part(row_re, "Q", k, l, 1.0)
            row_im = prob.new_equality_row(float(z.imag), label=f"fixed-im-{k}-{l}")
            prob.row_add_real_part(row_im, "Q", k, l, -1j)
    sol = prob.solve(solver_config or SDPConfig())
    if sol.status is not SDPStatus.OPTIMAL:
        return CPTPOrderResult(False, None, -np.inf,
                               f"completion solver status {sol.status.value}")
    t_star = float(np.real(sol.variables["t_pos"][0, 0] - sol.variables["t_neg"][0, 0]))
    if t_star < -tol:
        return CPTPOrderResult(False, None, t_star,
                               f"best completion has min eigenvalue {t_star:.3e} < 0")
    witness = sol.variables["Q"] + t_star * np.eye(m)
    return CPTPOrderResult(True, witness, t_star, "completed by SDP")
