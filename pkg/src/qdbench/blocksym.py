"""Bipartite block matrices with discrete phase symmetry.

A ``BipartiteBlockMatrix`` holds an M x M grid of D x D blocks tau_kl for a
joint system (A tensor B), with A an M-level register and B a truncated Fock
space.  The stored blocks carry the convention

    full matrix = (1/M) * sum_{k,l} |k><l| (x) tau_kl ,

so the total trace is (1/M) sum_k Tr(tau_kk) and the element-wise formulas of
the block-circulant standard form apply verbatim.

The M-fold phase symmetry is U tau_kl U^dag = tau_{k+1,l+1 (mod M)} with
U = rotation(2 pi / M).  Matrices with this symmetry are unitarily equivalent
to a direct sum of M blocks E_k (the "standard form"); the partial transpose
on A stays in the symmetric sector and its standard-form blocks arise from a
pure entry rearrangement of the E_k, which turns the trace norm of the partial
transpose into a sum of M small trace norms.
"""

from __future__ import annotations

import numpy as np

from .fock import rotation, trace_norm

__all__ = [
    "BipartiteBlockMatrix",
    "StandardForm",
    "PTStandardForm",
    "partial_transpose",
    "negativity",
    "twirl",
    "symmetry_check",
    "to_standard_form",
    "from_standard_form",
    "pt_rearrange",
    "negativity_stform",
    "gram_of",
]

SYMMETRY_TOL = 1e-8
BLOCK_HERMITICITY_TOL = 1e-10


def _mod_index(i: int | np.ndarray, m: int):
    """Centralized modular index arithmetic for block labels."""
    return np.mod(i, m)


class BipartiteBlockMatrix:
    """M x M grid of D x D complex blocks, Hermitian as a whole."""

    __slots__ = ("m", "dim", "blocks")

    def __init__(self, blocks: np.ndarray, check: bool = True):
        blocks = np.asarray(blocks, dtype=complex)
        if blocks.ndim != 4 or blocks.shape[0] != blocks.shape[1] or blocks.shape[2] != blocks.shape[3]:
            raise ValueError(f"blocks must have shape (M, M, D, D), got {blocks.shape}")
        self.m = blocks.shape[0]
        self.dim = blocks.shape[2]
        self.blocks = blocks
        if check:
            err = self.hermiticity_error()
            if err > BLOCK_HERMITICITY_TOL:
                raise ValueError(f"bipartite matrix is not Hermitian (deviation {err:.3e})")

    def hermiticity_error(self) -> float:
        flipped = np.conj(np.transpose(self.blocks, (1, 0, 3, 2)))
        return float(np.max(np.abs(self.blocks - flipped)))

    def full_matrix(self) -> np.ndarray:
        """Dense (M*D) x (M*D) matrix including the 1/M prefactor."""
        m, d = self.m, self.dim
        out = np.transpose(self.blocks, (0, 2, 1, 3)).reshape(m * d, m * d)
        return out / m

    @classmethod
    def from_full(cls, full: np.ndarray, m: int, check: bool = True) -> "BipartiteBlockMatrix":
        full = np.asarray(full, dtype=complex)
        n = full.shape[0]
        if full.ndim != 2 or full.shape[1] != n or n % m != 0:
            raise ValueError(f"full matrix of shape {full.shape} does not split into {m} blocks")
        d = n // m
        blocks = m * np.transpose(full.reshape(m, d, m, d), (0, 2, 1, 3))
        return cls(blocks, check=check)

    @classmethod
    def from_pure_family(cls, vectors) -> "BipartiteBlockMatrix":
        """Entangled-state construction: block (k,l) = |psi_k><psi_l|.

        ``vectors`` are the (possibly unnormalized) state vectors; the result
        represents the projector onto (1/sqrt(M)) sum_k |k>|psi_k>.
        """
        vecs = np.asarray(vectors, dtype=complex)
        blocks = np.einsum("ki,lj->klij", vecs, vecs.conj())
        return cls(blocks)

    def trace(self) -> float:
        return float(np.real(np.einsum("kkii->", self.blocks) / self.m))

    def block_traces(self) -> np.ndarray:
        """M x M matrix of block traces Tr(tau_kl)."""
        return np.einsum("klii->kl", self.blocks)

    def to_json_dict(self) -> dict:
        full = self.full_matrix()
        return {"m": self.m, "dim": self.dim,
                "re": full.real.tolist(), "im": full.imag.tolist()}

    @classmethod
    def from_json_dict(cls, payload: dict, check: bool = True) -> "BipartiteBlockMatrix":
        m = int(payload["m"])
        d = int(payload["dim"])
        re = np.asarray(payload["re"], dtype=float)
        im = np.asarray(payload["im"], dtype=float)
        if re.shape != (m * d, m * d) or im.shape != (m * d, m * d):
            raise ValueError(f"bipartite JSON arrays must be {m * d}x{m * d}")
        return cls.from_full(re + 1j * im, m, check=check)

    def __repr__(self):
        return f"BipartiteBlockMatrix(m={self.m}, dim={self.dim})"


class StandardForm:
    """Block-diagonal encoding {E_k} of a phase-symmetric bipartite matrix."""

    __slots__ = ("m", "dim", "e")

    def __init__(self, e: np.ndarray, check: bool = True):
        e = np.asarray(e, dtype=complex)
        if e.ndim != 3 or e.shape[1] != e.shape[2]:
            raise ValueError(f"standard form must have shape (M, D, D), got {e.shape}")
        self.m = e.shape[0]
        self.dim = e.shape[1]
        self.e = e
        if check:
            total = e.sum(axis=0)
            err = float(np.max(np.abs(total - total.conj().T)))
            if err > BLOCK_HERMITICITY_TOL:
                raise ValueError(f"sum of standard-form blocks is not Hermitian (deviation {err:.3e})")

    def block_sum(self) -> np.ndarray:
        """sum_k E_k; equals the (0,0) block of the encoded matrix."""
        return self.e.sum(axis=0)

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "dim": self.dim,
            "blocks": [{"re": b.real.tolist(), "im": b.imag.tolist()} for b in self.e],
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "StandardForm":
        m = int(payload["m"])
        d = int(payload["dim"])
        blocks = payload["blocks"]
        if len(blocks) != m:
            raise ValueError(f"expected {m} blocks, got {len(blocks)}")
        e = np.empty((m, d, d), dtype=complex)
        for k, blk in enumerate(blocks):
            re = np.asarray(blk["re"], dtype=float)
            im = np.asarray(blk["im"], dtype=float)
            if re.shape != (d, d) or im.shape != (d, d):
                raise ValueError(f"block {k} is not {d}x{d}")
            e[k] = re + 1j * im
        return cls(e)

    def __repr__(self):
        return f"StandardForm(m={self.m}, dim={self.dim})"


class PTStandardForm:
    """Standard-form blocks of the partially transposed matrix."""

    __slots__ = ("m", "dim", "etilde")

    def __init__(self, etilde: np.ndarray):
        etilde = np.asarray(etilde, dtype=complex)
        if etilde.ndim != 3 or etilde.shape[1] != etilde.shape[2]:
            raise ValueError(f"expected shape (M, D, D), got {etilde.shape}")
        self.m = etilde.shape[0]
        self.dim = etilde.shape[1]
        self.etilde = etilde

    def __repr__(self):
        return f"PTStandardForm(m={self.m}, dim={self.dim})"


def partial_transpose(tau: BipartiteBlockMatrix) -> BipartiteBlockMatrix:
    """Transpose on subsystem A: block (k,l) of the output is block (l,k) of the input."""
    return BipartiteBlockMatrix(np.transpose(tau.blocks, (1, 0, 2, 3)).copy(), check=False)


def negativity(tau: BipartiteBlockMatrix, psd_tol: float = 1e-9) -> float:
    """N = (||tau^{T_A}||_1 - Tr tau)/2 by direct eigendecomposition.

    Equals the sum of |negative eigenvalues| of the partial transpose for a
    trace-normalized PSD input, which is validated here.
    """
    full = tau.full_matrix()
    min_eig = float(np.linalg.eigvalsh(full)[0])
    if min_eig < -psd_tol:
        raise ValueError(f"negativity requires a PSD input (min eigenvalue {min_eig:.3e})")
    pt = partial_transpose(tau).full_matrix()
    eigs = np.linalg.eigvalsh(pt)
    return float((np.sum(np.abs(eigs)) - np.sum(eigs)) / 2.0)


def twirl(tau: BipartiteBlockMatrix) -> BipartiteBlockMatrix:
    """Project onto the M-fold phase-symmetric sector.

    Averages the M transforms (shift both block labels by t, conjugate the
    blocks by U^t); linear, trace preserving, idempotent, and the identity on
    already-symmetric input.
    """
    m, d = tau.m, tau.dim
    u = rotation(2.0 * np.pi / m, d).matrix
    phases = np.diag(u)
    out = np.zeros_like(tau.blocks)
    idx = np.arange(m)
    ut_diag = np.ones(d, dtype=complex)
    for t in range(m):
        # U^t tau_{k-t, l-t} U^{-t}, computed with diagonal phases.
        shifted = tau.blocks[np.ix_(_mod_index(idx - t, m), _mod_index(idx - t, m))]
        out += shifted * np.outer(ut_diag, ut_diag.conj())[None, None, :, :]
        ut_diag = ut_diag * phases
    return BipartiteBlockMatrix(out / m, check=False)


def symmetry_check(tau: BipartiteBlockMatrix) -> float:
    """Max over (k,l) of || U tau_kl U^dag - tau_{k+1,l+1 mod M} ||_max."""
    m, d = tau.m, tau.dim
    if m == 1:
        return 0.0
    u_diag = np.diag(rotation(2.0 * np.pi / m, d).matrix)
    rotated = tau.blocks * np.outer(u_diag, u_diag.conj())[None, None, :, :]
    idx = _mod_index(np.arange(m) + 1, m)
    shifted = tau.blocks[np.ix_(idx, idx)]
    return float(np.max(np.abs(rotated - shifted)))


def _phase_table(m: int) -> np.ndarray:
    """omega^{a*b} for a, b in 0..m-1, omega = exp(2 pi i / m)."""
    a = np.arange(m)
    return np.exp(2j * np.pi / m * np.outer(a, a))


def to_standard_form(tau: BipartiteBlockMatrix, tol: float = SYMMETRY_TOL) -> StandardForm:
    """Standard form of a phase-symmetric matrix.

    Element-wise, with omega = exp(2 pi i / M) and [tau]_{mj,nl} the full
    matrix elements (A index first):

        [E_k]_{jl} = (1/M) sum_{m,n} omega^{m(j-k) + n(k-l)} [tau]_{mj,nl} .

    The E_k inherit PSDness from tau and satisfy sum_k E_k = tau_00.
    """
    dev = symmetry_check(tau)
    if dev > tol:
        raise ValueError(f"matrix violates the phase symmetry (deviation {dev:.3e} > {tol:.1e})")
    m, d = tau.m, tau.dim
    # exponents m(j-k) and n(k-l); [tau]_{mj,nl} = blocks[m,n,j,l] / M
    mg = np.arange(m)
    k_idx = np.arange(m)
    j_idx = np.arange(d)
    jk = np.subtract.outer(j_idx, k_idx)                                # (j, k) -> j - k
    kl = np.subtract.outer(k_idx, j_idx)                                # (k, l) -> k - l
    ph_m = np.exp(2j * np.pi / m * np.einsum("a,jk->ajk", mg, jk))      # (m_idx, j, k)
    ph_n = np.exp(2j * np.pi / m * np.einsum("a,kl->akl", mg, kl))      # (n_idx, k, l)
    e = np.einsum("ajk,bkl,abjl->kjl", ph_m, ph_n, tau.blocks) / (m * m)
    return StandardForm(e)


def from_standard_form(sf: StandardForm) -> BipartiteBlockMatrix:
    """Inverse of :func:`to_standard_form`:

        [tau]_{ij,kl} = (1/M) sum_m omega^{m(i-k) + k*l - i*j} [E_m]_{jl} .

    The output always satisfies the phase symmetry.
    """
    m, d = sf.m, sf.dim
    mg = np.arange(m)
    i_idx = np.arange(m)
    j_idx = np.arange(d)
    ik = np.subtract.outer(i_idx, i_idx)                                # (i, k) -> i - k
    ph_m = np.exp(2j * np.pi / m * np.einsum("a,ik->aik", mg, ik))      # (m_idx, i, k)
    cross = np.exp(2j * np.pi / m * (
        np.einsum("k,l->kl", i_idx, j_idx)[None, :, None, :]            # k*l term -> (1, k, 1, l)
        - np.einsum("i,j->ij", i_idx, j_idx)[:, None, :, None]          # -i*j term -> (i, 1, j, 1)
    ))                                                                  # (i, k, j, l)
    blocks = np.einsum("aik,ikjl,ajl->ikjl", ph_m, cross, sf.e)
    return BipartiteBlockMatrix(blocks, check=False)


def pt_rearrange(sf: StandardForm) -> PTStandardForm:
    """Entry rearrangement [Etilde_k]_{jl} = [E_{j+l-k mod M}]_{jl}.

    These are the standard-form blocks of the partial transpose.  The map is
    an involution: applying it twice returns the input bit-exactly.
    """
    m, d = sf.m, sf.dim
    j_idx = np.arange(d)[:, None]
    l_idx = np.arange(d)[None, :]
    out = np.empty_like(sf.e)
    for k in range(m):
        src = _mod_index(j_idx + l_idx - k, m)
        out[k] = sf.e[src, j_idx, l_idx]
    return PTStandardForm(out)


def pt_rearrange_inverse(pt: PTStandardForm) -> StandardForm:
    """Inverse rearrangement (the map is its own inverse)."""
    m, d = pt.m, pt.dim
    j_idx = np.arange(d)[:, None]
    l_idx = np.arange(d)[None, :]
    out = np.empty_like(pt.etilde)
    for k in range(m):
        src = _mod_index(j_idx + l_idx - k, m)
        out[k] = pt.etilde[src, j_idx, l_idx]
    return StandardForm(out, check=False)


def negativity_stform(sf: StandardForm, psd_tol: float = 1e-9) -> float:
    """Negativity computed entirely in the standard form:

        N = ( sum_k ||Etilde_k||_1 - sum_k Tr(E_k) ) / 2 .
    """
    for k in range(sf.m):
        min_eig = float(np.linalg.eigvalsh((sf.e[k] + sf.e[k].conj().T) / 2.0)[0])
        if min_eig < -psd_tol:
            raise ValueError(f"standard-form block {k} is not PSD (min eigenvalue {min_eig:.3e})")
    pt = pt_rearrange(sf)
    tnorm = sum(trace_norm(pt.etilde[k]) for k in range(sf.m))
    total_trace = float(np.real(np.einsum("kii->", sf.e)))
    return float((tnorm - total_trace) / 2.0)


def gram_of(tau: BipartiteBlockMatrix):
    """Reduced matrix on A: entries (1/M) Tr(tau_kl), returned as a Gram object.

    For a grid built from pure vectors via :meth:`from_pure_family`, entry
    (k, l) is <psi_l|psi_k>/M.
    """
    from .gramopt import GramMatrix

    rho_a = tau.block_traces() / tau.m
    return GramMatrix.from_rho_a(rho_a, require_unit_diagonal=False)
