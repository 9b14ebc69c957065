"""Channel simulators for benchmark fixtures, as Kraus maps at a fixed cutoff.

All channels here are phase covariant (they commute with Fock-space
rotations), so rotation-generated ensembles stay rotation-generated after the
channel acts.  Truncation can leave a completely positive map slightly
trace-deficient near the top Fock levels; ``ensure_trace_preserving`` patches
this by routing the lost weight into the vacuum (a measure-and-prepare
operation, so it never creates entanglement and keeps the classical fixtures
honestly classical).
"""

from __future__ import annotations

import math

import numpy as np

from .fock import DensityMatrix

__all__ = [
    "KrausChannel",
    "identity_channel",
    "loss_channel",
    "amplifier_channel",
    "additive_noise_channel",
    "heterodyne_mp_channel",
    "dephasing_channel",
    "replace_channel",
]


class KrausChannel:
    """Completely positive map rho -> sum_k K_k rho K_k^dag."""

    def __init__(self, kraus, name: str = "channel", entanglement_breaking: bool = False):
        kraus = [np.asarray(k, dtype=complex) for k in kraus]
        if not kraus:
            raise ValueError("need at least one Kraus operator")
        dim = kraus[0].shape[0]
        for k in kraus:
            if k.shape != (dim, dim):
                raise ValueError("all Kraus operators must be square with equal dimension")
        self.kraus = kraus
        self.dim = dim
        self.name = name
        self.entanglement_breaking = entanglement_breaking

    def apply_matrix(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k in self.kraus:
            out += k @ rho @ k.conj().T
        return (out + out.conj().T) / 2.0

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        if rho.dim != self.dim:
            raise ValueError(f"channel dimension {self.dim} != state dimension {rho.dim}")
        return DensityMatrix(self.apply_matrix(rho.matrix), allow_sub_normalized=True)

    def completeness_defect(self) -> np.ndarray:
        """I - sum_k K_k^dag K_k (zero for an exactly trace-preserving map)."""
        acc = np.zeros((self.dim, self.dim), dtype=complex)
        for k in self.kraus:
            acc += k.conj().T @ k
        return np.eye(self.dim) - acc

    def is_trace_preserving(self, tol: float = 1e-10) -> bool:
        return float(np.max(np.abs(self.completeness_defect()))) <= tol

    def covariance_defect(self) -> float:
        """Max deviation of Lambda(U rho U^dag) from U Lambda(rho) U^dag on a basis."""
        from .fock import rotation

        u = rotation(2.0 * np.pi / 8, self.dim).matrix
        rng = np.random.default_rng(1234)
        worst = 0.0
        for _ in range(3):
            a = rng.standard_normal((self.dim, self.dim)) + 1j * rng.standard_normal((self.dim, self.dim))
            rho = a @ a.conj().T
            rho /= np.real(np.trace(rho))
            lhs = self.apply_matrix(u @ rho @ u.conj().T)
            rhs = u @ self.apply_matrix(rho) @ u.conj().T
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst


def ensure_trace_preserving(kraus, dim: int, tol: float = 1e-12):
    """Append refill operators routing any completeness defect into |0><0|."""
    acc = np.zeros((dim, dim), dtype=complex)
    for k in kraus:
        acc += np.asarray(k).conj().T @ np.asarray(k)
    defect = np.eye(dim) - acc
    defect = (defect + defect.conj().T) / 2.0
    w, v = np.linalg.eigh(defect)
    extra = []
    for lam, vec in zip(w, v.T):
        if lam > tol:
            op = np.zeros((dim, dim), dtype=complex)
            op[0, :] = math.sqrt(lam) * vec.conj()
            extra.append(op)
    return list(kraus) + extra


def identity_channel(dim: int) -> KrausChannel:
    return KrausChannel([np.eye(dim, dtype=complex)], name="identity")


def loss_channel(transmissivity: float, dim: int) -> KrausChannel:
    """Beam splitter with vacuum: photons survive with probability ``transmissivity``.

    Exactly trace preserving at any cutoff.
    """
    eta = float(transmissivity)
    if not 0.0 <= eta <= 1.0:
        raise ValueError("transmissivity must lie in [0, 1]")
    kraus = []
    for k in range(dim):
        mat = np.zeros((dim, dim), dtype=complex)
        for n in range(k, dim):
            mat[n - k, n] = math.sqrt(math.comb(n, k) * (1.0 - eta) ** k * eta ** (n - k))
        if np.any(mat):
            kraus.append(mat)
    return KrausChannel(kraus, name=f"loss({1.0 - eta:.3g})")


def amplifier_channel(gain: float, dim: int) -> KrausChannel:
    """Phase-insensitive amplifier with the given gain G >= 1."""
    g = float(gain)
    if g < 1.0:
        raise ValueError("gain must be >= 1")
    if g == 1.0:
        return identity_channel(dim)
    t = math.sqrt(1.0 - 1.0 / g)  # tanh r with cosh^2 r = G
    kraus = []
    for k in range(dim):
        mat = np.zeros((dim, dim), dtype=complex)
        for n in range(0, dim - k):
            mat[n + k, n] = math.sqrt(math.comb(n + k, k)) * t**k * g ** (-(n + 1) / 2.0)
        if np.any(mat):
            kraus.append(mat)
    return KrausChannel(ensure_trace_preserving(kraus, dim), name=f"amplifier({g:.3g})")


def additive_noise_channel(excess: float, dim: int) -> KrausChannel:
    """Classical Gaussian noise: quadrature variances grow by ``excess`` each,
    first moments unchanged.  Realized as amplification followed by loss."""
    eps = float(excess)
    if eps < 0:
        raise ValueError("excess noise must be nonnegative")
    if eps == 0:
        return identity_channel(dim)
    if eps >= 1:
        raise ValueError("excess >= 1 is outside the amplifier-loss composition's range")
    g = 1.0 / (1.0 - eps)
    amp = amplifier_channel(g, dim)
    att = loss_channel(1.0 / g, dim)
    kraus = [a @ b for a in att.kraus for b in amp.kraus]
    kraus = [k for k in kraus if float(np.max(np.abs(k))) > 1e-14]
    return KrausChannel(ensure_trace_preserving(kraus, dim), name=f"additive_noise({eps:.3g})")


def _heterodyne_matrix_map(dim: int):
    """Closed-form Fock matrix elements of the heterodyne measure-and-prepare map

        rho -> (1/pi) integral <beta|rho|beta> |beta><beta| d^2 beta :

        [out]_{mn} = sum_{j-k = m-n} rho_{jk} (m+k)! / (2^{m+k+1} sqrt(j! k! m! n!)) .

    Exactly phase covariant (only index differences couple).
    """
    logfact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, 2 * dim, dtype=float)))))

    def coef(mm, nn, kk):
        jj = kk + mm - nn
        s = mm + kk
        return math.exp(logfact[s] - (s + 1) * math.log(2.0)
                        - 0.5 * (logfact[jj] + logfact[kk] + logfact[mm] + logfact[nn]))

    tensors = {}
    for s in range(-(dim - 1), dim):
        rows = []
        for mm in range(dim):
            nn = mm - s
            if not 0 <= nn < dim:
                continue
            for kk in range(dim):
                jj = kk + s
                if not 0 <= jj < dim:
                    continue
                rows.append((mm, nn, jj, kk, coef(mm, nn, kk)))
        tensors[s] = rows
    return tensors


def heterodyne_mp_channel(dim: int) -> KrausChannel:
    """Heterodyne measurement followed by coherent-state re-preparation.

    Entanglement breaking; on a coherent state it returns a displaced thermal
    state with one added thermal photon.  Built from the exact Fock-basis
    integral (no phase-space grid), then factored into Kraus operators through
    the Choi matrix; truncation loss is refilled into the vacuum.
    """
    tensors = _heterodyne_matrix_map(dim)
    choi = np.zeros((dim * dim, dim * dim), dtype=complex)
    # Choi = sum_{jk} |j><k| (x) Lambda(|j><k|)
    for s, rows in tensors.items():
        for mm, nn, jj, kk, c in rows:
            choi[jj * dim + mm, kk * dim + nn] += c
    choi = (choi + choi.conj().T) / 2.0
    w, v = np.linalg.eigh(choi)
    kraus = []
    for lam, vec in zip(w, v.T):
        if lam > 1e-13:
            kraus.append(math.sqrt(lam) * vec.reshape(dim, dim).T)
    kraus = ensure_trace_preserving(kraus, dim)
    return KrausChannel(kraus, name="heterodyne_mp", entanglement_breaking=True)


def dephasing_channel(dim: int) -> KrausChannel:
    """Full dephasing in the Fock basis (kills every off-diagonal element)."""
    kraus = [np.zeros((dim, dim), dtype=complex) for _ in range(dim)]
    for n in range(dim):
        kraus[n][n, n] = 1.0
    return KrausChannel(kraus, name="dephasing", entanglement_breaking=True)


def replace_channel(sigma: DensityMatrix) -> KrausChannel:
    """Trace-and-replace with the fixed state sigma (diagonal sigma stays covariant)."""
    dim = sigma.dim
    w, v = np.linalg.eigh(sigma.matrix)
    kraus = []
    for lam, vec in zip(w, v.T):
        if lam <= 1e-14:
            continue
        for j in range(dim):
            op = math.sqrt(lam) * np.outer(vec, np.eye(dim)[j])
            kraus.append(op)
    return KrausChannel(kraus, name="replace", entanglement_breaking=True)


def build_channel(spec: dict, dim: int) -> KrausChannel:
    """Construct a channel from a config section {kind, ...}."""
    kind = spec.get("kind", "identity")
    if kind == "identity":
        return identity_channel(dim)
    if kind == "loss":
        return loss_channel(1.0 - float(spec.get("loss", 0.0)), dim)
    if kind == "loss_excess":
        att = loss_channel(1.0 - float(spec.get("loss", 0.0)), dim)
        noise = additive_noise_channel(float(spec.get("excess", 0.0)), dim)
        kraus = [a @ b for a in noise.kraus for b in att.kraus]
        kraus = [k for k in kraus if float(np.max(np.abs(k))) > 1e-14]
        return KrausChannel(ensure_trace_preserving(kraus, dim), name="loss_excess")
    if kind == "heterodyne_mp":
        return heterodyne_mp_channel(dim)
    if kind == "dephasing":
        return dephasing_channel(dim)
    if kind == "replace":
        n_mean = float(spec.get("thermal_mean", 0.0))
        diag = np.exp(np.arange(dim) * math.log(n_mean / (1 + n_mean))) / (1 + n_mean) \
            if n_mean > 0 else np.concatenate(([1.0], np.zeros(dim - 1)))
        diag = diag / diag.sum()
        return replace_channel(DensityMatrix(np.diag(diag).astype(complex)))
    raise ValueError(f"unknown channel kind '{kind}'")
