"""Dense state algebra: tensor products, partial traces, entropy, sampling.

Operators are plain complex ``numpy`` arrays. Bipartite operators on H ⊗ K use
the Kronecker index convention ``(i * dim_k + k, j * dim_k + l)``.
Entropies are in nats.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import BadRank, DimensionMismatch, NotADensityMatrix

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
EIG_FLOOR = 1e-15


class BipartiteDims(NamedTuple):
    dim_h: int
    dim_k: int

    @property
    def total(self) -> int:
        return self.dim_h * self.dim_k

    def check(self, op: np.ndarray) -> None:
        if self.dim_h < 1 or self.dim_k < 1:
            raise DimensionMismatch(f"dimensions must be >= 1, got {tuple(self)}")
        if op.shape != (self.total, self.total):
            raise DimensionMismatch(
                f"operator of shape {op.shape} does not act on "
                f"{self.dim_h}x{self.dim_k} = {self.total} dimensions"
            )


def make_rng(seed) -> np.random.Generator:
    """Return a Generator for an int, SeedSequence, Generator or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def partial_trace(rho: np.ndarray, dims: BipartiteDims, over: str = "K") -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    ``over="H"`` returns Tr_H(rho) on K, ``over="K"`` returns Tr_K(rho) on H.
    Works on any square operator of the right size, normalized or not.
    """
    rho = np.asarray(rho)
    dims = BipartiteDims(*dims)
    dims.check(rho)
    t = rho.reshape(dims.dim_h, dims.dim_k, dims.dim_h, dims.dim_k)
    if over == "H":
        return np.einsum("ikil->kl", t)
    if over == "K":
        return np.einsum("ikjk->ij", t)
    raise ValueError(f"over must be 'H' or 'K', got {over!r}")


def density_violation(rho: np.ndarray) -> str | None:
    """Describe why ``rho`` is not a density matrix, or None if it is one."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
        return f"not a square matrix: shape {rho.shape}"
    d = rho.shape[0]
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERM_TOL:
        return f"not Hermitian (max deviation {herm:.3e})"
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        return f"trace {tr.real:.12g} is not 1"
    lam_min = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    if lam_min < -PSD_TOL * d:
        return f"negative eigenvalue {lam_min:.3e}"
    return None


def is_density(rho: np.ndarray) -> bool:
    return density_violation(rho) is None


def validate_density(rho: np.ndarray, name: str = "rho") -> np.ndarray:
    """Return ``rho`` as a complex array, raising NotADensityMatrix if invalid."""
    rho = np.asarray(rho, dtype=complex)
    why = density_violation(rho)
    if why is not None:
        raise NotADensityMatrix(f"{name}: {why}")
    return rho


def spectrum_entropy(evals: np.ndarray) -> float:
    """-sum(l ln l) over eigenvalues above EIG_FLOOR (0 ln 0 = 0)."""
    lam = np.asarray(evals, dtype=float)
    lam = lam[lam > EIG_FLOOR]
    return float(-np.sum(lam * np.log(lam)))


def von_neumann_entropy(rho: np.ndarray, validate: bool = True) -> float:
    """Von Neumann entropy ``-Tr rho ln rho`` in nats, clamped to [0, ln d]."""
    if validate:
        rho = validate_density(rho)
    d = rho.shape[0]
    s = spectrum_entropy(np.linalg.eigvalsh((rho + rho.conj().T) / 2))
    return min(max(s, 0.0), float(np.log(d)))


def random_unitary(dim: int, seed=None) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    if dim < 1:
        raise DimensionMismatch(f"dim must be >= 1, got {dim}")
    rng = make_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_isometry(rows: int, cols: int, seed=None) -> np.ndarray:
    """First ``cols`` columns of a Haar unitary: a rows x cols isometry."""
    return random_unitary(rows, seed)[:, :cols]


def random_pure_state(dim: int, seed=None) -> np.ndarray:
    rng = make_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rank: int | None = None, seed=None) -> np.ndarray:
    """Random state G G† / Tr(G G†), G a dim x rank complex Gaussian matrix."""
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise BadRank(f"rank must be in [1, {dim}], got {rank}")
    rng = make_rng(seed)
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    return (rho + rho.conj().T) / 2


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    return np.outer(psi, psi.conj())


def fourier_matrix(d: int) -> np.ndarray:
    k = np.arange(d)
    return np.exp(2j * np.pi * np.outer(k, k) / d) / np.sqrt(d)


def _canonical_eigh(a: np.ndarray):
    """Eigenpairs sorted by descending eigenvalue, ties by descending rounded eigenvector."""
    lam, u = np.linalg.eigh((a + a.conj().T) / 2)
    cols = []
    for i in range(len(lam)):
        v = u[:, i]
        lead = np.flatnonzero(np.abs(v) > 1e-8)[0]
        v = v * (abs(v[lead]) / v[lead])
        key = tuple(-np.round(np.column_stack([v.real, v.imag]).ravel(), 10))
        cols.append((-round(float(lam[i]), 12), key, i, v))
    cols.sort(key=lambda c: c[:2])
    order = [c[2] for c in cols]
    return lam[order], np.column_stack([c[3] for c in cols])


def balanced_basis(a: np.ndarray, phase_seed=None) -> np.ndarray:
    """Orthonormal basis in which ``a`` has constant diagonal 1/d.

    Returns a unitary whose columns are the basis vectors e_s, built as
    ``U D1 F D2`` with U the eigenbasis of ``a``, F the d-point Fourier
    matrix and D1, D2 diagonal phases (identity when ``phase_seed`` is None).
    Since every column of ``D1 F D2`` has entries of modulus 1/sqrt(d),
    ``<e_s|a|e_s>`` equals the mean eigenvalue for each s.
    """
    a = validate_density(a, "a")
    d = a.shape[0]
    _, u = _canonical_eigh(a)
    f = fourier_matrix(d)
    if phase_seed is None:
        return u @ f
    rng = make_rng(phase_seed)
    d1 = np.exp(2j * np.pi * rng.random(d))
    d2 = np.exp(2j * np.pi * rng.random(d))
    return (u * d1) @ f * d2


def conditional_states(rho: np.ndarray, dims: BipartiteDims, basis: np.ndarray) -> np.ndarray:
    """Operators d * Tr_H((|e_s><e_s| ⊗ I_K) rho) for each basis column e_s.

    Returned as an array of shape (d, dim_k, dim_k). They are unit-trace
    exactly when ``basis`` is balanced for Tr_K(rho).
    """
    rho = np.asarray(rho)
    dims = BipartiteDims(*dims)
    dims.check(rho)
    d, dk = dims
    basis = np.asarray(basis)
    if basis.shape != (d, d):
        raise DimensionMismatch(f"basis shape {basis.shape} does not match dim_h = {d}")
    t = rho.reshape(d, dk, d, dk)
    return d * np.einsum("is,ikjl,js->skl", basis.conj(), t, basis)
