"""Quantum channels in Kraus form, the depolarizing family, and validation."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, NotAChannel, POutOfRange
from .qstate import BipartiteDims, make_rng, random_isometry, validate_density

TP_TOL = 1e-10
CP_TOL = 1e-9


class Channel:
    """Linear map ``X -> sum_a w_a K_a X K_a^dagger``.

    Checked construction requires unit weights (plain Kraus form), trace
    preservation and a PSD Choi matrix. :meth:`unchecked` allows real,
    possibly negative weights so that non-CP maps can still be represented.
    """

    def __init__(self, kraus, *, weights=None, check: bool = True):
        ops = np.array(kraus, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[0] == 0:
            raise DimensionMismatch(f"expected a list of matrices, got shape {ops.shape}")
        ops.setflags(write=False)
        self.kraus = ops
        self.dim_out, self.dim_in = ops.shape[1:]
        w = None if weights is None else np.asarray(weights, dtype=float)
        if w is not None and w.shape != (ops.shape[0],):
            raise DimensionMismatch("one weight per Kraus operator required")
        self.weights = w
        if check:
            if w is not None and np.any(w < 0):
                raise NotAChannel("negative Kraus weights are not completely positive")
            err = self.tp_error()
            if err > TP_TOL:
                raise NotAChannel(f"sum K^dagger K deviates from I by {err:.3e}")
            lam = self.choi_min_eig()
            if lam < -CP_TOL:
                raise NotAChannel(f"Choi matrix has eigenvalue {lam:.3e}")

    @classmethod
    def unchecked(cls, kraus, weights=None) -> "Channel":
        return cls(kraus, weights=weights, check=False)

    def __repr__(self):
        return f"Channel(dim_in={self.dim_in}, dim_out={self.dim_out}, n_kraus={len(self.kraus)})"

    @property
    def _w(self) -> np.ndarray:
        return np.ones(len(self.kraus)) if self.weights is None else self.weights

    @cached_property
    def superop(self) -> np.ndarray:
        """Matrix S with vec(Phi(X)) = S vec(X), row-major vec."""
        s = np.einsum("a,aij,akl->ikjl", self._w, self.kraus, self.kraus.conj())
        s = s.reshape(self.dim_out**2, self.dim_in**2)
        s.setflags(write=False)
        return s

    @cached_property
    def superop_adjoint(self) -> np.ndarray:
        """Superoperator of the Hilbert-Schmidt adjoint map Phi*."""
        s = self.superop.conj().T.copy()
        s.setflags(write=False)
        return s

    def tp_error(self) -> float:
        g = np.einsum("a,aji,ajk->ik", self._w, self.kraus.conj(), self.kraus)
        return float(np.max(np.abs(g - np.eye(self.dim_in))))

    def choi_min_eig(self) -> float:
        c = choi_matrix(self)
        return float(np.linalg.eigvalsh((c + c.conj().T) / 2)[0])

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return apply_map(self, x)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        out = y.reshape(*y.shape[:-2], -1) @ self.superop_adjoint.T
        return out.reshape(*y.shape[:-2], self.dim_in, self.dim_in)

    def to_json(self) -> str:
        if self.weights is not None and not np.allclose(self.weights, 1.0):
            ops = self.kraus * np.sqrt(self.weights.astype(complex))[:, None, None]
            if np.any(self.weights < 0):
                raise ValueError("maps with negative weights have no Kraus serialization")
        else:
            ops = self.kraus
        doc = {
            "dim_in": int(self.dim_in),
            "dim_out": int(self.dim_out),
            "kraus": [[[float(z.real), float(z.imag)] for z in k.ravel()] for k in ops],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Channel":
        doc = json.loads(text)
        din, dout = doc["dim_in"], doc["dim_out"]
        ops = [np.array([complex(re, im) for re, im in k]).reshape(dout, din) for k in doc["kraus"]]
        return cls(ops)


def apply_map(ch: Channel, x: np.ndarray) -> np.ndarray:
    """Apply the channel to one operator or a stack of shape (..., d_in, d_in)."""
    x = np.asarray(x)
    if x.shape[-2:] != (ch.dim_in, ch.dim_in):
        raise DimensionMismatch(f"channel input dim {ch.dim_in}, operator shape {x.shape}")
    out = x.reshape(*x.shape[:-2], -1) @ ch.superop.T
    return out.reshape(*x.shape[:-2], ch.dim_out, ch.dim_out)


def apply_channel(ch: Channel, rho: np.ndarray) -> np.ndarray:
    """Output state of ``ch`` on density matrix ``rho``."""
    rho = validate_density(rho)
    if rho.shape[0] != ch.dim_in:
        raise DimensionMismatch(f"channel input dim {ch.dim_in}, state dim {rho.shape[0]}")
    out = apply_map(ch, rho)
    return (out + out.conj().T) / 2


def identity_channel(d: int) -> Channel:
    return Channel([np.eye(d)])


def weyl_operators(d: int) -> np.ndarray:
    """The d^2 shift-phase unitaries X^a Z^b, index a*d + b; (0, 0) is I."""
    shift = np.roll(np.eye(d), 1, axis=0)
    phase = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    ops = []
    for a in range(d):
        xa = np.linalg.matrix_power(shift, a)
        for b in range(d):
            ops.append(xa @ np.linalg.matrix_power(phase, b))
    return np.array(ops)


@dataclass(frozen=True)
class DepolarizingParams:
    dim: int
    p: float

    def __post_init__(self):
        if self.dim < 2:
            raise POutOfRange(f"depolarizing channel needs dim >= 2, got {self.dim}")
        if not 0.0 <= self.p <= self.p_max + 1e-15:
            raise POutOfRange(
                f"p = {self.p} outside [0, d^2/(d^2-1)] = [0, {self.p_max:.12g}] for d = {self.dim}"
            )

    @property
    def p_max(self) -> float:
        return p_max(self.dim)


def p_max(d: int) -> float:
    """Upper end d^2/(d^2 - 1) of the completely positive depolarizing range."""
    return d * d / (d * d - 1)


def depolarizing_weights(d: int, p: float) -> np.ndarray:
    w = np.full(d * d, p / (d * d))
    w[0] = 1.0 - p * (d * d - 1) / (d * d)
    if abs(w[0]) < 1e-14:
        w[0] = 0.0
    return w


def depolarizing_channel(params, validate: bool = True) -> Channel:
    """Channel rho -> (1 - p) rho + p Tr(rho) I/d in Weyl-operator Kraus form.

    ``params`` is a ``DepolarizingParams`` or a ``(d, p)`` tuple. With
    ``validate=False`` any p is accepted; beyond d^2/(d^2-1) the identity
    weight turns negative and the map is returned unchecked (not CP).
    """
    if isinstance(params, DepolarizingParams):
        d, p = params.dim, params.p
    else:
        d, p = int(params[0]), float(params[1])
        if validate:
            DepolarizingParams(d, p)
    w = depolarizing_weights(d, p)
    if np.all(w >= 0):
        kraus = np.sqrt(w)[:, None, None] * weyl_operators(d)
        # drop exactly-zero terms (p = 0 or the CP boundary)
        keep = w > 0
        return Channel(kraus[keep], check=validate)
    return Channel.unchecked(weyl_operators(d), weights=w)


def choi_matrix(ch: Channel) -> np.ndarray:
    """(Phi ⊗ id)(|Omega><Omega|), |Omega> = sum_i |ii>/sqrt(d_in)."""
    din, dout = ch.dim_in, ch.dim_out
    s = ch.superop.reshape(dout, dout, din, din)
    return s.transpose(0, 2, 1, 3).reshape(dout * din, dout * din) / din


def product_channel(ch_h: Channel, ch_k: Channel) -> Channel:
    """Phi ⊗ Psi with Kraus operators K_i ⊗ L_j (index i * n_L + j)."""
    kraus = np.einsum("aij,bkl->abikjl", ch_h.kraus, ch_k.kraus).reshape(
        len(ch_h.kraus) * len(ch_k.kraus),
        ch_h.dim_out * ch_k.dim_out,
        ch_h.dim_in * ch_k.dim_in,
    )
    if ch_h.weights is None and ch_k.weights is None:
        return Channel(kraus, check=False)
    return Channel.unchecked(kraus, np.outer(ch_h._w, ch_k._w).ravel())


def apply_product_channel(ch_h: Channel, ch_k: Channel, rho: np.ndarray,
                          dims: BipartiteDims) -> np.ndarray:
    """(Phi ⊗ Psi)(rho), computed factor-wise without forming the product Kraus list."""
    rho = validate_density(rho)
    dims = BipartiteDims(*dims)
    dims.check(rho)
    if (ch_h.dim_in, ch_k.dim_in) != tuple(dims):
        raise DimensionMismatch(
            f"channel inputs ({ch_h.dim_in}, {ch_k.dim_in}) do not match dims {tuple(dims)}"
        )
    d, dk = dims
    t = rho.reshape(d, dk, d, dk)
    sh = ch_h.superop.reshape(ch_h.dim_out, ch_h.dim_out, d, d)
    sk = ch_k.superop.reshape(ch_k.dim_out, ch_k.dim_out, dk, dk)
    out = np.einsum("acij,bdkl,ikjl->abcd", sh, sk, t)
    n = ch_h.dim_out * ch_k.dim_out
    out = out.reshape(n, n)
    return (out + out.conj().T) / 2


def is_bistochastic(ch: Channel) -> bool:
    if ch.dim_in != ch.dim_out:
        raise DimensionMismatch("bistochastic check needs dim_in == dim_out")
    d = ch.dim_in
    out = apply_map(ch, np.eye(d) / d)
    return bool(np.max(np.abs(out - np.eye(d) / d)) <= 1e-10)


def random_kraus_channel(dim: int, env_dim: int = 2, seed=None) -> Channel:
    """Random channel from a Haar isometry C^dim -> C^dim ⊗ C^env (Stinespring)."""
    v = random_isometry(dim * env_dim, dim, make_rng(seed))
    kraus = v.reshape(dim, env_dim, dim).transpose(1, 0, 2)
    return Channel(kraus)


def amplitude_damping(gamma: float) -> Channel:
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return Channel([k0, k1])
