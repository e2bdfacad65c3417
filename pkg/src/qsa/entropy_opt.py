"""Minimal output entropy and its constrained version over decompositions.

``s_min_numeric`` minimizes S(Phi(|psi><psi|)) over the unit sphere;
``h_hat_numeric`` minimizes the average output entropy over pure-state
decompositions of a fixed input state. Both run multi-start L-BFGS with
analytic gradients and return upper bounds on the true minima.

Pure decompositions of rho = sum_i l_i u_i u_i^dagger are parametrized by
k x r isometries V through w_j = sum_i V_ji sqrt(l_i) u_i, so the average
constraint holds by construction. The optimizer works on an unconstrained
matrix Z and maps it to V = Z (Z^dagger Z)^(-1/2).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .channels import Channel, DepolarizingParams, apply_map
from .errors import ConfigInvalid, DimensionMismatch, NotAnIsometry, RankMismatch
from .qstate import (
    make_rng,
    projector,
    random_isometry,
    spectrum_entropy,
    validate_density,
    von_neumann_entropy,
)

RANK_TOL = 1e-12
WEIGHT_FLOOR = 1e-14
_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 32
    max_iters: int = 2000
    value_tol: float = 1e-7
    step_tol: float = 1e-10
    ensemble_cap: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigInvalid("restarts", f"must be >= 1, got {self.restarts}")
        if self.max_iters < 1:
            raise ConfigInvalid("max_iters", f"must be >= 1, got {self.max_iters}")
        if not self.value_tol > 0:
            raise ConfigInvalid("value_tol", f"must be > 0, got {self.value_tol}")
        if not self.step_tol > 0:
            raise ConfigInvalid("step_tol", f"must be > 0, got {self.step_tol}")
        if self.ensemble_cap is not None and self.ensemble_cap < 1:
            raise ConfigInvalid("ensemble_cap", f"must be >= 1, got {self.ensemble_cap}")

    def with_restarts(self, restarts: int) -> "OptimizerConfig":
        return OptimizerConfig(restarts, self.max_iters, self.value_tol, self.step_tol,
                               self.ensemble_cap, self.seed)


@dataclass
class Ensemble:
    """Probability weights and member states; ``members`` has shape (k, d, d)."""

    weights: np.ndarray
    members: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.members = np.asarray(self.members, dtype=complex)
        if self.members.ndim != 3 or len(self.weights) != len(self.members):
            raise DimensionMismatch("need one weight per member state")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1) > 1e-10:
            raise ValueError("weights must form a probability vector")

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def average(self) -> np.ndarray:
        return np.einsum("j,jab->ab", self.weights, self.members)

    @classmethod
    def from_vectors(cls, w: np.ndarray) -> "Ensemble":
        """Pure ensemble from unnormalized rows w_j with sum_j w_j w_j^dagger = rho."""
        w = np.asarray(w, dtype=complex)
        pi = np.sum(np.abs(w) ** 2, axis=1)
        keep = pi >= WEIGHT_FLOOR
        w, pi = w[keep], pi[keep]
        members = np.einsum("ja,jb->jab", w, w.conj()) / pi[:, None, None]
        return cls(pi / pi.sum(), members)

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "weights": [float(x) for x in self.weights],
            "members": [[[[float(z.real), float(z.imag)] for z in row] for row in m]
                        for m in self.members],
        }


@dataclass
class OptResult:
    value: float
    argmin: object
    restarts_used: int
    converged: bool
    best_restart_index: int
    values: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        if isinstance(self.argmin, Ensemble):
            arg = {"kind": "ensemble", **self.argmin.to_dict()}
        else:
            v = np.asarray(self.argmin).ravel()
            arg = {"kind": "pure_state", "amplitudes": [[float(z.real), float(z.imag)] for z in v]}
        return {
            "value": float(self.value),
            "converged": bool(self.converged),
            "restarts_used": int(self.restarts_used),
            "best_restart_index": int(self.best_restart_index),
            "argmin": arg,
        }


# closed forms ----------------------------------------------------------------

def s_min_dep_closed(params: DepolarizingParams | tuple) -> float:
    """Minimal output entropy of the depolarizing channel, in nats.

    Output of any pure input has one eigenvalue 1 - (d-1)p/d and d-1
    eigenvalues p/d.
    """
    if not isinstance(params, DepolarizingParams):
        params = DepolarizingParams(int(params[0]), float(params[1]))
    d, p = params.dim, params.p
    q = (d - 1) * p / d
    top = 1.0 - q
    s = 0.0
    if top > 0:
        s -= top * np.log(top)
    if p > 0:
        s -= q * np.log(p / d)
    return float(s)


def h_hat_dep_closed(params: DepolarizingParams | tuple) -> float:
    """Constrained minimum for the depolarizing channel; independent of the state."""
    return s_min_dep_closed(params)


# entropy kernels ---------------------------------------------------------------

def _herm(x: np.ndarray) -> np.ndarray:
    return (x + np.conj(np.swapaxes(x, -1, -2))) / 2


def _log_spectral(lam: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Batched U diag(log lam) U^dagger with a floor on lam."""
    loglam = np.log(np.maximum(lam, _LOG_FLOOR))
    return np.einsum("...ai,...i,...bi->...ab", vecs, loglam, vecs.conj())


def _eta(lam: np.ndarray) -> np.ndarray:
    lam = np.where(lam > 1e-300, lam, 1.0)
    return -np.sum(lam * np.log(lam), axis=-1)


def _sphere_objective(ch: Channel, x: np.ndarray):
    """S(Phi(zz^dagger / z^dagger z)) and its real gradient."""
    n = ch.dim_in
    z = x[:n] + 1j * x[n:]
    pi = float(np.vdot(z, z).real)
    out = apply_map(ch, np.outer(z, z.conj()) / pi)
    lam, u = np.linalg.eigh((out + out.conj().T) / 2)
    s = float(_eta(lam))
    g = -2.0 / pi * (ch.adjoint(_log_spectral(lam, u)) @ z + s * z)
    return s, np.concatenate([g.real, g.imag])


def _ensemble_objective(ch: Channel, w: np.ndarray):
    """sum_j pi_j S(Phi(w_j w_j^dagger / pi_j)) and gradient w.r.t. the rows w_j."""
    pi = np.sum(np.abs(w) ** 2, axis=1)
    live = pi > 1e-300
    wl = w[live]
    outs = apply_map(ch, np.einsum("ja,jb->jab", wl, wl.conj()))
    lam, u = np.linalg.eigh(_herm(outs))
    pl = pi[live]
    f = float(np.sum(_eta(lam)) + np.sum(pl * np.log(pl)))
    logx = _log_spectral(lam, u) - np.log(pl)[:, None, None] * np.eye(ch.dim_out)
    grad = np.zeros_like(w)
    grad[live] = -2.0 * np.einsum("jab,jb->ja", ch.adjoint(logx), wl)
    return f, grad


def _polar(z: np.ndarray):
    s = z.conj().T @ z
    sv, q = np.linalg.eigh((s + s.conj().T) / 2)
    sv = np.maximum(sv, 1e-300)
    t = (q / np.sqrt(sv)) @ q.conj().T
    return z @ t, sv, q, t


def _polar_pullback(z, g_v, sv, q, t):
    """Gradient w.r.t. Z of f(Z (Z^dagger Z)^(-1/2)) given gradient g_v w.r.t. V."""
    h = z.conj().T @ g_v
    hs = (h + h.conj().T) / 2
    isq = 1.0 / np.sqrt(sv)
    num = isq[:, None] - isq[None, :]
    den = sv[:, None] - sv[None, :]
    close = np.abs(den) < 1e-12 * np.maximum(sv[:, None], sv[None, :])
    gamma = np.where(close, -0.5 * np.sqrt(isq[:, None] ** 3 * isq[None, :] ** 3),
                     num / np.where(close, 1.0, den))
    m = q @ (gamma * (q.conj().T @ hs @ q)) @ q.conj().T
    return g_v @ t + 2.0 * z @ m


def _lbfgs(fun, x0, cfg: OptimizerConfig):
    res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": cfg.max_iters, "ftol": cfg.value_tol * 1e-6, "gtol": cfg.step_tol,
                            "maxcor": 20})
    return res.x, bool(res.success)


def _restart_seeds(cfg: OptimizerConfig):
    return np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)


def _summarize(values, args, successes, value_tol, extra_value=None, extra_arg=None) -> OptResult:
    """Pick the minimum by (value, index); converged if the best two agree."""
    order = sorted(range(len(values)), key=lambda i: (values[i], i))
    best = order[0]
    if len(values) >= 2:
        converged = values[order[1]] - values[best] <= value_tol
    else:
        converged = successes[best]
    value, arg, idx = values[best], args[best], best
    if extra_value is not None and extra_value < value:
        value, arg, idx = extra_value, extra_arg, len(values)
    return OptResult(value=float(max(value, 0.0)), argmin=arg, restarts_used=len(values),
                     converged=bool(converged), best_restart_index=idx, values=list(values))


# S_min -------------------------------------------------------------------------

def output_entropy(ch: Channel, psi: np.ndarray) -> float:
    """S(Phi(|psi><psi|)) for a (not necessarily normalized) input vector."""
    psi = np.asarray(psi, dtype=complex).ravel()
    out = apply_map(ch, projector(psi / np.linalg.norm(psi)))
    return von_neumann_entropy((out + out.conj().T) / 2, validate=False)


def s_min_numeric(ch: Channel, cfg: OptimizerConfig | None = None, initial=()) -> OptResult:
    """Multi-start minimization of the output entropy over pure inputs.

    ``initial`` optionally supplies extra starting vectors, tried after the
    random restarts. The returned value is an upper bound on S_min.
    """
    cfg = cfg or OptimizerConfig()
    n = ch.dim_in
    starts = []
    for ss in _restart_seeds(cfg):
        rng = make_rng(ss)
        starts.append(rng.standard_normal(n) + 1j * rng.standard_normal(n))
    starts.extend(np.asarray(v, dtype=complex).ravel() for v in initial)

    values, args, oks = [], [], []
    for z0 in starts:
        x, ok = _lbfgs(lambda x: _sphere_objective(ch, x), np.concatenate([z0.real, z0.imag]), cfg)
        psi = x[:n] + 1j * x[n:]
        psi = psi / np.linalg.norm(psi)
        values.append(output_entropy(ch, psi))
        args.append(psi)
        oks.append(ok)
    return _summarize(values, args, oks, cfg.value_tol)


# decompositions ------------------------------------------------------------------

def _support(rho: np.ndarray):
    lam, u = np.linalg.eigh(rho)
    keep = lam > RANK_TOL
    return lam[keep][::-1], u[:, keep][:, ::-1]


def _vectors_from_isometry(lam, u, mix):
    return (mix * np.sqrt(lam)) @ u.T


def decompositions_from_isometry(rho: np.ndarray, mix: np.ndarray) -> Ensemble:
    """Pure decomposition of ``rho`` obtained by mixing its eigen-ensemble.

    ``mix`` is a k x r isometry, r the rank of ``rho``; eigenvectors are
    ordered by descending eigenvalue. Row j gives the unnormalized vector
    w_j = sum_i mix[j, i] sqrt(l_i) u_i.
    """
    rho = validate_density(rho)
    lam, u = _support(rho)
    mix = np.asarray(mix, dtype=complex)
    if mix.ndim != 2 or mix.shape[1] != len(lam):
        raise RankMismatch(f"rho has rank {len(lam)}, isometry has shape {mix.shape}")
    if mix.shape[0] < mix.shape[1]:
        raise NotAnIsometry(f"isometry needs k >= r, got shape {mix.shape}")
    err = np.max(np.abs(mix.conj().T @ mix - np.eye(mix.shape[1])))
    if err > 1e-10:
        raise NotAnIsometry(f"mix^dagger mix deviates from I by {err:.3e}")
    return Ensemble.from_vectors(_vectors_from_isometry(lam, u, mix))


def isometry_from_ensemble(rho: np.ndarray, ens: Ensemble, rows: int | None = None) -> np.ndarray:
    """Inverse of :func:`decompositions_from_isometry` for pure ensembles of rho.

    Each member is replaced by its leading eigenvector; the result is padded
    with zero rows up to ``rows``.
    """
    lam, u = _support(np.asarray(rho, dtype=complex))
    ev, vecs = np.linalg.eigh(ens.members)
    phi = vecs[:, :, -1]
    w = np.sqrt(ens.weights)[:, None] * phi
    mix = (w @ u.conj()) / np.sqrt(lam)
    rows = mix.shape[0] if rows is None else rows
    if rows < mix.shape[0]:
        raise ValueError(f"ensemble of size {mix.shape[0]} does not fit in {rows} rows")
    out = np.zeros((rows, len(lam)), dtype=complex)
    out[: mix.shape[0]] = mix
    return out


def ensemble_value(ch: Channel, ens: Ensemble) -> float:
    """sum_j pi_j S(Phi(rho_j))."""
    outs = apply_map(ch, ens.members)
    lam = np.linalg.eigvalsh(_herm(outs))
    return float(sum(p * spectrum_entropy(l) for p, l in zip(ens.weights, lam)))


def h_hat_numeric(ch: Channel, rho: np.ndarray, cfg: OptimizerConfig | None = None,
                  initial=()) -> OptResult:
    """Minimize sum_j pi_j S(Phi(rho_j)) over pure decompositions of ``rho``.

    Decompositions have ``cfg.ensemble_cap`` members (default d^2).
    ``initial`` may hold extra k x r isometries or pure Ensembles of ``rho``
    used as warm starts after the random restarts. The single-member
    ensemble {rho} is compared last, so the result never exceeds S(Phi(rho)).
    """
    cfg = cfg or OptimizerConfig()
    rho = validate_density(rho)
    if rho.shape[0] != ch.dim_in:
        raise DimensionMismatch(f"channel input dim {ch.dim_in}, state dim {rho.shape[0]}")
    lam, u = _support(rho)
    r = len(lam)
    k = max(cfg.ensemble_cap or ch.dim_in**2, r)

    starts = [random_isometry(k, r, ss) for ss in _restart_seeds(cfg)]
    for s in initial:
        if isinstance(s, Ensemble):
            s = isometry_from_ensemble(rho, s, k)
        s = np.asarray(s, dtype=complex)
        if s.shape != (k, r):
            raise DimensionMismatch(f"warm start of shape {s.shape}, expected {(k, r)}")
        starts.append(s)

    def fun(x):
        z = (x[: k * r] + 1j * x[k * r:]).reshape(k, r)
        v, sv, q, t = _polar(z)
        f, g_w = _ensemble_objective(ch, _vectors_from_isometry(lam, u, v))
        g_v = g_w @ (u.conj() * np.sqrt(lam))
        g_z = _polar_pullback(z, g_v, sv, q, t).ravel()
        return f, np.concatenate([g_z.real, g_z.imag])

    values, args, oks = [], [], []
    for z0 in starts:
        if r == 1:
            v, ok = z0 / np.linalg.norm(z0), True
        else:
            x, ok = _lbfgs(fun, np.concatenate([z0.real.ravel(), z0.imag.ravel()]), cfg)
            v = _polar((x[: k * r] + 1j * x[k * r:]).reshape(k, r))[0]
        ens = Ensemble.from_vectors(_vectors_from_isometry(lam, u, v))
        values.append(ensemble_value(ch, ens))
        args.append(ens)
        oks.append(ok)

    out = apply_map(ch, rho)
    singleton = von_neumann_entropy((out + out.conj().T) / 2, validate=False)
    return _summarize(values, args, oks, cfg.value_tol, singleton, Ensemble(np.ones(1), rho[None]))
