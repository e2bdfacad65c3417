"""Executable checks of the depolarizing output-entropy bound, strong
superadditivity of the constrained minimum, and additivity of S_min.

Optimization-dependent margins use a tolerance of 1e-6 nats; margins that
only involve exact linear algebra use 1e-9.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import (
    Channel,
    DepolarizingParams,
    apply_map,
    apply_product_channel,
    depolarizing_channel,
    product_channel,
)
from .entropy_opt import (
    Ensemble,
    OptimizerConfig,
    OptResult,
    h_hat_numeric,
    s_min_dep_closed,
    s_min_numeric,
)
from .errors import BasisNotBalanced, DimensionMismatch
from .qstate import (
    BipartiteDims,
    balanced_basis,
    conditional_states,
    partial_trace,
    validate_density,
    von_neumann_entropy,
)

EXACT_TOL = 1e-9
OPT_TOL = 1e-6
BALANCE_TOL = 1e-8
ESCALATION = 4


def _params(params) -> DepolarizingParams:
    if isinstance(params, DepolarizingParams):
        return params
    return DepolarizingParams(int(params[0]), float(params[1]))


def _s(x: np.ndarray) -> float:
    return von_neumann_entropy((x + x.conj().T) / 2, validate=False)


def _cplx(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def lemma_constant(params) -> float:
    """The state-independent term -(1-q) ln(1-q) - q ln(p/d), q = (d-1)p/d."""
    params = _params(params)
    d, p = params.dim, params.p
    q = (d - 1) / d * p
    term1 = 0.0 if q == 1 else -(1 - q) * np.log(1 - q)
    term2 = 0.0 if p == 0 else -q * np.log(p / d)
    return float(term1 + term2)


@dataclass
class LemmaReport:
    lhs: float
    constant_term: float
    conditional_avg: float
    bound: float
    margin: float
    basis_used: np.ndarray = field(repr=False)
    rho_s_list: np.ndarray = field(repr=False)
    marginal_check: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "constant_term": self.constant_term,
            "conditional_avg": self.conditional_avg,
            "bound": self.bound,
            "margin": self.margin,
            "marginal_check": self.marginal_check,
            "basis_used": _cplx(self.basis_used),
            "rho_s_list": [_cplx(r) for r in self.rho_s_list],
        }


def king_bound(rho: np.ndarray, dims: BipartiteDims, basis: np.ndarray, psi: Channel,
               params, dep: Channel | None = None) -> LemmaReport:
    """Evaluate both sides of the depolarizing output-entropy lower bound.

    lhs = S((Phi_dep ⊗ Psi)(rho)); bound = constant_term + (1/d) sum_s
    S(Psi(rho_s)) with rho_s = d Tr_H((|e_s><e_s| ⊗ I) rho). ``basis``
    columns are the e_s and must be balanced for Tr_K(rho).
    """
    params = _params(params)
    rho = validate_density(rho)
    dims = BipartiteDims(*dims)
    dims.check(rho)
    d = dims.dim_h
    if params.dim != d or psi.dim_in != dims.dim_k:
        raise DimensionMismatch(
            f"dims {tuple(dims)} vs depolarizing dim {params.dim}, Psi input dim {psi.dim_in}"
        )
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (d, d):
        raise DimensionMismatch(f"basis shape {basis.shape}, expected {(d, d)}")
    marg_h = partial_trace(rho, dims, over="K")
    diag = np.einsum("is,ij,js->s", basis.conj(), marg_h, basis).real
    off = np.max(np.abs(diag - 1 / d))
    if off > BALANCE_TOL:
        raise BasisNotBalanced(f"<e_s|Tr_K rho|e_s> deviates from 1/d by {off:.3e}")

    dep = dep if dep is not None else depolarizing_channel(params)
    lhs = _s(apply_product_channel(dep, psi, rho, dims))
    rho_s = conditional_states(rho, dims, basis)
    rho_s = (rho_s + np.conj(np.swapaxes(rho_s, -1, -2))) / 2
    outs = apply_map(psi, rho_s)
    cond = float(np.mean([_s(o) for o in outs]))
    const = lemma_constant(params)
    marginal = float(np.max(np.abs(rho_s.mean(axis=0) - partial_trace(rho, dims, over="H"))))
    bound = const + cond
    return LemmaReport(lhs=lhs, constant_term=const, conditional_avg=cond, bound=bound,
                       margin=lhs - bound, basis_used=basis, rho_s_list=rho_s,
                       marginal_check=marginal)


def verify_lemma_instance(rho, dims, psi: Channel, params, n_bases: int, seed=0) -> list:
    """One :func:`king_bound` report per sampled balanced basis of Tr_K(rho)."""
    if n_bases < 1:
        raise ValueError(f"n_bases must be >= 1, got {n_bases}")
    params = _params(params)
    dep = depolarizing_channel(params)
    marg_h = partial_trace(validate_density(rho), dims, over="K")
    marg_h = (marg_h + marg_h.conj().T) / 2
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    seeds = seed.spawn(n_bases)
    return [king_bound(rho, dims, balanced_basis(marg_h, ss), psi, params, dep) for ss in seeds]


@dataclass
class SuperaddReport:
    lhs: float
    rhs_dep: float
    rhs_psi: float
    margin: float
    proof_chain: list = field(repr=False)
    averaging_check: float = 0.0
    chain_value: float = 0.0
    eq11_slack: float = 0.0
    lhs_converged: bool = True
    rhs_psi_converged: bool = True
    restarts_used: int = 0
    escalated: bool = False
    flagged: bool = False
    lhs_result: OptResult | None = field(default=None, repr=False)
    rhs_psi_result: OptResult | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.lhs_converged and self.rhs_psi_converged

    @property
    def chain_min_margin(self) -> float:
        return min(r.margin for r in self.proof_chain)

    def to_dict(self, full: bool = False) -> dict:
        out = {
            "lhs": self.lhs,
            "rhs_dep": self.rhs_dep,
            "rhs_psi": self.rhs_psi,
            "margin": self.margin,
            "averaging_check": self.averaging_check,
            "chain_value": self.chain_value,
            "eq11_slack": self.eq11_slack,
            "chain_min_margin": self.chain_min_margin,
            "lhs_converged": self.lhs_converged,
            "rhs_psi_converged": self.rhs_psi_converged,
            "restarts_used": self.restarts_used,
            "escalated": self.escalated,
            "flagged": self.flagged,
        }
        if full:
            out["proof_chain"] = [r.to_dict() for r in self.proof_chain]
            out["lhs_result"] = self.lhs_result.to_dict()
            out["rhs_psi_result"] = self.rhs_psi_result.to_dict()
        return out


def product_ensemble(ens_h: Ensemble, ens_k: Ensemble) -> Ensemble:
    w = np.outer(ens_h.weights, ens_k.weights).ravel()
    m = np.einsum("iab,jcd->ijacbd", ens_h.members, ens_k.members)
    dh, dk = ens_h.members.shape[1], ens_k.members.shape[1]
    return Ensemble(w / w.sum(), m.reshape(len(w), dh * dk, dh * dk))


def _is_pure(ens: Ensemble) -> bool:
    return all(abs(np.trace(m @ m) - 1) < 1e-10 for m in ens.members)


def _product_warm_start(rho, dims, rhs_psi: OptResult, cap: int):
    """Product of optimal ensembles when rho = Tr_K rho ⊗ Tr_H rho, else nothing."""
    marg_h = partial_trace(rho, dims, over="K")
    marg_k = partial_trace(rho, dims, over="H")
    if np.max(np.abs(np.kron(marg_h, marg_k) - rho)) > 1e-12 or not _is_pure(rhs_psi.argmin):
        return []
    lam, u = np.linalg.eigh((marg_h + marg_h.conj().T) / 2)
    keep = lam > 1e-12
    eig_h = Ensemble(lam[keep] / lam[keep].sum(),
                     np.einsum("ai,bi->iab", u[:, keep], u[:, keep].conj()))
    ens = product_ensemble(eig_h, rhs_psi.argmin)
    return [ens] if ens.size <= cap else []


def _proof_chain(ens: Ensemble, dims, psi, params, dep):
    reports = [
        king_bound(m, dims, balanced_basis(partial_trace(m, dims, over="K")), psi, params, dep)
        for m in ens.members
    ]
    chain_value = float(np.dot(ens.weights, [r.conditional_avg for r in reports]))
    psi_avg = np.einsum("j,jab->ab", ens.weights,
                        np.array([apply_map(psi, r.rho_s_list).mean(axis=0) for r in reports]))
    return reports, chain_value, psi_avg


def strong_superadd_check(psi: Channel, rho: np.ndarray, dims, params,
                          cfg: OptimizerConfig | None = None, escalate: bool = True,
                          tol: float = OPT_TOL) -> SuperaddReport:
    """Compare the constrained minimum of Phi_dep ⊗ Psi at rho with the sum of
    the constrained minima of the factors at the marginals.

    ``lhs`` and ``rhs_psi`` are numeric upper bounds; ``rhs_dep`` is the
    closed form. The best ensemble found for ``lhs`` is replayed member by
    member through :func:`king_bound`. When the margin or the chain
    comparison falls below ``-tol`` the optimization is repeated with
    ``ESCALATION`` times more restarts before the result is flagged.
    """
    cfg = cfg or OptimizerConfig()
    params = _params(params)
    rho = validate_density(rho)
    dims = BipartiteDims(*dims)
    dims.check(rho)
    if params.dim != dims.dim_h or psi.dim_in != dims.dim_k:
        raise DimensionMismatch(
            f"dims {tuple(dims)} vs depolarizing dim {params.dim}, Psi input dim {psi.dim_in}"
        )
    dep = depolarizing_channel(params)
    joint = product_channel(dep, psi)
    marg_k = partial_trace(rho, dims, over="H")
    marg_k = (marg_k + marg_k.conj().T) / 2
    rhs_dep = s_min_dep_closed(params)
    cap = cfg.ensemble_cap or dims.total**2

    def run(c: OptimizerConfig):
        rp = h_hat_numeric(psi, marg_k, c)
        lh = h_hat_numeric(joint, rho, c, initial=_product_warm_start(rho, dims, rp, cap))
        return lh, rp

    def assess(lh, rp):
        reports, chain_value, psi_avg = _proof_chain(lh.argmin, dims, psi, params, dep)
        margin = lh.value - rhs_dep - rp.value
        return reports, chain_value, psi_avg, margin, chain_value - rp.value

    lh, rp = run(cfg)
    reports, chain_value, psi_avg, margin, slack = assess(lh, rp)
    escalated = False
    if escalate and (margin < -tol or slack < -tol):
        escalated = True
        lh2, rp2 = run(cfg.with_restarts(cfg.restarts * ESCALATION))
        lh = lh2 if lh2.value <= lh.value else lh
        rp = rp2 if rp2.value <= rp.value else rp
        reports, chain_value, psi_avg, margin, slack = assess(lh, rp)

    averaging = float(np.max(np.abs(psi_avg - apply_map(psi, marg_k))))
    return SuperaddReport(
        lhs=lh.value, rhs_dep=rhs_dep, rhs_psi=rp.value, margin=margin,
        proof_chain=reports, averaging_check=averaging, chain_value=chain_value,
        eq11_slack=slack, lhs_converged=lh.converged, rhs_psi_converged=rp.converged,
        restarts_used=lh.restarts_used, escalated=escalated, flagged=margin < -tol,
        lhs_result=lh, rhs_psi_result=rp,
    )


@dataclass
class AdditivityReport:
    joint: float
    sum: float
    gap: float
    converged: bool = True

    def to_dict(self) -> dict:
        return {"joint": self.joint, "sum": self.sum, "gap": self.gap,
                "converged": self.converged}


def smin_additivity_check(psi: Channel, params, cfg: OptimizerConfig | None = None
                          ) -> AdditivityReport:
    """S_min(Phi_dep ⊗ Psi) against S_min(Phi_dep) + S_min(Psi).

    The joint minimum runs over all pure inputs on H ⊗ K, entangled ones
    included.
    """
    cfg = cfg or OptimizerConfig()
    params = _params(params)
    joint = s_min_numeric(product_channel(depolarizing_channel(params), psi), cfg)
    single = s_min_numeric(psi, cfg)
    total = s_min_dep_closed(params) + single.value
    return AdditivityReport(joint=joint.value, sum=total, gap=joint.value - total,
                            converged=joint.converged and single.converged)
