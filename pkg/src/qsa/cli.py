"""Command-line front end.

Exit status: 0 when every margin is within tolerance and every optimization
converged, 2 when a check is flagged, 1 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .channels import Channel, depolarizing_channel, identity_channel, p_max, random_kraus_channel
from .entropy_opt import OptimizerConfig, h_hat_numeric, s_min_dep_closed, s_min_numeric
from .errors import ConfigInvalid, QSAError
from .qstate import random_density
from .superadd import EXACT_TOL, OPT_TOL, smin_additivity_check, strong_superadd_check, verify_lemma_instance

COMMANDS = ("smin", "hhat", "lemma", "superadd", "additivity", "sweep")
PSI_KINDS = ("depolarizing", "random_kraus", "identity")
SWEEP_COLUMNS = ("d", "d_k", "p", "psi_kind", "psi_param", "seed", "lhs", "rhs_dep", "rhs_psi",
                 "margin", "converged")
# row fields holding entropies; converted to the output log base on emission
ENTROPY_FIELDS = {"closed", "numeric", "diff", "lhs", "rhs_dep", "rhs_psi", "margin", "bound",
                  "constant_term", "conditional_avg", "joint", "sum", "gap"}


@dataclass
class RunConfig:
    command: str = ""
    d: int = 2
    dk: int = 2
    p: float = 0.5
    psi: str = "depolarizing"
    psi_p: float = 0.3
    psi_env: int = 2
    n_states: int = 5
    n_bases: int = 10
    p_grid: str | None = None
    restarts: int = 32
    max_iters: int = 2000
    value_tol: float = 1e-7
    step_tol: float = 1e-10
    ensemble_cap: int | None = None
    seed: int = 0
    log_base: str = "e"
    format: str = "table"
    output: str | None = None
    jobs: int | None = None

    def optimizer(self, seed: int | None = None) -> OptimizerConfig:
        return OptimizerConfig(self.restarts, self.max_iters, self.value_tol, self.step_tol,
                               self.ensemble_cap, self.seed if seed is None else seed)

    def p_values(self) -> list:
        if self.p_grid is None:
            return [self.p]
        return parse_grid(self.p_grid)


def parse_grid(text: str) -> list:
    """``start:stop:step`` with stop included when hit within 1e-9."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigInvalid("p_grid", f"expected start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigInvalid("p_grid", f"need step > 0 and stop >= start, got {text!r}")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 12) for i in range(n + 1)]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigInvalid("argv", message)


def build_parser() -> argparse.ArgumentParser:
    dflt = RunConfig()
    ap = _Parser(
        prog="qsa",
        description="Output-entropy checks for the depolarizing channel. "
                    "Entropies are computed in nats and converted on output.",
        argument_default=argparse.SUPPRESS,
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key = value file; flags override its entries")
    ap.add_argument("--d", type=int, help=f"dimension of H (default {dflt.d})")
    ap.add_argument("--dk", type=int, help=f"dimension of K (default {dflt.dk})")
    ap.add_argument("--p", type=float, help=f"depolarizing parameter on H (default {dflt.p})")
    ap.add_argument("--psi", choices=PSI_KINDS, help=f"channel on K (default {dflt.psi})")
    ap.add_argument("--psi-p", type=float, help=f"depolarizing parameter of Psi (default {dflt.psi_p})")
    ap.add_argument("--psi-env", type=int,
                    help=f"environment dimension of a random_kraus Psi (default {dflt.psi_env})")
    ap.add_argument("--n-states", type=int, help=f"random states per point (default {dflt.n_states})")
    ap.add_argument("--n-bases", type=int, help=f"balanced bases per state (default {dflt.n_bases})")
    ap.add_argument("--p-grid", help="sweep grid start:stop:step (default: --p only)")
    ap.add_argument("--restarts", type=int, help=f"optimizer restarts (default {dflt.restarts})")
    ap.add_argument("--max-iters", type=int, help=f"iterations per restart (default {dflt.max_iters})")
    ap.add_argument("--value-tol", type=float, help=f"convergence tolerance, nats (default {dflt.value_tol})")
    ap.add_argument("--step-tol", type=float, help=f"gradient tolerance (default {dflt.step_tol})")
    ap.add_argument("--ensemble-cap", type=int, help="max ensemble size (default d^2)")
    ap.add_argument("--seed", type=int, help="base seed (default $QSA_SEED, else 0)")
    ap.add_argument("--log-base", choices=("e", "2"), help="output log base (default e)")
    ap.add_argument("--format", choices=("table", "json", "csv"), help="output format (default table)")
    ap.add_argument("--output", help="write output here instead of stdout")
    ap.add_argument("--jobs", type=int, help="worker processes for sweeps (default: CPU count)")
    return ap


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def read_config_file(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid("config", f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES or key == "command":
            raise ConfigInvalid(key, f"unknown config key (line {lineno})")
        out[key] = value
    return out


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    try:
        if "int" in kind:
            return None if value in (None, "None", "") else int(value)
        if "float" in kind:
            return float(value)
    except (TypeError, ValueError):
        raise ConfigInvalid(name, f"cannot parse {value!r}") from None
    return value


def parse_config(argv, file: str | None = None) -> RunConfig:
    """Build a RunConfig: defaults < $QSA_SEED < config file < flags."""
    ns = vars(build_parser().parse_args(list(argv)))
    values: dict = {}
    if "QSA_SEED" in os.environ:
        values["seed"] = os.environ["QSA_SEED"]
    path = ns.pop("config", None)
    if file is None and path is not None:
        try:
            with open(path) as fh:
                file = fh.read()
        except OSError as exc:
            raise ConfigInvalid("config", str(exc)) from None
    if file is not None:
        values.update(read_config_file(file))
    values.update(ns)
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigInvalid("command", f"must be one of {COMMANDS}")
    if cfg.d < 2:
        raise ConfigInvalid("d", f"must be >= 2, got {cfg.d}")
    if cfg.dk < 1 or (cfg.psi == "depolarizing" and cfg.dk < 2):
        raise ConfigInvalid("dk", f"too small for psi={cfg.psi}: {cfg.dk}")
    for p in cfg.p_values():
        if not 0 <= p <= p_max(cfg.d):
            raise ConfigInvalid(
                "p", f"p = {p:g} outside [0, d^2/(d^2-1)] = [0, {p_max(cfg.d):.6g}] for d = {cfg.d}")
    if cfg.psi == "depolarizing" and not 0 <= cfg.psi_p <= p_max(cfg.dk):
        raise ConfigInvalid("psi_p", f"psi_p = {cfg.psi_p:g} outside [0, {p_max(cfg.dk):.6g}]")
    if cfg.psi not in PSI_KINDS:
        raise ConfigInvalid("psi", f"must be one of {PSI_KINDS}")
    for name in ("n_states", "n_bases", "psi_env"):
        if getattr(cfg, name) < 1:
            raise ConfigInvalid(name, "must be >= 1")
    if cfg.log_base not in ("e", "2"):
        raise ConfigInvalid("log_base", "must be e or 2")
    if cfg.format not in ("table", "json", "csv"):
        raise ConfigInvalid("format", "must be table, json or csv")
    if cfg.jobs is not None and cfg.jobs < 1:
        raise ConfigInvalid("jobs", "must be >= 1")
    cfg.optimizer()


# running -----------------------------------------------------------------------

def make_psi(cfg: RunConfig) -> Channel:
    if cfg.psi == "identity":
        return identity_channel(cfg.dk)
    if cfg.psi == "depolarizing":
        return depolarizing_channel((cfg.dk, cfg.psi_p))
    return random_kraus_channel(cfg.dk, cfg.psi_env, np.random.SeedSequence([cfg.seed, 1]))


def psi_param(cfg: RunConfig) -> float:
    return {"depolarizing": cfg.psi_p, "random_kraus": cfg.psi_env, "identity": 0}[cfg.psi]


def state_seed(cfg: RunConfig, i: int) -> int:
    return int(np.random.SeedSequence([cfg.seed, 2, i]).generate_state(1)[0])


def sample_state(dim: int, i: int, seed: int) -> np.ndarray:
    """State number i of a run: ranks cycle downward from full rank."""
    return random_density(dim, dim - i % dim, seed)


def _superadd_row(args):
    cfg, p, i = args
    seed = state_seed(cfg, i)
    rho = sample_state(cfg.d * cfg.dk, i, seed)
    rep = strong_superadd_check(make_psi(cfg), rho, (cfg.d, cfg.dk), (cfg.d, p),
                                cfg.optimizer(seed))
    row = {"d": cfg.d, "d_k": cfg.dk, "p": p, "psi_kind": cfg.psi, "psi_param": psi_param(cfg),
           "seed": seed, "lhs": rep.lhs, "rhs_dep": rep.rhs_dep, "rhs_psi": rep.rhs_psi,
           "margin": rep.margin, "converged": rep.converged}
    return row, rep.flagged


def _run_smin(cfg):
    rows = []
    for p in cfg.p_values():
        closed = s_min_dep_closed((cfg.d, p))
        res = s_min_numeric(depolarizing_channel((cfg.d, p)), cfg.optimizer())
        rows.append(({"d": cfg.d, "p": p, "closed": closed, "numeric": res.value,
                      "diff": res.value - closed, "converged": res.converged},
                     abs(res.value - closed) > OPT_TOL))
    return rows


def _run_hhat(cfg):
    rows = []
    for p in cfg.p_values():
        ch = depolarizing_channel((cfg.d, p))
        closed = s_min_dep_closed((cfg.d, p))
        for i in range(cfg.n_states):
            seed = state_seed(cfg, i)
            res = h_hat_numeric(ch, sample_state(cfg.d, i, seed), cfg.optimizer(seed))
            rows.append(({"d": cfg.d, "p": p, "seed": seed, "closed": closed,
                          "numeric": res.value, "diff": res.value - closed,
                          "converged": res.converged}, abs(res.value - closed) > OPT_TOL))
    return rows


def _run_lemma(cfg):
    rows = []
    psi = make_psi(cfg)
    for p in cfg.p_values():
        for i in range(cfg.n_states):
            seed = state_seed(cfg, i)
            rho = sample_state(cfg.d * cfg.dk, i, seed)
            reps = verify_lemma_instance(rho, (cfg.d, cfg.dk), psi, (cfg.d, p), cfg.n_bases, seed)
            for b, r in enumerate(reps):
                rows.append(({"d": cfg.d, "d_k": cfg.dk, "p": p, "psi_kind": cfg.psi,
                              "psi_param": psi_param(cfg), "seed": seed, "basis": b,
                              "lhs": r.lhs, "constant_term": r.constant_term,
                              "conditional_avg": r.conditional_avg, "bound": r.bound,
                              "margin": r.margin, "marginal_check": r.marginal_check},
                             r.margin < -EXACT_TOL or r.marginal_check > 1e-10))
    return rows


def _run_superadd(cfg):
    tasks = [(cfg, p, i) for p in cfg.p_values() for i in range(cfg.n_states)]
    jobs = cfg.jobs or os.cpu_count() or 1
    if jobs == 1 or len(tasks) == 1:
        rows = [_superadd_row(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_superadd_row, tasks))
    rows.sort(key=lambda r: (r[0]["p"], r[0]["seed"]))
    return rows


def _run_additivity(cfg):
    psi = make_psi(cfg)
    rows = []
    for p in cfg.p_values():
        rep = smin_additivity_check(psi, (cfg.d, p), cfg.optimizer())
        rows.append(({"d": cfg.d, "d_k": cfg.dk, "p": p, "psi_kind": cfg.psi,
                      "psi_param": psi_param(cfg), "joint": rep.joint, "sum": rep.sum,
                      "gap": rep.gap, "converged": rep.converged}, abs(rep.gap) > OPT_TOL))
    return rows


_DISPATCH = {"smin": _run_smin, "hhat": _run_hhat, "lemma": _run_lemma,
             "superadd": _run_superadd, "sweep": _run_superadd, "additivity": _run_additivity}


# output ------------------------------------------------------------------------

def _num(x) -> float:
    return float(f"{x:.12g}")


def _emit_rows(rows: list, log_base: str) -> list:
    scale = 1 / math.log(2) if log_base == "2" else 1.0
    out = []
    for row in rows:
        conv = {}
        for k, v in row.items():
            if isinstance(v, (bool, np.bool_)):
                conv[k] = bool(v)
            elif isinstance(v, (int, np.integer)):
                conv[k] = int(v)
            elif isinstance(v, (float, np.floating)):
                conv[k] = _num(v * scale if k in ENTROPY_FIELDS else v)
            else:
                conv[k] = v
        out.append(conv)
    return out


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def format_output(cfg: RunConfig, rows: list, status: int, n_flagged: int,
                  n_unconverged: int) -> str:
    unit = "bits" if cfg.log_base == "2" else "nats"
    if cfg.format == "json":
        config = {k: v for k, v in asdict(cfg).items() if k not in ("output", "jobs")}
        doc = {"command": cfg.command, "unit": unit, "config": config, "rows": rows,
               "summary": {"rows": len(rows), "flagged": n_flagged,
                           "unconverged": n_unconverged, "exit_status": status}}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    columns = list(SWEEP_COLUMNS) if cfg.command == "sweep" else list(rows[0]) if rows else []
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])
        return buf.getvalue()
    cells = [[_cell(row[c]) for c in columns] for row in rows]
    widths = [max([len(c)] + [len(r[j]) for r in cells]) for j, c in enumerate(columns)]
    lines = [f"# {cfg.command}: entropies in {unit}",
             "  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(x.rjust(w) for x, w in zip(r, widths)) for r in cells]
    lines.append(f"# {len(rows)} rows, {n_flagged} flagged, {n_unconverged} not converged"
                 f" -> exit {status}")
    return "\n".join(lines) + "\n"


def run(cfg: RunConfig) -> tuple:
    """Execute a validated configuration; return (exit status, output text)."""
    results = _DISPATCH[cfg.command](cfg)
    n_flagged = sum(1 for _, flag in results if flag)
    n_unconv = sum(1 for row, _ in results if row.get("converged") is False)
    status = 2 if n_flagged or n_unconv else 0
    rows = _emit_rows([row for row, _ in results], cfg.log_base)
    return status, format_output(cfg, rows, status, n_flagged, n_unconv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = parse_config(argv)
        status, text = run(cfg)
    except ConfigInvalid as exc:
        parser.print_usage(sys.stderr)
        print(f"qsa: error: {exc}", file=sys.stderr)
        return 1
    except QSAError as exc:
        print(f"qsa: error: {exc}", file=sys.stderr)
        return 1
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
