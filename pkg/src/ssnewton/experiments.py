"""Benchmark drivers: reference solutions, convergence quotients, parameter
sweeps, a brute-force minimization oracle for tiny instances, and the file
outputs behind the command line interface.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .blocks import BlockSystem, StateVector
from .newton import (
    STATUS_CONVERGED,
    IterationTrace,
    SolverConfig,
    SolverFailure,
    solve,
)
from .plasticity import (
    DiscreteProblem,
    MaterialParams,
    assemble,
    build_problem,
    psi_hp,
    recover_multiplier,
)

MODES = ("single_run", "reference_then_quotients", "rho_sweep", "oracle_compare")

# Reference runs aim for merit 0.5 |F|^2 <= 1e-20.
REFERENCE_MERIT = 1e-20
REFERENCE_TOL = math.sqrt(2.0 * REFERENCE_MERIT)

CSV_FLOAT = "{:.17e}"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ProblemConfig:
    h_exponent: int = 4
    p: int = 1
    lam: float = 1000.0
    mu: float = 1000.0
    hardening: float = 500.0
    sigma_y: float = 5.0
    rho: float = 25.0
    load_scale: float = 1.0

    _JSON_KEYS = {
        "h_exponent": "h_exponent",
        "p": "p",
        "lambda": "lam",
        "mu": "mu",
        "hardening": "hardening",
        "sigma_y": "sigma_y",
        "rho": "rho",
        "load_scale": "load_scale",
    }

    def __post_init__(self):
        if self.rho <= 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.sigma_y <= 0:
            raise ConfigError("sigma_y must be positive")
        if self.mu <= 0 or self.lam < 0 or self.hardening <= 0:
            raise ConfigError("material constants out of range")
        if self.h_exponent < -1:
            raise ConfigError("h_exponent must be >= -1")

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemConfig":
        kwargs = {}
        for key, value in data.items():
            if key not in cls._JSON_KEYS:
                raise ConfigError(f"unknown problem config field {key!r}")
            kwargs[cls._JSON_KEYS[key]] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def material(self) -> MaterialParams:
        return MaterialParams(self.lam, self.mu, self.hardening, self.sigma_y)

    def build(self) -> DiscreteProblem:
        return build_problem(
            self.h_exponent,
            self.p,
            material=self.material(),
            rho=self.rho,
            load_scale=self.load_scale,
        )


@dataclass
class ExperimentConfig:
    problem: ProblemConfig
    solver: SolverConfig = field(default_factory=SolverConfig)
    mode: str = "single_run"
    out_dir: Path = Path(".")
    rho_list: tuple = (10.0, 25.0, 50.0)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.out_dir = Path(self.out_dir)

    @classmethod
    def from_json_file(cls, path, mode: str, out_dir) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
        solver_data = data.pop("solver", {})
        rho_list = data.pop("rho_list", (10.0, 25.0, 50.0))
        problem = ProblemConfig.from_dict(data)
        try:
            solver = SolverConfig(**solver_data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid solver config: {exc}") from exc
        return cls(problem, solver, mode, Path(out_dir), tuple(rho_list))


def solve_problem(problem: DiscreteProblem, cfg: SolverConfig):
    """Assemble and run the Newton iteration from the zero start."""
    system = assemble(problem)
    family = problem.block_family(cfg.kink_tau, cfg.kink_tol)
    state, trace = solve(system, family, StateVector.zero(system), cfg)
    return system, state, trace


def make_reference(problem: DiscreteProblem, cfg: SolverConfig | None = None):
    """High-accuracy substitute for the exact solution.

    Runs the iteration to merit <= 1e-20 and returns (system, state, trace);
    raises :class:`SolverFailure` (with the trace attached) otherwise.
    """
    base = cfg or SolverConfig()
    tight = SolverConfig(
        tol=REFERENCE_TOL,
        max_iter=base.max_iter,
        damping=base.damping,
        contraction=base.contraction,
        min_step=base.min_step,
        kink_tau=base.kink_tau,
        kink_tol=base.kink_tol,
    )
    system, state, trace = solve_problem(problem, tight)
    if trace.status != STATUS_CONVERGED:
        raise SolverFailure(
            f"reference solve did not reach merit {REFERENCE_MERIT:g} "
            f"(status {trace.status}, final merit {trace.final_merit:.3e})",
            trace,
        )
    return system, state, trace


POWERS = (1.0, 4.0 / 3.0, 2.0)


@dataclass
class QuotientTable:
    """Error decay against a reference iterate.

    Row k holds |e_k| and the quotients |e_{k+1}| / |e_k|^rho for
    rho in {1, 4/3, 2}.  Rows are defined only while |e_k| and |e_{k+1}|
    are positive; the table stops before the reference iterate itself.
    """

    k: np.ndarray
    err: np.ndarray
    q1: np.ndarray
    q43: np.ndarray
    q2: np.ndarray

    HEADER = ("k", "err", "q_ssn_1", "q_ssn_4_3", "q_ssn_2")

    def __len__(self):
        return self.k.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.HEADER) + "\n")
            for i in range(len(self)):
                row = [str(int(self.k[i]))] + [
                    CSV_FLOAT.format(v)
                    for v in (self.err[i], self.q1[i], self.q43[i], self.q2[i])
                ]
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "QuotientTable":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != cls.HEADER:
                raise ValueError(f"{path}: unexpected header {header}")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        if rows:
            data = np.array([[float(v) for v in row] for row in rows])
        else:
            data = np.zeros((0, 5))
        return cls(
            data[:, 0].astype(int), data[:, 1], data[:, 2], data[:, 3], data[:, 4]
        )

    def __eq__(self, other):
        if not isinstance(other, QuotientTable):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("k", "err", "q1", "q43", "q2")
        )


def quotients(iterates, reference) -> QuotientTable:
    """Convergence quotients of an iterate sequence against a reference.

    ``iterates`` are the concatenated (a, b, c) vectors of the run;
    rows with a vanishing error (in particular the reference iterate
    itself) are omitted.
    """
    ref = np.asarray(reference, dtype=float)
    errs = np.array([np.linalg.norm(np.asarray(x) - ref) for x in iterates])
    ks, e_out, q_cols = [], [], ([], [], [])
    for k in range(len(errs) - 1):
        if errs[k] == 0.0 or errs[k + 1] == 0.0:
            continue
        ks.append(k)
        e_out.append(errs[k])
        for col, power in zip(q_cols, POWERS):
            col.append(errs[k + 1] / errs[k] ** power)
    return QuotientTable(
        np.array(ks, dtype=int),
        np.array(e_out),
        np.array(q_cols[0]),
        np.array(q_cols[1]),
        np.array(q_cols[2]),
    )


def rho_sweep(problem_cfg: ProblemConfig, rho_list, solver_cfg: SolverConfig | None = None):
    """Solve from the zero start for each projection parameter.

    Returns a list of (rho, iterations, status) rows; failures are recorded
    in the status column rather than raised.
    """
    cfg = solver_cfg or SolverConfig()
    rows = []
    for rho in rho_list:
        if rho <= 0:
            raise ConfigError(f"rho must be positive, got {rho}")
        pc = ProblemConfig(
            h_exponent=problem_cfg.h_exponent,
            p=problem_cfg.p,
            lam=problem_cfg.lam,
            mu=problem_cfg.mu,
            hardening=problem_cfg.hardening,
            sigma_y=problem_cfg.sigma_y,
            rho=float(rho),
            load_scale=problem_cfg.load_scale,
        )
        _, _, trace = solve_problem(pc.build(), cfg)
        rows.append((float(rho), trace.iterations, trace.status))
    return rows


@dataclass
class OracleResult:
    a: np.ndarray
    b: np.ndarray
    iterations: int
    converged: bool
    energy: float


def oracle_minimize(
    system: BlockSystem,
    sigma_node: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 500_000,
) -> OracleResult:
    """Minimize the nonsmooth discrete energy by alternating exact steps.

    The energy 0.5 v^T A v + v^T B q + 0.5 q^T C q + sum_i kappa_i |q_i|
    + l^T v is minimized exactly in v (Cholesky-grade solve) and exactly in
    q (per-node soft-threshold; C is diagonal with one coefficient per
    node).  Entirely independent of the Newton path.
    """
    L = system.L
    c_diag = system.C.diagonal()
    c_node = c_diag[::L]
    off = system.C - sp.diags(c_diag)
    off_max = np.abs(off.data).max() if off.nnz else 0.0
    if off_max > 1e-12 * max(c_diag.max(), 1e-300):
        raise ValueError("oracle requires a diagonal strain block C")
    kappa = system.d_node * np.asarray(sigma_node, dtype=float)

    A_lu = spla.splu(system.A.tocsc())
    a = np.zeros(system.n_disp)
    b = np.zeros(system.n_strain)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        a_new = A_lu.solve(-(system.B @ b + system.l))
        r = (system.B.T @ a_new).reshape(-1, L)
        nr = np.linalg.norm(r, axis=1)
        shrink = np.maximum(0.0, 1.0 - kappa / np.where(nr > 0, nr, 1.0))
        shrink[nr == 0.0] = 0.0
        b_new = (-(shrink / c_node)[:, None] * r).ravel()
        change = max(np.abs(a_new - a).max(), np.abs(b_new - b).max())
        a, b = a_new, b_new
        if change <= tol * max(1.0, np.abs(a).max(), np.abs(b).max()):
            converged = True
            break

    energy = (
        0.5 * a @ (system.A @ a)
        + a @ (system.B @ b)
        + 0.5 * b @ (system.C @ b)
        + float(kappa @ np.linalg.norm(b.reshape(-1, L), axis=1))
        + system.l @ a
    )
    return OracleResult(a, b, it, converged, float(energy))


@dataclass
class OracleComparison:
    diff_u: float
    diff_p: float
    newton_status: str
    oracle_converged: bool
    oracle_iterations: int
    newton_iterations: int

    @property
    def ok(self) -> bool:
        return self.newton_status == STATUS_CONVERGED and self.oracle_converged


def oracle_compare(problem: DiscreteProblem, cfg: SolverConfig | None = None) -> OracleComparison:
    """Cross-check the Newton solution against the minimization oracle."""
    cfg = cfg or SolverConfig()
    system, state, trace = solve_problem(problem, cfg)
    oracle = oracle_minimize(system, problem.sigma_node)
    return OracleComparison(
        diff_u=float(np.linalg.norm(state.a - oracle.a)),
        diff_p=float(np.linalg.norm(state.b - oracle.b)),
        newton_status=trace.status,
        oracle_converged=oracle.converged,
        oracle_iterations=oracle.iterations,
        newton_iterations=trace.iterations,
    )


def _write_csv(path, header, rows):
    """Write a CSV from rows of pre-formatted cell strings."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(str(cell) for cell in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _summary(trace: IterationTrace | None, extra=None) -> dict:
    out = dict(extra or {})
    if trace is not None:
        out.update(
            {
                "status": trace.status,
                "final_merit": trace.final_merit,
                "iterations": trace.iterations,
                "residual_history": list(trace.residuals),
            }
        )
    return out


def _export_fields(problem: DiscreteProblem, system, state, out_dir: Path):
    dm = problem.dofmap
    coords = dm.free_node_coords()
    rows = [
        [
            CSV_FLOAT.format(v)
            for v in (coords[i, 0], coords[i, 1], state.a[2 * i], state.a[2 * i + 1])
        ]
        for i in range(dm.n_free_nodes)
    ]
    _write_csv(out_dir / "fields_displacement.csv", ("x", "y", "u_x", "u_y"), rows)

    sc = dm.strain_coords()
    lam = recover_multiplier(problem, state.a, state.b).reshape(-1, problem.L)
    bb = state.b.reshape(-1, problem.L)
    rows = [
        [
            CSV_FLOAT.format(v)
            for v in (sc[i, 0], sc[i, 1], bb[i, 0], bb[i, 1], lam[i, 0], lam[i, 1])
        ]
        for i in range(dm.n_strain_nodes)
    ]
    _write_csv(
        out_dir / "fields_strain.csv", ("x", "y", "p_1", "p_2", "lambda_1", "lambda_2"), rows
    )


def run(cfg: ExperimentConfig) -> dict:
    """Execute the configured mode and write its CSV and JSON outputs.

    Returns a dict of output names to paths.  Solver failures in modes that
    require convergence raise :class:`SolverFailure`.
    """
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = {}

    if cfg.mode == "single_run":
        problem = cfg.problem.build()
        system, state, trace = solve_problem(problem, cfg.solver)
        rows = [
            [str(k)]
            + [CSV_FLOAT.format(v) for v in (trace.residuals[k], trace.merits[k])]
            + [CSV_FLOAT.format(trace.step_lengths[k - 1]) if k > 0 else ""]
            for k in range(len(trace.residuals))
        ]
        _write_csv(out / "run.csv", ("k", "residual", "merit", "step_length"), rows)
        _export_fields(problem, system, state, out)
        summary = _summary(trace)
        written.update(
            run=out / "run.csv",
            fields_displacement=out / "fields_displacement.csv",
            fields_strain=out / "fields_strain.csv",
        )
        if trace.status != STATUS_CONVERGED:
            _write_summary(out, summary)
            raise SolverFailure(f"single_run did not converge: {trace.status}", trace)

    elif cfg.mode == "reference_then_quotients":
        problem = cfg.problem.build()
        _, state, trace = make_reference(problem, cfg.solver)
        table = quotients(trace.iterates, state.concat())
        table.to_csv(out / "quotients.csv")
        summary = _summary(trace, {"reference_merit": trace.final_merit})
        written["quotients"] = out / "quotients.csv"

    elif cfg.mode == "rho_sweep":
        rows = rho_sweep(cfg.problem, cfg.rho_list, cfg.solver)
        csv_rows = [[CSV_FLOAT.format(r), str(n), status] for r, n, status in rows]
        _write_csv(out / "rho_sweep.csv", ("rho", "iterations", "status"), csv_rows)
        summary = {
            "status": "ok",
            "rows": [
                {"rho": r, "iterations": n, "solver_status": s} for r, n, s in rows
            ],
        }
        written["rho_sweep"] = out / "rho_sweep.csv"

    else:  # oracle_compare
        problem = cfg.problem.build()
        comp = oracle_compare(problem, cfg.solver)
        csv_rows = [
            ["diff_u", CSV_FLOAT.format(comp.diff_u)],
            ["diff_p", CSV_FLOAT.format(comp.diff_p)],
            ["newton_status", comp.newton_status],
            ["oracle_converged", str(comp.oracle_converged)],
            ["oracle_iterations", str(comp.oracle_iterations)],
        ]
        _write_csv(out / "oracle_compare.csv", ("quantity", "value"), csv_rows)
        summary = {
            "status": "ok" if comp.ok else "failed",
            "diff_u": comp.diff_u,
            "diff_p": comp.diff_p,
            "newton_status": comp.newton_status,
            "oracle_converged": comp.oracle_converged,
        }
        written["oracle_compare"] = out / "oracle_compare.csv"
        if not comp.ok:
            _write_summary(out, summary)
            raise SolverFailure(
                "oracle comparison failed "
                f"(newton: {comp.newton_status}, oracle converged: {comp.oracle_converged})",
                IterationTrace(status=comp.newton_status),
            )

    written["summary"] = _write_summary(out, summary)
    return written


def _write_summary(out: Path, summary: dict) -> Path:
    path = out / "summary.json"
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return path
