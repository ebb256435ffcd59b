"""Multi-stage convex relaxation driver.

Each stage solves the weighted-l1 check-loss subproblem with weights
lambda (1 - w^{k-1}) (intercept unpenalized by default), updates the penalty
level rho_k on its schedule, recomputes the weights w^k in closed form, and
measures the stage KKT residual of the coupled penalized problem. Stages stop
when the nonzero count and the residual stabilize.
"""

import numpy as np
from dataclasses import dataclass, field
from scipy.optimize import minimize

from .admm import AdmmConfig, admm_solve
from .pdsn import PdsnConfig, SubproblemSpec, ppa_solve
from .problem import matrix_norms, nonzero_count
from .prox import prox_check_loss, prox_weighted_l1
from .surrogate import SurrogateFamily, scad


@dataclass


class MscraConfig:
    """Driver configuration.

    Exactly one of ``lam`` and ``nu`` is required (lambda = rho0/nu with
    rho0 = 1). ``rho_freeze`` pins rho_k to a constant for every stage, which
    turns the driver into an exact majorization-minimization iteration.
    """

    tau: float = 0.5
    lam: float = None
    nu: float = None
    surrogate: SurrogateFamily = field(default_factory=scad)
    solver: str = "pdsn"
    max_stages: int = 10
    stage_tol: float = 1e-5
    err_change_tol: float = 1e-6
    rho_cap: float = 1e8
    rho_growth: float = 1.25
    rho_freeze: float = None
    penalize_intercept: bool = False
    w0: np.ndarray = None
    pdsn: PdsnConfig = field(default_factory=PdsnConfig)
    admm: AdmmConfig = field(default_factory=AdmmConfig)

    def __post_init__(self):
        if (self.lam is None) == (self.nu is None):
            raise ValueError("specify exactly one of lam and nu")
        if self.lam is None:
            self.lam = 1.0 / self.nu
        else:
            self.nu = 1.0 / self.lam
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must be in (0,1)")
        if self.solver not in ("pdsn", "admm"):
            raise ValueError("solver must be 'pdsn' or 'admm'")
        if self.max_stages < 1:
            raise ValueError("max_stages must be >= 1")


class StageFailure(RuntimeError):
    """A stage solver failed hard; carries the partial stage history."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass


class StageState:
    k: int
    beta: np.ndarray
    w: np.ndarray
    rho: float
    err_k: float
    nnz: int
    solver_report: object
    stop_reason: str = ""

    def record(self):
        """The per-stage JSON record."""
        return {
            "k": self.k,
            "nnz": self.nnz,
            "err_k": float(self.err_k),
            "rho": float(self.rho),
            "solver_iters": int(self.solver_report.inner_iterations),
            "wall_ms": float(self.solver_report.wall_ms),
        }


def rho_schedule(k, beta, prev_rho, cap=1e8, growth=1.25):
    """Stage-k penalty level.

    Stage 1: max(1, 1/(3 ||beta||_inf)); stages 2-3: min(growth*prev,
    cap/||beta||_inf) floored at prev to keep rho nondecreasing; constant
    afterwards. Returns (rho, degenerate_flag); a zero stage-1 fit gives
    rho = 1 with the flag set.
    """
    bmax = float(np.max(np.abs(beta))) if np.size(beta) else 0.0
    if k == 1:
        if bmax == 0.0:
            return 1.0, True
        return max(1.0, 1.0 / (3.0 * bmax)), False
    if k in (2, 3):
        raw = growth * prev_rho if bmax == 0.0 else min(growth * prev_rho, cap / bmax)
        return max(prev_rho, raw), False
    return prev_rho, False


def lambda_grid(problem, gamma_min, gamma_max, count):
    """Nondecreasing grid lambda_i = max(0.01, gamma_i ||X||_1 / n) with
    gamma_i linear from gamma_min to gamma_max."""
    if not 0.0 < gamma_min <= gamma_max:
        raise ValueError("need 0 < gamma_min <= gamma_max")
    if count < 1:
        raise ValueError("count must be >= 1")
    scale = matrix_norms(problem.design).col_sum / problem.n
    gammas = np.linspace(gamma_min, gamma_max, count) if count > 1 else np.array([gamma_min])
    return np.maximum(0.01, gammas * scale)


def stage_kkt_residual(problem, beta, z, u, weights):
    """KKT residual of the coupled penalized problem at (beta, z, u) with the
    stage weights lambda (1 - w^k).

    The weighted-l1 block uses the Moreau-complement form
    beta - P_1 h(beta + X^T u), which vanishes exactly at KKT points.
    """
    b1 = z - prox_check_loss(z + u, 1.0, problem.tau, problem.n)
    b2 = beta - prox_weighted_l1(beta + problem.design.T @ u, weights, 1.0)
    b3 = problem.response - problem.design @ beta - z
    num = np.sqrt(np.sum(b1**2) + np.sum(b2**2) + np.sum(b3**2))
    return float(num / (1.0 + np.linalg.norm(problem.response)))


def subproblem_inexactness(beta, w_prev, problem, lam, weights=None, kink_tol=1e-9):
    """Euclidean distance from 0 to the subdifferential of the weighted-l1
    subproblem objective at beta (the minimum-norm certificate ||delta||).

    The subdifferential is -X^T V + B with V the product of check-loss
    subgradient intervals at the residuals and B the product of weighted
    absolute-value subgradient intervals; the distance is the box-constrained
    least-squares min over V of the componentwise projection onto B.
    Residuals within kink_tol (scaled by the response) count as at the kink.
    """
    X, y, tau, n = problem.design, problem.response, problem.tau, problem.n
    beta = np.asarray(beta, dtype=float)
    omega = np.asarray(weights, float) if weights is not None else lam * (1.0 - np.asarray(w_prev, float))
    z = y - X @ beta
    at_kink = np.abs(z) <= kink_tol * (1.0 + np.max(np.abs(y)))
    lo = np.where(~at_kink, (tau - (z <= 0)) / n, (tau - 1.0) / n)
    hi = np.where(~at_kink, (tau - (z <= 0)) / n, tau / n)
    bz = np.abs(beta) <= 0.0
    blo = np.where(~bz, omega * np.sign(beta), -omega)
    bhi = np.where(~bz, omega * np.sign(beta), omega)

    def fg(v):
        # the stationarity condition is X^T v in B for some v in V
        g = X.T @ v
        r = g - np.clip(g, blo, bhi)
        return float(r @ r), 2.0 * (X @ r)

    v0 = np.clip(np.zeros_like(z), lo, hi)
    res = minimize(fg, v0, jac=True, method="L-BFGS-B",
                   bounds=list(zip(lo, hi)), options={"maxiter": 500, "ftol": 1e-18, "gtol": 1e-14})
    return float(np.sqrt(max(res.fun, 0.0)))


def _solve_stage(spec, cfg, warm):
    if cfg.solver == "pdsn":
        state, report = ppa_solve(spec, cfg.pdsn, u0=warm.get("u_kkt"))
        return state.beta, state.u, {"u_kkt": state.u}, report
    state, report = admm_solve(spec, cfg.admm, z0=warm.get("z"), u0=warm.get("u_admm"))
    # the sPADMM multiplier satisfies -u in the f_tau subgradient at z
    return state.beta, -state.u, {"u_admm": state.u, "z": state.z}, report


def mscra_fit(problem, cfg):
    """Run the multi-stage relaxation; returns (final StageState, history).

    Stage weights fed to the solver are lambda (1 - w^{k-1}); the solver is
    warm started with the previous stage's solution. Termination: nonzero
    count stable over 4 stages with Err_k <= stage_tol; or stable over
    3 stages with |Err_k - Err_{k-2}| <= err_change_tol; or max_stages.
    """
    problem = problem.with_tau(cfg.tau)
    p = problem.p
    w = np.zeros(p) if cfg.w0 is None else np.asarray(cfg.w0, dtype=float).copy()
    if w.shape != (p,) or np.any(w < 0.0) or np.any(w > 0.5):
        raise ValueError("w0 must lie in [0, 0.5]^p")
    beta = np.zeros(p)
    rho = 1.0 if cfg.rho_freeze is None else float(cfg.rho_freeze)
    warm = {}
    history = []
    errs = {}
    nnzs = {}
    reason = "max_stages"
    for k in range(1, cfg.max_stages + 1):
        omega = cfg.lam * (1.0 - w)
        if problem.intercept_column and not cfg.penalize_intercept:
            omega[0] = 0.0
        spec = SubproblemSpec(problem=problem, weights=omega, anchor=beta)
        try:
            beta, u_kkt, warm, report = _solve_stage(spec, cfg, warm)
        except (FloatingPointError, RuntimeError) as exc:
            raise StageFailure(f"stage {k} solver failed: {exc}", history) from exc
        if cfg.rho_freeze is None:
            rho, degenerate = rho_schedule(k, beta, rho, cfg.rho_cap, cfg.rho_growth)
        else:
            degenerate = False
        w = np.asarray(cfg.surrogate.w_update(rho, np.abs(beta)), dtype=float)
        if problem.intercept_column and not cfg.penalize_intercept:
            w[0] = 1.0  # intercept weight stays zero next stage
        z = problem.response - problem.design @ beta
        omega_k = cfg.lam * (1.0 - w)
        err_k = stage_kkt_residual(problem, beta, z, u_kkt, omega_k)
        nnz = nonzero_count(beta)
        stage = StageState(k=k, beta=beta, w=w, rho=rho, err_k=err_k, nnz=nnz,
                           solver_report=report)
        history.append(stage)
        errs[k] = err_k
        nnzs[k] = nnz
        if degenerate:
            stage.solver_report.warnings.append("degenerate stage-1 fit (beta = 0)")
        if k >= 4 and len({nnzs[i] for i in (k, k - 1, k - 2, k - 3)}) == 1 and err_k <= cfg.stage_tol:
            reason = "stable_nnz_and_kkt"
            break
        if k >= 3 and len({nnzs[i] for i in (k, k - 1, k - 2)}) == 1 and abs(errs[k] - errs[k - 2]) <= cfg.err_change_tol:
            reason = "stable_nnz_and_err_change"
            break
    final = history[-1]
    final.stop_reason = reason
    return final, history
