"""Proximal dual semismooth Newton solver for the weighted-l1 regularized
check-loss subproblem

    min_beta  f_tau(y - X beta) + sum_i omega_i |beta_i| - <delta, beta - anchor>.

The outer loop is a proximal point algorithm whose j-th step minimizes the
objective plus (gamma1/2)||beta - beta^j||^2 + (gamma2/2)||X(beta - beta^j)||^2.
Each step is solved by a semismooth Newton method on the smooth convex dual
Psi, whose gradient Phi is assembled from the two proximal maps.
"""

import time

import numpy as np
from dataclasses import dataclass, field
from scipy.sparse.linalg import LinearOperator, cg

from .problem import check_loss
from .prox import (
    clarke_jacobian_check_loss_prox,
    clarke_jacobian_weighted_l1_prox,
    moreau_env_check_loss,
    moreau_env_weighted_l1,
    prox_check_loss,
    prox_weighted_l1,
)
from .report import SolverReport


@dataclass
class SubproblemSpec:
    """One weighted-l1 subproblem: data, weights, inexactness shift, anchor."""

    problem: object
    weights: np.ndarray
    delta: np.ndarray = None
    anchor: np.ndarray = None

    def __post_init__(self):
        p = self.problem.p
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (p,):
            raise ValueError("weights must have length p")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        self.weights = w
        self.delta = np.zeros(p) if self.delta is None else np.asarray(self.delta, float)
        self.anchor = np.zeros(p) if self.anchor is None else np.asarray(self.anchor, float)

    def objective(self, beta):
        """Subproblem objective at beta."""
        pr = self.problem
        val = check_loss(pr.response - pr.design @ beta, pr.tau)
        val += float(np.sum(self.weights * np.abs(beta)))
        val -= float(self.delta @ (beta - self.anchor))
        return val


@dataclass
class PdsnConfig:
    gamma1_0: float = None  # default min(0.1, initial KKT residual)
    gamma2_0: float = None
    gamma_floor: float = 1e-8
    shrink: float = 5.0 / 7.0
    eps_ppa_0: float = 1e-6
    eps_ppa_floor: float = 1e-8
    newton_mu: float = 1e-5
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_ppa_iters: int = 100
    max_newton_iters: int = 100
    newton_tol_factor: float = 0.1
    warm_start_newton: bool = True
    tie_rule: str = "zero"
    dense_solve_max_n: int = 2000  # above this, use Jacobi-preconditioned CG
    cg_tol: float = 1e-9

    def __post_init__(self):
        if self.gamma_floor <= 0 or not 0.0 < self.shrink < 1.0:
            raise ValueError("need gamma_floor > 0 and shrink in (0,1)")
        if self.eps_ppa_0 <= 0 or self.eps_ppa_floor <= 0 or self.newton_mu <= 0:
            raise ValueError("tolerances and mu must be positive")
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.max_ppa_iters < 1 or self.max_newton_iters < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class PdsnState:
    beta: np.ndarray
    z: np.ndarray
    u: np.ndarray
    gamma1: float
    gamma2: float
    err_ppa: float
    inner_newton_iters: int
    trace: list = field(default_factory=list)


def kkt_residual(beta, z, u, spec):
    """Relative KKT residual of the subproblem at (beta, z, u).

    Zero exactly when u is a check-loss subgradient at z, X^T u + delta is a
    weighted-l1 subgradient at beta, and y - X beta - z = 0.
    """
    pr = spec.problem
    b1 = z - prox_check_loss(z + u, 1.0, pr.tau, pr.n)
    b2 = beta - prox_weighted_l1(beta + pr.design.T @ u + spec.delta, spec.weights, 1.0)
    b3 = pr.response - pr.design @ beta - z
    num = np.sqrt(np.sum(b1**2) + np.sum(b2**2) + np.sum(b3**2))
    return float(num / (1.0 + np.linalg.norm(pr.response)))


class _DualWork:
    """Dual pieces of one PPA step: anchors (beta^j, z^j) and gammas fixed."""

    def __init__(self, spec, beta_anchor, gamma1, gamma2, gram=None):
        pr = spec.problem
        self.X = pr.design
        self.y = pr.response
        self.n, self.p = pr.n, pr.p
        self.tau = pr.tau
        self.omega = spec.weights
        self.delta = spec.delta
        self.bj = np.asarray(beta_anchor, dtype=float)
        self.zj = self.y - self.X @ self.bj
        self.g1 = float(gamma1)
        self.g2 = float(gamma2)
        self.const = float(spec.delta @ (self.bj - spec.anchor))
        self.gram = gram  # optional cached X X^T for the Newton assembly
        self.hi2 = self.tau / (self.n * self.g2)
        self.lo2 = (self.tau - 1.0) / (self.n * self.g2)
        self.thr1 = self.omega / self.g1

    def prox_args(self, u, Xtu):
        q2 = self.zj - u / self.g2
        q1 = self.bj - (Xtu - self.delta) / self.g1
        return q1, q2

    def value(self, u, Xtu):
        """Psi(u); the dual minimum equals minus the regularized primal minimum."""
        q1, q2 = self.prox_args(u, Xtu)
        env_f = moreau_env_check_loss(q2, self.g2, self.tau, self.n)
        env_h = moreau_env_weighted_l1(q1, self.omega, self.g1)
        quad = 0.5 * float(u @ u) / self.g2 + 0.5 * float(np.sum((Xtu - self.delta) ** 2)) / self.g1
        return quad - env_f - env_h + self.const

    def value_dir_deriv(self, u, Xtu, d, Xtd):
        """(Psi(u), <grad Psi(u), d>) without forming the full gradient.

        Uses the box-projection identities pz = q2 - clip(q2, lo, hi) and
        pb = q1 - clip(q1, -thr, thr) for both proxes.
        """
        g1, g2, tau, n = self.g1, self.g2, self.tau, self.n
        q2 = self.zj - u / g2
        cz = np.clip(q2, self.lo2, self.hi2)
        pz = q2 - cz
        xd = Xtu - self.delta
        q1 = self.bj - xd / g1
        cb = np.clip(q1, -self.thr1, self.thr1)
        pb = q1 - cb
        env_f = float((tau - (pz <= 0)) @ pz) / n + 0.5 * g2 * float(cz @ cz)
        env_h = float(self.omega @ np.abs(pb)) + 0.5 * g1 * float(cb @ cb)
        quad = 0.5 * float(u @ u) / g2 + 0.5 * float(xd @ xd) / g1
        psi = quad - env_f - env_h + self.const
        # <Phi(u), d> = <y - pz, d> - <pb, X^T d>
        dd = float((self.y - pz) @ d - pb @ Xtd)
        return psi, dd

    def gradient(self, u, Xtu):
        """Phi(u) = y - P f_tau(z^j - u/g2) - X P h(beta^j - (X^T u - delta)/g1),
        plus the prox images used to assemble it."""
        q1, q2 = self.prox_args(u, Xtu)
        pz = prox_check_loss(q2, self.g2, self.tau, self.n)
        pb = prox_weighted_l1(q1, self.omega, self.g1)
        phi = self.y - pz - self.X @ pb
        return phi, pz, pb, q1, q2

    def jacobian_diags(self, q1, q2, tie_rule):
        udiag = clarke_jacobian_check_loss_prox(q2, self.g2, self.tau, self.n, tie_rule).diag
        vdiag = clarke_jacobian_weighted_l1_prox(q1, self.omega, self.g1, tie_rule).diag
        return udiag, vdiag

    def active_gram(self, mask):
        """X_J X_J^T over the active columns, from the cheaper side."""
        n_active = int(mask.sum())
        if self.gram is not None and self.p - n_active < n_active:
            Xc = self.X[:, ~mask]
            return self.gram - Xc @ Xc.T if Xc.shape[1] else self.gram.copy()
        if n_active:
            Xa = self.X[:, mask]
            return Xa @ Xa.T
        return np.zeros((self.n, self.n))

    def newton_matrix_solve(self, q1, q2, rhs, mu, tie_rule, cfg, cache=None):
        """Solve (gamma2^{-1} U + gamma1^{-1} X V X^T + mu I) d = rhs.

        U, V are 0/1 diagonal Clarke elements at the current prox arguments.
        The unscaled active Gram X_J X_J^T is kept in ``cache`` across calls
        and rank-updated when the active set changes by a few columns.
        """
        udiag, vdiag = self.jacobian_diags(q1, q2, tie_rule)
        dvec = udiag / self.g2 + mu
        mask = vdiag > 0.0
        if self.n > cfg.dense_solve_max_n:
            Xa = self.X[:, mask]

            def matvec(v):
                return dvec * v + (Xa @ (Xa.T @ v)) / self.g1

            op = LinearOperator((self.n, self.n), matvec=matvec)
            jacobi = dvec + np.sum(Xa**2, axis=1) / self.g1
            pre = LinearOperator((self.n, self.n), matvec=lambda v: v / jacobi)
            sol, info = cg(op, rhs, rtol=cfg.cg_tol, atol=0.0, M=pre, maxiter=10 * self.n)
            if info != 0:
                raise RuntimeError("conjugate gradient failed on the Newton system")
            return sol
        if cache is None or cache.get("mask") is None:
            W0 = self.active_gram(mask)
        else:
            W0 = cache["W0"]
            changed = mask ^ cache["mask"]
            n_changed = int(changed.sum())
            if n_changed:
                # refresh periodically to limit rank-update rounding drift
                cache["updates"] = cache.get("updates", 0) + n_changed
                if n_changed > max(16, self.n // 4) or cache["updates"] > 8 * self.n:
                    W0 = self.active_gram(mask)
                    cache["updates"] = 0
                else:
                    added = changed & mask
                    removed = changed & ~mask
                    if added.any():
                        Xa = self.X[:, added]
                        W0 += Xa @ Xa.T
                    if removed.any():
                        Xr = self.X[:, removed]
                        W0 -= Xr @ Xr.T
        if cache is not None:
            cache["mask"] = mask
            cache["W0"] = W0
        W = W0 / self.g1
        W[np.diag_indices_from(W)] += dvec
        return np.linalg.solve(W, rhs)


def _strong_wolfe(work, u, Xtu, d, Xtd, psi0, dpsi0, c1, c2, max_zoom=50):
    """Strong-Wolfe step along d by bracketing + safeguarded bisection.

    The zoom trial point is the secant root of the directional derivative
    (piecewise linear here, so usually exact), clipped away from the bracket
    ends; bisection is the fallback. Returns (alpha, psi, evals, ok).
    """

    def ev(a):
        psi_a, dpsi_a = work.value_dir_deriv(u + a * d, Xtu + a * Xtd, d, Xtd)
        if not np.isfinite(psi_a):
            raise FloatingPointError("non-finite dual value in line search")
        return psi_a, dpsi_a

    evals = 0
    a_prev, psi_prev, dpsi_prev = 0.0, psi0, dpsi0
    a = 1.0
    bracket = None
    for _ in range(30):
        psi_a, dpsi_a = ev(a)
        evals += 1
        if psi_a > psi0 + c1 * a * dpsi0 or (a_prev > 0.0 and psi_a >= psi_prev):
            bracket = (a_prev, psi_prev, dpsi_prev, a, psi_a, dpsi_a)
            break
        if abs(dpsi_a) <= c2 * abs(dpsi0):
            return a, psi_a, evals, True
        if dpsi_a >= 0.0:
            bracket = (a, psi_a, dpsi_a, a_prev, psi_prev, dpsi_prev)
            break
        # still descending: extrapolate toward the secant root of the
        # (piecewise linear) derivative, growing at least 2x and at most 100x
        step = a - a_prev
        slope = dpsi_a - dpsi_prev
        target = a + step * dpsi_a / -slope if slope > 0.0 else np.inf
        a_prev, psi_prev, dpsi_prev = a, psi_a, dpsi_a
        a = min(max(2.0 * a, target), 100.0 * a)
    else:
        return a_prev, psi_prev, evals, a_prev > 0.0
    lo, psi_lo, dlo, hi, psi_hi, dhi = bracket
    best_a, best_psi = lo, psi_lo
    for _ in range(max_zoom):
        span = hi - lo
        denom = dhi - dlo
        a = lo - dlo * span / denom if abs(denom) > 0.0 else 0.5 * (lo + hi)
        left, right = (lo, hi) if span > 0 else (hi, lo)
        margin = 0.05 * abs(span)
        if not (left + margin <= a <= right - margin):
            a = 0.5 * (lo + hi)
        psi_a, dpsi_a = ev(a)
        evals += 1
        if psi_a > psi0 + c1 * a * dpsi0 or psi_a >= psi_lo:
            hi, psi_hi, dhi = a, psi_a, dpsi_a
        else:
            if abs(dpsi_a) <= c2 * abs(dpsi0):
                return a, psi_a, evals, True
            if dpsi_a * (hi - lo) >= 0.0:
                hi, psi_hi, dhi = lo, psi_lo, dlo
            lo, psi_lo, dlo = a, psi_a, dpsi_a
            best_a, best_psi = a, psi_a
        if abs(hi - lo) < 1e-16:
            break
    return best_a, best_psi, evals, False


def _newton_solve(work, u0, tol, cfg, cache=None):
    """Semismooth Newton on Phi(u) = 0; returns (u, info dict)."""
    u = np.asarray(u0, dtype=float).copy()
    Xtu = work.X.T @ u
    ynorm1 = 1.0 + np.linalg.norm(work.y)
    warn = []
    psi_trace = []
    phi, pz, pb, q1, q2 = work.gradient(u, Xtu)
    iters = 0
    cache = {} if cache is None else cache
    for iters in range(cfg.max_newton_iters):
        res = np.linalg.norm(phi) / ynorm1
        if res <= tol:
            break
        d = work.newton_matrix_solve(q1, q2, -phi, cfg.newton_mu, cfg.tie_rule, cfg, cache)
        Xtd = work.X.T @ d
        psi0, dpsi0 = work.value_dir_deriv(u, Xtu, d, Xtd)
        psi_trace.append(psi0)
        if dpsi0 >= 0.0:  # numerically flat; nothing left to gain
            break
        alpha, _, _, ok = _strong_wolfe(work, u, Xtu, d, Xtd, psi0, dpsi0, cfg.wolfe_c1, cfg.wolfe_c2)
        if not ok and alpha == 0.0:
            warn.append("line search made no progress")
            break
        if not ok:
            warn.append("line search returned best bisection point")
        u = u + alpha * d
        Xtu = Xtu + alpha * Xtd
        phi, pz, pb, q1, q2 = work.gradient(u, Xtu)
    else:
        iters = cfg.max_newton_iters
        warn.append("newton iteration cap reached")
    res = np.linalg.norm(phi) / ynorm1
    psi_trace.append(work.value(u, Xtu))
    return u, {
        "iters": iters,
        "phi_rel": float(res),
        "beta_image": pb,
        "z_image": pz,
        "warnings": warn,
        "psi_trace": psi_trace,
        "Xtu": Xtu,
    }


def dual_objective(u, state, spec):
    """Dual value Psi at u for the PPA step anchored at state.beta."""
    work = _DualWork(spec, state.beta, state.gamma1, state.gamma2)
    u = np.asarray(u, dtype=float)
    return work.value(u, work.X.T @ u)


def dual_residual_map(u, state, spec):
    """Gradient Phi of the dual objective at u (the semismooth system)."""
    work = _DualWork(spec, state.beta, state.gamma1, state.gamma2)
    u = np.asarray(u, dtype=float)
    phi, *_ = work.gradient(u, work.X.T @ u)
    return phi


def assemble_newton_matrix(u, state, spec, tie_rule="zero", mu=1e-5):
    """Dense W + mu I with W = gamma2^{-1} U + gamma1^{-1} X V X^T."""
    work = _DualWork(spec, state.beta, state.gamma1, state.gamma2)
    u = np.asarray(u, dtype=float)
    q1, q2 = work.prox_args(u, work.X.T @ u)
    udiag = clarke_jacobian_check_loss_prox(q2, work.g2, work.tau, work.n, tie_rule).diag
    vdiag = clarke_jacobian_weighted_l1_prox(q1, work.omega, work.g1, tie_rule).diag
    W = (work.X * vdiag) @ work.X.T / work.g1
    W[np.diag_indices_from(W)] += udiag / work.g2 + mu
    return W


def semismooth_newton(spec, state, cfg, tol=None):
    """Run the inner Newton method from state.u; returns (u, iters)."""
    work = _DualWork(spec, state.beta, state.gamma1, state.gamma2)
    tol = cfg.newton_tol_factor * cfg.eps_ppa_0 if tol is None else tol
    u0 = np.zeros(work.n) if state.u is None else -np.asarray(state.u, float)
    u, info = _newton_solve(work, u0, tol, cfg)
    return u, info["iters"]


def ppa_solve(spec, cfg=None, u0=None):
    """Solve the weighted-l1 subproblem; returns (PdsnState, SolverReport).

    Parameters
    ----------
    spec : SubproblemSpec with the data, weights, shift and warm-start anchor.
    cfg : PdsnConfig; defaults follow the reference configuration
        (gamma_{1,0} = gamma_{2,0} = min(0.1, R0), shrink 5/7, floor 1e-8,
        eps schedule 1e-6 -> max(1e-8, eps/10)).
    u0 : optional warm-start multiplier in the KKT orientation
        (u in the subgradient of f_tau at z).
    """
    cfg = cfg or PdsnConfig()
    pr = spec.problem
    t0 = time.perf_counter()
    X, y = pr.design, pr.response
    beta = np.asarray(spec.anchor, dtype=float).copy()
    z = y - X @ beta
    u_kkt = np.zeros(pr.n) if u0 is None else np.asarray(u0, dtype=float).copy()
    err = kkt_residual(beta, z, u_kkt, spec)
    r0 = err
    g1 = cfg.gamma1_0 if cfg.gamma1_0 is not None else max(min(0.1, r0), cfg.gamma_floor)
    g2 = cfg.gamma2_0 if cfg.gamma2_0 is not None else max(min(0.1, r0), cfg.gamma_floor)
    eps = cfg.eps_ppa_0
    u_psi = -u_kkt
    total_newton = 0
    warnings = []
    converged = err <= min(eps, cfg.eps_ppa_floor)
    ppa_iters = 0
    last_phi_rel = float("nan")
    gram = X @ X.T if (not converged and pr.n <= cfg.dense_solve_max_n) else None
    cache = {}
    cur_obj = spec.objective(beta)
    trace = [cur_obj]
    stalls = 0
    while not converged and ppa_iters < cfg.max_ppa_iters:
        work = _DualWork(spec, beta, g1, g2, gram=gram)
        start = u_psi if cfg.warm_start_newton else np.zeros(pr.n)
        u_psi, info = _newton_solve(work, start, cfg.newton_tol_factor * eps, cfg, cache)
        total_newton += info["iters"]
        last_phi_rel = info["phi_rel"]
        warnings.extend(info["warnings"])
        ppa_iters += 1
        beta_new = info["beta_image"]
        # accept only if the proximally regularized objective did not increase
        # (beyond numerical slack); an overly inexact inner solve otherwise
        # derails the anchors
        new_obj = spec.objective(beta_new)
        reg = new_obj + 0.5 * g1 * float(np.sum((beta_new - beta) ** 2))
        reg += 0.5 * g2 * float(np.sum((X @ (beta_new - beta)) ** 2))
        if reg > cur_obj + 1e-6 * (1.0 + abs(cur_obj)):
            stalls += 1
            warnings.append("inner solve rejected (insufficient decrease)")
            if stalls >= 3:
                break
            continue  # retry from the same anchors with the warm dual
        stalls = 0
        beta = beta_new
        cur_obj = new_obj
        z = y - X @ beta
        u_kkt = -u_psi
        err = kkt_residual(beta, z, u_kkt, spec)
        trace.append(cur_obj)
        if err <= eps:
            converged = True
            break
        eps = max(cfg.eps_ppa_floor, 0.1 * eps)
        g1 = max(cfg.gamma_floor, cfg.shrink * g1)
        g2 = max(cfg.gamma_floor, cfg.shrink * g2)
    state = PdsnState(
        beta=beta, z=z, u=u_kkt, gamma1=g1, gamma2=g2,
        err_ppa=err, inner_newton_iters=total_newton, trace=trace,
    )
    report = SolverReport(
        converged=bool(converged),
        iterations=ppa_iters,
        objective=spec.objective(beta),
        residuals={"err_ppa": err, "phi_rel": last_phi_rel if np.isfinite(last_phi_rel) else 0.0},
        wall_ms=(time.perf_counter() - t0) * 1e3,
        solver="pdsn",
        inner_iterations=total_newton,
        warnings=warnings,
    )
    return state, report
