"""Convex QP solver for problems of the form

    minimize    1/2 z'Pz + q'z
    subject to  A z = b
                l <= z <= u

The solver is an alternating-direction (ADMM) scheme in the style of OSQP:
the equality rows and the box are both treated as constraint blocks, each
iteration solves one quasi-definite KKT system, and the factorization is
cached on the solver instance so repeated solves with the same (P, A) (the
receding-horizon case, where only q and b move) skip refactoring.

Once the iterates are close, an active-set polish step solves the reduced
equality-constrained KKT system exactly; the polished point is accepted only
if it certifies to the requested tolerances.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITERATIONS = "MaxIterations"
    INFEASIBLE = "Infeasible"


class SolverError(RuntimeError):
    """Raised by callers that require an optimal solution."""

    def __init__(self, message: str, solution: "QpSolution | None" = None):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True, eq=False)
class QpProblem:
    P: sp.csc_matrix
    q: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        P = _as_csc(self.P)
        n = P.shape[1]
        A = _as_csc(self.A) if self.A is not None else sp.csc_matrix((0, n))
        q = np.asarray(self.q, dtype=float).reshape(-1)
        b = np.asarray(self.b if self.b is not None else np.zeros(0), dtype=float).reshape(-1)
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if P.shape != (n, n):
            raise ValueError(f"P must be square, got {P.shape}")
        if q.shape != (n,):
            raise ValueError(f"q has length {q.size}, expected {n}")
        if A.shape[1] != n or b.shape != (A.shape[0],):
            raise ValueError(f"A is {A.shape} and b has {b.size} entries for n={n}")
        if np.any(lower > upper):
            bad = int(np.argmax(lower > upper))
            raise ValueError(f"lower > upper at index {bad}")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("bounds contain NaN")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(b))):
            raise ValueError("q and b must be finite")
        asym = abs(P - P.T)
        if asym.nnz and asym.max() > 1e-10 * max(1.0, abs(P).max()):
            raise ValueError("P is not symmetric")
        if not _is_psd(P):
            raise ValueError("P is not positive semidefinite")
        for name, value in (("P", P), ("q", q), ("A", A), ("b", b), ("lower", lower), ("upper", upper)):
            if isinstance(value, np.ndarray):
                value.flags.writeable = False
            object.__setattr__(self, name, value)

    @property
    def num_vars(self) -> int:
        return self.P.shape[1]

    @property
    def num_eq(self) -> int:
        return self.A.shape[0]

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ (self.P @ z) + self.q @ z)

    def with_data(self, q=None, b=None, lower=None, upper=None) -> "QpProblem":
        """Same matrices, new vectors. Keeps the solver's factorization cache valid."""
        return QpProblem(
            self.P,
            self.q if q is None else q,
            self.A,
            self.b if b is None else b,
            self.lower if lower is None else lower,
            self.upper if upper is None else upper,
        )


def _as_csc(mat) -> sp.csc_matrix:
    # keep identity when possible so solver caches keyed on the matrix object hit
    if sp.isspmatrix_csc(mat) and mat.dtype == np.float64:
        return mat
    return sp.csc_matrix(np.asarray(mat, dtype=float) if not sp.issparse(mat) else mat, dtype=float)


def _is_psd(P: sp.csc_matrix) -> bool:
    n = P.shape[0]
    if n == 0:
        return True
    diag = P.diagonal()
    off = np.asarray(abs(P).sum(axis=1)).ravel() - np.abs(diag)
    if np.all(diag - off >= -1e-12):
        return True
    scale = max(1.0, float(abs(P).max()))
    if n <= 2000:
        return bool(np.linalg.eigvalsh(P.toarray()).min() >= -1e-9 * scale)
    lam = spla.eigsh(P, k=1, which="SA", return_eigenvectors=False)
    return bool(lam[0] >= -1e-9 * scale)


@dataclass(frozen=True)
class SolverSettings:
    eps_primal: float = 1e-6
    eps_dual: float = 1e-6
    max_iter: int = 50_000
    rho: float = 0.1
    sigma: float = 1e-6
    relax: float = 1.6
    check_every: int = 10
    adaptive_rho: bool = True
    adaptive_rho_every: int = 50
    scaling_iters: int = 10
    polish: bool = True
    polish_delta: float = 1e-7
    polish_refine: int = 5
    polish_rounds: int = 10
    # polish is attempted once scaled residuals drop below this factor times eps
    polish_trigger: float = 1e3
    stall_iters: int = 1000
    stall_factor: float = 1e3
    eps_infeasible: float = 1e-5

    def __post_init__(self):
        if self.eps_primal <= 0 or self.eps_dual <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class WarmStart:
    z: np.ndarray
    y_eq: np.ndarray | None = None
    y_box: np.ndarray | None = None


@dataclass(frozen=True)
class QpSolution:
    z: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    complementarity: float
    iterations: int
    status: Status
    y_eq: np.ndarray
    y_box: np.ndarray
    polished: bool = False
    refactorizations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def warm_start(self) -> WarmStart:
        return WarmStart(self.z, self.y_eq, self.y_box)


@dataclass(frozen=True)
class ResidualReport:
    equality: float
    bound: float
    objective: float
    stationarity: float | None = None
    complementarity: float | None = None
    tol: float = 0.0

    @property
    def primal(self) -> float:
        return max(self.equality, self.bound)

    @property
    def ok(self) -> bool:
        vals = [self.equality, self.bound, self.stationarity, self.complementarity]
        return all(v <= self.tol for v in vals if v is not None)


def complementarity_residual(z, y_box, lower, upper) -> float:
    """Largest product of a bound multiplier with its slack.

    Positive multipliers belong to upper bounds and negative ones to lower
    bounds, so a multiplier with the wrong sign pays for the full distance to
    the opposite bound (infinite for an unbounded side).
    """
    if len(z) == 0:
        return 0.0
    with np.errstate(invalid="ignore"):
        up = np.where(y_box > 0, y_box * (upper - z), 0.0)
        lo = np.where(y_box < 0, -y_box * (z - lower), 0.0)
    res = np.maximum(np.abs(up), np.abs(lo))
    res = np.where(np.isnan(res), np.inf, res)
    return float(res.max())


def validate_solution(problem: QpProblem, z, tol: float = 1e-6, y_eq=None, y_box=None) -> ResidualReport:
    """Residuals of a candidate point, optionally with multipliers.

    Sign convention for multipliers: P z + q + A'y_eq + y_box = 0.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    n = problem.num_vars
    if z.shape != (n,):
        raise ValueError(f"z has length {z.size}, expected {n}")
    eq = float(np.abs(problem.A @ z - problem.b).max()) if problem.num_eq else 0.0
    bound = float(np.maximum(problem.lower - z, z - problem.upper).clip(min=0.0).max()) if n else 0.0
    stat = comp = None
    if y_eq is not None or y_box is not None:
        y_eq = np.zeros(problem.num_eq) if y_eq is None else np.asarray(y_eq, dtype=float)
        y_box = np.zeros(n) if y_box is None else np.asarray(y_box, dtype=float)
        if y_eq.shape != (problem.num_eq,) or y_box.shape != (n,):
            raise ValueError("multiplier dimensions do not match the problem")
        grad = problem.P @ z + problem.q + problem.A.T @ y_eq + y_box
        stat = float(np.abs(grad).max()) if n else 0.0
        comp = complementarity_residual(z, y_box, problem.lower, problem.upper)
    return ResidualReport(eq, bound, problem.objective(z), stat, comp, tol)


def presolve_infeasible(problem: QpProblem, tol: float = 1e-9) -> str | None:
    """Interval bound propagation over each equality row.

    Returns a description of the first row whose right-hand side lies outside
    the range reachable under the box, or ``None``.
    """
    A = sp.csr_matrix(problem.A)
    lo, up = problem.lower, problem.upper
    for i in range(A.shape[0]):
        start, stop = A.indptr[i], A.indptr[i + 1]
        cols, vals = A.indices[start:stop], A.data[start:stop]
        with np.errstate(invalid="ignore"):
            rmin = np.where(vals > 0, vals * lo[cols], vals * up[cols]).sum()
            rmax = np.where(vals > 0, vals * up[cols], vals * lo[cols]).sum()
        scale = 1.0 + abs(problem.b[i])
        if problem.b[i] < rmin - tol * scale or problem.b[i] > rmax + tol * scale:
            return f"row {i}: rhs {problem.b[i]:g} outside reachable [{rmin:g}, {rmax:g}]"
    return None


@dataclass
class _Scaling:
    D: np.ndarray
    E: np.ndarray
    c: float
    P: sp.csc_matrix
    A: sp.csc_matrix


def _ruiz(P: sp.csc_matrix, A: sp.csc_matrix, iters: int) -> _Scaling:
    n, m = P.shape[0], A.shape[0]
    D = np.ones(n)
    E = np.ones(m)
    Ps, As = P.copy(), A.copy()
    for _ in range(iters):
        # infinity norms of the columns of [P A'; A 0]
        col_p = np.asarray(abs(Ps).max(axis=0).todense()).ravel() if n else np.zeros(0)
        col_a = np.asarray(abs(As).max(axis=0).todense()).ravel() if m else np.zeros(n)
        row_a = np.asarray(abs(As).max(axis=1).todense()).ravel() if m else np.zeros(0)
        dn = np.maximum(col_p, col_a)
        dn = np.where(dn < 1e-4, 1.0, dn)
        dm = np.where(row_a < 1e-4, 1.0, row_a)
        dn = 1.0 / np.sqrt(dn)
        dm = 1.0 / np.sqrt(dm)
        Dn, Dm = sp.diags(dn), sp.diags(dm)
        Ps = sp.csc_matrix(Dn @ Ps @ Dn)
        As = sp.csc_matrix(Dm @ As @ Dn)
        D *= dn
        E *= dm
    col_norm = np.asarray(abs(Ps).max(axis=0).todense()).ravel() if n else np.zeros(0)
    mean = col_norm.mean() if n else 0.0
    c = 1.0 / mean if mean > 1e-4 else 1.0
    return _Scaling(D, E, c, sp.csc_matrix(c * Ps), As)


class QpSolver:
    """Stateful solver. Reuses scaling and KKT factorization while (P, A) are unchanged."""

    def __init__(self, settings: SolverSettings | None = None):
        self.settings = settings or SolverSettings()
        self._key = None
        self._scaling: _Scaling | None = None
        self._factor = None
        self._factor_rho = None
        self._rho = None
        self.refactorizations = 0

    # -- caching ---------------------------------------------------------

    def _prepare(self, problem: QpProblem):
        same = (
            self._key is not None
            and self._key[0] is problem.P
            and self._key[1] is problem.A
        )
        if not same:
            self._scaling = _ruiz(problem.P, problem.A, self.settings.scaling_iters)
            self._key = (problem.P, problem.A)
            self._factor = None
            self._factor_rho = None
            self._rho = None
        return self._scaling

    def _kkt_factor(self, rho_box: np.ndarray, rho_eq: np.ndarray):
        if (
            self._factor is not None
            and np.array_equal(self._factor_rho[0], rho_box)
            and np.array_equal(self._factor_rho[1], rho_eq)
        ):
            return self._factor
        sc = self._scaling
        top = sc.P + sp.diags(self.settings.sigma + rho_box)
        K = sp.bmat([[top, sc.A.T], [sc.A, sp.diags(-1.0 / rho_eq) if len(rho_eq) else None]], format="csc")
        if K.shape[0] == 0:
            self._factor = None
        else:
            self._factor = spla.splu(K, permc_spec="COLAMD")
        self._factor_rho = (rho_box.copy(), rho_eq.copy())
        self.refactorizations += 1
        return self._factor

    # -- main entry -------------------------------------------------------

    def solve(self, problem: QpProblem, warm_start: WarmStart | None = None) -> QpSolution:
        st = self.settings
        n, m = problem.num_vars, problem.num_eq
        reason = presolve_infeasible(problem)
        if reason is not None:
            log.info("presolve proved infeasibility: %s", reason)
            z = np.clip(np.zeros(n), problem.lower, problem.upper)
            rep = validate_solution(problem, z)
            return QpSolution(z, rep.objective, rep.primal, np.inf, np.inf, 0, Status.INFEASIBLE,
                              np.zeros(m), np.zeros(n))
        if n == 0:
            return QpSolution(np.zeros(0), 0.0, 0.0, 0.0, 0.0, 0, Status.OPTIMAL, np.zeros(m), np.zeros(0))

        sc = self._prepare(problem)
        D, E, c = sc.D, sc.E, sc.c
        Ps, As = sc.P, sc.A
        qs = c * D * problem.q
        bs = E * problem.b
        with np.errstate(divide="ignore", invalid="ignore"):
            ls = problem.lower / D
            us = problem.upper / D

        finite = np.isfinite(ls) | np.isfinite(us)
        unbounded = ~finite
        fixed = ls == us

        def rho_vectors(rho):
            rb = np.where(finite, rho, 1e-6)
            rb = np.where(fixed, 1e3 * rho, rb)
            return rb, np.full(m, 1e3 * rho)

        # an adapted penalty from the previous solve on the same matrices is reused
        rho = self._rho if (self._rho is not None and st.adaptive_rho) else st.rho
        rho_box, rho_eq = rho_vectors(rho)
        refactor_start = self.refactorizations

        # iterates in scaled space
        if warm_start is not None:
            x = np.asarray(warm_start.z, dtype=float) / D
            y_e = np.zeros(m) if warm_start.y_eq is None else c * np.asarray(warm_start.y_eq, dtype=float) / E
            y_b = np.zeros(n) if warm_start.y_box is None else c * D * np.asarray(warm_start.y_box, dtype=float)
            if x.shape != (n,) or y_e.shape != (m,) or y_b.shape != (n,):
                raise ValueError("warm start dimensions do not match the problem")
        else:
            x = np.zeros(n)
            y_e = np.zeros(m)
            y_b = np.zeros(n)
        y_b[unbounded] = 0.0
        zb = np.clip(x, ls, us)

        def unscaled(x, y_e, y_b):
            z = D * x
            ye = E * y_e / c
            yb = y_b / (c * D)
            return z, ye, yb

        def residuals(z, ye, yb):
            rep = validate_solution(problem, z, y_eq=ye, y_box=yb)
            return rep.primal, rep.stationarity, rep.complementarity, rep.objective

        best = None
        best_score = np.inf
        stall_ref = np.inf
        stall_count = 0
        polish_gate = np.inf
        a = st.relax
        it = 0
        status = Status.MAX_ITERATIONS
        result = None

        while it < st.max_iter:
            it += 1
            lu = self._kkt_factor(rho_box, rho_eq)
            rhs = np.concatenate([st.sigma * x - qs + rho_box * zb - y_b, bs - y_e / rho_eq])
            sol = lu.solve(rhs)
            xt = sol[:n]
            nu = sol[n:]
            zt_e = bs + (nu - y_e) / rho_eq
            x_new = a * xt + (1 - a) * x
            w_e = a * zt_e + (1 - a) * bs
            dy_e = rho_eq * (w_e - bs)
            y_e = y_e + dy_e
            w_b = a * xt + (1 - a) * zb
            zb_new = np.clip(w_b + y_b / rho_box, ls, us)
            dy_b = rho_box * (w_b - zb_new)
            dy_b[unbounded] = 0.0
            y_b = y_b + dy_b
            x, zb = x_new, zb_new

            if it % st.check_every and it != st.max_iter:
                continue

            z, ye, yb = unscaled(x, y_e, y_b)
            prim, dual, comp, obj = residuals(z, ye, yb)
            score = max(prim / st.eps_primal, max(dual, comp) / st.eps_dual)
            if best is None or score < best_score:
                best_score = score
                best = (z, ye, yb, prim, dual, comp, obj)
            if st.polish and (score <= 1.0 or score <= min(st.polish_trigger, polish_gate)):
                polished = self._polish(problem, x, zb, y_b, ls, us, qs, bs, D, E, c)
                if polished is not None:
                    pz, pye, pyb = polished
                    pprim, pdual, pcomp, pobj = residuals(pz, pye, pyb)
                    if pprim <= st.eps_primal and pdual <= st.eps_dual and pcomp <= st.eps_dual:
                        status = Status.OPTIMAL
                        result = (pz, pye, pyb, pprim, pdual, pcomp, pobj, True)
                        break
                polish_gate = score / 10.0
            if score <= 1.0:
                status = Status.OPTIMAL
                result = (z, ye, yb, prim, dual, comp, obj, False)
                break

            # stall-based infeasibility detection
            if prim <= 0.9 * stall_ref or prim <= st.stall_factor * st.eps_primal:
                stall_ref = prim
                stall_count = 0
            else:
                stall_count += st.check_every
                # a stall alone also happens on slow feasible solves; demand a certificate too
                if stall_count >= st.stall_iters and _infeasibility_certificate(
                    problem, E * dy_e / c, dy_b / (c * D), st.eps_infeasible
                ):
                    status = Status.INFEASIBLE
                    break

            if st.adaptive_rho and it % st.adaptive_rho_every == 0:
                new_rho = self._rho_estimate(rho, x, zb, y_e, y_b, Ps, As, qs, bs)
                if new_rho > 5 * rho or new_rho < 0.2 * rho:
                    rho = new_rho
                    rho_box, rho_eq = rho_vectors(rho)
                    # the previous multipliers stay valid; only the penalty changes

        self._rho = rho
        if result is None:
            z, ye, yb, prim, dual, comp, obj = best
            result = (z, ye, yb, prim, dual, comp, obj, False)
        z, ye, yb, prim, dual, comp, obj, polished = result
        return QpSolution(
            z=z, objective=obj, primal_residual=prim, dual_residual=dual, complementarity=comp,
            iterations=it, status=status, y_eq=ye, y_box=yb, polished=polished,
            refactorizations=self.refactorizations - refactor_start,
        )

    @staticmethod
    def _rho_estimate(rho, x, zb, y_e, y_b, Ps, As, qs, bs):
        Ax = As @ x if As.shape[0] else np.zeros(0)
        prim = max(_inf(Ax - bs), _inf(x - zb))
        prim_norm = max(_inf(Ax), _inf(x), _inf(zb), _inf(bs), 1e-10)
        Px = Ps @ x
        Aty = As.T @ y_e if As.shape[0] else np.zeros_like(x)
        dual = _inf(Px + qs + Aty + y_b)
        dual_norm = max(_inf(Px), _inf(Aty), _inf(y_b), _inf(qs), 1e-10)
        ratio = (prim / prim_norm) / max(dual / dual_norm, 1e-30)
        return float(np.clip(rho * np.sqrt(ratio), 1e-6, 1e6))

    def _polish(self, problem, x, zb, y_b, ls, us, qs, bs, D, E, c):
        """Guess the active bounds from the ADMM iterate and solve the reduced KKT system.

        A few primal-dual active-set corrections follow: bounds whose
        multiplier has the wrong sign are released and violated bounds are
        added, until the guess is self-consistent.
        """
        st = self.settings
        n = problem.num_vars
        fixed = ls == us
        with np.errstate(invalid="ignore"):
            at_lower = (zb - ls < -y_b) | (fixed & (y_b <= 0))
            at_upper = ((us - zb < y_b) | fixed) & ~at_lower
        tol = 1e-9
        seen = set()
        for _ in range(st.polish_rounds):
            key = (at_lower.tobytes(), at_upper.tobytes())
            if key in seen:
                return None
            seen.add(key)
            out = self._solve_reduced(n, at_lower, at_upper, ls, us, qs, bs)
            if out is None:
                return None
            xs, ye_s, yb_s = out
            scale = 1.0 + np.abs(xs).max()
            wrong = ~fixed & ((at_lower & (yb_s > tol)) | (at_upper & (yb_s < -tol)))
            free = ~(at_lower | at_upper)
            below = free & (xs < ls - tol * scale)
            above = free & (xs > us + tol * scale)
            if not (wrong.any() or below.any() or above.any()):
                return D * xs, E * ye_s / c, yb_s / (c * D)
            at_lower = (at_lower & ~wrong) | below
            at_upper = (at_upper & ~wrong) | above
        return None

    def _solve_reduced(self, n, at_lower, at_upper, ls, us, qs, bs):
        st = self.settings
        sc = self._scaling
        m = sc.A.shape[0]
        active = np.flatnonzero(at_lower | at_upper)
        k = active.size
        target = np.where(at_lower[active], ls[active], us[active])
        if not np.all(np.isfinite(target)):
            return None
        Eact = sp.csc_matrix((np.ones(k), (np.arange(k), active)), shape=(k, n))
        Ared = sp.vstack([sc.A, Eact], format="csc")
        mr = m + k
        K = sp.bmat([[sc.P, Ared.T], [Ared, sp.csc_matrix((mr, mr))]], format="csc")
        delta = st.polish_delta
        reg = sp.diags(np.concatenate([np.full(n, delta), np.full(mr, -delta)]))
        rhs = np.concatenate([-qs, bs, target])
        try:
            lu = spla.splu(sp.csc_matrix(K + reg), permc_spec="COLAMD")
        except RuntimeError:
            return None
        sol = lu.solve(rhs)
        for _ in range(st.polish_refine):
            sol = sol + lu.solve(rhs - K @ sol)
        if not np.all(np.isfinite(sol)):
            return None
        yb = np.zeros(n)
        yb[active] = sol[n + m:]
        return sol[:n], sol[n:n + m], yb


def _infeasibility_certificate(problem: QpProblem, dy_eq, dy_box, eps: float) -> bool:
    """Farkas-type test on the latest multiplier increment.

    The increment proves the constraints empty when A'dy_eq + dy_box vanishes
    while the support function b'dy_eq + u'max(dy_box, 0) + l'min(dy_box, 0)
    is strictly negative.
    """
    norm = max(_inf(dy_eq), _inf(dy_box))
    if norm <= 1e-12:
        return False
    dy_eq = dy_eq / norm
    dy_box = dy_box / norm
    if _inf(problem.A.T @ dy_eq + dy_box) > eps:
        return False
    pos, neg = dy_box > eps, dy_box < -eps
    if not (np.all(np.isfinite(problem.upper[pos])) and np.all(np.isfinite(problem.lower[neg]))):
        return False
    support = problem.b @ dy_eq + problem.upper[pos] @ dy_box[pos] + problem.lower[neg] @ dy_box[neg]
    return bool(support < -eps)


def _inf(v) -> float:
    return float(np.abs(v).max()) if len(v) else 0.0


def solve(problem: QpProblem, settings: SolverSettings | None = None,
          warm_start: WarmStart | None = None) -> QpSolution:
    """One-shot convenience wrapper around :class:`QpSolver`."""
    return QpSolver(settings).solve(problem, warm_start)


# -- triplet dump ------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def dump_problem(problem: QpProblem, path) -> None:
    """Write a problem as plain-text sparse triplets.

    Layout: a header line ``qp-triplet 1``, then ``n <n>`` and ``m <m>``,
    then sections ``P <nnz>`` / ``A <nnz>`` holding ``row col value`` lines
    and ``q``/``b``/``lower``/``upper`` sections holding one value per line
    (``inf``/``-inf`` for open bounds).
    """
    P = sp.coo_matrix(problem.P)
    A = sp.coo_matrix(problem.A)
    out = ["qp-triplet 1", f"n {problem.num_vars}", f"m {problem.num_eq}"]
    for name, mat in (("P", P), ("A", A)):
        out.append(f"{name} {mat.nnz}")
        out.extend(f"{i} {j} {_fmt(v)}" for i, j, v in zip(mat.row, mat.col, mat.data))
    for name, vec in (("q", problem.q), ("b", problem.b), ("lower", problem.lower), ("upper", problem.upper)):
        out.append(f"{name} {len(vec)}")
        out.extend(_fmt(v) for v in vec)
    Path(path).write_text("\n".join(out) + "\n")


def load_problem(path) -> QpProblem:
    lines = iter(Path(path).read_text().splitlines())
    if next(lines).strip() != "qp-triplet 1":
        raise ValueError(f"{path}: not a qp-triplet file")
    n = int(next(lines).split()[1])
    m = int(next(lines).split()[1])
    mats = {}
    for name, shape in (("P", (n, n)), ("A", (m, n))):
        tag, count = next(lines).split()
        if tag != name:
            raise ValueError(f"{path}: expected section {name}, found {tag}")
        rows = [next(lines).split() for _ in range(int(count))]
        i = [int(r[0]) for r in rows]
        j = [int(r[1]) for r in rows]
        v = [float(r[2]) for r in rows]
        mats[name] = sp.csc_matrix((v, (i, j)), shape=shape)
    vecs = {}
    for name in ("q", "b", "lower", "upper"):
        tag, count = next(lines).split()
        if tag != name:
            raise ValueError(f"{path}: expected section {name}, found {tag}")
        vecs[name] = np.array([float(next(lines)) for _ in range(int(count))])
    return QpProblem(mats["P"], vecs["q"], mats["A"], vecs["b"], vecs["lower"], vecs["upper"])
