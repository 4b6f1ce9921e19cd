"""Small dense semidefinite-program solver.

Problems are stated in maximization form over a list of real symmetric
PSD blocks::

    maximize    sum_b <C_b, X_b>
    subject to  sum_b <A_ib, X_b>  (=, >=, <=)  b_i
                X_b >= 0 (PSD)

Inequalities are turned into equalities with nonnegative slack variables
that live in a separate linear cone.  The solver is an infeasible-start
primal-dual path-following method with Nesterov-Todd scaling and a
Mehrotra predictor-corrector step.  Everything is dense; the instances
this package produces have blocks of at most a few hundred rows.

Complex Hermitian programs are handled through :func:`embed_hermitian`.
For Hermitian ``A`` and ``C`` the identity ``tr(A C) = tr(E(A) E(C)) / 2``
holds, where ``E`` is the real embedding, so a complex coefficient ``A``
is passed to the solver as ``hermitian_coeff(A) = E(A) / 2`` and the
complex variable is recovered with :func:`extract_hermitian`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

EQ, GE, LE = "=", ">=", "<="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERS = "max_iters"

# extra interior-point steps taken after the tolerance is first met
POLISH_STEPS = 6


class SDPError(ValueError):
    """Raised for malformed semidefinite programs."""


@dataclass
class Constraint:
    coeffs: dict[int, np.ndarray]
    sense: str
    rhs: float


@dataclass
class SDPProblem:
    """Block-structured SDP in maximization form.

    ``objective`` and every constraint's ``coeffs`` map a block index to a
    symmetric coefficient matrix; blocks that do not appear have a zero
    coefficient.
    """

    block_sizes: list[int]
    objective: dict[int, np.ndarray] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)

    def add_constraint(self, coeffs, sense, rhs):
        self.constraints.append(Constraint(dict(coeffs), sense, float(rhs)))

    def validate(self, sym_tol=1e-10):
        if not self.block_sizes or any(int(n) < 1 for n in self.block_sizes):
            raise SDPError("block sizes must be positive integers")
        if not self.constraints:
            raise SDPError("at least one constraint is required")
        mats = [("objective", self.objective)]
        mats += [(f"constraint {i}", c.coeffs) for i, c in enumerate(self.constraints)]
        for where, coeffs in mats:
            for blk, mat in coeffs.items():
                if not 0 <= blk < len(self.block_sizes):
                    raise SDPError(f"{where}: unknown block {blk}")
                n = self.block_sizes[blk]
                mat = np.asarray(mat)
                if mat.shape != (n, n):
                    raise SDPError(f"{where}: block {blk} has shape {mat.shape}, expected {(n, n)}")
                if np.iscomplexobj(mat):
                    raise SDPError(f"{where}: block {blk} is complex; embed it first")
                scale = 1.0 + np.abs(mat).max()
                if np.abs(mat - mat.T).max() > sym_tol * scale:
                    raise SDPError(f"{where}: block {blk} is not symmetric")
        for i, c in enumerate(self.constraints):
            if c.sense not in (EQ, GE, LE):
                raise SDPError(f"constraint {i}: unknown sense {c.sense!r}")
            if not np.isfinite(c.rhs):
                raise SDPError(f"constraint {i}: non-finite right-hand side")


@dataclass
class KKTReport:
    """Relative optimality residuals, recomputed from problem data."""

    primal: float
    dual: float
    complementarity: float
    gap: float

    def max(self):
        return max(self.primal, self.dual, self.complementarity, self.gap)


@dataclass
class SDPSolution:
    blocks: list[np.ndarray]
    y: np.ndarray
    slacks: np.ndarray
    primal_objective: float
    dual_objective: float
    status: str
    iterations: int
    residuals: KKTReport
    history: list[tuple[float, float, float, float]] = field(default_factory=list)

    @property
    def objective(self):
        return self.primal_objective


# --------------------------------------------------------------------------
# complex embedding


def embed_hermitian(H, tol=1e-10):
    """Return the real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]``."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise SDPError("expected a square matrix")
    if np.abs(H - H.conj().T).max() > tol * (1.0 + np.abs(H).max()):
        raise SDPError("matrix is not Hermitian")
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def hermitian_coeff(A):
    """Coefficient to use in the real program for the complex term ``tr(A C)``."""
    return 0.5 * embed_hermitian(A)


def extract_hermitian(Y):
    """Recover the complex Hermitian matrix from a (near) embedded real one.

    Averages the two copies, which is the projection onto embedded
    matrices and is exact when ``Y`` already has the embedded structure.
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0] // 2
    re = 0.5 * (Y[:n, :n] + Y[n:, n:])
    im = 0.5 * (Y[n:, :n] - Y[:n, n:])
    C = re + 1j * im
    return 0.5 * (C + C.conj().T)


# --------------------------------------------------------------------------
# standard form


class _StandardForm:
    """Problem converted to equality form with a linear slack cone."""

    def __init__(self, problem: SDPProblem):
        self.sizes = [int(n) for n in problem.block_sizes]
        m = len(problem.constraints)
        self.m = m
        self.senses = [c.sense for c in problem.constraints]
        self.slack_rows = [i for i, s in enumerate(self.senses) if s != EQ]
        nl = len(self.slack_rows)
        self.A = [np.zeros((m, n, n)) for n in self.sizes]
        self.Al = np.zeros((m, nl))
        self.b = np.array([c.rhs for c in problem.constraints], dtype=float)
        for i, c in enumerate(problem.constraints):
            for blk, mat in c.coeffs.items():
                mat = np.asarray(mat, dtype=float)
                self.A[blk][i] = 0.5 * (mat + mat.T)
        for k, i in enumerate(self.slack_rows):
            self.Al[i, k] = -1.0 if self.senses[i] == GE else 1.0
        self.C = []
        for blk, n in enumerate(self.sizes):
            mat = problem.objective.get(blk)
            mat = np.zeros((n, n)) if mat is None else np.asarray(mat, dtype=float)
            self.C.append(0.5 * (mat + mat.T))
        self.cl = np.zeros(nl)
        # flattened views for the Schur complement products
        self.Aflat = [a.reshape(m, -1) for a in self.A]
        self.nu = sum(self.sizes) + nl

    def op(self, X, xl):
        out = self.Al @ xl
        for af, x in zip(self.Aflat, X):
            out = out + af @ x.ravel()
        return out

    def adj(self, y):
        blocks = [np.tensordot(y, a, axes=1) for a in self.A]
        return blocks, self.Al.T @ y

    def norm_b(self):
        return float(np.linalg.norm(self.b))

    def norm_c(self):
        return float(np.sqrt(sum(np.sum(c * c) for c in self.C) + self.cl @ self.cl))


def _chol(X):
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(0.5 * (X + X.T))
        w = np.maximum(w, 1e-300 + 1e-14 * max(w.max(), 1e-300))
        # QR of the square-root factor gives a triangular-free but valid factor
        return V * np.sqrt(w)


def _max_step(L, D):
    """Largest alpha with L L^T + alpha D still PSD (inf when unbounded)."""
    Linv_D = linalg.solve_triangular(L, D, lower=True, check_finite=False) if _is_lower(L) else np.linalg.solve(L, D)
    M = Linv_D.T
    M = linalg.solve_triangular(L, M, lower=True, check_finite=False) if _is_lower(L) else np.linalg.solve(L, M)
    lam = np.linalg.eigvalsh(0.5 * (M + M.T)).min()
    return np.inf if lam >= 0 else -1.0 / lam


def _is_lower(L):
    return np.allclose(L, np.tril(L))


def _lin_step(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def kkt_residuals(problem: SDPProblem, solution: SDPSolution) -> KKTReport:
    """Recompute feasibility, complementarity and gap from scratch.

    All quantities are relative: primal by ``1 + ||b||``, dual by
    ``1 + ||C||`` and the last two by ``1 + |pobj| + |dobj|``.
    """
    X = solution.blocks
    y = np.asarray(solution.y, dtype=float)
    nb = 1.0 + float(np.linalg.norm([c.rhs for c in problem.constraints]))
    nc = 1.0 + float(np.sqrt(sum(np.sum(np.asarray(m) ** 2) for m in problem.objective.values())))
    pobj = sum(float(np.sum(np.asarray(problem.objective[k]) * X[k])) for k in problem.objective)
    dobj = float(sum(c.rhs * yi for c, yi in zip(problem.constraints, y)))
    scale = 1.0 + abs(pobj) + abs(dobj)

    prim = 0.0
    for c in problem.constraints:
        lhs = sum(float(np.sum(np.asarray(m) * X[k])) for k, m in c.coeffs.items())
        if c.sense == EQ:
            viol = abs(lhs - c.rhs)
        elif c.sense == GE:
            viol = max(0.0, c.rhs - lhs)
        else:
            viol = max(0.0, lhs - c.rhs)
        prim = max(prim, viol)
    for Xb in X:
        prim = max(prim, max(0.0, -float(np.linalg.eigvalsh(0.5 * (Xb + Xb.T)).min())))

    dual = 0.0
    comp = 0.0
    for k, n in enumerate(problem.block_sizes):
        Zb = -np.asarray(problem.objective.get(k, np.zeros((n, n))), dtype=float)
        for c, yi in zip(problem.constraints, y):
            if k in c.coeffs:
                Zb = Zb + yi * np.asarray(c.coeffs[k])
        Zb = 0.5 * (Zb + Zb.T)
        dual = max(dual, max(0.0, -float(np.linalg.eigvalsh(Zb).min())))
        comp += abs(float(np.sum(Zb * X[k])))
    slack_rows = [i for i, c in enumerate(problem.constraints) if c.sense != EQ]
    for s, i in zip(solution.slacks, slack_rows):
        # a ">=" row multiplier must be <= 0, a "<=" row multiplier >= 0
        zs = -y[i] if problem.constraints[i].sense == GE else y[i]
        dual = max(dual, max(0.0, -zs))
        comp += abs(s * zs)
    return KKTReport(
        primal=prim / nb,
        dual=dual / nc,
        complementarity=comp / scale,
        gap=abs(dobj - pobj) / scale,
    )


def solve_sdp(problem: SDPProblem, tol=1e-8, max_iters=200, validate=True) -> SDPSolution:
    """Solve ``problem`` and return a primal-dual point with its status.

    The status is ``"optimal"`` only when every recomputed KKT residual
    is at most ``tol``.  Infeasibility and unboundedness are reported
    through the status, never raised.
    """
    if validate:
        problem.validate()
    sf = _StandardForm(problem)
    m, sizes = sf.m, sf.sizes
    nl = sf.Al.shape[1]

    # starting point, scaled to the data
    X, Z = [], []
    for A, C, n in zip(sf.A, sf.C, sizes):
        anorm = np.sqrt(np.sum(A * A, axis=(1, 2)))
        xi = max(10.0, np.sqrt(n), n * float(np.max((1 + np.abs(sf.b)) / (1 + anorm))))
        eta = max(10.0, np.sqrt(n), float(anorm.max()), float(np.linalg.norm(C)))
        X.append(xi * np.eye(n))
        Z.append(eta * np.eye(n))
    if nl:
        anorm = np.abs(sf.Al).max(axis=0)
        xl = np.full(nl, max(10.0, float(np.max(1 + np.abs(sf.b)))))
        zl = np.full(nl, max(10.0, float(anorm.max())))
    else:
        xl = np.zeros(0)
        zl = np.zeros(0)
    y = np.zeros(m)

    nb = 1.0 + sf.norm_b()
    nc = 1.0 + sf.norm_c()
    history = []
    it = 0
    stall = 0
    accepted = None
    polish = 0
    target = max(tol * 1e-2, 1e-14)

    for it in range(1, max_iters + 1):
        ATy, ATyl = sf.adj(y)
        rp = sf.b - sf.op(X, xl)
        Rd = [C + Zb - Ay for C, Zb, Ay in zip(sf.C, Z, ATy)]
        rdl = sf.cl + zl - ATyl
        pobj = sum(float(np.sum(C * Xb)) for C, Xb in zip(sf.C, X)) + float(sf.cl @ xl)
        dobj = float(sf.b @ y)
        xz = sum(float(np.sum(Xb * Zb)) for Xb, Zb in zip(X, Z)) + float(xl @ zl)
        mu = xz / sf.nu
        relp = float(np.linalg.norm(rp)) / nb
        reld = float(np.sqrt(sum(np.sum(r * r) for r in Rd) + rdl @ rdl)) / nc
        history.append((pobj, dobj, relp, reld))

        scale = 1.0 + abs(pobj) + abs(dobj)
        worst = max(relp, reld, xz / scale, abs(dobj - pobj) / scale)
        if worst <= tol:
            sol = _pack(problem, sf, X, xl, y, pobj, dobj, OPTIMAL, it, history)
            if sol.residuals.max() <= tol:
                # keep polishing a few steps toward a tighter target; fall back to this point
                accepted = sol
                polish += 1
                if sol.residuals.max() <= target or polish > POLISH_STEPS:
                    return sol
            elif accepted is not None:
                return accepted
        elif accepted is not None:
            return accepted

        if _primal_infeasible(sf, y, Z, zl, nc):
            return _pack(problem, sf, X, xl, y, pobj, dobj, INFEASIBLE, it, history)
        if _dual_infeasible(sf, X, xl, pobj, nb):
            return _pack(problem, sf, X, xl, y, pobj, dobj, UNBOUNDED, it, history)

        # Nesterov-Todd scaling, one factorization per block
        scal = []
        for Xb, Zb in zip(X, Z):
            L = _chol(Xb)
            R = _chol(Zb)
            _U, s, Vt = np.linalg.svd(R.T @ L)
            s = np.maximum(s, 1e-300)
            G = (L @ Vt.T) / np.sqrt(s)
            Ginv = (np.sqrt(s)[:, None] * Vt) @ _inv_factor(L)
            scal.append((L, R, G, Ginv, s, G @ G.T))
        wl = xl / zl if nl else xl

        M = np.zeros((m, m))
        for A, Af, sc in zip(sf.A, sf.Aflat, scal):
            W = sc[5]
            WAW = W @ A @ W
            M += Af @ WAW.reshape(m, -1).T
        if nl:
            M += (sf.Al * wl) @ sf.Al.T
        M = 0.5 * (M + M.T)
        solve_M = _factor(M)

        def direction(Rc, rcl):
            rhs = -rp.copy()
            WRdW = [sc[5] @ r @ sc[5] for sc, r in zip(scal, Rd)]
            rhs += sf.op([a + b for a, b in zip(Rc, WRdW)], rcl + wl * rdl)
            dy = solve_M(rhs)
            ATdy, ATdyl = sf.adj(dy)
            dZ = [Ad - r for Ad, r in zip(ATdy, Rd)]
            dZ = [0.5 * (d + d.T) for d in dZ]
            dX = [a - sc[5] @ d @ sc[5] for a, sc, d in zip(Rc, scal, dZ)]
            dX = [0.5 * (d + d.T) for d in dX]
            dzl = ATdyl - rdl
            dxl = rcl - wl * dzl
            return dX, dy, dZ, dxl, dzl

        def steps(dX, dZ, dxl, dzl):
            ap = min([_max_step(sc[0], d) for sc, d in zip(scal, dX)] + [_lin_step(xl, dxl)])
            ad = min([_max_step(sc[1], d) for sc, d in zip(scal, dZ)] + [_lin_step(zl, dzl)])
            return ap, ad

        # predictor
        dXa, _dya, dZa, dxla, dzla = direction([-Xb for Xb in X], -xl.copy())
        ap, ad = steps(dXa, dZa, dxla, dzla)
        ap, ad = min(1.0, ap), min(1.0, ad)
        xz_aff = sum(float(np.sum((Xb + ap * dx) * (Zb + ad * dz))) for Xb, Zb, dx, dz in zip(X, Z, dXa, dZa))
        xz_aff += float((xl + ap * dxla) @ (zl + ad * dzla))
        sigma = min(1.0, max(0.0, xz_aff / max(xz, 1e-300))) ** 3

        # corrector, formed in the scaled space where X and Z are diagonal
        Rc = []
        for sc, dx, dz in zip(scal, dXa, dZa):
            G, Ginv, s = sc[2], sc[3], sc[4]
            dxs = Ginv @ dx @ Ginv.T
            dzs = G.T @ dz @ G
            K = -0.5 * (dxs @ dzs + dzs @ dxs)
            K[np.diag_indices_from(K)] += sigma * mu - s * s
            Lk = 2.0 * K / (s[:, None] + s[None, :])
            Rc.append(G @ Lk @ G.T)
        rcl = (sigma * mu - xl * zl - dxla * dzla) / zl if nl else xl
        dX, dy, dZ, dxl, dzl = direction(Rc, rcl)
        ap, ad = steps(dX, dZ, dxl, dzl)
        tau = 0.98 if it > 1 else 0.9
        ap, ad = min(1.0, tau * ap), min(1.0, tau * ad)

        X = [Xb + ap * d for Xb, d in zip(X, dX)]
        X = [0.5 * (Xb + Xb.T) for Xb in X]
        xl = xl + ap * dxl
        y = y + ad * dy
        Z = [Zb + ad * d for Zb, d in zip(Z, dZ)]
        Z = [0.5 * (Zb + Zb.T) for Zb in Z]
        zl = zl + ad * dzl

        stall = stall + 1 if max(ap, ad) < 1e-10 else 0
        if stall >= 5:
            logger.debug("SDP solver stalled at iteration %d", it)
            break

    pobj = sum(float(np.sum(C * Xb)) for C, Xb in zip(sf.C, X)) + float(sf.cl @ xl)
    dobj = float(sf.b @ y)
    sol = _pack(problem, sf, X, xl, y, pobj, dobj, MAX_ITERS, it, history)
    if sol.residuals.max() <= tol:
        sol.status = OPTIMAL
    elif accepted is not None:
        return accepted
    return sol


def _inv_factor(L):
    n = L.shape[0]
    if _is_lower(L):
        return linalg.solve_triangular(L, np.eye(n), lower=True, check_finite=False)
    return np.linalg.inv(L)


def _factor(M):
    try:
        cf = linalg.cho_factor(M, check_finite=False)
        return lambda r: linalg.cho_solve(cf, r, check_finite=False)
    except linalg.LinAlgError:
        reg = M + (1e-14 * max(1.0, np.abs(np.diag(M)).max())) * np.eye(M.shape[0])
        try:
            cf = linalg.cho_factor(reg, check_finite=False)
            return lambda r: linalg.cho_solve(cf, r, check_finite=False)
        except linalg.LinAlgError:
            pinv = np.linalg.pinv(M, hermitian=True)
            return lambda r: pinv @ r


def _primal_infeasible(sf, y, Z, zl, nc):
    by = float(sf.b @ y)
    if by >= 0:
        return False
    yhat = y / -by
    blocks, lin = sf.adj(yhat)
    worst = 0.0
    for B in blocks:
        worst = max(worst, -float(np.linalg.eigvalsh(0.5 * (B + B.T)).min()))
    if lin.size:
        worst = max(worst, -float(lin.min()))
    return -by > 1e8 * nc and worst <= 1e-8 * max(1.0, float(np.linalg.norm(yhat)))


def _dual_infeasible(sf, X, xl, pobj, nb):
    if pobj <= 1e8 * nb:
        return False
    Xh = [Xb / pobj for Xb in X]
    res = float(np.linalg.norm(sf.op(Xh, xl / pobj)))
    return res <= 1e-8


def _pack(problem, sf, X, xl, y, pobj, dobj, status, it, history):
    sol = SDPSolution(
        blocks=[np.array(Xb) for Xb in X],
        y=np.array(y),
        slacks=np.array(xl),
        primal_objective=pobj,
        dual_objective=dobj,
        status=status,
        iterations=it,
        residuals=KKTReport(np.inf, np.inf, np.inf, np.inf),
        history=list(history),
    )
    sol.residuals = kkt_residuals(problem, sol)
    return sol


# --------------------------------------------------------------------------
# debug dump


def dump_problem(problem: SDPProblem, path):
    """Write ``problem`` in a plain-text sparse triplet format.

    Layout::

        # locbeam-sdp v1
        blocks <n_1> <n_2> ...
        constraints <m>
        rhs <i> <sense> <b_i>            (one line per constraint)
        <i> <block> <row> <col> <value>  (upper triangle, i = 0 is the objective,
                                          constraint k is written as i = k + 1)

    Indices are zero-based.  The objective is maximized.
    """
    lines = ["# locbeam-sdp v1", "blocks " + " ".join(str(n) for n in problem.block_sizes)]
    lines.append(f"constraints {len(problem.constraints)}")
    for i, c in enumerate(problem.constraints):
        lines.append(f"rhs {i + 1} {c.sense} {c.rhs:.17g}")
    entries = [(0, problem.objective)] + [(i + 1, c.coeffs) for i, c in enumerate(problem.constraints)]
    for i, coeffs in entries:
        for blk in sorted(coeffs):
            mat = np.asarray(coeffs[blk], dtype=float)
            r, c = np.nonzero(np.triu(mat))
            for a, b in zip(r, c):
                lines.append(f"{i} {blk} {a} {b} {mat[a, b]:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_problem(path) -> SDPProblem:
    """Inverse of :func:`dump_problem`."""
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    sizes = [int(v) for v in rows[0][1:]]
    m = int(rows[1][1])
    senses, rhs = [EQ] * m, [0.0] * m
    k = 2
    while k < len(rows) and rows[k][0] == "rhs":
        idx = int(rows[k][1]) - 1
        senses[idx], rhs[idx] = rows[k][2], float(rows[k][3])
        k += 1
    mats: list[dict[int, np.ndarray]] = [{} for _ in range(m + 1)]
    for row in rows[k:]:
        i, blk, a, b, v = int(row[0]), int(row[1]), int(row[2]), int(row[3]), float(row[4])
        mat = mats[i].setdefault(blk, np.zeros((sizes[blk], sizes[blk])))
        mat[a, b] = v
        mat[b, a] = v
    prob = SDPProblem(sizes, objective=mats[0])
    for i in range(m):
        prob.add_constraint(mats[i + 1], senses[i], rhs[i])
    return prob
