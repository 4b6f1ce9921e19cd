"""Phase optimization for the outer problem

    max_theta  theta^T Upsilon theta^*
    s.t.       theta^T Gamma theta^* >= eps^2,
               |theta_i| = beta,  arg(theta_i) in S.

Two solvers are provided.  ``sdr_phase_solve`` lifts ``C = theta^* theta^T``,
drops the rank constraint and recovers ``theta`` from the principal
eigenvector (or by Gaussian randomization).  ``bnb_phase_solve`` runs a
best-first branch-and-bound over per-element argument arcs, bounding each
node with an SDP that adds the convex hull of every arc.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from ._validation import check_hermitian
from .robust import TWO_PI, PhaseSet, PhaseVector, quad_form

logger = logging.getLogger(__name__)

RANK_ONE_RATIO = 1e-6
FEAS_SLACK = 1e-9


class RelaxationInfeasible(ValueError):
    pass


class ExtractionError(ValueError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass
class PhaseSolveResult:
    theta: PhaseVector
    objective: float
    relaxation_objective: float
    rank_one_certified: bool = False
    gap: float = 0.0
    node_count: int = 0
    status: str = "optimal"
    C_bar: np.ndarray | None = None
    events: list = field(default_factory=list)
    bound_trace: list = field(default_factory=list)
    incumbent_trace: list = field(default_factory=list)


# --------------------------------------------------------------------------
# helpers


def _scale_of(A):
    s = float(np.abs(np.linalg.eigvalsh(A)).max(initial=0.0)) if A.size else 0.0
    return s if s > 0 else 1.0


def _gamma_ok(Gamma, theta, eps):
    return quad_form(Gamma, theta) >= eps**2 * (1.0 - FEAS_SLACK)


def _solve_hermitian_sdp(obj, constraints, n, tol=1e-8, max_iters=200):
    """Solve ``max tr(obj C)`` over complex Hermitian PSD ``C`` of size ``n``.

    ``constraints`` is a list of ``(A, sense, rhs)`` with Hermitian ``A``.
    """
    prob = sdp.SDPProblem([2 * n], objective={0: sdp.hermitian_coeff(obj)})
    for A, sense, rhs in constraints:
        prob.add_constraint({0: sdp.hermitian_coeff(A)}, sense, rhs)
    sol = sdp.solve_sdp(prob, tol=tol, max_iters=max_iters, validate=False)
    return sol, sdp.extract_hermitian(sol.blocks[0])


def _project(z, beta):
    """Unit-modulus projection; zero entries map to angle 0."""
    ang = np.angle(z)
    return beta * np.exp(1j * ang)


# --------------------------------------------------------------------------
# rounding


def _clamp_to_arc(angles, lo, width):
    """Map angles onto the arc ``[lo, lo + width]`` by nearest endpoint."""
    rel = np.mod(np.asarray(angles, dtype=float) - lo, TWO_PI)
    inside = rel <= width
    # outside: compare circular distance to each endpoint, ties go to lo
    d_hi = rel - width
    d_lo = TWO_PI - rel
    out = np.where(inside, rel, np.where(d_hi < d_lo, width, 0.0))
    return lo + out


def _nearest_level(angles, step, a, b):
    """Nearest allowed level index within the contiguous range ``a..b``."""
    angles = np.mod(np.asarray(angles, dtype=float), TWO_PI)
    idx = np.arange(a, b + 1)
    lv = idx * step
    diff = np.abs(np.mod(angles[:, None] - lv[None, :] + np.pi, TWO_PI) - np.pi)
    return idx[np.argmin(diff, axis=1)]


def argument_rounding(theta_relaxed, phase_set: PhaseSet, beta=1.0) -> PhaseVector:
    """Project every element to modulus ``beta`` and the nearest allowed argument.

    For an interval set an outside argument goes to the closer endpoint on
    the circle, ties to the lower endpoint.  For ``[0, pi]`` this sends
    ``(pi, 3pi/2)`` to ``pi`` and ``[3pi/2, 2pi]`` to ``0``; for
    ``[0, pi/2]`` it sends ``(pi/2, 5pi/4)`` to ``pi/2`` and
    ``[5pi/4, 2pi]`` to ``0``.  Discrete sets use the nearest level.
    """
    z = np.asarray(theta_relaxed, dtype=complex)
    ang = np.mod(np.angle(z), TWO_PI)
    if phase_set.kind == "interval":
        ang = _clamp_to_arc(ang, phase_set.lo, phase_set.hi - phase_set.lo)
    elif phase_set.kind == "discrete":
        ang = _nearest_level(ang, phase_set.step, 0, phase_set.levels - 1) * phase_set.step
    return PhaseVector(beta * np.exp(1j * ang), beta, phase_set)


# --------------------------------------------------------------------------
# SDR


def extract_rank_one(C_bar, Upsilon, Gamma, eps, beta, trials=200, seed=0, candidates=(), phase_set=None):
    """Recover ``theta`` from a relaxed ``C``.

    A numerically rank-one ``C`` gives ``theta`` directly (``C = theta^* theta^T``
    so the principal eigenvector is proportional to ``theta^*``).  Otherwise
    Gaussian draws with covariance ``C`` are projected to modulus ``beta``
    and the best one meeting the ``Gamma`` constraint wins.  ``candidates``
    are extra feasible guesses to compare against.

    Returns ``(PhaseVector, rank_one)``.
    """
    phase_set = phase_set or PhaseSet.full()
    C = check_hermitian(C_bar, "C_bar", tol=1e-6)
    w, V = np.linalg.eigh(C)
    w = np.clip(w, 0.0, None)
    rank_one = w[-1] > 0 and w[-2] <= RANK_ONE_RATIO * w[-1] if len(w) > 1 else True
    principal = _project(V[:, -1].conj(), beta)
    if rank_one and _gamma_ok(Gamma, principal, eps):
        return PhaseVector(principal, beta, phase_set), True

    rng = np.random.default_rng(seed)
    root = V * np.sqrt(w)
    n = C.shape[0]
    draws = rng.standard_normal((trials, n)) + 1j * rng.standard_normal((trials, n))
    cands = [principal] + [_project((root @ r).conj(), beta) for r in draws]
    cands += [np.asarray(c, dtype=complex) for c in candidates]
    best, best_val = None, -np.inf
    fallback, fb_val = None, -np.inf
    for th in cands:
        val = quad_form(Upsilon, th)
        if _gamma_ok(Gamma, th, eps):
            if val > best_val:
                best, best_val = th, val
        elif val > fb_val:
            fallback, fb_val = th, val
    if best is None:
        raise ExtractionError("no randomized candidate satisfies the Gamma constraint", fallback)
    return PhaseVector(best, beta, phase_set), False


def _hermitian_basis(r):
    basis = []
    for k in range(r):
        E = np.zeros((r, r), dtype=complex)
        E[k, k] = 1.0
        basis.append(E)
    for k in range(r):
        for m in range(k + 1, r):
            E = np.zeros((r, r), dtype=complex)
            E[k, m] = E[m, k] = 1.0
            basis.append(E)
            F = np.zeros((r, r), dtype=complex)
            F[k, m], F[m, k] = 1j, -1j
            basis.append(F)
    return basis


def purify_rank(C, constraint_mats, rel_tol=1e-9, max_rounds=None):
    """Lower the rank of a PSD ``C`` without changing ``tr(A_i C)``.

    With ``C = V V^H`` of rank ``r`` and ``r^2`` larger than the number of
    constraints there is a Hermitian ``D`` with ``tr(V^H A_i V D) = 0`` for
    every ``i``; stepping to ``V (I - D / lam_max(D)) V^H`` keeps every
    constraint value and drops the rank by at least one.  At an optimum the
    objective value is kept as well (complementary slackness).
    """
    C = 0.5 * (C + C.conj().T)
    rounds = max_rounds if max_rounds is not None else C.shape[0]
    for _ in range(rounds):
        w, U = np.linalg.eigh(C)
        keep = w > rel_tol * max(w[-1], 0.0)
        r = int(keep.sum())
        if r <= 1 or r * r <= len(constraint_mats):
            break
        V = U[:, keep] * np.sqrt(w[keep])
        basis = _hermitian_basis(r)
        Bs = [V.conj().T @ A @ V for A in constraint_mats]
        rows = np.array([[np.real(np.sum(B.T * E)) for E in basis] for B in Bs])
        _, _sv, Wt = np.linalg.svd(rows)
        coef = Wt[-1]
        D = sum(c * E for c, E in zip(coef, basis))
        lam = np.linalg.eigvalsh(D)
        if abs(lam[0]) > abs(lam[-1]):
            D, lam = -D, -lam[::-1]
        if lam[-1] <= 0:
            break
        C = V @ (np.eye(r) - D / lam[-1]) @ V.conj().T
        C = 0.5 * (C + C.conj().T)
    return C


def sdr_phase_solve(Upsilon, Gamma, eps, beta=1.0, trials=200, seed=0, candidates=(), tol=1e-8) -> PhaseSolveResult:
    """Semidefinite relaxation over the full argument circle."""
    Ups = check_hermitian(Upsilon, "Upsilon")
    Gam = check_hermitian(Gamma, "Gamma")
    N = Ups.shape[0]
    su = _scale_of(Ups)
    cons = [(_unit(N, i), sdp.EQ, 1.0) for i in range(N)]
    if eps > 0:
        cons.append((beta**2 * Gam / eps**2, sdp.GE, 1.0))
    sol, Cn = _solve_hermitian_sdp(Ups / su, cons, N, tol=tol)
    if sol.status == sdp.INFEASIBLE:
        raise RelaxationInfeasible("relaxed constraint infeasible: eps^2 exceeds the attainable Gamma form")
    C_bar = beta**2 * Cn
    value = sol.primal_objective if sol.status == sdp.OPTIMAL else max(sol.primal_objective, sol.dual_objective)
    relax = su * beta**2 * value
    w = np.linalg.eigvalsh(C_bar)
    certified = bool(w[-1] > 0 and (N == 1 or w[-2] <= RANK_ONE_RATIO * w[-1]))
    C_use = C_bar
    if not certified:
        mats = [_unit(N, i) for i in range(N)] + ([Gam] if eps > 0 else [])
        C_use = purify_rank(C_bar, mats)
    theta, _ = extract_rank_one(C_use, Ups, Gam, eps, beta, trials, seed, candidates)
    obj = quad_form(Ups, theta.theta)
    return PhaseSolveResult(
        theta=theta,
        objective=obj,
        relaxation_objective=relax,
        rank_one_certified=certified,
        gap=relax - obj,
        status=sol.status,
        C_bar=C_bar,
    )


def _unit(n, i):
    E = np.zeros((n, n), dtype=complex)
    E[i, i] = 1.0
    return E


# --------------------------------------------------------------------------
# branch and bound


@dataclass
class BnBNode:
    """Argument box of a node.

    Continuous sets store per-element arcs ``(lo, width)``; discrete sets
    store level-index ranges ``(a, b)``.  ``upper`` is the node bound.
    """

    lo: np.ndarray
    hi: np.ndarray
    upper: float = np.inf
    depth: int = 0

    def widths(self, step):
        if step is None:
            return self.hi - self.lo
        return (self.hi - self.lo) * step


class _Reduced:
    """Quadratic forms restricted to the free elements of a node.

    With ``x = theta_free^*`` and lifted ``Ch = [x; 1][x; 1]^H``,
    ``theta^T A theta^* = tr(Ah Ch)`` where
    ``Ah = [[A_ff, A_fF theta_F^*], [., theta_F^T A_FF theta_F^*]]``.
    """

    @staticmethod
    def lift(A, free, fixed, theta_fixed):
        b = A[np.ix_(free, fixed)] @ theta_fixed.conj()
        c = float(np.real(theta_fixed @ A[np.ix_(fixed, fixed)] @ theta_fixed.conj()))
        n = len(free)
        Ah = np.zeros((n + 1, n + 1), dtype=complex)
        Ah[:n, :n] = A[np.ix_(free, free)]
        Ah[:n, n] = b
        Ah[n, :n] = b.conj()
        Ah[n, n] = c
        return Ah


class _BnB:
    def __init__(self, Ups, Gam, eps, beta, phase_set, tol, max_nodes, sdp_tol):
        self.Ups, self.Gam = Ups, Gam
        self.eps, self.beta = eps, beta
        self.ps = phase_set
        self.tol, self.max_nodes = tol, max_nodes
        self.sdp_tol = sdp_tol
        self.N = Ups.shape[0]
        self.step = phase_set.step if phase_set.kind == "discrete" else None
        self.su = _scale_of(Ups)
        self.events = []
        self.best = None
        self.best_val = -np.inf
        self.nodes = 0

    # -- boxes -----------------------------------------------------------
    def root(self):
        N = self.N
        if self.ps.kind == "discrete":
            lo = np.zeros(N, dtype=int)
            hi = np.full(N, self.ps.levels - 1, dtype=int)
            # a uniform level set is invariant under rotation by one step
            hi[0] = 0
        elif self.ps.kind == "full":
            lo = np.zeros(N)
            hi = np.full(N, TWO_PI)
            # the objective and constraint only see relative phases
            hi[0] = 0.0
        else:
            lo = np.full(N, self.ps.lo)
            hi = np.full(N, self.ps.hi)
        return BnBNode(lo, hi)

    def fixed_mask(self, node):
        return node.hi == node.lo

    def fixed_angles(self, node, idx):
        if self.step is None:
            return node.lo[idx]
        return node.lo[idx] * self.step

    def arcs(self, node, idx):
        """``(start, width)`` of the arc of each element in ``idx``."""
        if self.step is None:
            return node.lo[idx], node.hi[idx] - node.lo[idx]
        return node.lo[idx] * self.step, (node.hi[idx] - node.lo[idx]) * self.step

    def round_into(self, node, angles):
        ang = np.asarray(angles, dtype=float).copy()
        if self.step is None:
            start, width = node.lo, node.hi - node.lo
            full = width >= TWO_PI
            ang = np.where(full, ang, _clamp_to_arc(ang, start, np.minimum(width, TWO_PI)))
            return ang
        out = np.empty(self.N)
        for i in range(self.N):
            out[i] = _nearest_level(ang[i : i + 1], self.step, node.lo[i], node.hi[i])[0] * self.step
        return out

    # -- evaluation --------------------------------------------------------
    def consider(self, theta):
        if not _gamma_ok(self.Gam, theta, self.eps):
            return False
        val = quad_form(self.Ups, theta)
        if val > self.best_val:
            self.best, self.best_val = theta, val
            return True
        return False

    def bound(self, node):
        """Solve the node relaxation.

        Returns ``(upper, candidate_angles)``, or ``(None, None)`` when the
        node is infeasible.
        """
        fixed = np.flatnonzero(self.fixed_mask(node))
        free = np.flatnonzero(~self.fixed_mask(node))
        beta = self.beta
        th_fixed = beta * np.exp(1j * self.fixed_angles(node, fixed))
        if free.size == 0:
            if not _gamma_ok(self.Gam, th_fixed, self.eps):
                return None, None
            return quad_form(self.Ups, th_fixed), [np.mod(np.angle(th_fixed), TWO_PI)]
        n = free.size
        D = np.full(n + 1, beta, dtype=float)
        D[n] = 1.0
        Uh = _Reduced.lift(self.Ups, free, fixed, th_fixed) * np.outer(D, D)
        cons = []
        for k in range(n + 1):
            cons.append((_unit(n + 1, k), sdp.EQ, 1.0))
        if self.eps > 0:
            Gh = _Reduced.lift(self.Gam, free, fixed, th_fixed) * np.outer(D, D)
            cons.append((Gh / self.eps**2, sdp.GE, 1.0))
        start, width = self.arcs(node, free)
        for k in range(n):
            if width[k] >= TWO_PI:
                continue
            mid = start[k] + 0.5 * width[k]
            a = np.exp(1j * mid)
            E = np.zeros((n + 1, n + 1), dtype=complex)
            # Re{a^* theta_k} with theta_k = Ch[n, k]
            E[k, n] = np.conj(a) / 2
            E[n, k] = a / 2
            cons.append((E, sdp.GE, float(np.cos(0.5 * width[k]))))
        self.nodes += 1
        sol, Ch = _solve_hermitian_sdp(Uh / self.su, cons, n + 1, tol=self.sdp_tol)
        if sol.status == sdp.INFEASIBLE:
            self.events.append(("infeasible_node", node.depth))
            return None, None
        if sol.status != sdp.OPTIMAL:
            self.events.append(("inexact_node", sol.status, sol.residuals.max()))
            if sol.residuals.primal > 1e-4:
                # numerically unresolved node: keep it conservative rather than prune
                upper = node.upper if np.isfinite(node.upper) else np.inf
                return upper, []
            upper = self.su * max(sol.primal_objective, sol.dual_objective)
        else:
            upper = self.su * sol.primal_objective
        cands = []
        full = np.zeros(self.N)
        full[fixed] = self.fixed_angles(node, fixed)
        # column of the lifted matrix estimates theta_free^* / beta
        col = Ch[:n, n]
        ang = full.copy()
        ang[free] = np.angle(col.conj())
        cands.append(ang)
        _w, V = np.linalg.eigh(Ch)
        v = V[:, -1]
        if abs(v[n]) > 1e-12:
            v = v / v[n]
            ang = full.copy()
            ang[free] = np.angle(v[:n].conj())
            cands.append(ang)
        return upper, cands

    def branch(self, node):
        widths = node.widths(self.step)
        i = int(np.argmax(widths))
        if self.step is None:
            mid = 0.5 * (node.lo[i] + node.hi[i])
            a_hi, b_lo = mid, mid
        else:
            mid = (node.lo[i] + node.hi[i]) // 2
            a_hi, b_lo = mid, mid + 1
        left = BnBNode(node.lo.copy(), node.hi.copy(), node.upper, node.depth + 1)
        right = BnBNode(node.lo.copy(), node.hi.copy(), node.upper, node.depth + 1)
        left.hi[i] = a_hi
        right.lo[i] = b_lo
        return left, right

    def gap_closed(self, upper):
        return upper - self.best_val <= self.tol * max(abs(self.best_val), 1e-300)

    def run(self, initial=()):
        for th in initial:
            th = np.asarray(th, dtype=complex)
            rounded = argument_rounding(th, self.ps, self.beta).theta
            self.consider(rounded)
        root = self.root()
        up, cands = self.bound(root)
        if up is None:
            raise RelaxationInfeasible("relaxed constraint infeasible at the root node")
        root.upper = up
        for ang in cands:
            self.consider(self.beta * np.exp(1j * self.round_into(root, ang)))
        heap = [(-root.upper, 0, root)]
        counter = 1
        bound_trace, inc_trace = [], []
        status = "optimal"
        global_upper = root.upper
        while heap:
            global_upper = min(global_upper, -heap[0][0])
            bound_trace.append(global_upper)
            inc_trace.append(self.best_val)
            if self.best is not None and self.gap_closed(global_upper):
                break
            if self.nodes >= self.max_nodes:
                status = "node_budget"
                break
            _, _, node = heapq.heappop(heap)
            if self.best is not None and self.gap_closed(node.upper):
                continue
            if np.all(self.fixed_mask(node)):
                continue
            for child in self.branch(node):
                up, cands = self.bound(child)
                if up is None:
                    continue
                child.upper = min(up, node.upper)
                for ang in cands:
                    self.consider(self.beta * np.exp(1j * self.round_into(child, ang)))
                if np.all(self.fixed_mask(child)):
                    continue
                if self.best is None or not self.gap_closed(child.upper):
                    heapq.heappush(heap, (-child.upper, counter, child))
                    counter += 1
        if not heap:
            global_upper = self.best_val if self.best is not None else global_upper
        return status, global_upper, bound_trace, inc_trace


def bnb_phase_solve(Upsilon, Gamma, eps, beta=1.0, phase_set=None, tol_bnb=2e-4, max_nodes=1000, initial=(), sdp_tol=1e-8) -> PhaseSolveResult:
    """Branch-and-bound over argument boxes.

    ``tol_bnb`` is a relative gap: the search stops once
    ``upper - incumbent <= tol_bnb * |incumbent|``.  ``max_nodes`` caps the
    number of node relaxations; hitting it returns the incumbent with
    status ``"node_budget"``.
    """
    Ups = check_hermitian(Upsilon, "Upsilon")
    Gam = check_hermitian(Gamma, "Gamma")
    phase_set = phase_set or PhaseSet.full()
    solver = _BnB(Ups, Gam, float(eps), float(beta), phase_set, tol_bnb, max_nodes, sdp_tol)
    status, upper, btrace, itrace = solver.run(initial)
    if solver.best is None:
        raise RelaxationInfeasible("no feasible phase vector found within the node budget")
    theta = PhaseVector(solver.best, beta, phase_set)
    return PhaseSolveResult(
        theta=theta,
        objective=solver.best_val,
        relaxation_objective=max(upper, solver.best_val),
        gap=max(upper - solver.best_val, 0.0),
        node_count=solver.nodes,
        status=status,
        events=solver.events,
        bound_trace=btrace,
        incumbent_trace=itrace,
    )
