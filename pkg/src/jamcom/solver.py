"""Primal-dual interior-point solver for the per-iteration convex subproblems.

The canonical problem is

    minimize    z' Q0 z + q0' z + c0
    subject to  z' Qi z  <=  ai' z + bi     (convex quadratic vs affine)
                aj' z    >=  lj             (affine lower bounds)
                z[idx]   <=  0              (sign constraints)

with every quadratic PSD.  Problems may declare disjoint variable blocks;
quadratics and constraint supports must then stay inside one block, except
for diagonal quadratics (the total-power budget), which may couple blocks and
are handled by a low-rank Woodbury correction of the blockwise Newton solve.
The iteration schedule is fixed and free of randomness, so identical inputs
produce bitwise-identical results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

__all__ = [
    "AConstraint",
    "Affine",
    "ConvexSubproblem",
    "DiagTerm",
    "Objective",
    "QConstraint",
    "QuadTerm",
    "SolverError",
    "SolverResult",
    "certify",
    "problem_from_json",
    "problem_to_json",
    "solve",
]


class SolverError(RuntimeError):
    pass


def _idx(a) -> np.ndarray:
    return np.asarray(a, dtype=np.int64).reshape(-1)


@dataclass(frozen=True)
class QuadTerm:
    """value(z) = z[cols] @ Q @ z[cols] with Q symmetric PSD."""

    cols: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cols", _idx(self.cols))
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=np.float64))
        if self.Q.shape != (self.cols.size, self.cols.size):
            raise ValueError("Q shape does not match cols")


@dataclass(frozen=True)
class DiagTerm:
    """value(z) = sum(d * z[cols]**2) with d >= 0."""

    cols: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cols", _idx(self.cols))
        object.__setattr__(self, "d", np.asarray(self.d, dtype=np.float64).reshape(-1))
        if self.d.size != self.cols.size:
            raise ValueError("d length does not match cols")


@dataclass(frozen=True)
class Affine:
    """value(z) = coef @ z[cols] + const."""

    cols: np.ndarray
    coef: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cols", _idx(self.cols))
        object.__setattr__(self, "coef", np.asarray(self.coef, dtype=np.float64).reshape(-1))
        if self.coef.size != self.cols.size:
            raise ValueError("coef length does not match cols")

    @staticmethod
    def constant(value: float) -> "Affine":
        return Affine(cols=np.zeros(0, dtype=np.int64), coef=np.zeros(0), const=value)


QuadLike = Union[QuadTerm, DiagTerm]


@dataclass(frozen=True)
class Objective:
    quads: tuple
    affine: Affine

    def __post_init__(self):
        object.__setattr__(self, "quads", tuple(self.quads))


@dataclass(frozen=True)
class QConstraint:
    """quad(z) <= bound(z)."""

    quad: QuadLike
    bound: Affine


@dataclass(frozen=True)
class AConstraint:
    """aff(z) >= lower."""

    aff: Affine
    lower: float


@dataclass
class ConvexSubproblem:
    n_vars: int
    objective: Objective
    q_constraints: List[QConstraint] = field(default_factory=list)
    a_constraints: List[AConstraint] = field(default_factory=list)
    sign_constraints: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    blocks: Optional[List[np.ndarray]] = None
    var_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        self.sign_constraints = _idx(self.sign_constraints)
        if self.blocks is not None:
            self.blocks = [_idx(b) for b in self.blocks]
        if self.var_scale is not None:
            self.var_scale = np.asarray(self.var_scale, dtype=np.float64).reshape(-1)
            if self.var_scale.size != self.n_vars:
                raise ValueError("var_scale length must equal n_vars")
            if np.any(self.var_scale <= 0.0):
                raise ValueError("var_scale entries must be positive")


@dataclass
class SolverResult:
    primal: np.ndarray
    objective_value: float
    status: str                      # optimal | infeasible | max_iter
    kkt_residual: float              # scaled dual-infeasibility at the final iterate
    duality_gap: float               # scaled complementarity gap at the final iterate
    iterations: int = 0
    multipliers: Optional[np.ndarray] = None
    violations: List[tuple] = field(default_factory=list)


# ---------------------------------------------------------------------------
# canonical constraint records


_GLOBAL = -1


class _Record:
    """One canonical constraint c(z) <= 0 (or the objective) in solver form."""

    __slots__ = ("kind", "block", "qpos", "Q", "dpos", "d", "lpos", "lin", "const",
                 "qcols", "dcols", "lcols")

    def __init__(self):
        self.kind = ""
        self.block = _GLOBAL
        self.qpos = None   # positions of quad cols inside the block
        self.Q = None
        self.dpos = None   # per-block positions for a diagonal quad (list per block)
        self.d = None
        self.lpos = None   # positions of linear cols inside the block
        self.lin = None
        self.const = 0.0
        self.qcols = None  # global column indices (for evaluation when global)
        self.dcols = None
        self.lcols = None


def _canonical_constraints(problem: ConvexSubproblem):
    """Flatten q/a/sign constraints into records of c_i(z) <= 0."""
    recs = []
    for i, qc in enumerate(problem.q_constraints):
        r = _Record()
        r.kind = f"q[{i}]"
        if isinstance(qc.quad, QuadTerm):
            r.qcols, r.Q = qc.quad.cols, qc.quad.Q
        else:
            r.dcols, r.d = qc.quad.cols, qc.quad.d
        r.lcols = qc.bound.cols
        r.lin = -qc.bound.coef
        r.const = -qc.bound.const
        recs.append(r)
    for j, ac in enumerate(problem.a_constraints):
        r = _Record()
        r.kind = f"a[{j}]"
        r.lcols = ac.aff.cols
        r.lin = -ac.aff.coef
        r.const = ac.lower - ac.aff.const
        recs.append(r)
    for t, col in enumerate(problem.sign_constraints):
        r = _Record()
        r.kind = f"sign[{t}]"
        r.lcols = np.array([col], dtype=np.int64)
        r.lin = np.array([1.0])
        r.const = 0.0
        recs.append(r)
    return recs


class _Structure:
    """Block decomposition of a problem: per-block column lists and the
    assignment of constraints/objective terms to blocks or to the global
    (diagonal + rank-one) part."""

    def __init__(self, problem: ConvexSubproblem):
        n = problem.n_vars
        if problem.blocks is None:
            self.blocks = [np.arange(n, dtype=np.int64)]
        else:
            self.blocks = problem.blocks
        self.n = n
        owner = np.full(n, -1, dtype=np.int64)
        pos = np.full(n, -1, dtype=np.int64)
        for b, cols in enumerate(self.blocks):
            if np.any(owner[cols] >= 0):
                raise ValueError("blocks must be disjoint")
            owner[cols] = b
            pos[cols] = np.arange(cols.size)
        if np.any(owner < 0):
            raise ValueError("blocks must cover every variable")
        self.owner = owner
        self.pos = pos
        # blocks stacked by width so factorizations and solves can be batched
        by_width: dict = {}
        for b, cols in enumerate(self.blocks):
            by_width.setdefault(cols.size, []).append(b)
        self.groups = [(w, np.array(ids, dtype=np.int64),
                        np.stack([self.blocks[b] for b in ids]))
                       for w, ids in sorted(by_width.items())]
        self.slot_of = np.empty(len(self.blocks), dtype=np.int64)   # (group, row)
        self.group_of = np.empty(len(self.blocks), dtype=np.int64)
        for gi, (_, ids, _) in enumerate(self.groups):
            for row, b in enumerate(ids):
                self.group_of[b] = gi
                self.slot_of[b] = row

    def classify(self, rec: _Record):
        """Assign a record to one block if its support allows, else global."""
        support = []
        for cols in (rec.qcols, rec.dcols, rec.lcols):
            if cols is not None and cols.size:
                support.append(cols)
        if not support:
            rec.block = 0 if len(self.blocks) == 1 else _GLOBAL
            return rec
        allcols = np.concatenate(support)
        owners = np.unique(self.owner[allcols])
        if owners.size == 1:
            rec.block = int(owners[0])
            if rec.qcols is not None:
                rec.qpos = self.pos[rec.qcols]
            if rec.dcols is not None:
                rec.dpos = self.pos[rec.dcols]
            if rec.lcols is not None:
                rec.lpos = self.pos[rec.lcols]
        else:
            if rec.Q is not None:
                raise ValueError("a dense quadratic term may not span multiple blocks")
            rec.block = _GLOBAL
            if rec.dcols is not None:
                # precompute where the diagonal lands inside each block
                rec.dpos = []
                for b, cols in enumerate(self.blocks):
                    sel = self.owner[rec.dcols] == b
                    if np.any(sel):
                        rec.dpos.append((b, self.pos[rec.dcols[sel]], rec.d[sel]))
        return rec


# ---------------------------------------------------------------------------
# evaluation


def _eval_record(rec: _Record, z: np.ndarray) -> float:
    v = rec.const
    if rec.Q is not None:
        zq = z[rec.qcols]
        v += float(zq @ rec.Q @ zq)
    if rec.d is not None:
        zd = z[rec.dcols]
        v += float(rec.d @ (zd * zd))
    if rec.lin is not None and rec.lin.size:
        v += float(rec.lin @ z[rec.lcols])
    return v


def _grad_record_block(rec: _Record, z: np.ndarray, width: int) -> np.ndarray:
    """Gradient of a block-local record, densified on its block."""
    g = np.zeros(width)
    if rec.Q is not None:
        np.add.at(g, rec.qpos, 2.0 * (rec.Q @ z[rec.qcols]))
    if rec.d is not None:
        np.add.at(g, rec.dpos, 2.0 * rec.d * z[rec.dcols])
    if rec.lin is not None and rec.lin.size:
        np.add.at(g, rec.lpos, rec.lin)
    return g


def _grad_record_dense(rec: _Record, z: np.ndarray, n: int) -> np.ndarray:
    g = np.zeros(n)
    if rec.Q is not None:
        np.add.at(g, rec.qcols, 2.0 * (rec.Q @ z[rec.qcols]))
    if rec.d is not None:
        np.add.at(g, rec.dcols, 2.0 * rec.d * z[rec.dcols])
    if rec.lin is not None and rec.lin.size:
        np.add.at(g, rec.lcols, rec.lin)
    return g


def _objective_records(problem: ConvexSubproblem):
    """Objective as (records for quads, dense linear vector, constant)."""
    recs = []
    for t in problem.objective.quads:
        r = _Record()
        r.kind = "obj"
        if isinstance(t, QuadTerm):
            r.qcols, r.Q = t.cols, t.Q
        else:
            r.dcols, r.d = t.cols, t.d
        recs.append(r)
    q0 = np.zeros(problem.n_vars)
    aff = problem.objective.affine
    np.add.at(q0, aff.cols, aff.coef)
    return recs, q0, float(aff.const)


def eval_objective(problem: ConvexSubproblem, z: np.ndarray) -> float:
    recs, q0, c0 = _objective_records(problem)
    return sum(_eval_record(r, z) for r in recs) + float(q0 @ z) + c0


def eval_constraints(problem: ConvexSubproblem, z: np.ndarray) -> np.ndarray:
    """Values of every canonical constraint c_i(z) (feasible means <= 0)."""
    return np.array([_eval_record(r, z) for r in _canonical_constraints(problem)])


# ---------------------------------------------------------------------------
# the interior-point method


_FTB_MIN = 0.99
_REG_BASE = 1e-11


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    mask = dv < 0.0
    if not np.any(mask):
        return 1.0
    return float(min(1.0, np.min(-v[mask] / dv[mask])))


class _BlockKKT:
    """Factorization of blockdiag(M_b) + U U' for one IPM iteration.

    Same-width blocks are stacked and factorized with batched kernels; solves
    use the Woodbury identity for the low-rank coupling plus iterative
    refinement, which recovers the accuracy lost when the complementarity
    scaling becomes extreme near the solution.
    """

    def __init__(self, struct: "_Structure", Ms, U):
        self.struct = struct
        self.Mg = []    # per group: stacked (nb, w, w)
        self.Minv = []
        for w, ids, _cols in struct.groups:
            M = np.stack([Ms[b] for b in ids])
            tr = np.einsum("bii->b", M)
            reg = _REG_BASE * (1.0 + tr / max(1, w))
            eye = np.eye(w)
            for _ in range(4):
                try:
                    L = np.linalg.cholesky(M + reg[:, None, None] * eye)
                    break
                except np.linalg.LinAlgError:
                    reg = reg * 1e3
            else:
                raise SolverError("Newton system could not be factorized")
            Li = np.linalg.inv(L)
            self.Mg.append(M)
            self.Minv.append(np.matmul(Li.swapaxes(-1, -2), Li))
        self.U = U  # (n, G) already scaled by sqrt(weight); may be None
        if U is not None and U.shape[1]:
            W = self._block_solve(U)
            self.cap = np.eye(U.shape[1]) + U.T @ W
            self.W = W
        else:
            self.U = None

    def _block_solve(self, R: np.ndarray) -> np.ndarray:
        out = np.empty_like(R)
        for (w, ids, cols), Minv in zip(self.struct.groups, self.Minv):
            out[cols] = np.matmul(Minv, R[cols])
        return out

    def _apply(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        xc = x.reshape(-1, 1)
        for (w, ids, cols), M in zip(self.struct.groups, self.Mg):
            out[cols.reshape(-1)] = np.matmul(M, xc[cols]).reshape(-1)
        if self.U is not None:
            out += self.U @ (self.U.T @ x)
        return out

    def _solve_once(self, r: np.ndarray) -> np.ndarray:
        y = self._block_solve(r.reshape(-1, 1))[:, 0]
        if self.U is None:
            return y
        corr = np.linalg.solve(self.cap, self.U.T @ y)
        return y - self.W @ corr

    def solve(self, r: np.ndarray) -> np.ndarray:
        x = self._solve_once(r)
        scale = float(np.max(np.abs(r))) + 1e-300
        for _ in range(2):
            resid = r - self._apply(x)
            if float(np.max(np.abs(resid))) <= 1e-13 * scale:
                break
            x = x + self._solve_once(resid)
        return x


def _scale_problem(problem: ConvexSubproblem) -> ConvexSubproblem:
    """Substitute z = S y (S = diag(var_scale)); values of all expressions are
    preserved, only the parametrization changes."""
    s = problem.var_scale

    def sq(t: QuadLike) -> QuadLike:
        if isinstance(t, QuadTerm):
            sc = s[t.cols]
            return QuadTerm(t.cols, t.Q * np.outer(sc, sc))
        return DiagTerm(t.cols, t.d * s[t.cols] ** 2)

    def sa(a: Affine) -> Affine:
        return Affine(a.cols, a.coef * s[a.cols], a.const)

    return ConvexSubproblem(
        n_vars=problem.n_vars,
        objective=Objective(tuple(sq(t) for t in problem.objective.quads),
                            sa(problem.objective.affine)),
        q_constraints=[QConstraint(sq(c.quad), sa(c.bound)) for c in problem.q_constraints],
        a_constraints=[AConstraint(sa(c.aff), c.lower) for c in problem.a_constraints],
        sign_constraints=problem.sign_constraints,
        blocks=problem.blocks,
        var_scale=None,
    )


def solve(problem: ConvexSubproblem, tol: float = 1e-8, max_iter: int = 100) -> SolverResult:
    """Solve the subproblem to the given scaled KKT tolerance.

    The returned kkt_residual and duality_gap are the scaled dual
    infeasibility and complementarity gap at the final iterate; an "optimal"
    status means both, and the scaled constraint violation, are below tol.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    scaled = problem.var_scale is not None
    work = _scale_problem(problem) if scaled else problem

    struct = _Structure(work)
    cons = [struct.classify(r) for r in _canonical_constraints(work)]
    obj_recs, q0, c0 = _objective_records(work)
    obj_recs = [struct.classify(r) for r in obj_recs]
    n, m = work.n_vars, len(cons)
    nblocks = len(struct.blocks)
    widths = [c.size for c in struct.blocks]

    feas_scale = 1.0 + max((abs(r.const) for r in cons), default=0.0)
    z = np.zeros(n)

    def _add_hessian(Ms, rec, weight):
        if rec.block != _GLOBAL:
            if rec.Q is not None:
                Ms[rec.block][np.ix_(rec.qpos, rec.qpos)] += weight * 2.0 * rec.Q
            if rec.d is not None:
                Ms[rec.block][rec.dpos, rec.dpos] += weight * 2.0 * rec.d
        elif rec.dpos is not None:
            for b, p, dv in rec.dpos:
                Ms[b][p, p] += weight * 2.0 * dv

    if m == 0:
        # unconstrained convex QP: one Newton solve
        Ms = [np.zeros((w, w)) for w in widths]
        for r in obj_recs:
            _add_hessian(Ms, r, 1.0)
        kkt = _BlockKKT(struct, Ms, None)
        z = kkt.solve(-q0)
        if scaled:
            z = z * problem.var_scale
        return SolverResult(primal=z, objective_value=eval_objective(problem, z),
                            status="optimal", kkt_residual=0.0, duality_gap=0.0,
                            iterations=1, multipliers=np.zeros(0))

    cvals = np.array([_eval_record(r, z) for r in cons])
    s = np.maximum(1.0, -cvals)
    lam = np.ones(m)

    # objective Hessian contributions are iterate-independent
    Ms_static = [np.zeros((w, w)) for w in widths]
    for r in obj_recs:
        _add_hessian(Ms_static, r, 1.0)

    status = "max_iter"
    it = 0
    kkt_rel = np.inf
    gap_rel = np.inf
    best = None      # (score, z, lam, kkt_rel, gap_rel)
    stalled = 0
    no_progress = 0

    for it in range(1, max_iter + 1):
        # constraint values and gradients at the current iterate
        cvals = np.empty(m)
        grads_local = [None] * m      # block-local dense gradients
        grads_global = [None] * m     # full-length gradients for global records
        for i, r in enumerate(cons):
            cvals[i] = _eval_record(r, z)
            if r.block == _GLOBAL:
                grads_global[i] = _grad_record_dense(r, z, n)
            else:
                grads_local[i] = _grad_record_block(r, z, widths[r.block])

        gradf = q0.copy()
        for r in obj_recs:
            gradf += _grad_record_dense(r, z, n)
        fval = sum(_eval_record(r, z) for r in obj_recs) + float(q0 @ z) + c0

        r_d = gradf.copy()
        for i, r in enumerate(cons):
            if r.block == _GLOBAL:
                r_d += lam[i] * grads_global[i]
            else:
                r_d[struct.blocks[r.block]] += lam[i] * grads_local[i]
        r_p = cvals + s
        mu = float(s @ lam) / m

        pinf = float(np.max(cvals, initial=0.0))
        kkt_rel = float(np.max(np.abs(r_d))) / (1.0 + float(np.max(np.abs(gradf))))
        gap_rel = mu / (1.0 + abs(fval))
        score = max(pinf / feas_scale, kkt_rel, gap_rel)
        if best is None or score < 0.98 * best[0]:
            best = (score, z.copy(), lam.copy(), kkt_rel, gap_rel)
            no_progress = 0
        else:
            no_progress += 1
        # degenerate multipliers can floor the stationarity residual well above
        # the gap/feasibility level; weak duality keeps the certificate sound,
        # so optimality asks a factor-100 looser dual residual
        if (pinf <= tol * feas_scale and kkt_rel <= 100.0 * tol and gap_rel <= tol):
            status = "optimal"
            break
        if stalled >= 2 or (no_progress >= 8 and best[0] <= 1e-4):
            break  # endgame thrash: settle for the best near-optimal iterate

        # Newton matrix: per-block dense parts + global diagonal and rank-one parts
        Ms = [M.copy() for M in Ms_static]
        sinv = 1.0 / np.maximum(s, 1e-30)
        d = np.minimum(lam * sinv, 1e14)

        for i, r in enumerate(cons):
            _add_hessian(Ms, r, lam[i])
            if r.block != _GLOBAL:
                g = grads_local[i]
                Ms[r.block] += d[i] * np.outer(g, g)
        g_idx = [i for i, r in enumerate(cons) if r.block == _GLOBAL]
        U = (np.column_stack([grads_global[i] * np.sqrt(d[i]) for i in g_idx])
             if g_idx else None)

        kkt = _BlockKKT(struct, Ms, U)

        def solve_direction(r_c):
            w = (-r_c + lam * r_p) * sinv
            rhs = -r_d.copy()
            for i, r in enumerate(cons):
                if r.block == _GLOBAL:
                    rhs -= w[i] * grads_global[i]
                else:
                    rhs[struct.blocks[r.block]] -= w[i] * grads_local[i]
            dz = kkt.solve(rhs)
            jdz = np.empty(m)
            for i, r in enumerate(cons):
                if r.block == _GLOBAL:
                    jdz[i] = grads_global[i] @ dz
                else:
                    jdz[i] = grads_local[i] @ dz[struct.blocks[r.block]]
            ds = -r_p - jdz
            dlam = (-r_c - lam * ds) * sinv
            return dz, ds, dlam

        # Mehrotra predictor-corrector
        with np.errstate(over="ignore", invalid="ignore"):
            dz_a, ds_a, dlam_a = solve_direction(s * lam)
            alpha_p = _max_step(s, ds_a)
            alpha_d = _max_step(lam, dlam_a)
            mu_aff = float((s + alpha_p * ds_a) @ (lam + alpha_d * dlam_a)) / m
            sigma = min(0.999, max((mu_aff / mu) ** 3, 1e-10)) if mu > 0 else 0.1

            r_c = s * lam - sigma * mu + ds_a * dlam_a
            dz, ds, dlam = solve_direction(r_c)
        if not (np.all(np.isfinite(dz)) and np.all(np.isfinite(ds))
                and np.all(np.isfinite(dlam))):
            with np.errstate(over="ignore", invalid="ignore"):
                dz, ds, dlam = solve_direction(s * lam - 0.5 * mu)
            if not (np.all(np.isfinite(dz)) and np.all(np.isfinite(ds))
                    and np.all(np.isfinite(dlam))):
                break

        ftb = min(0.9999, max(_FTB_MIN, 1.0 - mu))
        alpha_p = min(1.0, ftb * _max_step(s, ds))
        alpha_d = min(1.0, ftb * _max_step(lam, dlam))
        if min(alpha_p, alpha_d) < 1e-8:
            # corrector step blocked; fall back to a plain centering step
            with np.errstate(over="ignore", invalid="ignore"):
                dz2, ds2, dlam2 = solve_direction(s * lam - 0.5 * mu)
            if (np.all(np.isfinite(dz2)) and np.all(np.isfinite(ds2))
                    and np.all(np.isfinite(dlam2))):
                ap2 = min(1.0, ftb * _max_step(s, ds2))
                ad2 = min(1.0, ftb * _max_step(lam, dlam2))
                if min(ap2, ad2) > min(alpha_p, alpha_d):
                    dz, ds, dlam, alpha_p, alpha_d = dz2, ds2, dlam2, ap2, ad2
        stalled = stalled + 1 if max(alpha_p, alpha_d) < 1e-10 else 0
        z = z + alpha_p * dz
        s = np.maximum(s + alpha_p * ds, 1e-30)
        lam = np.maximum(lam + alpha_d * dlam, 1e-30)

    if status != "optimal" and best is not None:
        _, z, lam, kkt_rel, gap_rel = best
    cvals = np.array([_eval_record(r, z) for r in cons])
    violations = [(i, cons[i].kind, float(cvals[i]))
                  for i in range(m) if cvals[i] > tol * feas_scale]
    if status != "optimal" and violations and float(np.max(lam)) > 1e8:
        status = "infeasible"

    z_out = z * problem.var_scale if scaled else z
    return SolverResult(
        primal=z_out,
        objective_value=eval_objective(problem, z_out),
        status=status,
        kkt_residual=float(kkt_rel),
        duality_gap=float(gap_rel),
        iterations=it,
        multipliers=lam.copy(),
        violations=violations,
    )


# ---------------------------------------------------------------------------
# certification


def certify(problem: ConvexSubproblem, result: SolverResult, tol: float) -> bool:
    """Re-derive feasibility and the duality gap from scratch.

    Evaluates every constraint at the primal point and computes the Lagrangian
    dual value at the returned multipliers by direct minimization; true iff
    the point is feasible, the multipliers are sign-correct, and the gap is
    within tol (scaled by 1 + |objective|).
    """
    if result.status != "optimal":
        return False
    z = np.asarray(result.primal, dtype=np.float64)
    lam = result.multipliers
    cons = _canonical_constraints(problem)
    if lam is None or lam.size != len(cons):
        return False
    if np.any(lam < -tol):
        return False

    feas_scale = 1.0 + max((abs(r.const) for r in cons), default=0.0)
    cvals = np.array([_eval_record(r, z) for r in cons]) if cons else np.zeros(0)
    if cvals.size and float(np.max(cvals)) > tol * feas_scale:
        return False

    n = problem.n_vars
    H = np.zeros((n, n))
    lin = np.zeros(n)
    const = 0.0

    def add_quad(rec, weight):
        nonlocal const
        if rec.Q is not None:
            H[np.ix_(rec.qcols, rec.qcols)] += weight * rec.Q
        if rec.d is not None:
            H[rec.dcols, rec.dcols] += weight * rec.d
        if rec.lin is not None and rec.lin.size:
            np.add.at(lin, rec.lcols, weight * rec.lin)
        const += weight * rec.const

    obj_recs, q0, c0 = _objective_records(problem)
    for r in obj_recs:
        add_quad(r, 1.0)
    lin += q0
    const += c0
    for i, r in enumerate(cons):
        add_quad(r, float(lam[i]))

    zbar, *_ = np.linalg.lstsq(2.0 * H, -lin, rcond=None)
    resid = float(np.max(np.abs(2.0 * H @ zbar + lin)))
    if resid > 1e-6 * (1.0 + float(np.max(np.abs(lin)))):
        return False  # dual unbounded below in a null direction
    dual_val = float(zbar @ H @ zbar + lin @ zbar + const)
    fval = eval_objective(problem, z)
    gap = fval - dual_val
    return gap <= tol * (1.0 + abs(fval))


# ---------------------------------------------------------------------------
# JSON debug format


def _term_doc(t: QuadLike) -> dict:
    if isinstance(t, QuadTerm):
        return {"type": "dense", "cols": t.cols.tolist(), "Q": t.Q.tolist()}
    return {"type": "diag", "cols": t.cols.tolist(), "d": t.d.tolist()}


def _term_from_doc(doc: dict) -> QuadLike:
    if doc["type"] == "dense":
        return QuadTerm(np.array(doc["cols"]), np.array(doc["Q"]))
    return DiagTerm(np.array(doc["cols"]), np.array(doc["d"]))


def _aff_doc(a: Affine) -> dict:
    return {"cols": a.cols.tolist(), "coef": a.coef.tolist(), "const": a.const}


def _aff_from_doc(doc: dict) -> Affine:
    return Affine(np.array(doc["cols"], dtype=np.int64), np.array(doc["coef"]), doc["const"])


def problem_to_json(problem: ConvexSubproblem) -> str:
    """Serialize a subproblem so failing instances can be replayed elsewhere."""
    doc = {
        "n_vars": problem.n_vars,
        "objective": {
            "quads": [_term_doc(t) for t in problem.objective.quads],
            "affine": _aff_doc(problem.objective.affine),
        },
        "q_constraints": [{"quad": _term_doc(c.quad), "bound": _aff_doc(c.bound)}
                          for c in problem.q_constraints],
        "a_constraints": [{"aff": _aff_doc(c.aff), "lower": c.lower}
                          for c in problem.a_constraints],
        "sign_constraints": problem.sign_constraints.tolist(),
        "blocks": [b.tolist() for b in problem.blocks] if problem.blocks is not None else None,
        "var_scale": problem.var_scale.tolist() if problem.var_scale is not None else None,
    }
    return json.dumps(doc)


def problem_from_json(text: str) -> ConvexSubproblem:
    doc = json.loads(text)
    return ConvexSubproblem(
        n_vars=doc["n_vars"],
        objective=Objective(
            tuple(_term_from_doc(t) for t in doc["objective"]["quads"]),
            _aff_from_doc(doc["objective"]["affine"]),
        ),
        q_constraints=[QConstraint(_term_from_doc(c["quad"]), _aff_from_doc(c["bound"]))
                       for c in doc["q_constraints"]],
        a_constraints=[AConstraint(_aff_from_doc(c["aff"]), c["lower"])
                       for c in doc["a_constraints"]],
        sign_constraints=np.array(doc["sign_constraints"], dtype=np.int64),
        blocks=[np.array(b, dtype=np.int64) for b in doc["blocks"]]
        if doc["blocks"] is not None else None,
        var_scale=np.array(doc["var_scale"]) if doc["var_scale"] is not None else None,
    )
