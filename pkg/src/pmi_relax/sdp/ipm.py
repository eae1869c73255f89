"""Primal-dual path-following interior-point method (HKM direction).

Infeasible start, Mehrotra predictor-corrector, dense linear algebra per
block with blocks of equal size batched together.  Free variables enter the
Newton system through an augmented Schur complement, they are never split.
Redundant equality rows are removed beforehand by a pivoted QR.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .problem import SdpProblem, SolverResult, SolverStatus

log = logging.getLogger(__name__)


@dataclass
class IpmOptions:
    tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.98
    rank_tol: float = 1e-11
    consistency_tol: float = 1e-7
    infeas_tol: float = 1e-8
    near_factor: float = 1e3
    chunk_bytes: int = 64 * 2**20
    polish: bool = True
    verbose: bool = False


class _Group:
    """Blocks of one size, stacked: A has shape (N, nb, s, s)."""

    def __init__(self, size: int, idx: list[int], A: np.ndarray, C: np.ndarray):
        self.s = size
        self.idx = idx
        self.A = A
        self.C = C
        self.nb = len(idx)
        self.Aflat = A.reshape(A.shape[0], -1)


def _svec_index(s: int):
    iu = np.triu_indices(s)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return iu, w


def _sym(W: np.ndarray) -> np.ndarray:
    return 0.5 * (W + np.swapaxes(W, -1, -2))


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha dX PSD (inf if unbounded)."""
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = np.linalg.inv(L)
    W = _sym(Li @ dX @ np.swapaxes(Li, -1, -2))
    lam = np.linalg.eigvalsh(W)[..., 0].min()
    return np.inf if lam >= 0 else -1.0 / lam


class _Presolved:
    """Equality system rewritten with orthonormal rows.

    With ``K`` the row-normalized constraint matrix (svec coordinates, free
    columns last) and ``K[keep]^T = Q1 R11`` a pivoted QR, the system
    ``K[keep] v = b`` is replaced by ``Q1^T v = R11^{-T} b``.  This removes the
    conditioning of the sample-point geometry from the Newton systems.
    """

    rank: int = 0
    inconsistency: float = 0.0


def _presolve(sdp: SdpProblem, opts: IpmOptions) -> _Presolved:
    N = sdp.n_constraints
    svecs = [_svec_index(blk.size) for blk in sdp.blocks]
    pieces = [blk.A[:, iu[0], iu[1]] * w for blk, (iu, w) in zip(sdp.blocks, svecs)]
    pieces.append(sdp.B)
    K = np.concatenate(pieces, axis=1)
    norms = np.linalg.norm(K, axis=1)
    bmax = max(1.0, float(np.abs(sdp.b).max(initial=0.0)))
    ps = _Presolved()
    ps.svec = svecs
    zero = norms <= 1e-300
    if np.any(zero & (np.abs(sdp.b) > opts.consistency_tol * bmax)):
        ps.inconsistency = float(np.abs(sdp.b[zero]).max()) / bmax
    nr = np.where(zero, 1.0, norms)
    Ks = K / nr[:, None]
    bs = sdp.b / nr
    live = np.flatnonzero(~zero)
    if live.size == 0:
        ps.rank = 0
        ps.Q1 = np.zeros((K.shape[1], 0))
        ps.b = np.zeros(0)
        ps.y_map = np.zeros((N, 0))
        return ps
    Q, R, piv = sla.qr(Ks[live].T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > opts.rank_tol * d[0]))
    keep = live[piv[:rank]]
    drop = live[piv[rank:]]
    R11 = R[:rank, :rank]
    if drop.size:
        W = sla.solve_triangular(R11, R[:rank, rank:])
        res = bs[drop] - W.T @ bs[keep]
        scale = 1.0 + np.abs(bs).max()
        ps.inconsistency = max(ps.inconsistency, float(np.abs(res).max() / scale))
    ps.rank = rank
    ps.Q1 = Q[:, :rank]
    ps.b = sla.solve_triangular(R11, bs[keep], trans="T")
    # multipliers of the original rows: y[keep] = R11^{-1} y_new / scale
    Rinv = sla.solve_triangular(R11, np.eye(rank))
    ps.y_map = np.zeros((N, rank))
    ps.y_map[keep] = Rinv / nr[keep, None]
    return ps


def _unpack(ps: _Presolved, sdp: SdpProblem) -> tuple[list[np.ndarray], np.ndarray]:
    """Per-block constraint matrices ``(rank, s, s)`` and free columns of the
    orthonormal system."""
    out = []
    off = 0
    QT = ps.Q1.T
    for blk, (iu, w) in zip(sdp.blocks, ps.svec):
        k = len(w)
        A = np.zeros((ps.rank, blk.size, blk.size))
        vals = QT[:, off:off + k] / w
        A[:, iu[0], iu[1]] = vals
        A[:, iu[1], iu[0]] = vals
        out.append(A)
        off += k
    return out, np.ascontiguousarray(QT[:, off:])


def solve_ipm(sdp: SdpProblem, opts: IpmOptions | None = None, **kw) -> SolverResult:
    """Solve ``sdp``; see :class:`IpmOptions` for tolerances."""
    opts = opts or IpmOptions(**kw)
    t0 = time.perf_counter()
    N0 = sdp.n_constraints
    nblocks = len(sdp.blocks)
    ps = _presolve(sdp, opts)
    pinfo = {"rows": N0, "rank": ps.rank, "dropped": N0 - ps.rank, "inconsistency": ps.inconsistency}

    def finish(status, X, r, y_red, Z, it, msg, pinf=np.nan, dinf=np.nan, gap=np.nan):
        y = ps.y_map @ y_red if y_red is not None else np.zeros(N0)
        Xb = [np.zeros((blk.size, blk.size)) for blk in sdp.blocks] if X is None else X
        Zb = [np.zeros((blk.size, blk.size)) for blk in sdp.blocks] if Z is None else Z
        rr = np.zeros(sdp.n_free) if r is None else r
        pobj = sdp.objective_value(Xb, rr)
        dobj = float(sdp.b @ y)
        if X is not None:
            res = sdp.residual(Xb, rr)
            pinf = float(np.abs(res).max() / (1.0 + np.abs(sdp.b).max(initial=0.0)))
        return SolverResult(status, pobj, dobj, Xb, rr, y, Zb, pinf, dinf, gap, it,
                            time.perf_counter() - t0, msg, pinfo)

    if ps.inconsistency > opts.consistency_tol:
        return finish(SolverStatus.INFEASIBLE, None, None, None, None, 0,
                      f"equality constraints inconsistent (residual {ps.inconsistency:.2e})")

    N = ps.rank
    b = ps.b
    Ablocks, B = _unpack(ps, sdp)
    cf = sdp.c_free.copy()
    nf = B.shape[1]

    by_size: dict[int, list[int]] = {}
    for j, blk in enumerate(sdp.blocks):
        by_size.setdefault(blk.size, []).append(j)
    groups = []
    for s, idx in sorted(by_size.items()):
        A = np.stack([Ablocks[j] for j in idx], axis=1)
        C = np.stack([sdp.blocks[j].objective_matrix() for j in idx])
        groups.append(_Group(s, idx, np.ascontiguousarray(A), C))
    ntot = sum(g.s * g.nb for g in groups)

    def Aop(Ms):
        out = np.zeros(N)
        for g, M in zip(groups, Ms):
            out += g.Aflat @ M.reshape(-1)
        return out

    def ATop(y):
        return [(y @ g.Aflat).reshape(g.nb, g.s, g.s) for g in groups]

    def inner(P, Q):
        return float(sum(np.vdot(p, q) for p, q in zip(P, Q)))

    # starting point
    X, Z = [], []
    for g in groups:
        normA = np.linalg.norm(g.A.reshape(N, g.nb, -1), axis=2)  # (N, nb)
        xi = np.maximum(10.0, np.maximum(np.sqrt(g.s), g.s * np.max((1 + np.abs(b))[:, None] / (1 + normA), axis=0)))
        eta = np.maximum(10.0, np.maximum(np.sqrt(g.s), np.maximum(normA.max(axis=0), np.linalg.norm(g.C.reshape(g.nb, -1), axis=1))))
        I = np.eye(g.s)
        X.append(xi[:, None, None] * I)
        Z.append(eta[:, None, None] * I)
    y = np.zeros(N)
    r = np.zeros(nf)

    normb = 1.0 + np.linalg.norm(b)
    normC = 1.0 + np.sqrt(sum(np.sum(g.C ** 2) for g in groups)) + np.linalg.norm(cf)
    status = SolverStatus.STALLED
    msg = "iteration limit reached"
    small_steps = 0
    best = None
    it = 0
    pinf = dinf = gap = np.inf

    for it in range(opts.max_iter + 1):
        Ax = Aop(X)
        rp = b - Ax - B @ r
        ATy = ATop(y)
        Rd = [g.C - a - z for g, a, z in zip(groups, ATy, Z)]
        rf = cf - B.T @ y
        pobj = inner([g.C for g in groups], X) + cf @ r
        dobj = b @ y
        xz = inner(X, Z)
        mu = xz / ntot
        pinf = np.linalg.norm(rp) / normb
        dinf = (np.sqrt(sum(np.sum(R ** 2) for R in Rd)) + np.linalg.norm(rf)) / normC
        gap = max(abs(pobj - dobj), xz) / (1.0 + abs(pobj) + abs(dobj))
        err = max(pinf, dinf, gap)
        if opts.verbose:
            log.info("it %3d pobj %.10e dobj %.10e pinf %.2e dinf %.2e gap %.2e", it, pobj, dobj, pinf, dinf, gap)
        if best is None or err < best[0]:
            best = (err, [x.copy() for x in X], r.copy(), y.copy(), [z.copy() for z in Z], pinf, dinf, gap)
        if err <= opts.tol:
            status, msg = SolverStatus.OPTIMAL, "converged"
            break
        # primal infeasibility: y approaches a ray with b.y > 0, A*(y) <= 0
        if dobj > 0 and it > 5:
            ray = (np.sqrt(sum(np.sum((a + z) ** 2) for a, z in zip(ATy, Z))) + np.linalg.norm(B.T @ y)) / dobj
            if ray < opts.infeas_tol * max(1.0, np.sqrt(sum(np.sum(g.C ** 2) for g in groups)) + 1.0) and pinf > 1e-4:
                status, msg = SolverStatus.INFEASIBLE, f"dual improving ray found (ratio {ray:.1e})"
                break
        if pobj < 0 and it > 5:
            ray = np.linalg.norm(Ax + B @ r) / -pobj
            if ray < opts.infeas_tol * normb and dinf > 1e-4:
                status, msg = SolverStatus.UNBOUNDED, f"primal improving ray found (ratio {ray:.1e})"
                break
        if it == opts.max_iter:
            break

        # Schur complement M_ij = <A_i, X A_j Z^-1>
        Zinv = []
        for z in Z:
            Zinv.append(_sym(np.linalg.inv(z)))
        M = np.zeros((N, N))
        for g, x, zi in zip(groups, X, Zinv):
            per_row = g.nb * g.s * g.s * 8
            step = max(1, opts.chunk_bytes // max(per_row, 1))
            for lo in range(0, N, step):
                hi = min(N, lo + step)
                P = x[None] @ g.A[lo:hi] @ zi[None]
                M[lo:hi] += P.reshape(hi - lo, -1) @ g.Aflat.T
        M = 0.5 * (M + M.T)
        try:
            fac = sla.cho_factor(M, lower=False, check_finite=False)
            Msolve = lambda v: sla.cho_solve(fac, v, check_finite=False)  # noqa: E731
        except (np.linalg.LinAlgError, ValueError):
            reg = 1e-12 * max(1.0, np.abs(np.diag(M)).max())
            try:
                fac = sla.cho_factor(M + reg * np.eye(N), lower=False, check_finite=False)
                Msolve = lambda v: sla.cho_solve(fac, v, check_finite=False)  # noqa: E731
            except (np.linalg.LinAlgError, ValueError):
                lu = sla.lu_factor(M + reg * np.eye(N), check_finite=False)
                Msolve = lambda v: sla.lu_solve(lu, v, check_finite=False)  # noqa: E731
        if nf:
            MB = Msolve(B)
            S = B.T @ MB
            S = 0.5 * (S + S.T)
        XRd = [x @ R for x, R in zip(X, Rd)]

        def solve_aug(h, g):
            """``M dy + B dr = h``, ``B^T dy = g``."""
            Mh = Msolve(h)
            if not nf:
                return Mh, np.zeros(0)
            dr = np.linalg.lstsq(S, B.T @ Mh - g, rcond=None)[0]
            return Mh - MB @ dr, dr

        def direction(Rc):
            h = rp - Aop([(rc - xr) @ zi for rc, xr, zi in zip(Rc, XRd, Zinv)])
            dy, dr = solve_aug(h, rf)
            hn = np.linalg.norm(h) + np.linalg.norm(rf)
            for _ in range(3):
                e1 = h - M @ dy - B @ dr
                e2 = rf - B.T @ dy
                if np.linalg.norm(e1) + np.linalg.norm(e2) <= 1e-15 * hn:
                    break
                cy, cr = solve_aug(e1, e2)
                dy, dr = dy + cy, dr + cr
            ATdy = ATop(dy)
            dZ = [R - a for R, a in zip(Rd, ATdy)]
            dX = [_sym((rc - x @ dz) @ zi) for rc, x, dz, zi in zip(Rc, X, dZ, Zinv)]
            # rows are orthonormal, so A^T e restores A(dX) + B dr = rp exactly
            e = rp - Aop(dX) - B @ dr
            dX = [d + c for d, c in zip(dX, ATop(e))]
            dr = dr + B.T @ e
            return dX, dr, dy, dZ

        def steps(dX, dZ):
            ap = min([_max_step(x, d) for x, d in zip(X, dX)] + [np.inf])
            ad = min([_max_step(z, d) for z, d in zip(Z, dZ)] + [np.inf])
            return ap, ad

        XZ = [x @ z for x, z in zip(X, Z)]
        dXa, dra, dya, dZa = direction([-w for w in XZ])
        ap, ad = steps(dXa, dZa)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = inner([x + ap * d for x, d in zip(X, dXa)], [z + ad * d for z, d in zip(Z, dZa)]) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        I_s = [np.eye(g.s)[None] for g in groups]
        Rc = [sigma * mu * I - w - dx @ dz for I, w, dx, dz in zip(I_s, XZ, dXa, dZa)]
        dX, dr, dy, dZ = direction(Rc)
        ap, ad = steps(dX, dZ)
        ap = min(1.0, opts.step_fraction * ap)
        ad = min(1.0, opts.step_fraction * ad)
        if opts.verbose:
            log.info("       sigma %.2e  steps %.3f %.3f", sigma, ap, ad)
        if max(ap, ad) < 1e-8:
            small_steps += 1
            if small_steps >= 5:
                msg = "step lengths collapsed"
                break
        else:
            small_steps = 0
        X = [x + ap * d for x, d in zip(X, dX)]
        r = r + ap * dr
        y = y + ad * dy
        Z = [z + ad * d for z, d in zip(Z, dZ)]

    if status is not SolverStatus.OPTIMAL and status not in (SolverStatus.INFEASIBLE, SolverStatus.UNBOUNDED):
        err, X, r, y, Z, pinf, dinf, gap = best
        if err <= opts.tol * opts.near_factor:
            status, msg = SolverStatus.NEAR_OPTIMAL, f"stopped early ({msg}); residuals {err:.1e}"

    # scatter back to block order
    Xb: list[np.ndarray] = [None] * nblocks  # type: ignore[list-item]
    Zb: list[np.ndarray] = [None] * nblocks  # type: ignore[list-item]
    for g, x, z in zip(groups, X, Z):
        for k, j in enumerate(g.idx):
            Xb[j] = x[k]
            Zb[j] = z[k]
    if status.ok and opts.polish and ps.rank:
        Xb, r = _polish(sdp, ps, Xb, r)
    return finish(status, Xb, r, y, Zb, it, msg, pinf, dinf, gap)


def _polish(sdp: SdpProblem, ps: _Presolved, X: list[np.ndarray], r: np.ndarray):
    """Minimum-norm correction making the kept equalities hold to rounding."""
    v = np.concatenate([x[iu] * w for x, (iu, w) in zip(X, ps.svec)] + [r])
    v = v + ps.Q1 @ (ps.b - ps.Q1.T @ v)
    off = 0
    Xn = []
    for blk, (iu, w) in zip(sdp.blocks, ps.svec):
        k = len(w)
        D = np.zeros((blk.size, blk.size))
        D[iu] = v[off:off + k] / w
        off += k
        Xn.append(D + np.triu(D, 1).T)
    return Xn, v[off:]
