"""Fragility, the DRO worst case, and their brute-force oracles.

For a reward vector u over the contexts, a reference distribution w0 and a
threshold tau, the fragility is

    sup_{w in simplex, w != w0} (tau - <w, u>) / ||w - w0||_M      if <w0, u> >= tau
    +inf                                                        otherwise.

Production solves go through :class:`RegularizationPath`: the minimizers of

    theta <w, u> + 1/2 ||w - w0||_M^2        over the simplex, theta >= 0,

form a piecewise-linear curve in theta. Every DRO worst case over an M-ball
around w0 lies on that curve (Lagrangian duality), and so does the maximizer of
the ratio whenever the supremum is positive (its KKT system is the curve's KKT
system at theta = ||w - w0||_M / kappa). On each linear piece the ratio has a
closed-form maximizer, which makes the solve exact up to rounding. When the
supremum is not positive, i.e. min(u) >= tau, it is attained at a vertex.

The epigraph bisection over g(k) = min_w <w, u> + k ||w - w0||_M (evaluated by
projected gradient descent) and a Dinkelbach iteration are kept as independent
cross-check solvers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .simplex import MmdMetric, project_simplex


class SolverError(RuntimeError):
    pass


class BracketError(SolverError):
    def __init__(self, lo, hi):
        super().__init__(f"could not bracket the fragility: g({hi:g}) still below tau (lo={lo:g})")
        self.lo, self.hi = lo, hi


@dataclass
class FragilityResult:
    kappa: float
    witness: np.ndarray | None
    clamped: bool = False
    iterations: int = 0
    residual: float = 0.0

    @property
    def status(self) -> str:
        if np.isinf(self.kappa):
            return "infinite"
        return "clamped" if self.clamped else "finite"

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.kappa))


@dataclass
class InnerSolveReport:
    k: float
    w: np.ndarray
    value: float
    iterations: int
    converged: bool


def ratio(u, w0, tau, metric: MmdMetric, w) -> float:
    """(tau - <w, u>) / ||w - w0||_M; nan at w = w0."""
    d = metric.distance(w, w0)
    if d == 0.0:
        return np.nan
    return (tau - float(np.dot(w, u))) / d


# ---------------------------------------------------------------------------
# regularization path
# ---------------------------------------------------------------------------

def _face_qp(H, c, free, nonneg, tol):
    """Active-set solve of min 1/2 q'Hq + c'q  s.t. sum(q) = 0, q[nonneg] >= 0.

    Coordinates outside ``free`` and ``nonneg`` are fixed at zero. Returns the
    minimizer and the multiplier of the sum constraint.
    """
    n = len(c)
    q = np.zeros(n)
    variables = np.concatenate([free, nonneg]).astype(int)
    is_nonneg = np.zeros(n, dtype=bool)
    is_nonneg[nonneg] = True
    bound = set(int(i) for i in nonneg)
    for _ in range(4 * n + 20):
        F = np.array([i for i in variables if i not in bound], dtype=int)
        if F.size == 0:
            # only q = 0 is feasible
            return q, float(min(c[list(bound)])) if bound else 0.0
        m = F.size
        kkt = np.zeros((m + 1, m + 1))
        kkt[:m, :m] = H[np.ix_(F, F)]
        kkt[:m, m] = -1.0
        kkt[m, :m] = 1.0
        rhs = np.concatenate([-c[F], [0.0]])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        target, mu = sol[:m], sol[m]
        step = target - q[F]
        alpha, block = 1.0, None
        for j, i in enumerate(F):
            if is_nonneg[i] and step[j] < 0.0 and target[j] < 0.0:
                a = q[i] / -step[j]
                if a < alpha:
                    alpha, block = a, i
        q[F] += alpha * step
        if block is not None:
            q[block] = 0.0
            bound.add(int(block))
            continue
        if bound:
            idx = np.array(sorted(bound), dtype=int)
            slack = c[idx] + H[idx] @ q - mu
            j = int(np.argmin(slack))
            if slack[j] < -tol:
                bound.discard(int(idx[j]))
                continue
        return q, float(mu)
    raise SolverError("active-set direction solve did not terminate")


@dataclass(frozen=True)
class PathSegment:
    start: float
    stop: float
    offset: np.ndarray
    slope: np.ndarray

    def at(self, theta: float) -> np.ndarray:
        return self.offset + theta * self.slope


class RegularizationPath:
    """Piecewise-linear minimizer path of theta <w, u> + 1/2 ||w - w0||_M^2 on the simplex."""

    def __init__(self, u, w0, metric: MmdMetric, max_segments: int | None = None):
        self.u = np.asarray(u, dtype=float)
        self.w0 = np.asarray(w0, dtype=float)
        self.metric = metric
        self.segments: list[PathSegment] = []
        self._trace(max_segments or 20 * len(self.u) + 100)

    def _trace(self, cap):
        u, w0, M = self.u, self.w0, self.metric.M
        n = len(u)
        scale = 1.0 + np.abs(u).max()
        wtol = 1e-13
        theta, w = 0.0, w0.copy()
        slack = np.zeros(n)
        for _ in range(cap):
            stol = 1e-11 * (scale * (1.0 + theta) + np.abs(M).max())
            pos = w > wtol
            zero = ~pos & (slack <= stol)
            strict = ~pos & ~zero
            q, mu = _face_qp(M, u, np.flatnonzero(pos), np.flatnonzero(zero), stol)
            q[np.abs(q) < 1e-15] = 0.0
            sigma = u + M @ q - mu
            step = np.inf
            shrink = pos & (q < 0.0)
            if shrink.any():
                step = min(step, float(np.min(w[shrink] / -q[shrink])))
            closing = strict & (sigma < 0.0)
            if closing.any():
                step = min(step, float(np.min(slack[closing] / -sigma[closing])))
            if not np.isfinite(step):
                # the feasible set is bounded, so a segment without a breakpoint
                # is the terminal one and its direction is zero up to rounding
                self.segments.append(PathSegment(theta, np.inf, w.copy(), np.zeros(n)))
                return
            self.segments.append(PathSegment(theta, theta + step, w - theta * q, q))
            theta += step
            w = np.clip(w + step * q, 0.0, None)
            w[w <= wtol] = 0.0
            w /= w.sum()
            grad = theta * u + M @ (w - w0)
            pos = w > wtol
            eta = float(np.mean(grad[pos]))
            slack = np.clip(grad - eta, 0.0, None)
            slack[pos] = 0.0
        raise SolverError(f"regularization path exceeded {cap} segments")

    @property
    def end(self) -> np.ndarray:
        seg = self.segments[-1]
        return seg.offset + (seg.start if np.isinf(seg.stop) else seg.stop) * seg.slope

    def _pieces(self):
        """Per segment: (start, stop, d0, d1, d2, <offset,u>, <slope,u>) with ||w - w0||^2 = d0 + 2 d1 th + d2 th^2."""
        M = self.metric.M
        for seg in self.segments:
            e = seg.offset - self.w0
            Me, Mq = M @ e, M @ seg.slope
            yield (seg, float(e @ Me), float(e @ Mq), float(seg.slope @ Mq),
                   float(seg.offset @ self.u), float(seg.slope @ self.u))

    def max_ratio(self, tau: float) -> tuple[float, np.ndarray]:
        """Largest ratio (tau - <w,u>)/||w - w0||_M along the path and where it is attained."""
        best, best_w = -np.inf, None
        for seg, d0, d1, d2, n0u, n1 in self._pieces():
            n0 = tau - n0u
            candidates = []
            stop = seg.start if np.isinf(seg.stop) else seg.stop
            if seg.start > 0.0:
                candidates.append(seg.start)
            if stop > 0.0:
                candidates.append(stop)
            den = n1 * d1 + n0 * d2
            if den != 0.0:
                th = -(n1 * d0 + n0 * d1) / den
                if seg.start < th < stop:
                    candidates.append(th)
            for th in candidates:
                sq = d0 + 2.0 * d1 * th + d2 * th * th
                if sq <= 1e-30:
                    continue
                val = (n0 - n1 * th) / np.sqrt(sq)
                if val > best:
                    best, best_w = val, seg.at(th)
        if best_w is None:
            raise SolverError("path never leaves the reference distribution")
        best_w = np.clip(best_w, 0.0, None)
        best_w /= best_w.sum()
        return best, best_w

    def worst_case(self, radius: float) -> tuple[float, np.ndarray]:
        """min <w, u> over the simplex intersected with the M-ball of ``radius`` around w0."""
        r2 = radius * radius
        for seg, d0, d1, d2, _, _ in self._pieces():
            stop = seg.stop
            if np.isinf(stop):
                break
            if d0 + 2.0 * d1 * stop + d2 * stop * stop < r2:
                continue
            # smallest root of d2 th^2 + 2 d1 th + d0 - r2 = 0 inside the segment
            if d2 > 0.0:
                disc = max(d1 * d1 - d2 * (d0 - r2), 0.0)
                th = (-d1 + np.sqrt(disc)) / d2
            else:
                th = seg.start
            th = min(max(th, seg.start), stop)
            w = np.clip(seg.at(th), 0.0, None)
            w /= w.sum()
            return float(w @ self.u), w
        w = self.end
        return float(w @ self.u), w


# ---------------------------------------------------------------------------
# fragility
# ---------------------------------------------------------------------------

def _vertex_fragility(u, w0, tau, metric):
    """Supremum of the ratio when it is not positive: attained at a vertex."""
    dist = metric.vertex_distances(w0)
    vals = np.full(len(u), -np.inf)
    ok = dist > 1e-14
    vals[ok] = (tau - u[ok]) / dist[ok]
    i = int(np.argmax(vals))
    w = np.zeros(len(u))
    w[i] = 1.0
    return float(vals[i]), w


def _check_inputs(u, w0, metric):
    u = np.asarray(u, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    if u.shape != w0.shape or u.shape != (metric.n,):
        raise ValueError(f"dimension mismatch: u {u.shape}, w {w0.shape}, n={metric.n}")
    if not np.all(np.isfinite(u)):
        raise ValueError("reward vector must be finite")
    return u, w0


def estimated_fragility(u, w0, tau: float, metric: MmdMetric, tol: float = 1e-6,
                        method: str = "path") -> FragilityResult:
    """Unclamped fragility of a reward vector (typically an action's UCB row).

    ``method`` selects the solver: "path" (default, exact), "bisection" (epigraph
    bisection over projected-gradient inner solves) or "dinkelbach".
    """
    u, w0 = _check_inputs(u, w0, metric)
    if float(w0 @ u) < tau:
        return FragilityResult(np.inf, None)
    if u.min() >= tau:
        kappa, w = _vertex_fragility(u, w0, tau, metric)
        return FragilityResult(kappa, w, iterations=1)
    if method == "path":
        path = RegularizationPath(u, w0, metric)
        kappa, w = path.max_ratio(tau)
        res = abs(ratio(u, w0, tau, metric, w) - kappa)
        return FragilityResult(kappa, w, iterations=len(path.segments), residual=res)
    if method == "bisection":
        return _bisection_fragility(u, w0, tau, metric, tol)
    if method == "dinkelbach":
        return _dinkelbach_fragility(u, w0, tau, metric, tol)
    raise ValueError(f"unknown method {method!r}")


def true_fragility(f_x, w0, tau: float, metric: MmdMetric, tol: float = 1e-6,
                   method: str = "path", clamp: bool = True) -> FragilityResult:
    """Fragility of the true reward row, clamped below at zero unless ``clamp`` is False."""
    res = estimated_fragility(f_x, w0, tau, metric, tol, method)
    if clamp and res.finite and res.kappa <= 0.0:
        return FragilityResult(0.0, None, clamped=True, iterations=res.iterations)
    return res


# ---------------------------------------------------------------------------
# cross-check solvers
# ---------------------------------------------------------------------------

def inner_min(u, w0, k: float, metric: MmdMetric, tol: float = 1e-10,
              max_iter: int = 5000, start=None) -> InnerSolveReport:
    """min over the simplex of <w, u> + k ||w - w0||_M by projected gradient descent.

    Accelerated projected gradient with backtracking and adaptive restart. The
    objective is smooth away from w0; the kink at w0 is handled by comparing the
    final iterate against w0 itself.
    """
    u, w0 = _check_inputs(u, w0, metric)
    if k < 0:
        raise ValueError("inner_min requires k >= 0")
    n = len(u)
    if k == 0.0:
        w = np.zeros(n)
        w[int(np.argmin(u))] = 1.0
        return InnerSolveReport(k, w, float(u.min()), 0, True)
    M = metric.M

    def obj(w):
        return float(w @ u) + k * metric.distance(w, w0)

    if start is None:
        vals = u + k * metric.vertex_distances(w0)
        start = np.zeros(n)
        start[int(np.argmin(vals))] = 1.0
    w = np.asarray(start, dtype=float).copy()
    fw = obj(w)
    y, fy, mom = w.copy(), fw, 1.0
    step = 1.0
    converged = False
    stalled = 0
    it = 0
    for it in range(1, max_iter + 1):
        d = y - w0
        r = metric.norm(d)
        if r < 1e-12:
            # the extrapolated point sits on the kink; restart from the iterate
            y, fy, mom = w.copy(), fw, 1.0
            d = y - w0
            r = metric.norm(d)
            if r < 1e-12:
                converged = True
                break
        grad = u + k * (M @ d) / r
        for _ in range(80):
            cand = project_simplex(y - step * grad)
            fc = obj(cand)
            move = cand - y
            if fc <= fy + grad @ move + (move @ move) / (2.0 * step) + 1e-15:
                break
            step *= 0.5
        if np.abs(move).max() / step < tol or np.abs(move).max() < 1e-15:
            if fc < fw:
                w, fw = cand, fc
            converged = True
            break
        # progress below rounding level for many steps counts as convergence
        stalled = stalled + 1 if fc >= fw - 1e-15 * max(1.0, abs(fw)) else 0
        if stalled >= 50:
            converged = True
            break
        if fc > fw:
            # adaptive restart: momentum overshot
            y, fy, mom = w.copy(), fw, 1.0
            continue
        mom_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * mom * mom))
        y = project_simplex(cand + ((mom - 1.0) / mom_next) * (cand - w))
        w, fw, mom = cand, fc, mom_next
        fy = obj(y)
        step *= 1.5
    f0 = float(w0 @ u)
    if f0 <= fw:
        w, fw = w0.copy(), f0
    return InnerSolveReport(k, w, fw, it, converged)


def _bisection_fragility(u, w0, tau, metric, tol, tol_g=1e-8, max_iter=200):
    def feasible(k):
        rep = inner_min(u, w0, k, metric)
        return rep.value >= tau - tol_g, rep

    lo, hi = 0.0, 1.0
    ok, _ = feasible(hi)
    doublings = 0
    while not ok:
        lo, hi = hi, 2.0 * hi
        doublings += 1
        if doublings > 60:
            raise BracketError(lo, hi)
        ok, _ = feasible(hi)
    witness = None
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        ok, rep = feasible(mid)
        if ok:
            hi = mid
        else:
            lo, witness = mid, rep.w
        it += 1
    if witness is None:
        witness = feasible(lo)[1].w
    r = ratio(u, w0, tau, metric, witness)
    return FragilityResult(hi, witness, iterations=it, residual=abs(r - hi) if np.isfinite(r) else hi - lo)


def _dinkelbach_fragility(u, w0, tau, metric, tol, max_iter=100):
    k, w = _vertex_fragility(u, w0, tau, metric)
    k = max(k, 0.0)
    for it in range(1, max_iter + 1):
        rep = inner_min(u, w0, k, metric)
        gap = tau - rep.value
        d = metric.distance(rep.w, w0)
        if gap <= tol or d == 0.0:
            return FragilityResult(k, w, iterations=it, residual=max(gap, 0.0))
        k, w = (tau - float(rep.w @ u)) / d, rep.w
    raise SolverError("Dinkelbach iteration did not converge")


# ---------------------------------------------------------------------------
# DRO
# ---------------------------------------------------------------------------

def dro_worst_case(u, w0, radius: float, metric: MmdMetric,
                   path: RegularizationPath | None = None) -> tuple[float, np.ndarray]:
    """inf of <w, u> over distributions within M-distance ``radius`` of w0."""
    u, w0 = _check_inputs(u, w0, metric)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0.0:
        return float(u @ w0), w0.copy()
    if radius >= metric.diameter:
        w = np.zeros(len(u))
        w[int(np.argmin(u))] = 1.0
        return float(u.min()), w
    path = path or RegularizationPath(u, w0, metric)
    return path.worst_case(radius)


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def simplex_lattice(n: int, steps: int) -> np.ndarray:
    """All points of the simplex whose coordinates are multiples of 1/steps."""
    if n == 1:
        return np.ones((1, 1))
    if n > 4:
        raise ValueError("lattice oracle is limited to n <= 4")
    axes = np.meshgrid(*[np.arange(steps + 1)] * (n - 1), indexing="ij")
    head = np.stack([a.ravel() for a in axes], axis=1)
    head = head[head.sum(axis=1) <= steps]
    pts = np.column_stack([head, steps - head.sum(axis=1)]) / steps
    pts.setflags(write=False)
    return pts


def grid_oracle_fragility(u, w0, tau: float, metric: MmdMetric, grid_step: float = 1e-3) -> float:
    """Lattice maximum of the fragility ratio, skipping lattice points within grid_step of w0."""
    u, w0 = _check_inputs(u, w0, metric)
    if float(w0 @ u) < tau:
        return np.inf
    pts = simplex_lattice(len(u), int(round(1.0 / grid_step)))
    d = pts - w0
    keep = np.linalg.norm(d, axis=1) > grid_step
    pts, d = pts[keep], d[keep]
    dist = np.sqrt(np.clip(np.einsum("ij,jk,ik->i", d, metric.M, d), 0.0, None))
    ok = dist > 0
    return float(np.max((tau - pts[ok] @ u) / dist[ok]))
