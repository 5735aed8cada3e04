"""Global maximization of a convex quadratic over a Euclidean ball.

Solves::

    max  w.T A w + 2 b.T w + const   s.t.  ||w - center|| <= S

for symmetric positive semidefinite ``A``.  A nonconstant convex function
peaks on the sphere, and its stationary points there satisfy
``(A - nu I)(w - center) = -(A center + b)``.  In the eigenbasis
``A = Q.T diag(phi) Q`` this reads ``(phi_i - nu) tau_i = xi_i`` with
``tau = Q (w - center)`` and ``xi = -phi * (Q center) - Q b``, so every
stationary point is either

* a root of the secular equation ``T(nu) = sum_i (xi_i / (nu - phi_i))^2 = S^2``,
  which has at most two roots between consecutive poles and exactly one
  outside the outermost poles, or
* an eigenvalue ``nu`` whose eigenspace carries no ``xi``, with the free
  eigenspace coordinates placed on the remaining sub-sphere.

Enumerating both families and keeping the best value gives the exact maximum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EIG_GROUP_RTOL = 1e-9
XI_ZERO_RTOL = 1e-12
TIE_RTOL = 1e-12


class NotSymmetricError(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticObjective:
    A: np.ndarray
    b: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        A = np.array(self.A, dtype=np.float64, ndmin=2)
        b = np.array(self.b, dtype=np.float64, ndmin=1)
        if A.shape != (b.size, b.size):
            raise ValueError(f"A has shape {A.shape} but b has length {b.size}")
        scale = max(1.0, float(np.abs(A).max(initial=0.0)))
        if np.abs(A - A.T).max(initial=0.0) > 1e-12 * scale:
            raise NotSymmetricError("A must be symmetric")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "const", float(self.const))

    def __call__(self, w):
        w = np.asarray(w, dtype=np.float64)
        return float(w @ (self.A @ w) + 2.0 * (self.b @ w) + self.const)


@dataclass(frozen=True)
class SecularProblem:
    phi: np.ndarray
    xi: np.ndarray
    S: float
    Q: np.ndarray | None = None

    def T(self, nu):
        return secular_function(self.phi, self.xi, nu)


@dataclass
class BallMaxResult:
    value: float
    argmax: np.ndarray
    candidates_examined: int
    multiplier: float = math.nan
    branch: str = ""


def secular_function(phi, xi, nu):
    """``T(nu) = sum (xi_i / (nu - phi_i))^2``; ``inf`` exactly at a live pole."""
    phi = np.asarray(phi, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    live = xi != 0
    diff = nu - phi[live]
    if np.any(diff == 0):
        return math.inf
    return float(np.sum((xi[live] / diff) ** 2))


def linear_over_ball(a, c, S, sense="max"):
    """Extremum of ``a @ v`` over ``||v - c|| <= S`` and the point attaining it."""
    a = np.asarray(a, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    norm = float(np.linalg.norm(a))
    base = float(a @ c)
    if norm == 0.0 or S == 0:
        return base, c.copy()
    if sense == "max":
        return base + S * norm, c + (S / norm) * a
    if sense == "min":
        return base - S * norm, c - (S / norm) * a
    raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")


def decompose(A, sym_rtol=1e-12, psd_rtol=1e-10):
    """Eigendecomposition ``A = Q.T @ diag(phi) @ Q`` with ``phi`` ascending.

    Rows of ``Q`` are the eigenvectors.
    """
    A = np.asarray(A, dtype=np.float64)
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    if np.abs(A - A.T).max(initial=0.0) > sym_rtol * scale:
        raise NotSymmetricError("matrix is not symmetric within tolerance")
    try:
        phi, V = np.linalg.eigh(0.5 * (A + A.T))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigendecomposition failed: {exc}") from exc
    if phi.size and phi[0] < -psd_rtol * max(1.0, abs(phi[-1])):
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {phi[0]:.3e})")
    return V.T.copy(), phi


def _group_eigenvalues(phi, rtol=EIG_GROUP_RTOL):
    """Cluster sorted eigenvalues closer than ``rtol * max(1, |phi|_max)``."""
    if phi.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    thr = rtol * max(1.0, float(np.abs(phi).max()))
    labels = np.zeros(phi.size, dtype=np.int64)
    g = 0
    start = 0
    for i in range(1, phi.size):
        if phi[i] - phi[start] > thr:
            g += 1
            start = i
        labels[i] = g
    reps = np.array([phi[labels == k].mean() for k in range(g + 1)])
    return labels, reps


# --- secular root finding ----------------------------------------------------

def _T(poles, z2, nu):
    diff = nu - poles
    if np.any(diff == 0):
        return math.inf
    return float(np.sum(z2 / diff ** 2))


def _dT(poles, z2, nu):
    diff = nu - poles
    return float(-2.0 * np.sum(z2 / diff ** 3)), float(6.0 * np.sum(z2 / diff ** 4))


def _root_in_bracket(poles, z2, S, a, b, maxiter=200):
    """Solve ``T = S^2`` on ``(a, b)`` where ``T - S^2`` changes sign.

    Newton iterations run on ``G(nu) = 1/sqrt(T) - 1/S``, which is nearly
    linear close to a pole; steps leaving the bracket fall back to bisection.
    """
    s2 = S * S
    inv_s = 1.0 / S

    def G(nu):
        t = _T(poles, z2, nu)
        if math.isinf(t):
            return -inv_s, t
        return 1.0 / math.sqrt(t) - inv_s, t

    ga, _ = G(a)
    gb, _ = G(b)
    if ga == 0:
        return a
    if gb == 0:
        return b
    # orient so that G(lo) < 0 < G(hi) in the bookkeeping below
    lo, hi = (a, b) if ga < 0 else (b, a)
    x = 0.5 * (a + b)
    best, best_res = x, math.inf
    for _ in range(maxiter):
        g, t = G(x)
        res = abs(t - s2)
        if res < best_res:
            best, best_res = x, res
        if res <= 1e-15 * s2:
            break
        if g < 0:
            lo = x
        else:
            hi = x
        left, right = min(lo, hi), max(lo, hi)
        if right - left <= 2.0 * np.spacing(max(abs(left), abs(right))):
            break
        d1, _ = _dT(poles, z2, x)
        dg = -0.5 * d1 / t ** 1.5 if t > 0 and not math.isinf(t) else 0.0
        step_ok = False
        if dg != 0.0:
            xn = x - g / dg
            if left < xn < right:
                step_ok = True
        if not step_ok:
            xn = 0.5 * (left + right)
        if xn == x:
            xn = 0.5 * (left + right)
            if xn == x:
                break
        x = xn
    return best


def _interior_minimizer(poles, z2, a, b, maxiter=300):
    """Minimizer of the convex ``T`` between consecutive poles ``a < b``."""
    lo, hi = a, b
    x = 0.5 * (a + b)
    for _ in range(maxiter):
        d1, d2 = _dT(poles, z2, x)
        if d1 == 0:
            break
        if d1 < 0:
            lo = x
        else:
            hi = x
        if hi - lo <= 2.0 * np.spacing(max(abs(lo), abs(hi))):
            break
        xn = x - d1 / d2 if d2 > 0 else 0.5 * (lo + hi)
        if not (lo < xn < hi) or xn == x:
            xn = 0.5 * (lo + hi)
            if xn == x:
                break
        x = xn
    return x


def _grouped_roots(poles, zeta, S):
    """Secular roots for distinct ascending ``poles`` with weights ``zeta > 0``."""
    if poles.size == 0:
        return []
    z2 = zeta ** 2
    s2 = S * S
    spread = float(np.sqrt(z2.sum())) / S + 1.0
    roots = []

    lo = poles[0] - spread
    while _T(poles, z2, lo) >= s2:
        lo = poles[0] - 2.0 * (poles[0] - lo)
    roots.append(_root_in_bracket(poles, z2, S, lo, poles[0]))

    for k in range(poles.size - 1):
        a, b = poles[k], poles[k + 1]
        nu_min = _interior_minimizer(poles, z2, a, b)
        tmin = _T(poles, z2, nu_min)
        if abs(tmin - s2) <= 1e-10 * s2:
            roots.append(nu_min)
        elif tmin < s2:
            roots.append(_root_in_bracket(poles, z2, S, a, nu_min))
            roots.append(_root_in_bracket(poles, z2, S, nu_min, b))

    hi = poles[-1] + spread
    while _T(poles, z2, hi) >= s2:
        hi = poles[-1] + 2.0 * (hi - poles[-1])
    roots.append(_root_in_bracket(poles, z2, S, poles[-1], hi))
    return roots


def _zeroed_xi(xi):
    xi = np.array(xi, dtype=np.float64)
    xi[np.abs(xi) <= XI_ZERO_RTOL * (1.0 + np.linalg.norm(xi))] = 0.0
    return xi


def secular_roots(sp: SecularProblem):
    """All real ``nu`` with ``T(nu) = S^2``, ascending.

    Entries of ``xi`` negligible against ``||xi||`` are treated as zero and
    nearly equal eigenvalues are merged into one pole carrying the combined
    weight.  An all-zero ``xi`` gives no roots.
    """
    if not sp.S > 0:
        raise ValueError("S must be positive")
    phi = np.asarray(sp.phi, dtype=np.float64)
    order = np.argsort(phi, kind="stable")
    phi = phi[order]
    xi = _zeroed_xi(np.asarray(sp.xi, dtype=np.float64)[order])
    labels, reps = _group_eigenvalues(phi)
    zeta = np.sqrt(np.bincount(labels, weights=xi ** 2, minlength=reps.size))
    live = zeta > 0
    return np.array(_grouped_roots(reps[live], zeta[live], float(sp.S)))


# --- maximization ------------------------------------------------------------

def _tie_direction(Q_u):
    """Unit combination of the rows ``Q_u`` that lowers the earliest possible coordinate.

    Used when the objective is flat on an eigenspace sub-sphere, so the
    reported maximizer is deterministic.
    """
    for j in range(Q_u.shape[1]):
        col = Q_u[:, j]
        nrm = np.linalg.norm(col)
        if nrm > 1e-12:
            return -col / nrm
    e = np.zeros(Q_u.shape[0])
    e[0] = 1.0
    return e


def _better(cand, best):
    if best is None:
        return True
    val, nu, w = cand
    bval, bnu, bw = best
    tol = TIE_RTOL * max(1.0, abs(val), abs(bval))
    if val > bval + tol:
        return True
    if val < bval - tol:
        return False
    if nu != bnu:
        return nu < bnu
    return tuple(w) < tuple(bw)


def maximize_over_ball(q: QuadraticObjective, center, S) -> BallMaxResult:
    """Exact maximum of ``q`` over the ball of radius ``S`` around ``center``."""
    c = np.asarray(center, dtype=np.float64)
    if c.shape != q.b.shape:
        raise ValueError(f"center has shape {c.shape}, expected {q.b.shape}")
    if not S >= 0:
        raise ValueError("S must be nonnegative")
    if S == 0:
        return BallMaxResult(q(c), c.copy(), 1, branch="center")
    if not np.any(q.A):
        val, w = linear_over_ball(2.0 * q.b, c, S, "max")
        return BallMaxResult(q(w), w, 1, branch="linear")

    Q, phi = decompose(q.A)
    xi = _zeroed_xi(-phi * (Q @ c) - Q @ q.b)
    labels, reps = _group_eigenvalues(phi)
    zeta = np.sqrt(np.bincount(labels, weights=xi ** 2, minlength=reps.size))
    live = zeta > 0
    rep_of = reps[labels]

    best = None
    best_branch = ""
    examined = 0

    for nu in _grouped_roots(reps[live], zeta[live], float(S)):
        denom = rep_of - nu
        tau = np.divide(xi, denom, out=np.zeros_like(xi), where=xi != 0)
        w = c + Q.T @ tau
        cand = (q(w), float(nu), w)
        examined += 1
        if _better(cand, best):
            best, best_branch = cand, "secular"

    for g in np.flatnonzero(~live):
        nu = float(reps[g])
        U = labels == g
        F = ~U
        tau = np.zeros_like(xi)
        tau[F] = np.divide(xi[F], rep_of[F] - nu, out=np.zeros(F.sum()), where=xi[F] != 0)
        rem = S * S - float(tau[F] @ tau[F])
        if rem < -1e-12 * S * S:
            continue
        radius = math.sqrt(max(rem, 0.0))
        a_u = (Q @ (nu * c + q.b))[U]
        _, tau_u = linear_over_ball(a_u, np.zeros(U.sum()), radius, "max")
        if radius > 0 and not np.any(tau_u):
            tau_u = radius * _tie_direction(Q[U])
        tau[U] = tau_u
        w = c + Q.T @ tau
        cand = (q(w), nu, w)
        examined += 1
        if _better(cand, best):
            best, best_branch = cand, "degenerate"

    val, nu, w = best
    return BallMaxResult(val, w, examined, multiplier=nu, branch=best_branch)
