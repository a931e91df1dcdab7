"""Geometric quantiles, Fréchet mean/median and treatment effects on SPD data.

The ``(beta, xi)``-quantile of a sample ``X_1..X_n`` minimizes

    L(p) = 1/n sum_i [ d(X_i, p) - beta <xi_{X_i}, log_{X_i}(p)>_{X_i} ]

with the radial field evaluated at the data points, so it is computed once
per point and cached.  In the frame of ``X`` (``A = X^{-1/2} p X^{-1/2}``,
``Xi = X^{-1/2} xi_X X^{-1/2}``) each term is ``||Log A||_F - beta tr(Xi Log A)``,
whose gradient in ``p`` follows from the Daleckii-Krein formula for the
derivative of ``Log``; the per-point work is done by the backend kernel
``quantile_terms``.

Minimization is Riemannian descent with Armijo backtracking.  The search
direction is a Newton step from a finite-difference Hessian (columns are
central differences of the analytic gradient, parallel transported back
along the probing geodesics) whenever that Hessian is positive definite, and
the negative gradient otherwise.  At a data point the loss is not
differentiable; convergence there is judged by the minimum-norm subgradient.
"""

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import _backend
from .errors import InputError, OptimizationError
from .geometry import distance, log_map, metric_inner
from .radial import BoundaryDirection, radial_field, whitened_radial_field
from .spectral import as_spd, eig_sym, sqrt_pair, sym_to_vec, vec_to_sym

_LOG_MAX = math.log(np.finfo(float).max)
#: Treatment effects with magnitude at or below this are the cone point.
ZERO_EFFECT_TOL = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings shared by the quantile and mean optimizers."""

    tol: float = 1e-8
    max_iter: int = 500
    step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    snap: float = 1e-9
    hess_step: float = 1e-4
    max_step_norm: float = 10.0

    @classmethod
    def from_mapping(cls, mapping=None, **overrides):
        """Build from a plain key-value mapping; unknown keys are rejected."""
        values = dict(mapping or {})
        values.update(overrides)
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise InputError(f"unknown optimizer settings: {sorted(unknown)}")
        cfg = cls(**values)
        if not (cfg.tol > 0 and cfg.max_iter >= 1 and cfg.step > 0 and 0 < cfg.shrink < 1):
            raise InputError(f"invalid optimizer settings: {cfg}")
        return cfg


def _config(cfg):
    if cfg is None:
        return OptimizerConfig()
    if isinstance(cfg, OptimizerConfig):
        return cfg
    return OptimizerConfig.from_mapping(cfg)


@dataclass(frozen=True)
class QuantileIndex:
    beta: float
    xi: BoundaryDirection

    def __post_init__(self):
        beta = float(self.beta)
        if not 0.0 <= beta < 1.0:
            raise InputError(f"beta must lie in [0, 1), got {beta}")
        object.__setattr__(self, "beta", beta)


@dataclass(frozen=True, eq=False)
class Dataset:
    """A nonempty sample of SPD matrices of one dimension, stacked as ``(n, m, m)``."""

    points: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        seq = list(self.points)
        if not seq:
            raise InputError("dataset is empty")
        mats = [as_spd(P, f"point {i}") for i, P in enumerate(seq)]
        m = mats[0].shape[0]
        for i, P in enumerate(mats):
            if P.shape[0] != m:
                raise InputError(f"point {i} has dimension {P.shape[0]}, expected {m}")
        arr = np.array(mats)
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)
        labels = self.labels
        if labels is None:
            labels = tuple(str(i) for i in range(len(arr)))
        labels = tuple(str(lab) for lab in labels)
        if len(labels) != len(arr):
            raise InputError(f"{len(labels)} labels for {len(arr)} points")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]


def as_dataset(data):
    return data if isinstance(data, Dataset) else Dataset(data)


@dataclass(frozen=True)
class TreatmentPair:
    control: np.ndarray
    treated: np.ndarray

    def __post_init__(self):
        c = as_spd(self.control, "control")
        t = as_spd(self.treated, "treated")
        if c.shape != t.shape:
            raise InputError(f"control {c.shape} and treated {t.shape} differ in dimension")
        object.__setattr__(self, "control", c)
        object.__setattr__(self, "treated", t)


@dataclass(frozen=True)
class TreatmentEffect:
    """An element of the cone over the boundary: magnitude ``beta`` and direction ``xi``.

    ``xi`` is ``None`` exactly when ``beta == 0`` (the cone point).
    """

    beta: float
    xi: BoundaryDirection = None

    @property
    def is_zero(self):
        return self.xi is None


@dataclass
class QuantileResult:
    point: np.ndarray
    loss: float
    grad_norm: float
    n_iter: int
    converged: bool
    loss_trace: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# objective


class _Objective:
    """Loss and Riemannian gradient for a fixed dataset and ``(beta, xi)``."""

    def __init__(self, data, beta, xi, snap):
        self.data = as_dataset(data)
        self.beta = float(beta)
        self.snap = snap
        pts = self.data.points
        n, m = pts.shape[:2]
        self.n, self.m = n, m
        pairs = [sqrt_pair(X) for X in pts]
        self.Xh = np.array([a for a, _ in pairs])
        self.Xmh = np.array([b for _, b in pairs])
        if self.beta == 0.0 or xi is None:
            self.Xiw = np.zeros((n, m, m))
        else:
            if xi.dim != m:
                raise InputError(f"direction has dimension {xi.dim}, data has {m}")
            self.Xiw = np.array([whitened_radial_field(xi, X) for X in pts])

    def terms(self, p):
        return _backend.quantile_terms(self.Xmh, self.Xiw, p, self.beta, self.snap)

    def value(self, p):
        dist, inner, _ = self.terms(p)
        return float(np.mean(dist - self.beta * inner))

    def evaluate(self, p):
        """Loss, Euclidean gradient, and a per-point "at the data point" mask."""
        dist, inner, Y = self.terms(p)
        loss = float(np.mean(dist - self.beta * inner))
        Ge = np.sum(self.Xmh @ Y @ self.Xmh, axis=0) / self.n
        return loss, 0.5 * (Ge + Ge.T), dist < self.snap

    def whitened_grad(self, p, ph=None):
        """Loss, gradient in the frame at ``p`` (``p^{1/2} G_e p^{1/2}``), subgradient slack.

        The slack is ``1/n`` times the number of data points ``p`` sits on:
        the radius of the subdifferential ball contributed by those terms.
        """
        if ph is None:
            ph, _ = sqrt_pair(p)
        loss, Ge, at = self.evaluate(p)
        G = ph @ Ge @ ph
        return loss, 0.5 * (G + G.T), float(np.count_nonzero(at)) / self.n


def _grad_norm(G, slack):
    return max(0.0, float(np.linalg.norm(G)) - slack)


def _step(ph, S):
    """``exp_p`` of the tangent vector ``p^{1/2} S p^{1/2}``."""
    dec = eig_sym(S)
    if dec.eigenvalues[0] > _LOG_MAX:
        return None
    E = dec.apply(np.exp)
    out = ph @ E @ ph
    return 0.5 * (out + out.T)


def _hessian(obj, p, ph, h):
    """Riemannian Hessian in the orthonormal frame at ``p`` by central differences.

    Gradients at ``q = exp_p(+-h B_k)`` are expressed in the frame parallel
    transported from ``p``: for ``q = p^{1/2} Y p^{1/2}`` that frame is
    ``p^{1/2} Y^{1/2} E_j Y^{1/2} p^{1/2}``.
    """
    m = p.shape[0]
    k = m * (m + 1) // 2
    H = np.empty((k, k))
    for j in range(k):
        e = np.zeros(k)
        e[j] = h
        cols = []
        for sgn in (1.0, -1.0):
            S = vec_to_sym(sgn * e, m)
            dec = eig_sym(S)
            Yh = dec.apply(lambda d: np.exp(0.5 * d))
            q = ph @ Yh @ Yh @ ph
            q = 0.5 * (q + q.T)
            _, Ge, _ = obj.evaluate(q)
            T = Yh @ ph @ Ge @ ph @ Yh
            cols.append(sym_to_vec(0.5 * (T + T.T)))
        H[:, j] = (cols[0] - cols[1]) / (2.0 * h)
    return 0.5 * (H + H.T)


def _newton_direction(H, g):
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(w)) or w[0] <= 1e-10 * max(w[-1], 1e-300):
        return None
    return -(V @ ((V.T @ g) / w))


def _minimize(obj, p0, cfg):
    p = p0
    ph, _ = sqrt_pair(p)
    loss, G, slack = obj.whitened_grad(p, ph)
    gnorm = _grad_norm(G, slack)
    trace = [loss]
    it = 0
    while gnorm > cfg.tol and it < cfg.max_iter:
        it += 1
        # a data point may be the minimizer: test the nearest one
        snapped = _try_data_point(obj, p, loss, cfg)
        if snapped is not None:
            p, loss, gnorm = snapped
            trace.append(loss)
            break
        g = sym_to_vec(G)
        directions = []
        if slack == 0.0:
            s_newton = _newton_direction(_hessian(obj, p, ph, cfg.hess_step), g)
            if s_newton is not None and s_newton @ g < 0:
                directions.append(s_newton)
        directions.append(-g)
        moved = False
        for s in directions:
            nrm = float(np.linalg.norm(s))
            if nrm > cfg.max_step_norm:
                s = s * (cfg.max_step_norm / nrm)
            # at a data point the dropped distance term adds slack * |s| to the slope
            slope = float(s @ g) + slack * float(np.linalg.norm(s))
            alpha = cfg.step
            while alpha > 1e-14:
                q = _step(ph, vec_to_sym(alpha * s, obj.m))
                if q is not None:
                    lq = obj.value(q)
                    if lq <= loss + cfg.armijo * alpha * slope:
                        p, moved = q, True
                        break
                alpha *= cfg.shrink
            if moved:
                break
        if not moved:
            break
        ph, _ = sqrt_pair(p)
        loss, G, slack = obj.whitened_grad(p, ph)
        gnorm = _grad_norm(G, slack)
        trace.append(loss)
    return QuantileResult(p, loss, gnorm, it, gnorm <= cfg.tol, trace)


def _try_data_point(obj, p, loss, cfg):
    dist, _, _ = obj.terms(p)
    k = int(np.argmin(dist))
    X = obj.data.points[k]
    lx, G, slack = obj.whitened_grad(X)
    if slack == 0.0:
        return None
    gnorm = _grad_norm(G, slack)
    if gnorm <= cfg.tol and lx <= loss + 1e-12 * max(1.0, abs(loss)):
        return X.copy(), lx, gnorm
    return None


def _initial_point(obj):
    losses = [obj.value(X) for X in obj.data.points]
    return obj.data.points[int(np.argmin(losses))].copy()


# ---------------------------------------------------------------------------
# public API


def quantile_loss(data, p, q):
    """Sample ``(beta, xi)``-quantile loss at the candidate ``p`` (radial field at the data)."""
    data = as_dataset(data)
    p = as_spd(p, "p")
    if p.shape[0] != data.dim:
        raise InputError(f"p has dimension {p.shape[0]}, data has {data.dim}")
    return _Objective(data, q.beta, q.xi, 0.0).value(p)


def quantile_loss_at_candidate(data, p, q):
    """Variant with the radial field at the candidate: ``1/n sum d(p, X_i) + beta <xi_p, log_p X_i>_p``.

    Evaluation only; the optimizer uses :func:`quantile_loss`.
    """
    data = as_dataset(data)
    p = as_spd(p, "p")
    xp = radial_field(q.xi, p) if q.beta else None
    total = 0.0
    for X in data.points:
        v = log_map(p, X)
        total += distance(p, X)
        if xp is not None:
            total += q.beta * metric_inner(p, xp, v)
    return total / len(data)


def fit_quantile(data, q, cfg=None, init=None):
    """Minimize the quantile loss; returns a :class:`QuantileResult` without raising."""
    cfg = _config(cfg)
    obj = _Objective(data, q.beta, q.xi, cfg.snap)
    p0 = _initial_point(obj) if init is None else as_spd(init, "init")
    return _minimize(obj, p0, cfg)


def quantile(data, q, cfg=None):
    """The empirical ``(beta, xi)``-quantile.

    Raises :class:`OptimizationError` (carrying the last losses) if the
    gradient tolerance is not met within ``max_iter`` iterations.
    """
    res = fit_quantile(data, q, cfg)
    if not res.converged:
        raise OptimizationError(
            f"quantile optimizer stopped after {res.n_iter} iterations with gradient norm {res.grad_norm:.3g}",
            estimates=res.loss_trace[-5:],
        )
    return res.point


def fit_frechet_median(data, cfg=None):
    cfg = _config(cfg)
    obj = _Objective(data, 0.0, None, cfg.snap)
    return _minimize(obj, _initial_point(obj), cfg)


def frechet_median(data, cfg=None):
    """Geometric median: the quantile with ``beta = 0``.

    For data on a single geodesic the minimizer need not be unique; the
    converged point is returned as is.
    """
    res = fit_frechet_median(data, cfg)
    if not res.converged:
        raise OptimizationError(
            f"median optimizer stopped after {res.n_iter} iterations with gradient norm {res.grad_norm:.3g}",
            estimates=res.loss_trace[-5:],
        )
    return res.point


def frechet_mean(data, cfg=None):
    """Karcher mean: minimizer of the mean squared distance.

    Fixed-point iteration ``p <- exp_p(mean_i log_p X_i)`` (gradient descent
    with unit step on half the mean squared distance), with backtracking.
    """
    cfg = _config(cfg)
    data = as_dataset(data)
    pts = data.points

    def objective(y):
        ymh = sqrt_pair(y)[1]
        w = np.linalg.eigvalsh(ymh @ pts @ ymh)
        return 0.5 * float(np.mean(np.sum(np.log(w) ** 2, axis=-1)))

    losses = [objective(Y) for Y in pts]
    p = pts[int(np.argmin(losses))].copy()
    f = min(losses)
    trace = [f]
    for _ in range(cfg.max_iter):
        ph, pmh = sqrt_pair(p)
        A = pmh @ pts @ pmh
        lam, Q = np.linalg.eigh(0.5 * (A + np.swapaxes(A, -1, -2)))
        S = np.mean((Q * np.log(lam)[:, None, :]) @ np.swapaxes(Q, -1, -2), axis=0)
        S = 0.5 * (S + S.T)
        g = float(np.linalg.norm(S))
        if g <= cfg.tol:
            return p
        alpha = cfg.step
        while alpha > 1e-14:
            q = _step(ph, alpha * S)
            fq = objective(q)
            if fq <= f - cfg.armijo * alpha * g * g:
                break
            alpha *= cfg.shrink
        else:
            break
        p, f = q, fq
        trace.append(f)
    raise OptimizationError("Fréchet mean iteration did not converge", estimates=trace[-5:])


def individual_treatment_effect(pair):
    """Cone element ``[(beta, xi)]`` with ``exp_{r_C}(beta xi_{r_C}) = r_T``.

    ``beta = d(r_C, r_T)`` and ``xi`` is the ray from ``r_C`` through
    ``r_T``; equal outcomes give the cone point (``xi is None``).
    """
    if not isinstance(pair, TreatmentPair):
        pair = TreatmentPair(*pair)
    v = log_map(pair.control, pair.treated)
    beta = distance(pair.control, pair.treated)
    if beta <= ZERO_EFFECT_TOL:
        return TreatmentEffect(0.0, None)
    return TreatmentEffect(beta, BoundaryDirection(pair.control, v / beta))
