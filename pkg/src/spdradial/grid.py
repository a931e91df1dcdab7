"""Quantile grids over (direction, beta) pairs and the preset direction rule."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from .dataio import ellipsoid_glyph, matrix_to_list
from .errors import SpdError
from .quantiles import Dataset, OptimizerConfig, QuantileIndex, as_dataset, fit_frechet_median, fit_quantile
from .radial import BoundaryDirection
from .spectral import sqrt_pair, sym_log, sym_to_vec, vec_to_sym

DEFAULT_BETAS = (0.2, 0.4, 0.6, 0.8, 0.98)


def preset_directions(data, center):
    """Deterministic boundary directions based at ``center`` (normally the median).

    Takes the leading (up to three) principal axes of the log-scatter
    ``1/n sum_i v_i v_i^T``, ``v_i`` the coordinates of
    ``Log(c^{-1/2} X_i c^{-1/2})``, and uses both signs of each plus both
    signs of their normalized sum: 8 directions whenever the tangent space has
    dimension at least 3 (m >= 2), 2 for m = 1.
    """
    data = as_dataset(data)
    ch, cmh = sqrt_pair(center)
    m = data.dim
    V = np.array([sym_to_vec(sym_log(cmh @ X @ cmh)) for X in data.points])
    C = V.T @ V / len(V)
    w, E = np.linalg.eigh(C)
    E = E[:, ::-1]
    r = min(3, E.shape[1])
    axes = []
    for j in range(r):
        e = E[:, j]
        k = int(np.argmax(np.abs(e)))
        axes.append(e if e[k] > 0 else -e)
    vecs = []
    for e in axes:
        vecs += [e, -e]
    if r >= 2:
        s = np.sum(axes, axis=0)
        s /= np.linalg.norm(s)
        vecs += [s, -s]
    return [BoundaryDirection.from_tangent(center, ch @ vec_to_sym(v, m) @ ch) for v in vecs]


def _record(rec_id, direction, beta, res=None, error=None):
    rec = {"id": rec_id, "direction": direction, "beta": float(beta)}
    if res is not None:
        rec.update(
            matrix=matrix_to_list(res.point),
            glyph=ellipsoid_glyph(res.point, rec_id).to_dict(),
            converged=bool(res.converged),
            grad_norm=float(res.grad_norm),
            loss=float(res.loss),
            iterations=int(res.n_iter),
            error=None if res.converged else "gradient tolerance not met",
        )
    else:
        rec.update(matrix=None, glyph=None, converged=False, grad_norm=None, loss=None, iterations=0, error=error)
    return rec


def _solve_cell(args):
    points, base, zdir, beta, cfg = args
    cfg = OptimizerConfig(**cfg)
    try:
        xi = BoundaryDirection(base, zdir)
        return fit_quantile(Dataset(points), QuantileIndex(beta, xi), cfg), None
    except SpdError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def quantile_grid(data, directions, betas, cfg=None, jobs=1):
    """Median plus one quantile per ``(direction, beta)`` with ``beta > 0``.

    ``beta = 0`` does not depend on the direction, so it is represented once
    by the median record.  Returns ``(median_result, records)`` with records
    in deterministic order: the median first, then by direction index and
    the given order of betas.
    """
    data = as_dataset(data)
    cfg = cfg or OptimizerConfig()
    betas = [float(b) for b in betas]
    for b in betas:
        QuantileIndex(b, None)  # range check
    med = fit_frechet_median(data, cfg)
    records = [_record("median", None, 0.0, med)]
    cells = [(i, b) for i, _ in enumerate(directions) for b in betas if b > 0.0]
    tasks = [(np.array(data.points), directions[i].base, directions[i].dir, b, asdict(cfg)) for i, b in cells]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_solve_cell, tasks))
    else:
        outcomes = [_solve_cell(t) for t in tasks]
    for (i, b), (res, err) in zip(cells, outcomes):
        records.append(_record(f"d{i}_b{b:g}", i, b, res, err))
    return med, records
