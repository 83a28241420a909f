"""Node generation on unions of balls, the smooth spectral cutoff, and
phase-adaptive oscillatory quadrature for the time-evolution integrals.

Nodes are low-discrepancy (Halton) points filtered into each ball, stored as
antipodal pairs about the ball center so that odd radial moments vanish
exactly, with a radial weight correction that makes the weights integrate 1
and |x - center|^2 exactly per ball.  The oscillatory integrator splits
[0, lambda_1] into panels uniform in u = lambda^2 with a bounded per-panel
phase change of t*u and applies a fixed-order Gauss rule on each panel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .fitting import DecayFitResult, fit_loglog


class NodeConstructionError(ValueError):
    """Raised for invalid ball geometry or node counts."""


class IntegrandError(RuntimeError):
    """Raised when the integrand returns a non-finite sample."""

    def __init__(self, lam: float):
        super().__init__(f"non-finite integrand sample at lambda = {lam!r}")
        self.lam = lam


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class SupportNodes:
    """Quadrature nodes and weights over a disjoint union of balls."""

    dim: int
    nodes: np.ndarray          # (N, n)
    weights: np.ndarray        # (N,)
    ball_index: np.ndarray     # (N,) which ball each node belongs to
    balls: tuple[tuple[np.ndarray, float], ...]

    @property
    def count(self) -> int:
        return self.nodes.shape[0]


def _check_balls(balls, dim):
    parsed = []
    for center, radius in balls:
        c = np.asarray(center, dtype=float)
        if c.shape != (dim,):
            raise NodeConstructionError(f"ball center must be a {dim}-vector")
        if radius <= 0:
            raise NodeConstructionError("ball radius must be positive")
        parsed.append((c, float(radius)))
    for i in range(len(parsed)):
        for j in range(i + 1, len(parsed)):
            d = np.linalg.norm(parsed[i][0] - parsed[j][0])
            if d <= parsed[i][1] + parsed[j][1]:
                raise NodeConstructionError(f"balls {i} and {j} overlap")
    return parsed


def build_nodes(balls, per_ball_count: int, seed: int, dim: int = 5) -> SupportNodes:
    """Antipodally symmetrized Halton nodes per ball, radially corrected weights.

    Weights integrate the constant and |x - center|^2 exactly on each ball
    (so the total weight per ball equals the ball volume exactly); the
    correction to the equal weight vol/count is a small radial factor.
    """
    if per_ball_count < 64:
        raise NodeConstructionError("per_ball_count must be at least 64")
    if per_ball_count % 2:
        raise NodeConstructionError("per_ball_count must be even (antipodal pairing)")
    parsed = _check_balls(balls, dim)
    vol_unit = unit_ball_volume(dim)

    all_pts, all_wts, all_idx = [], [], []
    for bi, (center, radius) in enumerate(parsed):
        engine = qmc.Halton(d=dim, scramble=True, seed=seed + 7919 * bi)
        acc: list[np.ndarray] = []
        half = per_ball_count // 2
        while len(acc) < half:
            cand = (engine.random(4 * per_ball_count) * 2.0 - 1.0) * radius
            keep = cand[np.linalg.norm(cand, axis=1) < radius]
            acc.extend(keep)
        local = np.asarray(acc[:half])
        local = np.vstack([local, -local])
        vol = vol_unit * radius**dim
        w = np.full(per_ball_count, vol / per_ball_count)
        # solve for w_i -> w_i (1 + alpha + beta r_i^2) reproducing the exact
        # integrals of 1 and r^2 over the ball
        r2 = np.sum(local**2, axis=1)
        s0, s2, s4 = w.sum(), (w * r2).sum(), (w * r2 * r2).sum()
        t0 = vol
        t2 = vol * dim / (dim + 2) * radius**2
        mat = np.array([[s0, s2], [s2, s4]])
        alpha, beta = np.linalg.solve(mat, [t0 - s0, t2 - s2])
        w = w * (1.0 + alpha + beta * r2)
        if np.any(w <= 0):
            raise NodeConstructionError("radial weight correction produced nonpositive weights")
        all_pts.append(local + center)
        all_wts.append(w)
        all_idx.append(np.full(per_ball_count, bi))

    return SupportNodes(
        dim=dim,
        nodes=np.vstack(all_pts),
        weights=np.concatenate(all_wts),
        ball_index=np.concatenate(all_idx),
        balls=tuple(parsed),
    )


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth low-energy cutoff: 1 below lambda1/2, 0 above lambda1."""

    lambda1: float = 0.25

    def __post_init__(self):
        if self.lambda1 <= 0:
            raise ValueError("lambda1 must be positive")


def _bump(s):
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def cutoff_eval(spec: CutoffSpec, lam):
    """C-infinity transition g((lambda1-lambda)/(lambda1/2)) with g = h/(h + h(1-.))."""
    lam = np.asarray(lam, dtype=float)
    s = (spec.lambda1 - lam) / (spec.lambda1 / 2.0)
    hs = _bump(s)
    h1 = _bump(1.0 - s)
    with np.errstate(invalid="ignore"):
        val = np.where(hs + h1 > 0, hs / np.where(hs + h1 > 0, hs + h1, 1.0), 0.0)
    val = np.where(s >= 1.0, 1.0, val)
    val = np.where(s <= 0.0, 0.0, val)
    if val.shape == ():
        return float(val)
    return val


def _gauss_panels(t: float, lo: float, hi: float, order: int, phase_per_panel: float,
                  min_panels: int):
    """Panel Gauss nodes/weights on [lo, hi], uniform in u = lambda^2."""
    du_total = hi * hi - lo * lo
    n_panels = max(min_panels, int(np.ceil(abs(t) * du_total / phase_per_panel)))
    edges_u = lo * lo + du_total * np.arange(n_panels + 1) / n_panels
    edges = np.sqrt(edges_u)
    xg, wg = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wts = (half[:, None] * wg[None, :]).ravel()
    return nodes, wts


def oscillatory_integrate(
    t: float,
    f,
    spec: CutoffSpec,
    *,
    lambda_min: float = 0.0,
    order: int = 15,
    phase_per_panel: float = math.pi / 2.0,
    min_panels: int = 16,
):
    """integral_0^lambda1 exp(i t lambda^2) f(lambda) chi(lambda) dlambda.

    f maps an array of lambda values to an array of samples (an extra trailing
    axis is integrated componentwise).  Panels are refined so the per-panel
    phase change t * d(lambda^2) stays below phase_per_panel; the panel count
    grows linearly in |t| * lambda1^2.  When lambda_min > 0 the integrand is
    only evaluated on [lambda_min, lambda1] and the [0, lambda_min] stub is
    estimated from the fitted leading power of |f| on the lowest panels.
    """
    if lambda_min < 0 or lambda_min >= spec.lambda1:
        raise ValueError("lambda_min must lie in [0, lambda1)")
    nodes, wts = _gauss_panels(t, lambda_min, spec.lambda1, order, phase_per_panel, min_panels)
    fv = np.asarray(f(nodes))
    if not np.all(np.isfinite(fv)):
        bad = np.argwhere(~np.isfinite(fv))
        raise IntegrandError(float(nodes[int(bad[0][0])]))
    phase = np.exp(1j * t * nodes**2) * cutoff_eval(spec, nodes) * wts
    if fv.ndim == 1:
        total = complex(np.sum(phase * fv))
    else:
        total = phase @ fv
    if lambda_min > 0.0:
        total = total + _stub_estimate(nodes, fv, lambda_min, order)
    return total


def _stub_estimate(nodes, fv, lam_min, order):
    """Leading-power extrapolation of f over [0, lambda_min].

    Fit |f| ~ A lambda^p from samples on the three lowest panels and integrate
    the power law analytically (the oscillatory phase is negligible there for
    the supported time range, t * lambda_min^2 << 1).
    """
    k = min(3 * order, len(nodes))
    lams = nodes[:k]
    vals = fv[:k] if fv.ndim > 1 else fv[:k, None]
    mag = np.abs(vals)
    ref = mag[0]
    lo, hi = lams[0], lams[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        p = (np.log(mag[-1] + 1e-300) - np.log(mag[0] + 1e-300)) / np.log(hi / lo)
    p = np.clip(np.where(np.isfinite(p), p, 0.0), -0.5, 8.0)
    first = vals[0]
    stub = first * lam_min / (p + 1.0) * (lam_min / lo) ** p
    stub = np.where(ref > 0, stub, 0.0)
    if fv.ndim == 1:
        return complex(stub[0])
    return stub


def ibp_decay_probe(
    k: int,
    t_grid=None,
    spec: CutoffSpec | None = None,
    order: int = 15,
) -> DecayFitResult:
    """Fitted decay of |integral exp(i t lambda^2) lambda^k chi dlambda| vs t.

    The monomial integral decays like |t|^{-(k+1)/2}; the probe fits the slope
    over a log-spaced time grid (default [1e3, 1e6], past the cutoff-band
    transient).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if spec is None:
        spec = CutoffSpec()
    if t_grid is None:
        t_grid = np.geomspace(1e3, 1e6, 9)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 8:
        raise ValueError("need at least 8 time samples")
    vals = [abs(oscillatory_integrate(t, lambda lam: lam**k, spec, order=order)) for t in t_grid]
    return fit_loglog(t_grid, vals)


def convolution_bound_probe(
    k: int,
    l: int,
    beta: float,
    u1,
    u2,
    sample_count: int = 200_000,
    seed: int = 0,
    dim: int = 5,
    eps: float = 0.01,
) -> float:
    """Monte-Carlo ratio of a two-singularity convolution to its claimed bound.

    Estimates integral <z>^{-beta-eps} |z-u1|^{-k} |z-u2|^{-l} dz by mixture
    importance sampling (power-law proposals around each singularity plus a
    heavy tail matched to the integrand), divided by |u1-u2|^{-max(0,k+l-dim)}
    when |u1-u2| <= 1 and |u1-u2|^{-min(k,l,k+l+beta-dim)} otherwise.
    """
    if not (0 <= k < dim and 0 <= l < dim):
        raise ValueError("require 0 <= k, l < dim")
    if k + l + beta < dim:
        raise ValueError("require k + l + beta >= dim")
    if k + l == dim:
        raise ValueError("require k + l != dim")
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    rng = np.random.default_rng(seed)
    area = sphere_area(dim)

    counts = [sample_count // 3, sample_count // 3, sample_count - 2 * (sample_count // 3)]

    def _ball_sample(center, sing, count):
        dirs = rng.normal(size=(count, dim))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        u = rng.uniform(size=count)
        r = u ** (1.0 / (dim - sing))
        return center + dirs * r[:, None]

    def _ball_density(z, center, sing):
        r = np.linalg.norm(z - center, axis=1)
        dens = np.where(r < 1.0, (dim - sing) * r ** (-sing) / area, 0.0)
        return dens

    # heavy-tail proposal matched to the integrand's decay k+l+beta+eps
    nu = k + l + beta + eps - dim
    from scipy.stats import multivariate_t

    mt = multivariate_t(loc=np.zeros(dim), shape=np.eye(dim), df=nu)

    zs = np.vstack(
        [
            _ball_sample(u1, k, counts[0]),
            _ball_sample(u2, l, counts[1]),
            mt.rvs(size=counts[2], random_state=rng),
        ]
    )
    q = (
        counts[0] / sample_count * _ball_density(zs, u1, k)
        + counts[1] / sample_count * _ball_density(zs, u2, l)
        + counts[2] / sample_count * np.exp(mt.logpdf(zs))
    )
    d1 = np.linalg.norm(zs - u1, axis=1)
    d2 = np.linalg.norm(zs - u2, axis=1)
    with np.errstate(divide="ignore"):
        integrand = (1.0 + np.linalg.norm(zs, axis=1)) ** (-(beta + eps)) * d1 ** (-k) * d2 ** (-l)
    ok = (d1 > 0) & (d2 > 0) & (q > 0)
    est = float(np.mean(np.where(ok, integrand / np.where(q > 0, q, 1.0), 0.0)))

    sep = float(np.linalg.norm(u1 - u2))
    if sep <= 1.0:
        expo = max(0.0, k + l - dim)
    else:
        expo = min(k, l, k + l + beta - dim)
    bound = sep ** (-expo) if sep > 0 else 1.0
    return est / bound
