"""Compactly supported potentials with a closed-form zero-energy eigenfunction.

The construction superposes point-source fields: psi agrees with
-c0 * sum_i mu_i |x - x_i|^{2-n} outside a union of disjoint balls around the
sources and replaces each singular profile r^{2-n} inside its own ball by an
even quartic a + b r^2 + c r^4 matched to second order at the boundary.  Then
Delta psi is an explicit radial quadratic supported exactly on the balls, the
potential V = Delta psi / psi is bounded with supp V in the union of balls,
and (-Delta + V) psi = 0 holds identically.

Choosing the weights mu in the null space of the moment matrix of the sources
upgrades the far-field decay: no constraint gives |x|^{2-n}, vanishing total
mass |x|^{1-n}, vanishing mass and first moments |x|^{-n}.  These decay
classes correspond exactly to the vanishing of integral V psi and
integral x_j V psi dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fitting import DecayFitResult, fit_loglog
from .kernels import green_constant, validate_dimension
from .quadrature import SupportNodes, build_nodes, sphere_area


class ConstructionError(RuntimeError):
    """Raised when nonvanishing of psi cannot be achieved or weights are trivial."""


DECAY_CLASSES = {None: "generic", 0: "first", 1: "second"}


@dataclass(frozen=True)
class PointSourceSpec:
    """Source points, ball radii and the vanishing-moment order (None, 0, 1)."""

    dim: int
    points: np.ndarray          # (P, n)
    radii: np.ndarray           # (P,)
    moment_order: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))
        object.__setattr__(self, "radii", np.asarray(self.radii, dtype=float))
        validate_dimension(self.dim)
        if self.points.shape[1] != self.dim:
            raise ConstructionError("points must have the ambient dimension")
        if self.radii.shape != (self.points.shape[0],):
            raise ConstructionError("need one radius per point")
        if np.any(self.radii <= 0):
            raise ConstructionError("radii must be positive")
        if self.moment_order not in (None, 0, 1):
            raise ConstructionError("moment_order must be None, 0 or 1")
        npts = self.points.shape[0]
        if self.moment_order == 0 and npts < 2:
            raise ConstructionError("moment order 0 needs at least 2 points")
        if self.moment_order == 1 and npts < self.dim + 2:
            raise ConstructionError(f"moment order 1 needs at least {self.dim + 2} points")
        for i in range(npts):
            for j in range(i + 1, npts):
                gap = np.linalg.norm(self.points[i] - self.points[j])
                if gap <= self.radii[i] + self.radii[j]:
                    raise ConstructionError(f"balls {i} and {j} overlap")

    @property
    def decay_class(self) -> str:
        return DECAY_CLASSES[self.moment_order]


def moment_matrix(points: np.ndarray, order: int) -> np.ndarray:
    """Rows are the monomials of degree <= order evaluated at the points."""
    rows = [np.ones(points.shape[0])]
    if order >= 1:
        rows.extend(points[:, j] for j in range(points.shape[1]))
    return np.vstack(rows)


def solve_weights(spec: PointSourceSpec, prefer=None) -> np.ndarray:
    """Nonzero weights in the moment-matrix null space, max-normalized.

    With several null directions the deterministic choice is the projection of
    `prefer` (or of the all-ones template) onto the null space; sign fixed so
    the first nonzero entry is positive.
    """
    npts = spec.points.shape[0]
    if spec.moment_order is None:
        return np.ones(npts)
    mm = moment_matrix(spec.points, spec.moment_order)
    _, svals, vt = np.linalg.svd(mm)
    tol = max(mm.shape) * np.finfo(float).eps * (svals[0] if svals.size else 1.0)
    rank = int(np.sum(svals > tol))
    null = vt[rank:].T  # (npts, nullity)
    if null.shape[1] == 0:
        raise ConstructionError("moment matrix has full column rank; add points")
    template = np.asarray(prefer, dtype=float) if prefer is not None else np.ones(npts)
    mu = null @ (null.T @ template)
    if np.linalg.norm(mu) <= 1e-12 * np.linalg.norm(template):
        mu = null[:, 0]
    mu = mu / np.max(np.abs(mu))
    first = np.flatnonzero(np.abs(mu) > 1e-12)[0]
    if mu[first] < 0:
        mu = -mu
    residual = np.linalg.norm(mm @ mu)
    if residual > 1e-10 * np.linalg.norm(mu):
        raise ConstructionError(f"weights violate the moment conditions (residual {residual:.2e})")
    return mu


def _continuation(radius: float, n: int) -> tuple[float, float, float]:
    """Even quartic a + b r^2 + c r^4 matching r^{2-n} to second order at r = radius."""
    mat = np.array(
        [
            [1.0, radius**2, radius**4],
            [0.0, 2.0 * radius, 4.0 * radius**3],
            [0.0, 2.0, 12.0 * radius**2],
        ]
    )
    rhs = np.array(
        [
            radius ** (2.0 - n),
            (2.0 - n) * radius ** (1.0 - n),
            (2.0 - n) * (1.0 - n) * radius ** (-float(n)),
        ]
    )
    a, b, c = np.linalg.solve(mat, rhs)
    return float(a), float(b), float(c)


@dataclass(frozen=True)
class EigenPotential:
    """A potential with closed-form zero-energy eigenfunction and decay class."""

    spec: PointSourceSpec
    weights: np.ndarray
    radii: np.ndarray           # possibly shrunk from spec.radii
    continuation: tuple[tuple[float, float, float], ...]
    decay_class: str = field(default="generic")

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def centers(self) -> np.ndarray:
        return self.spec.points

    @property
    def support_diameter(self) -> float:
        lo = np.min(self.centers - self.radii[:, None], axis=0)
        hi = np.max(self.centers + self.radii[:, None], axis=0)
        return float(np.linalg.norm(hi - lo))

    # -- closed-form evaluators ------------------------------------------------

    def _dists(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.norm(x[:, None, :] - self.centers[None, :, :], axis=2)

    def psi(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = self.dim
        c0 = green_constant(n)
        d = self._dists(x)
        out = np.zeros(x.shape[0])
        for i, mu in enumerate(self.weights):
            a, b, c = self.continuation[i]
            ri = d[:, i]
            inside = ri < self.radii[i]
            prof = np.where(inside, a + b * ri**2 + c * ri**4, np.maximum(ri, 1e-300) ** (2.0 - n))
            out += -c0 * mu * prof
        return out

    def grad_psi(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = self.dim
        c0 = green_constant(n)
        out = np.zeros_like(x)
        for i, mu in enumerate(self.weights):
            a, b, c = self.continuation[i]
            diff = x - self.centers[i]
            ri = np.linalg.norm(diff, axis=1)
            inside = ri < self.radii[i]
            safe = np.maximum(ri, 1e-300)
            dprof = np.where(inside, 2.0 * b + 4.0 * c * ri**2, (2.0 - n) * safe ** (-float(n)))
            out += -c0 * mu * dprof[:, None] * diff
        return out

    def lap_psi(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = self.dim
        c0 = green_constant(n)
        d = self._dists(x)
        out = np.zeros(x.shape[0])
        for i, mu in enumerate(self.weights):
            _, b, c = self.continuation[i]
            ri = d[:, i]
            inside = ri < self.radii[i]
            out += np.where(inside, -c0 * mu * (2.0 * n * b + (4.0 * n + 8.0) * c * ri**2), 0.0)
        return out

    def potential(self, x) -> np.ndarray:
        lap = self.lap_psi(x)
        ps = self.psi(x)
        return np.where(lap != 0.0, lap / np.where(ps == 0.0, 1.0, ps), 0.0)

    # -- derived quantities ----------------------------------------------------

    def eigen_residual(self, x) -> np.ndarray:
        """|(-Delta + V) psi| / (|Delta psi| + |V psi| + 1) at sample points."""
        lap = self.lap_psi(x)
        vpsi = self.potential(x) * self.psi(x)
        return np.abs(-lap + vpsi) / (np.abs(lap) + np.abs(vpsi) + 1.0)

    def build_support_nodes(self, per_ball_count: int, seed: int) -> SupportNodes:
        balls = [(self.centers[i], float(self.radii[i])) for i in range(len(self.weights))]
        return build_nodes(balls, per_ball_count, seed, dim=self.dim)


def build_eigenpair(
    spec: PointSourceSpec,
    prefer_weights=None,
    samples_per_ball: int = 1024,
    max_retries: int = 5,
    seed: int = 1234,
) -> EigenPotential:
    """Solve the moment weights, continue inside the balls, verify nonvanishing.

    If psi changes sign or gets too close to zero inside some ball, all radii
    shrink by 0.8 and the continuation is rebuilt, up to max_retries times.
    """
    mu = solve_weights(spec, prefer=prefer_weights)
    n = spec.dim
    radii = spec.radii.copy()
    rng = np.random.default_rng(seed)
    for attempt in range(max_retries + 1):
        cont = tuple(_continuation(float(r), n) for r in radii)
        ep = EigenPotential(
            spec=spec,
            weights=mu,
            radii=radii,
            continuation=cont,
            decay_class=spec.decay_class,
        )
        ok = True
        for i in range(len(mu)):
            dirs = rng.normal(size=(samples_per_ball, n))
            dirs /= np.linalg.norm(dirs, axis=1)[:, None]
            rr = radii[i] * rng.uniform(size=samples_per_ball) ** (1.0 / n)
            pts = spec.points[i] + dirs * rr[:, None]
            edge = spec.points[i] + dirs[: samples_per_ball // 4] * radii[i] * 0.999
            vals = ep.psi(np.vstack([pts, edge]))
            if np.min(vals) * np.max(vals) <= 0 or np.min(np.abs(vals)) < 1e-12:
                ok = False
                break
        if ok:
            return ep
        radii = radii * 0.8
    raise ConstructionError("psi vanishes inside a source ball even after radius shrinking")


def moment_integrals(ep: EigenPotential, nodes: SupportNodes) -> tuple[float, np.ndarray]:
    """Quadrature of V psi and x_j V psi over the support (V psi = Delta psi)."""
    lap = ep.lap_psi(nodes.nodes)
    m0 = float(np.sum(nodes.weights * lap))
    m1 = nodes.nodes.T @ (nodes.weights * lap)
    return m0, m1


def moment_error_estimate(ep: EigenPotential, per_ball: int, seed: int) -> float:
    """A-posteriori quadrature error: difference between N and 2N node moments."""
    n1 = ep.build_support_nodes(per_ball, seed)
    n2 = ep.build_support_nodes(2 * per_ball, seed)
    a0, a1 = moment_integrals(ep, n1)
    b0, b1 = moment_integrals(ep, n2)
    scale = float(np.sum(np.abs(ep.weights)))
    return max(abs(a0 - b0), float(np.max(np.abs(a1 - b1))), 1e-12 * scale)


def flux_moments(ep: EigenPotential, radius_factor: float = 50.0, ndir: int = 512,
                 seed: int = 5) -> float:
    """Divergence-theorem estimate of integral Delta psi dx via the boundary flux.

    Integrates d(psi)/dr over a large sphere numerically; for the point-source
    field this equals the total source mass sum_i mu_i.
    """
    n = ep.dim
    R = radius_factor * max(1e-9, ep.support_diameter)
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(ndir, n))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    pts = dirs * R
    grads = ep.grad_psi(pts)
    radial = np.sum(grads * dirs, axis=1)
    return float(np.mean(radial) * sphere_area(n) * R ** (n - 1))


def decay_slope(
    ep: EigenPotential,
    radii_grid=None,
    ndir: int = 64,
    seed: int = 17,
) -> DecayFitResult:
    """Fitted slope of log max_{|x|=R} |psi| against log R."""
    sd = ep.support_diameter
    if radii_grid is None:
        radii_grid = np.geomspace(4.0 * sd, 40.0 * sd, 16)
    radii_grid = np.asarray(radii_grid, dtype=float)
    if np.any(radii_grid < 4.0 * sd):
        raise ValueError("radii must be at least 4x the support diameter")
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(ndir, ep.dim))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    vals = [float(np.max(np.abs(ep.psi(dirs * R)))) for R in radii_grid]
    return fit_loglog(radii_grid, vals)


def l2_tail_converges(ep: EigenPotential) -> bool:
    """Square-integrability proxy: fitted decay slope s satisfies 2|s| > dim."""
    fit = decay_slope(ep)
    return 2.0 * abs(fit.slope) > ep.dim


# -- canonical examples of the three decay classes ------------------------------


def default_source_spec(decay_class: str, dim: int = 5) -> tuple[PointSourceSpec, np.ndarray | None]:
    """Reference geometry and preferred weights for each decay class.

    generic: one source.  first: an aligned dipole, scaled small so that the
    zero-mode coupling dominates the free evolution in the scan window.
    second: center plus axis pairs with symmetric weights killing mass and
    first moments.
    """
    validate_dimension(dim)
    if decay_class == "generic":
        pts = np.zeros((1, dim))
        return PointSourceSpec(dim, pts, np.array([0.5]), None), None
    if decay_class == "first":
        d = 0.002
        pts = np.zeros((2, dim))
        pts[0, 0] = -d
        pts[1, 0] = d
        return PointSourceSpec(dim, pts, np.full(2, 0.93 * d), 0), np.array([1.0, -1.0])
    if decay_class == "second":
        # distinct spacings per axis keep the quadrupole anisotropic: an
        # isotropic second moment of a harmonic profile contributes nothing
        # and the far field would overshoot to |x|^{-n-2}
        radius = 0.26
        pts = [np.zeros(dim)]
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = 1.3 * (0.8 + 0.1 * j)
            pts.extend([e.copy(), -e])
        pts = np.asarray(pts)
        prefer = np.concatenate([[-2.0 * dim], np.ones(2 * dim)])
        return PointSourceSpec(dim, pts, np.full(2 * dim + 1, radius), 1), prefer
    raise ValueError(f"unknown decay class {decay_class!r}")
