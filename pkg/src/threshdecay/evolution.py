"""Time evolution through the spectral-measure integral.

The propagator kernel restricted to low energies is the oscillatory integral
(1/2 pi i) * integral_0^lambda1 exp(i t lambda^2) lambda chi(lambda)
[R_+(lambda^2) - R_-(lambda^2)](x, y) dlambda, with the resolvent difference
evaluated through the symmetric identity R = R0 - R0 v M^{-1} v R0.  All
outgoing-minus-incoming differences are computed from closed-form imaginary
parts and the product identity for inverse differences, so the small-lambda
cancellation is structural rather than numerical.

The integrand is independent of t, so decay scans sample it once on dyadic
Chebyshev panels in lambda and hand the panel interpolant to the
phase-adaptive oscillatory integrator for every t; the surrogate error is far
below the smallest kernel values in the supported time window and is checked
directly against pointwise evaluation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .fitting import DecayFitResult, DegenerateFitError, fit_loglog, fit_loglog_multi
from .operators import DiscretePotential, JNFactor, SpectralObjects
from .quadrature import CutoffSpec, cutoff_eval, oscillatory_integrate

logger = logging.getLogger(__name__)

CANCELLATION_FLOOR = 1e-3


@dataclass(frozen=True)
class PropagatorSample:
    """Low-energy propagator kernel value at (x, y, t) with its free/tail split."""

    t: float
    x: np.ndarray
    y: np.ndarray
    value: complex
    free_component: complex
    tail_component: complex


def make_probe_pairs(
    support_diameter: float,
    seed: int,
    count: int = 12,
    radius_range: tuple[float, float] = (2.0, 6.0),
    dim: int = 5,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded probe pairs with |x|, |y| in radius_range * support_diameter."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        dx = rng.normal(size=dim)
        dx /= np.linalg.norm(dx)
        dy = rng.normal(size=dim)
        dy /= np.linalg.norm(dy)
        rx = rng.uniform(*radius_range) * support_diameter
        ry = rng.uniform(*radius_range) * support_diameter
        pairs.append((dx * rx, dy * ry))
    return pairs


class StoneEngine:
    """Evaluates lambda * [R_+ - R_-](lambda^2)(x_p, y_p) for a fixed pair set.

    One LU factorization of the regularized outgoing matrix per lambda serves
    every pair; the incoming branch is reached by conjugation.
    """

    def __init__(self, so: SpectralObjects | None, dp: DiscretePotential | None, pairs):
        self.dp = dp
        self.so = so
        self.pairs = list(pairs)
        X = np.array([p[0] for p in self.pairs])
        Y = np.array([p[1] for p in self.pairs])
        self.r_xy = np.linalg.norm(X - Y, axis=1)
        if dp is not None:
            Z = dp.nodes
            self.dim = dp.dim
            self.r_x = np.linalg.norm(X[:, None, :] - Z[None, :, :], axis=2)
            self.r_y = np.linalg.norm(Y[:, None, :] - Z[None, :, :], axis=2)
            if np.min(self.r_x) <= 0 or np.min(self.r_y) <= 0:
                raise ValueError("probe points must lie outside the potential support")
            self.basis = so.s1.basis if so is not None else np.zeros((dp.count, 0))
        else:
            self.dim = X.shape[1]

    @property
    def npairs(self) -> int:
        return len(self.pairs)

    def free_difference(self, lam: float) -> np.ndarray:
        """2i Im K_n(lambda, |x-y|) per pair."""
        return 2j * kernels.resolvent_kernel_imag(self.dim, lam, self.r_xy)

    def difference_row(self, lam: float) -> tuple[np.ndarray, np.ndarray]:
        """(free, tail) parts of [R_+ - R_-](lambda^2) at every pair."""
        free = self.free_difference(lam)
        if self.dp is None:
            return free, np.zeros_like(free)
        if lam < CANCELLATION_FLOOR:
            logger.debug("lambda=%g below the cancellation floor %g", lam, CANCELLATION_FLOOR)
        dp = self.dp
        n = self.dim
        vt = dp.vtilde
        ax_p = (kernels.resolvent_kernel(n, lam, self.r_x, +1) * vt[None, :]).T
        ay_p = (kernels.resolvent_kernel(n, lam, self.r_y, +1) * vt[None, :]).T
        dax = 2j * (kernels.resolvent_kernel_imag(n, lam, self.r_x) * vt[None, :]).T
        day = 2j * (kernels.resolvent_kernel_imag(n, lam, self.r_y) * vt[None, :]).T
        ax_m = ax_p - dax
        fac = JNFactor(dp.bs_matrix(lam, +1), self.basis)
        # batched solves: outgoing applied to [a+_y | a-_x | conj(a+_y) | a+_x]
        rhs = np.hstack([ay_p, ax_m, np.conj(ay_p), ax_p])
        sol = fac.solve(rhs)
        P = self.npairs
        m_ay = sol[:, :P]                      # M_+^{-1} a+_y
        m_axm = sol[:, P : 2 * P]              # M_+^{-1} a-_x
        mm_ay = np.conj(sol[:, 2 * P : 3 * P])  # M_-^{-1} a+_y
        mm_axm = np.conj(sol[:, 3 * P :])       # M_-^{-1} a-_x
        imm = dp.bs_imag(lam)
        t1 = np.sum(dax * m_ay, axis=0)
        t2 = np.sum(m_axm * ((-2j) * (imm @ mm_ay)), axis=0)
        t3 = np.sum(mm_axm * day, axis=0)
        tail = -(t1 + t2 + t3)
        return free, tail

    def eval_block(self, lams, component: str = "full") -> np.ndarray:
        """lambda * difference for an array of lambdas; shape (n_lambda, n_pairs)."""
        lams = np.atleast_1d(np.asarray(lams, dtype=float))
        out = np.empty((lams.size, self.npairs), dtype=complex)
        for i, lam in enumerate(lams):
            free, tail = self.difference_row(lam)
            if component == "full":
                row = free + tail
            elif component == "free":
                row = free
            elif component == "tail":
                row = tail
            else:
                raise ValueError(f"unknown component {component!r}")
            out[i] = lam * row
        return out


class ChebSurrogate:
    """Dyadic-panel Chebyshev interpolant of a vector-valued map of lambda."""

    def __init__(self, fn, lo: float, hi: float, order: int = 24):
        edges = [hi]
        while edges[-1] / 2.0 > lo:
            edges.append(edges[-1] / 2.0)
        edges.append(lo)
        self.edges = np.array(edges[::-1])
        k = np.arange(order)
        self.order = order
        # Chebyshev points of the first kind, ascending
        self.xc = np.sort(np.cos(np.pi * (k + 0.5) / order))
        self.wb = ((-1.0) ** k * np.sin(np.pi * (k + 0.5) / order))[::-1]
        self.panels = []
        for a, b in zip(self.edges[:-1], self.edges[1:]):
            lams = (a + b) / 2.0 + (b - a) / 2.0 * self.xc
            self.panels.append((a, b, lams, np.asarray(fn(lams))))
        self.n_evals = (len(self.edges) - 1) * order

    def __call__(self, q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        width = self.panels[0][3].shape[1]
        out = np.empty((q.size, width), dtype=complex)
        done = np.zeros(q.size, dtype=bool)
        for pi, (a, b, lams, vals) in enumerate(self.panels):
            mask = (~done) & (q <= b * (1 + 1e-12)) if pi < len(self.panels) - 1 else ~done
            if not mask.any():
                continue
            qq = q[mask]
            d = qq[:, None] - lams[None, :]
            exact = np.abs(d) < 1e-15
            C = self.wb[None, :] / np.where(exact, 1.0, d)
            res = (C @ vals) / np.sum(C, axis=1)[:, None]
            hit = exact.any(axis=1)
            if hit.any():
                res[hit] = vals[np.argmax(exact[hit], axis=1)]
            out[mask] = res
            done[mask] = True
        return out


def resolvent_difference_kernel(
    so: SpectralObjects | None,
    dp: DiscretePotential | None,
    x,
    y,
    lam: float,
) -> complex:
    """[R_+ - R_-](lambda^2)(x, y) for external points x, y."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if dp is not None and lam < CANCELLATION_FLOOR:
        logger.warning(
            "lambda=%g below %g: individual resolvents are steeply singular here",
            lam,
            CANCELLATION_FLOOR,
        )
    engine = StoneEngine(so, dp, [(np.asarray(x, float), np.asarray(y, float))])
    free, tail = engine.difference_row(lam)
    return complex(free[0] + tail[0])


def stone_kernel(
    so: SpectralObjects | None,
    dp: DiscretePotential | None,
    x,
    y,
    t: float,
    spec: CutoffSpec,
    *,
    lambda_min: float = 1e-4,
    order: int = 15,
    phase_per_panel: float = math.pi / 2.0,
) -> PropagatorSample:
    """Low-energy propagator kernel at one pair, with the free/tail split."""
    if abs(t) < 1.0:
        raise ValueError("the low-energy propagator scan is meant for |t| >= 1")
    engine = StoneEngine(so, dp, [(np.asarray(x, float), np.asarray(y, float))])
    conj = t < 0
    tt = abs(t)

    def f_full(lams):
        return engine.eval_block(lams, "full")

    def f_free(lams):
        return engine.eval_block(lams, "free")

    lo = 0.0 if dp is None else lambda_min
    full = oscillatory_integrate(
        tt, f_full, spec, lambda_min=lo, order=order, phase_per_panel=phase_per_panel
    )[0] / (2j * math.pi)
    free = oscillatory_integrate(
        tt, f_free, spec, lambda_min=0.0, order=order, phase_per_panel=phase_per_panel
    )[0] / (2j * math.pi)
    if conj:
        full, free = np.conj(full), np.conj(free)
    return PropagatorSample(
        t=t,
        x=np.asarray(x, float),
        y=np.asarray(y, float),
        value=complex(full),
        free_component=complex(free),
        tail_component=complex(full - free),
    )


@dataclass
class DecayScan:
    """Propagator values over a (t, pair) grid plus the fitted decay exponent."""

    t_grid: np.ndarray
    values: np.ndarray            # (n_t, n_pairs) complex
    fit: DecayFitResult
    pairs: list
    component: str = "full"
    surrogate_error: float = float("nan")


def _scan_values(
    engine: StoneEngine,
    t_grid: np.ndarray,
    spec: CutoffSpec,
    component: str,
    lambda_min: float,
    order: int,
    phase_per_panel: float,
    use_surrogate: bool,
    surrogate_order: int,
):
    lo = 0.0 if engine.dp is None else lambda_min
    if use_surrogate and engine.dp is not None:
        sur = ChebSurrogate(
            lambda lams: engine.eval_block(lams, component), max(lo, 1e-4), spec.lambda1,
            order=surrogate_order,
        )
        fn = sur
        # spot-check the interpolant against direct evaluation
        probes = np.geomspace(max(lo, 1e-4) * 1.7, spec.lambda1 * 0.93, 5)
        direct = engine.eval_block(probes, component)
        approx = sur(probes)
        sur_err = float(
            np.max(np.abs(direct - approx)) / max(np.max(np.abs(direct)), 1e-300)
        )
    else:
        fn = lambda lams: engine.eval_block(lams, component)  # noqa: E731
        sur_err = 0.0
    rows = []
    for t in t_grid:
        rows.append(
            oscillatory_integrate(
                t, fn, spec, lambda_min=lo, order=order, phase_per_panel=phase_per_panel
            )
            / (2j * math.pi)
        )
    return np.array(rows), sur_err


def decay_scan(
    so: SpectralObjects | None,
    dp: DiscretePotential | None,
    pairs,
    t_grid=None,
    spec: CutoffSpec | None = None,
    *,
    component: str = "full",
    lambda_min: float = 1e-4,
    order: int = 15,
    phase_per_panel: float = math.pi / 2.0,
    use_surrogate: bool = True,
    surrogate_order: int = 24,
) -> DecayScan:
    """Fit the decay exponent of max_pairs |propagator kernel| over the t grid."""
    if spec is None:
        spec = CutoffSpec()
    if t_grid is None:
        t_grid = np.geomspace(1e2, 1e5, 9)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 8:
        raise ValueError("need at least 8 log-spaced times")
    if len(pairs) < 12 and dp is not None:
        raise ValueError("need at least 12 probe pairs")
    engine = StoneEngine(so, dp, pairs)
    values, sur_err = _scan_values(
        engine, t_grid, spec, component, lambda_min, order, phase_per_panel,
        use_surrogate, surrogate_order,
    )
    fit = fit_loglog_multi(t_grid, values)
    return DecayScan(
        t_grid=t_grid,
        values=values,
        fit=fit,
        pairs=list(pairs),
        component=component,
        surrogate_error=sur_err,
    )


@dataclass
class LeadingTermFit:
    constant: complex
    correlation: float
    predictor: np.ndarray
    values: np.ndarray
    residual_fit: DecayFitResult | None = None


def rank_one_predictor(so: SpectralObjects, dp: DiscretePotential, pairs) -> np.ndarray:
    """Kernel of the expected leading rank-one operator at the probe pairs.

    Built from the chain as [P_e V 1](x) [1 V P_e](y): the inner V-integral is
    a node sum, the outer legs are zero-energy kernels to the probes.
    """
    X = np.array([p[0] for p in pairs])
    Y = np.array([p[1] for p in pairs])
    n = dp.dim
    c0 = kernels.green_constant(n)
    h = (dp.static_kernel() @ (dp.weights * dp.V_values)) * dp.vtilde
    inner = so.d1_sym @ h

    def leg(points):
        d = np.linalg.norm(points[:, None, :] - dp.nodes[None, :, :], axis=2)
        g = c0 * d ** (2.0 - n) * dp.vtilde[None, :]
        return g @ inner

    return leg(X) * leg(Y)


def leading_term_compare(
    so: SpectralObjects,
    dp: DiscretePotential,
    pairs,
    t: float = 1e4,
    spec: CutoffSpec | None = None,
    scan: DecayScan | None = None,
) -> LeadingTermFit:
    """Least-squares fit of the kernel against the rank-one predictor at time t.

    Returns the fitted scalar C with value ~ C * t^{2 - n/2} * predictor, the
    magnitude of the correlation across pairs, and (when a scan over a time
    grid is supplied) the decay fit of the residual after subtracting the
    fitted leading term.
    """
    if spec is None:
        spec = CutoffSpec()
    pred = rank_one_predictor(so, dp, pairs)
    scale = float(np.max(np.abs(pred)))
    if scale <= 1e-14 * max(1.0, float(np.linalg.norm(so.d1_sym))):
        raise DegenerateFitError("near-zero predictor: potential is not in the generic class")
    engine = StoneEngine(so, dp, pairs)
    vals, _ = _scan_values(
        engine, np.array([t]), spec, "full", 1e-4, 15, math.pi / 2.0, True, 24
    )
    vals = vals[0]
    n = dp.dim
    tpow = t ** (2.0 - n / 2.0)
    basis = pred * tpow
    const = complex(np.vdot(basis, vals) / np.vdot(basis, basis))
    corr = abs(np.vdot(basis, vals)) / (np.linalg.norm(basis) * np.linalg.norm(vals))
    residual_fit = None
    if scan is not None:
        resid = scan.values - const * scan.t_grid[:, None] ** (2.0 - n / 2.0) * pred[None, :]
        residual_fit = fit_loglog_multi(scan.t_grid, resid)
    return LeadingTermFit(
        constant=const,
        correlation=float(corr),
        predictor=pred,
        values=vals,
        residual_fit=residual_fit,
    )


def born_series_kernel(
    dp: DiscretePotential,
    x,
    y,
    lam: float,
    sign: int = +1,
    k_max: int = 2,
) -> complex:
    """Diagnostic truncated Born series sum_{k<=k_max} (-1)^k [R0 (V R0)^k](x,y).

    Node-contracted with the same cell-averaged kernels as everything else;
    convergence to the full resolvent is not asserted.
    """
    if k_max > 6:
        raise ValueError("k_max capped at 6")
    n = dp.dim
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    rxy = float(np.linalg.norm(x - y))
    total = complex(kernels.resolvent_kernel(n, lam, rxy, sign))
    if k_max == 0:
        return total
    rx = np.linalg.norm(x - dp.nodes, axis=1)
    ry = np.linalg.norm(y - dp.nodes, axis=1)
    row_x = kernels.resolvent_kernel(n, lam, rx, sign)
    col_y = kernels.resolvent_kernel(n, lam, ry, sign)
    K = dp.static_kernel().astype(complex) + (
        dp.reduced_kernel(lam) if sign > 0 else np.conj(dp.reduced_kernel(lam))
    )
    vq = dp.V_values * dp.weights
    s = col_y.astype(complex)
    signfac = -1.0
    for _ in range(1, k_max + 1):
        total += signfac * complex(row_x @ (vq * s))
        s = K @ (vq * s)
        signfac = -signfac
    return total
