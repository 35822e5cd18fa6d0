"""Bounded Levenberg-Marquardt least squares with frozen parameters.

The engine is deterministic: no randomness, no threading, and a fixed order
of floating-point operations, so identical inputs give bit-identical
:class:`FitResult` objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .models import MODELS, ModelSpec
from .quantities import BOHR_MAGNETON_OVER_KB

LAMBDA_START = 1e-3
LAMBDA_ACCEPT = 0.3
LAMBDA_REJECT = 10.0
LAMBDA_MIN = 1e-12
LAMBDA_MAX = 1e12
CHI2_RTOL = 1e-10
STEP_TOL = 1e-10
MAX_ITER = 500
COND_LIMIT = 1e13
TLS_ZERO_THRESHOLD = 1e-4  # kHz/K


class FitArgumentError(ValueError):
    """Invalid fit request: bad shapes, initial point out of bounds, nothing free."""


@dataclass
class Dataset:
    """Samples ``(x, y, sigma)`` sorted by ``x``.

    ``sigma`` is optional; when given every entry must be positive and the
    fit is weighted by ``1/sigma²``. Duplicate abscissae are kept and flagged.
    """

    x: np.ndarray
    y: np.ndarray
    sigma: Optional[np.ndarray] = None
    x_unit: str = ""
    y_unit: str = ""
    duplicates: bool = field(default=False, init=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise FitArgumentError(f"x and y lengths differ: {x.size} vs {y.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise FitArgumentError("x and y must be finite")
        order = np.argsort(x, kind="stable")
        self.x = x[order]
        self.y = y[order]
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float).ravel()
            if s.shape != x.shape:
                raise FitArgumentError("sigma length differs from x")
            if np.any(~(s > 0)):
                raise FitArgumentError("sigma entries must be > 0")
            self.sigma = s[order]
        self.duplicates = bool(np.any(np.diff(self.x) == 0))

    def __len__(self):
        return self.x.size

    @property
    def weights(self) -> np.ndarray:
        if self.sigma is None:
            return np.ones_like(self.y)
        return 1.0 / self.sigma**2


@dataclass
class FitResult:
    model: str
    param_names: tuple
    params: np.ndarray
    stderr: np.ndarray
    covariance: np.ndarray
    chi2: float
    n_iter: int
    converged: bool
    condition_warning: bool
    free: np.ndarray
    n_points: int
    message: str = ""
    flags: dict = field(default_factory=dict)

    @property
    def dof(self) -> int:
        return self.n_points - int(self.free.sum())

    def value(self, name):
        return float(self.params[self.param_names.index(name)])

    def error(self, name):
        return float(self.stderr[self.param_names.index(name)])

    def as_dict(self):
        return dict(zip(self.param_names, (float(v) for v in self.params)))


# --------------------------------------------------------------------------
# building blocks


def finite_diff_jacobian(model: ModelSpec, params, x, rel_step=1e-6, abs_step=1e-9, richardson=False):
    """Central-difference Jacobian ``∂f/∂p``, shape ``(len(x), n_params)``.

    Step per parameter is ``max(rel_step·|p|, abs_step)`` rounded to the
    nearest power of two, so ``p ± h`` carries no rounding. Parameters must
    sit at least one step inside their bounds. With ``richardson=True`` the
    differences at ``h`` and ``h/2`` are combined to cancel the ``h²`` error
    term, which allows a larger step and therefore less round-off.
    """
    p = np.array(params, dtype=float)
    x = np.ascontiguousarray(x, dtype=float)
    jac = np.empty((x.size, p.size))

    def central(i, h):
        hi = p.copy()
        lo = p.copy()
        hi[i] += h
        lo[i] -= h
        return (model.func(x, hi)[0] - model.func(x, lo)[0]) / (hi[i] - lo[i])

    for i in range(p.size):
        h = 2.0 ** round(math.log2(max(rel_step * abs(p[i]), abs_step)))
        if richardson:
            jac[:, i] = (4.0 * central(i, 0.5 * h) - central(i, h)) / 3.0
        else:
            jac[:, i] = central(i, h)
    return jac


def _model_jacobian(model, x, p):
    y, jac = model.func(x, p)
    if jac is None:
        jac = finite_diff_jacobian(model, p, x)
    return y, jac


def uncertainties(jacobian, residuals, weights=None):
    """Covariance-based 1σ errors.

    ``cov = chi2/(N-k) · (JᵀWJ)⁻¹`` with ``chi2 = Σ w r²``. A rank-deficient
    ``J`` falls back to the pseudo-inverse. Returns
    ``(stderr, covariance, rank_deficient)``.
    """
    jac = np.atleast_2d(np.asarray(jacobian, dtype=float))
    r = np.asarray(residuals, dtype=float)
    w = np.ones_like(r) if weights is None else np.asarray(weights, dtype=float)
    n, k = jac.shape
    chi2 = float(np.sum(w * r * r))
    if n <= k:
        cov = np.full((k, k), np.nan)
        return np.full(k, np.nan), cov, True
    sw = np.sqrt(w)[:, None] * jac
    colnorm = np.sqrt(np.sum(sw * sw, axis=0))
    deficient = bool(np.any(colnorm == 0))
    colnorm = np.where(colnorm > 0, colnorm, 1.0)
    a = sw / colnorm
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = s[0] / COND_LIMIT if s.size and s[0] > 0 else 0.0
    keep = s > cutoff
    deficient = deficient or not np.all(keep)
    inv_s2 = np.where(keep, 1.0 / np.where(keep, s, 1.0) ** 2, 0.0)
    cov_a = (vt.T * inv_s2) @ vt
    cov = chi2 / (n - k) * cov_a / np.outer(colnorm, colnorm)
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return stderr, cov, deficient


# --------------------------------------------------------------------------
# engine


def _as_mask(frozen, n, names):
    mask = np.zeros(n, dtype=bool)
    if frozen is None:
        return mask
    items = list(frozen)
    if items and all(isinstance(v, str) for v in items):
        for name in items:
            mask[names.index(name)] = True
    elif items:
        mask[:] = np.asarray(items, dtype=bool)
    return mask


def lm_fit(
    model: ModelSpec,
    data: Dataset,
    init,
    bounds=None,
    frozen=None,
    max_iter: int = MAX_ITER,
    callback=None,
) -> FitResult:
    """Weighted bounded Levenberg-Marquardt fit of ``model`` to ``data``.

    Parameters
    ----------
    model : ModelSpec
    data : Dataset
    init : sequence of float
        Starting point; must lie inside ``bounds``.
    bounds : (lower, upper), optional
        Box bounds; defaults to the model's own.
    frozen : bool mask or iterable of parameter names, optional
        Parameters held at their ``init`` value.
    max_iter : int
        Cap on accepted steps.
    callback : callable, optional
        Called as ``callback(params, chi2, accepted)`` for every trial point.

    Iterates are projected onto the box after every step. Fitting stops when
    an accepted step lowers chi2 by less than 1e-10 relative, when the
    scaled step falls below 1e-10, or after ``max_iter`` accepted steps.
    """
    names = model.param_names
    p = np.array(init, dtype=float)
    if p.shape != (model.n_params,):
        raise FitArgumentError(f"{model.name} takes {model.n_params} parameters, got {p.size}")
    lo, hi = (model.lower, model.upper) if bounds is None else bounds
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    if np.any(p < lo) or np.any(p > hi) or not np.all(np.isfinite(p)):
        bad = [n for n, v, a, b in zip(names, p, lo, hi) if not (a <= v <= b)]
        raise FitArgumentError(f"initial parameters outside bounds: {', '.join(bad)}")
    free = ~_as_mask(frozen, p.size, names)
    k = int(free.sum())
    if k == 0:
        raise FitArgumentError("no free parameters")
    if len(data) < k:
        raise FitArgumentError(f"{len(data)} points cannot constrain {k} free parameters")

    x, y = data.x, data.y
    w = data.weights
    sw = np.sqrt(w)
    scale = np.maximum(np.abs(p[free]), 1.0)
    qlo = lo[free] / scale
    qhi = hi[free] / scale

    def residuals(pv):
        f, _ = model.func(x, pv)
        return (y - f) * sw

    def scaled_jac(pv):
        _, jac = _model_jacobian(model, x, pv)
        # d(residual)/dq = -sw * df/dp * scale
        return -(jac[:, free] * scale) * sw[:, None]

    r = residuals(p)
    chi2 = float(r @ r)
    lam = LAMBDA_START
    n_iter = 0
    trials = 0
    converged = False
    singular = False
    message = "iteration limit reached"

    jr = scaled_jac(p)
    while n_iter < max_iter and trials < 20 * max_iter:
        if chi2 == 0.0:
            converged, message = True, "exact fit"
            break
        trials += 1
        q = p[free] / scale
        grad = jr.T @ r
        a = jr.T @ jr
        # freeze components sitting on a bound whose descent direction points outward
        at_lo = (q <= qlo) & (grad > 0)
        at_hi = (q >= qhi) & (grad < 0)
        act = ~(at_lo | at_hi)
        if not np.any(act):
            converged, message = True, "stationary on bounds"
            break
        aa = a[np.ix_(act, act)]
        diag = np.diag(aa).copy()
        floor = 1e-15 * max(float(diag.max()), 1e-300)
        damp = np.maximum(diag, floor)
        try:
            step_act = np.linalg.solve(aa + lam * np.diag(damp), -grad[act])
        except np.linalg.LinAlgError:
            singular = True
            step_act = np.linalg.lstsq(aa + lam * np.diag(damp), -grad[act], rcond=None)[0]
        dq = np.zeros_like(q)
        dq[act] = step_act
        q_new = np.clip(q + dq, qlo, qhi)
        step = float(np.max(np.abs(q_new - q)))
        p_new = p.copy()
        p_new[free] = q_new * scale
        r_new = residuals(p_new)
        chi2_new = float(r_new @ r_new)
        accepted = bool(np.isfinite(chi2_new) and chi2_new < chi2)
        if callback is not None:
            callback(p_new.copy(), chi2_new, accepted)
        if accepted:
            rel = (chi2 - chi2_new) / chi2
            p, r, chi2 = p_new, r_new, chi2_new
            lam = max(lam * LAMBDA_ACCEPT, LAMBDA_MIN)
            n_iter += 1
            jr = scaled_jac(p)
            if rel < CHI2_RTOL:
                converged, message = True, "relative chi2 decrease below tolerance"
                break
            if step < STEP_TOL:
                converged, message = True, "step below tolerance"
                break
        else:
            lam = min(lam * LAMBDA_REJECT, LAMBDA_MAX)
            if step < STEP_TOL:
                converged, message = True, "step below tolerance"
                break

    # parameters pinned on a bound (zero or outward gradient) carry no
    # uncertainty, like frozen ones
    grad = jr.T @ r
    q = p[free] / scale
    pinned_sub = ((q <= qlo) & (grad >= 0)) | ((q >= qhi) & (grad <= 0))
    pinned = np.zeros(p.size, dtype=bool)
    pinned[np.nonzero(free)[0][pinned_sub]] = True
    use = free & ~pinned
    f_final, jac_final = _model_jacobian(model, x, p)
    cov = np.zeros((p.size, p.size))
    stderr = np.zeros(p.size)
    deficient = False
    if np.any(use):
        stderr_use, cov_use, deficient = uncertainties(jac_final[:, use], y - f_final, w)
        cov[np.ix_(use, use)] = cov_use
        stderr[use] = stderr_use
    condition_warning = singular or deficient
    if condition_warning:
        converged = False
        message = "singular normal equations; " + message
    flags = {}
    if np.any(pinned):
        flags["at_bound"] = [n for n, b in zip(names, pinned) if b]
    return FitResult(
        model=model.name,
        param_names=names,
        params=p,
        stderr=stderr,
        covariance=cov,
        chi2=chi2,
        n_iter=n_iter,
        converged=converged,
        condition_warning=condition_warning,
        free=free,
        n_points=len(data),
        message=message,
        flags=flags,
    )


# --------------------------------------------------------------------------
# initial-guess heuristics


def _first_crossing(x, y, level):
    """Interpolated x where ``y`` first drops to ``level``; None if it never does."""
    below = np.nonzero(y <= level)[0]
    if below.size == 0:
        return None
    i = below[0]
    if i == 0:
        return float(x[0])
    x0, x1, y0, y1 = x[i - 1], x[i], y[i - 1], y[i]
    if y1 == y0:
        return float(x1)
    return float(x0 + (level - y0) * (x1 - x0) / (y1 - y0))


def guess_mims(data: Dataset):
    x, y = data.x, data.y
    a0 = float(max(y[0], np.max(y) * 0.5, 1e-12))
    tau_e = _first_crossing(x, y, a0 / math.e)
    if tau_e is not None and tau_e > 0:
        t2 = 2.0 * tau_e
    else:
        yl = max(float(y[-1]), 1e-12 * a0)
        ratio = max(math.log(a0 / yl), 1e-3)
        t2 = 2.0 * float(x[-1]) / ratio
    return np.array([a0, max(t2, 1e-6), 1.2])


def guess_lorentzian(data: Dataset):
    x, y = data.x, data.y
    baseline = float(np.min(y))
    i = int(np.argmax(y))
    peak = float(y[i] - baseline)
    half = baseline + 0.5 * peak
    above = np.nonzero(y >= half)[0]
    width = float(x[above[-1]] - x[above[0]]) if above.size > 1 else 0.0
    if width <= 0:
        width = float(x[-1] - x[0]) / 10.0
    return np.array([float(x[i]), width, max(peak, 1e-12), baseline])


def guess_gamma_t(data: Dataset):
    t, y = data.x, data.y
    g0 = float(max(y[0], 0.0))
    if t.size >= 2 and t[-1] ** 7 > t[-2] ** 7:
        a_tpr = float((y[-1] - y[-2]) / (t[-1] ** 7 - t[-2] ** 7))
    else:
        a_tpr = 0.0
    a_tpr = max(a_tpr, 0.0)
    rest = y - g0 - a_tpr * t**7
    amp = float(max(np.percentile(rest, 75), 1e-6))
    cross = np.nonzero(rest >= 0.42 * amp)[0]
    xi = float(t[cross[0]]) if cross.size else float(np.median(t))
    return np.array([g0, amp, max(xi, 1e-3), 0.0, a_tpr])


def guess_gamma_b(data: Dataset, t_fixed):
    b, y = data.x, data.y
    g0 = float(max(np.min(y), 0.0))
    amp = float(max(y[0] - g0, 1e-6))
    b_half = _first_crossing(b, y - g0, 0.42 * amp)
    if b_half is None or b_half <= 0:
        b_half = float(b[-1]) if b[-1] > 0 else 1.0
    g = 2.0 * t_fixed / (BOHR_MAGNETON_OVER_KB * b_half)
    return np.array([g0, amp, g, t_fixed])


def guess_double_exp(data: Dataset):
    t, y = data.x, data.y
    y0 = float(max(y[0], 1e-12))
    half = t.size // 2
    tt, yy = t[half:], y[half:]
    good = yy > 0
    if good.sum() >= 2:
        slope, icpt = np.polyfit(tt[good], np.log(yy[good]), 1)
    else:
        slope, icpt = -1.0 / max(float(t[-1]), 1e-6), math.log(y0 / 2)
    tau2 = -1.0 / slope if slope < 0 else float(t[-1])
    a2 = float(min(math.exp(icpt), y0))
    a1 = max(y0 - a2, 0.05 * y0)
    return np.array([a1, a2, tau2 / 10.0, tau2])


# --------------------------------------------------------------------------
# per-measurement fits


def _apply_overrides(model, init, fix=None, overrides=None):
    init = np.array(init, dtype=float)
    frozen = np.zeros(model.n_params, dtype=bool)
    for name, val in (overrides or {}).items():
        init[model.index(name)] = float(val)
    for name, val in (fix or {}).items():
        i = model.index(name)
        init[i] = float(val)
        frozen[i] = True
    lo, hi = np.array(model.lower), np.array(model.upper)
    init = np.where(frozen, init, np.clip(init, lo, hi))
    return init, frozen


def fit_decay(data: Dataset, fix=None, init=None) -> FitResult:
    """Photon-echo decay fit (amplitude, T2 in µs, stretch exponent)."""
    model = MODELS["mims"]
    p0, frozen = _apply_overrides(model, guess_mims(data), fix, init)
    return lm_fit(model, data, p0, frozen=frozen)


def fit_temperature(data: Dataset, fix=None, init=None) -> FitResult:
    """Linewidth-vs-temperature fit.

    A fitted ``alpha_tls`` below 1e-4 kHz/K is reported as exactly 0 with
    ``flags["tls_eliminated"] = True``.
    """
    model = MODELS["gamma_t"]
    p0, frozen = _apply_overrides(model, guess_gamma_t(data), fix, init)
    res = lm_fit(model, data, p0, frozen=frozen)
    i = model.index("alpha_tls")
    eliminated = bool(res.params[i] < TLS_ZERO_THRESHOLD)
    if eliminated:
        res.params[i] = 0.0
    res.flags["tls_eliminated"] = eliminated
    return res


def fit_field(data: Dataset, temperature_k, fix=None, init=None) -> FitResult:
    """Linewidth-vs-field fit at a fixed sample temperature (K, held frozen)."""
    model = MODELS["gamma_b"]
    fix = dict(fix or {})
    fix.setdefault("T_fixed", float(temperature_k))
    p0, frozen = _apply_overrides(model, guess_gamma_b(data, fix["T_fixed"]), fix, init)
    return lm_fit(model, data, p0, frozen=frozen)


def fit_line(data: Dataset, fix=None, init=None) -> FitResult:
    """Lorentzian inhomogeneous-line fit (GHz)."""
    model = MODELS["lorentzian"]
    p0, frozen = _apply_overrides(model, guess_lorentzian(data), fix, init)
    return lm_fit(model, data, p0, frozen=frozen)


def fit_hole(data: Dataset, fix=None, init=None) -> FitResult:
    """Double-exponential hole-area decay fit; output ordered ``tau1 <= tau2``."""
    model = MODELS["double_exp"]
    p0, frozen = _apply_overrides(model, guess_double_exp(data), fix, init)
    res = lm_fit(model, data, p0, frozen=frozen)
    if res.params[2] > res.params[3]:
        perm = np.array([1, 0, 3, 2])
        res.params = res.params[perm]
        res.stderr = res.stderr[perm]
        res.covariance = res.covariance[np.ix_(perm, perm)]
        res.free = res.free[perm]
    return res
