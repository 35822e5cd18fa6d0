"""Closed-form decoherence and storage models.

Each model is available two ways:

* a typed function (``mims_decay(tau, MimsParams(...))``) returning the value
  and the analytic partial derivatives with respect to every parameter, in
  field order;
* a :class:`ModelSpec` in :data:`MODELS`, the flat-vector form the fitting
  engine consumes.

Units follow :mod:`reicoh.quantities`; hole-burning times are in hours.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Callable, Optional

import numpy as np

from . import kernels
from .quantities import DomainError

INF = math.inf


# --------------------------------------------------------------------------
# parameter containers


def _require(cond, msg):
    if not cond:
        raise DomainError(msg)


@dataclass(frozen=True)
class MimsParams:
    """Echo-decay parameters: amplitude, coherence time (µs), stretch exponent."""

    A0: float
    T2: float
    x: float

    def __post_init__(self):
        _require(self.A0 > 0, f"A0 must be > 0, got {self.A0}")
        _require(self.T2 > 0, f"T2 must be > 0, got {self.T2}")
        _require(0.5 <= self.x <= 3.0, f"x must lie in [0.5, 3.0], got {self.x}")


@dataclass(frozen=True)
class LinewidthTempParams:
    """Linewidth-vs-temperature parameters.

    ``xi_half_K`` is the perturbing-centre half splitting ξ/2k_B in kelvin;
    ``alpha_tls`` is in kHz/K and ``alpha_tpr`` in kHz/K⁷.
    """

    gamma0: float
    A: float
    xi_half_K: float
    alpha_tls: float
    alpha_tpr: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            _require(v >= 0, f"{f.name} must be >= 0, got {v}")


@dataclass(frozen=True)
class LinewidthFieldParams:
    gamma0: float
    A: float
    g_env: float
    T_fixed: float

    def __post_init__(self):
        _require(self.gamma0 >= 0, f"gamma0 must be >= 0, got {self.gamma0}")
        _require(self.A >= 0, f"A must be >= 0, got {self.A}")
        _require(self.g_env >= 0, f"g_env must be >= 0, got {self.g_env}")
        _require(self.T_fixed > 0, f"T_fixed must be > 0, got {self.T_fixed}")


@dataclass(frozen=True)
class LorentzianParams:
    center: float
    fwhm: float
    peak: float
    baseline: float = 0.0

    def __post_init__(self):
        _require(self.fwhm > 0, f"fwhm must be > 0, got {self.fwhm}")
        _require(self.peak > 0, f"peak must be > 0, got {self.peak}")


@dataclass(frozen=True)
class DoubleExpParams:
    """Two-component decay; lifetimes in hours."""

    A1: float
    A2: float
    tau1: float
    tau2: float

    def __post_init__(self):
        _require(self.A1 >= 0 and self.A2 >= 0, "amplitudes must be >= 0")
        _require(self.tau1 > 0 and self.tau2 > 0, "lifetimes must be > 0")

    def canonical(self) -> "DoubleExpParams":
        """Same decay with components ordered so that ``tau1 <= tau2``."""
        if self.tau1 <= self.tau2:
            return self
        return DoubleExpParams(self.A2, self.A1, self.tau2, self.tau1)


# --------------------------------------------------------------------------
# evaluation helpers


def _run(kernel, x, vec):
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    flat = np.ascontiguousarray(np.atleast_1d(xa).ravel())
    y, jac = kernel(flat, np.ascontiguousarray(vec, dtype=float))
    if scalar:
        return float(y[0]), jac[0]
    return y.reshape(xa.shape), jac.reshape(xa.shape + (jac.shape[1],))


def mims_decay(tau, p: MimsParams):
    """Two-pulse echo amplitude ``A0·exp[-(2τ/T2)^x]`` and its partials.

    Returns ``(value, jac)``; ``jac[..., :]`` holds ∂/∂A0, ∂/∂T2, ∂/∂x.
    ∂/∂x at ``tau = 0`` is the limit value 0.
    """
    if np.any(np.asarray(tau) < 0):
        raise DomainError("tau must be >= 0")
    return _run(kernels.active.mims, tau, astuple(p))


def gamma_h_vs_T(T, p: LinewidthTempParams):
    """Homogeneous linewidth versus temperature.

    ``Γ0 + A·sech²(xi_half/T) + α_TLS·T + α_TPR·T⁷`` in kHz, with partials
    in field order. The ``T → 0⁺`` limit is ``Γ0`` but ``T = 0`` itself is
    rejected.
    """
    if np.any(~(np.asarray(T) > 0)):
        raise DomainError("T must be > 0")
    return _run(kernels.active.gamma_t, T, astuple(p))


def gamma_h_vs_B(B, p: LinewidthFieldParams):
    """Homogeneous linewidth versus magnetic field at fixed temperature.

    ``Γ0 + A·sech²(s/T_fixed)`` where ``s`` is
    :func:`~reicoh.quantities.zeeman_half_splitting` of ``(g_env, B)``.
    """
    if np.any(np.asarray(B) < 0):
        raise DomainError("B must be >= 0")
    return _run(kernels.active.gamma_b, B, astuple(p))


def lorentzian(nu, p: LorentzianParams):
    """Lorentzian line ``baseline + peak·h²/((ν-ν0)² + h²)`` with ``h = fwhm/2``."""
    return _run(kernels.active.lorentzian, nu, astuple(p))


def double_exp(t, p: DoubleExpParams):
    """``A1·e^(-t/τ1) + A2·e^(-t/τ2)``; t in hours."""
    if np.any(np.asarray(t) < 0):
        raise DomainError("t must be >= 0")
    return _run(kernels.active.double_exp, t, astuple(p))


def spin_t2_bound(t1s_hours):
    """Upper bound on spin coherence time, ``T2,s = 2·T1,s`` (hours)."""
    t = float(t1s_hours)
    if not t > 0:
        raise DomainError(f"t1s must be > 0, got {t1s_hours}")
    return 2.0 * t


TOOTH_SHAPES = ("square", "gaussian")


def afc_efficiency_analytic(d, F, d0=0.0, tooth_shape="square"):
    """Forward-recall AFC efficiency.

    ``d`` is the tooth height above the background ``d0``.

    square:   ``(d/F)² · sinc²(π/F) · e^(-d/F) · e^(-d0)``
    gaussian: ``(d/F)² · e^(-7/F²) · e^(-d/F) · e^(-d0)``
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise DomainError("d must be >= 0")
    if not F >= 1:
        raise DomainError(f"finesse must be >= 1, got {F}")
    if not d0 >= 0:
        raise DomainError(f"d0 must be >= 0, got {d0}")
    dt = d / F
    if tooth_shape == "square":
        shape = np.sinc(1.0 / F) ** 2  # np.sinc(x) = sin(πx)/(πx)
    elif tooth_shape == "gaussian":
        shape = math.exp(-7.0 / F**2)
    else:
        raise ValueError(f"unknown tooth shape {tooth_shape!r}")
    eta = dt**2 * shape * np.exp(-dt) * math.exp(-d0)
    return float(eta) if eta.ndim == 0 else eta


# --------------------------------------------------------------------------
# flat-vector form used by the fitter


@dataclass(frozen=True)
class ModelSpec:
    """A model function with its parameter layout and box bounds.

    ``func(x, p) -> (y, jac)``; ``jac`` may be ``None`` for models without
    analytic partials, in which case the fitter differentiates numerically.
    """

    name: str
    param_names: tuple
    func: Callable
    lower: tuple
    upper: tuple
    units: tuple = ()
    x_unit: str = ""
    y_unit: str = ""
    x_check: Optional[Callable] = None

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def evaluate(self, x, p):
        x = np.ascontiguousarray(x, dtype=float)
        if self.x_check is not None:
            self.x_check(x)
        return self.func(x, np.ascontiguousarray(p, dtype=float))

    def index(self, name: str) -> int:
        return self.param_names.index(name)


def _kernel_func(attr):
    def f(x, p):
        return getattr(kernels.active, attr)(x, p)

    f.__name__ = attr
    return f


def _nonneg(label):
    def check(x):
        if np.any(x < 0):
            raise DomainError(f"{label} must be >= 0")

    return check


def _positive(label):
    def check(x):
        if np.any(~(x > 0)):
            raise DomainError(f"{label} must be > 0")

    return check


MIMS = ModelSpec(
    "mims",
    ("A0", "T2", "x"),
    _kernel_func("mims"),
    lower=(1e-12, 1e-9, 0.5),
    upper=(INF, INF, 3.0),
    units=("arb", "us", ""),
    x_unit="us",
    y_unit="arb",
    x_check=_nonneg("tau"),
)
GAMMA_T = ModelSpec(
    "gamma_t",
    ("gamma0", "A", "xi_half_K", "alpha_tls", "alpha_tpr"),
    _kernel_func("gamma_t"),
    lower=(0.0, 0.0, 0.0, 0.0, 0.0),
    upper=(INF,) * 5,
    units=("kHz", "kHz", "K", "kHz/K", "kHz/K^7"),
    x_unit="K",
    y_unit="kHz",
    x_check=_positive("T"),
)
GAMMA_B = ModelSpec(
    "gamma_b",
    ("gamma0", "A", "g_env", "T_fixed"),
    _kernel_func("gamma_b"),
    lower=(0.0, 0.0, 0.0, 1e-9),
    upper=(INF,) * 4,
    units=("kHz", "kHz", "", "K"),
    x_unit="T",
    y_unit="kHz",
    x_check=_nonneg("B"),
)
LORENTZIAN = ModelSpec(
    "lorentzian",
    ("center", "fwhm", "peak", "baseline"),
    _kernel_func("lorentzian"),
    lower=(-INF, 1e-12, 1e-12, -INF),
    upper=(INF,) * 4,
    units=("GHz", "GHz", "arb", "arb"),
    x_unit="GHz",
    y_unit="arb",
)
DOUBLE_EXP = ModelSpec(
    "double_exp",
    ("A1", "A2", "tau1", "tau2"),
    _kernel_func("double_exp"),
    lower=(0.0, 0.0, 1e-12, 1e-12),
    upper=(INF,) * 4,
    units=("arb", "arb", "h", "h"),
    x_unit="h",
    y_unit="arb",
    x_check=_nonneg("t"),
)

MODELS = {m.name: m for m in (MIMS, GAMMA_T, GAMMA_B, LORENTZIAN, DOUBLE_EXP)}

PARAM_TYPES = {
    "mims": MimsParams,
    "gamma_t": LinewidthTempParams,
    "gamma_b": LinewidthFieldParams,
    "lorentzian": LorentzianParams,
    "double_exp": DoubleExpParams,
}
