"""Built-in invariant checks run by ``reicoh selftest``.

Each check returns ``(passed, detail)``. Seeded recovery fits also feed a
params record so two runs with the same seed can be diffed byte for byte.
"""

from __future__ import annotations

import numpy as np

from . import afc, fitting, models, quantities, synth
from .models import MODELS

SELFTEST_GRID = 2**16

# model -> (x grid, true params, noise level, noise mode)
RECOVERY_CASES = {
    "mims": (np.linspace(0.0, 421.5, 30), [1.0, 421.5, 1.3], 0.02, "absolute"),
    "gamma_t": (np.geomspace(0.04, 11.0, 40), [0.3, 1.2, 0.47, 0.0, 6e-5], 0.02, "relative"),
    "gamma_b": (np.linspace(0.0, 3.0, 40), [0.3, 1.2, 0.43, 0.088], 0.05, "relative"),
    "lorentzian": (np.linspace(-20.0, 20.0, 81), [0.0, 4.34, 1.0, 0.0], 0.02, "absolute"),
    "double_exp": (np.linspace(0.0, 160.0, 60), [0.4, 0.6, 3.169, 31.69], 0.05, "relative"),
}


def _fit(name, data):
    if name == "mims":
        return fitting.fit_decay(data)
    if name == "gamma_t":
        return fitting.fit_temperature(data)
    if name == "gamma_b":
        return fitting.fit_field(data, temperature_k=0.088)
    if name == "lorentzian":
        return fitting.fit_line(data)
    return fitting.fit_hole(data)


def recovery_fits(seed):
    gens = synth.spawn(seed, len(RECOVERY_CASES))
    out = {}
    for gen, (name, (x, p, noise, mode)) in zip(gens, RECOVERY_CASES.items()):
        data = synth.synthesize(name, x, p, noise, mode=mode, gen=gen)
        out[name] = (p, _fit(name, data))
    return out


def check_unit_anchors():
    g = quantities.t2_to_gamma_h(421.5)
    nu = quantities.wavelength_to_frequency(580.8862)
    z = quantities.zeeman_half_splitting(0.84, 3.0)
    ok = abs(g - 0.7551) / 0.7551 < 1e-3 and abs(nu - 516095) <= 1 and abs(z - 0.846) < 5e-4
    return ok, f"Γh={g:.5f} kHz, ν={nu:.1f} GHz, ξ/2kB={z:.4f} K"


def _random_params(name, gen):
    if name == "mims":
        return [gen.uniform(0.5, 2), gen.uniform(50, 500), gen.uniform(0.6, 2.9)]
    if name == "gamma_t":
        return [gen.uniform(0, 2), gen.uniform(0.1, 2), gen.uniform(0.2, 1.0), gen.uniform(0, 0.3), gen.uniform(1e-6, 1e-4)]
    if name == "gamma_b":
        return [gen.uniform(0, 2), gen.uniform(0.1, 2), gen.uniform(0.2, 1.0), gen.uniform(0.05, 1.0)]
    if name == "lorentzian":
        return [gen.uniform(-2, 2), gen.uniform(1, 10), gen.uniform(0.5, 2), gen.uniform(-0.1, 0.1)]
    return [gen.uniform(0.1, 1), gen.uniform(0.1, 1), gen.uniform(1, 5), gen.uniform(10, 50)]


def _random_x(name, gen, n=16):
    lo, hi = {
        "mims": (1.0, 400.0),
        "gamma_t": (0.1, 10.0),
        "gamma_b": (0.05, 3.0),
        "lorentzian": (-15.0, 15.0),
        "double_exp": (0.5, 100.0),
    }[name]
    return np.sort(gen.uniform(lo, hi, n))


# Richardson-extrapolated central differences; a 1e-3 relative step keeps
# round-off well below the tolerance even where one term dominates f
GRADIENT_STEP = 1e-3


def check_gradients(seed, n_points=20):
    gen = synth.rng(seed)
    worst = 0.0
    for name, model in MODELS.items():
        for _ in range(n_points):
            p = np.array(_random_params(name, gen))
            x = _random_x(name, gen)
            _, jac = model.func(x, p)
            num = fitting.finite_diff_jacobian(model, p, x, rel_step=GRADIENT_STEP, richardson=True)
            scale = np.maximum(np.abs(jac).max(axis=0), 1e-300)
            worst = max(worst, float(np.max(np.abs(jac - num) / scale)))
    return worst < 1e-6, f"max column-relative deviation {worst:.2e}"


def check_monotonic(seed, n=200):
    gen = synth.rng(seed + 1)
    bad = 0
    for _ in range(n):
        pt = models.LinewidthTempParams(*_random_params("gamma_t", gen))
        t = np.geomspace(0.02, 12.0, 200)
        bad += int(np.any(np.diff(models.gamma_h_vs_T(t, pt)[0]) < -1e-12))
        pb = models.LinewidthFieldParams(*_random_params("gamma_b", gen))
        b = np.linspace(0.0, 5.0, 200)
        bad += int(np.any(np.diff(models.gamma_h_vs_B(b, pb)[0]) > 1e-12))
    return bad == 0, f"{bad} violations in {2 * n} draws"


def check_afc():
    spec = afc.CombSpec(12.0, 1.0, 4.0, 1.0, 0.0)
    sim = afc.simulate(spec, n_grid=SELFTEST_GRID)
    passive = float(np.max(np.abs(sim.H)))
    acausal = afc.acausal_energy_fraction(sim.H)
    timing = abs(sim.echo.arrival_time - 1.0)
    ok = passive <= 1.0 + 1e-12 and acausal < 1e-4 and timing <= sim.input.dt
    detail = f"max|H|={passive:.6f}, acausal={acausal:.1e}, |t_echo-1/Δ|={timing:.2e} µs"
    return ok, detail, sim


def check_efficiency():
    rows = afc.efficiency_curve(4.0, 0.0, "square", [0.5, 2.0], n_grid=SELFTEST_GRID)
    dev = max(abs(n / a - 1) for _, n, a in rows)
    return dev < 0.15, f"max |η_num/η_closed - 1| = {dev:.2e}"


def check_determinism(seed):
    a = recovery_fits(seed)
    b = recovery_fits(seed)
    same = all(
        np.array_equal(a[k][1].params, b[k][1].params) and np.array_equal(a[k][1].covariance, b[k][1].covariance)
        for k in a
    )
    return same, "bit-identical repeat fits" if same else "repeat fits differ"


def run(seed=0):
    """Run every check; returns ``(rows, record_entries)``.

    ``rows`` are ``(name, passed, detail)``; ``record_entries`` feed a params
    record.
    """
    rows = []
    entries = []
    rows.append(("unit anchors", *check_unit_anchors()))
    rows.append(("analytic partials vs central differences", *check_gradients(seed)))
    rows.append(("linewidth monotonicity in T and B", *check_monotonic(seed)))

    fits = recovery_fits(seed)
    for name, (truth, res) in fits.items():
        model = MODELS[name]
        rel = np.abs(res.params - truth) / np.maximum(np.abs(truth), 1e-12)
        key = {"mims": "T2", "gamma_t": "xi_half_K", "gamma_b": "g_env", "lorentzian": "fwhm", "double_exp": "tau2"}[name]
        i = model.index(key)
        tol = {"mims": 0.03, "gamma_t": 0.10, "gamma_b": 0.15, "lorentzian": 0.03, "double_exp": 0.10}[name]
        ok = bool(res.converged and rel[i] <= tol)
        rows.append((f"{name} synthetic recovery", ok, f"{key}={res.params[i]:.6g} (true {truth[i]:.6g})"))
        for pname, v, e, unit in zip(model.param_names, res.params, res.stderr, model.units):
            entries.append((f"{name}.{pname}", v, e, unit))
        entries.append((f"{name}.chi2", res.chi2, None, ""))

    ok, detail, sim = check_afc()
    rows.append(("AFC passivity, causality, echo timing", ok, detail))
    entries.append(("afc.arrival_time", sim.echo.arrival_time, None, "us"))
    entries.append(("afc.efficiency", sim.echo.efficiency, None, ""))
    rows.append(("AFC numeric vs closed-form efficiency", *check_efficiency()))
    rows.append(("fit determinism", *check_determinism(seed)))
    return rows, entries


def format_table(rows):
    width = max(len(r[0]) for r in rows)
    lines = [f"{'check'.ljust(width)}  result  detail"]
    for name, ok, detail in rows:
        lines.append(f"{name.ljust(width)}  {'PASS' if ok else 'FAIL'}    {detail}")
    n_ok = sum(1 for r in rows if r[1])
    lines.append(f"{n_ok}/{len(rows)} checks passed")
    return "\n".join(lines)

