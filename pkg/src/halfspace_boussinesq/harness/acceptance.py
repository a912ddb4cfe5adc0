"""The acceptance check-suite.

Each criterion is a function returning a :class:`CriterionResult`; the
``fast`` suite holds the structural checks and ``full`` adds the long runs.
Every report line is ``key=value`` pairs separated by spaces, so it can be
parsed with ``dict(item.split("=", 1) for item in line.split())``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..decay_analysis import InadmissibleParameters, NormSeries, expected_rates, fit_power_law
from ..freq_oracle import RadialProfile, oracle_decay_fit
from ..linear_propagator import (
    PropagatorCache,
    apply_semigroup,
    propagate_modes,
    semigroup_oracle,
)
from ..nonlinear import (
    DuhamelConfig,
    NonlinearTerms,
    Stepper,
    StepperConfig,
    dissipation,
    duhamel_solve,
    evolve,
    leray_project,
)
from ..spectral_core import (
    MixedSpectralState,
    Parity,
    SpectralScalar,
    build_grid,
    norm_sq,
    to_physical_parity,
    to_spectral_parity,
)
from .experiments import energy_balance_run
from .initial_data import InitialDataSpec, generate_initial_data

__all__ = ["CriterionResult", "CRITERIA", "SUITES", "run_suite", "format_line"]


@dataclass
class CriterionResult:
    id: int
    name: str
    measured: dict
    target: str
    passed: bool
    elapsed: float
    budget: float
    notes: dict = field(default_factory=dict)

    @property
    def within_budget(self) -> bool:
        return self.elapsed <= self.budget

    @property
    def ok(self) -> bool:
        return self.passed and self.within_budget


def _g(x) -> str:
    return f"{x:.6g}" if isinstance(x, float) else str(x)


def format_line(r: CriterionResult) -> str:
    measured = ",".join(f"{k}:{_g(v)}" for k, v in r.measured.items())
    return (
        f"id={r.id} pass={'true' if r.ok else 'false'} name={r.name} "
        f"measured={measured} target={r.target.replace(' ', '')} "
        f"elapsed={r.elapsed:.2f}s budget={r.budget:.0f}s"
    )


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# ---------------------------------------------------------------------------
# 1. transforms
# ---------------------------------------------------------------------------


def criterion_transforms(seed: int = 1, n: int = 64) -> CriterionResult:
    rng = np.random.default_rng(seed)
    with _Timer() as tm:
        g = build_grid(2 * math.pi, n, math.pi, n)
        rt = pars = 0.0
        for parity in (Parity.COSINE, Parity.SINE):
            f = rng.standard_normal(g.shape)
            c = to_spectral_parity(f, g, parity)
            back = to_physical_parity(c, g, parity)
            rt = max(rt, float(np.abs(back - f).max() / np.abs(f).max()))
            # rectangle rule on the half-sample nodes
            direct = g.volume * float(np.mean(f * f))
            spectral = norm_sq(SpectralScalar(g, parity, c))
            pars = max(pars, abs(spectral - direct) / direct)
    return CriterionResult(
        1, "transform-fidelity", {"roundtrip": rt, "parseval": pars}, "<= 1e-12",
        rt <= 1e-12 and pars <= 1e-12, tm.elapsed, 10.0,
    )


# ---------------------------------------------------------------------------
# 2. semigroup
# ---------------------------------------------------------------------------


def criterion_semigroup(seed: int = 2, samples: int = 1000) -> CriterionResult:
    rng = np.random.default_rng(seed)
    with _Timer() as tm:
        err = 0.0
        for _ in range(samples):
            xi = rng.standard_normal(3) * 10.0 ** rng.uniform(-2, 1.5)
            t = rng.uniform(0.0, 20.0)
            v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            v /= np.linalg.norm(v)
            err = max(err, float(np.abs(propagate_modes(xi, t, v) - semigroup_oracle(xi, t, v)).max()))
        g = build_grid(2 * math.pi, 16, math.pi, 16)
        s0 = generate_initial_data(InitialDataSpec(amplitude=1.0, rng_seed=seed), g)
        cache = PropagatorCache(g)
        scale = float(np.abs(s0.data).max())
        semi = 0.0
        for t, s in ((0.3, 0.7), (1.0, 2.5), (4.0, 0.01)):
            a = apply_semigroup(s0, t + s, cache).data
            b = apply_semigroup(apply_semigroup(s0, s, cache), t, cache).data
            semi = max(semi, float(np.abs(a - b).max()) / scale)
    return CriterionResult(
        2, "semigroup", {"vs_expm": err, "semigroup_property": semi}, "<= 1e-10",
        err <= 1e-10 and semi <= 1e-10, tm.elapsed, 5.0,
    )


# ---------------------------------------------------------------------------
# 3. linear energy identity
# ---------------------------------------------------------------------------


def linear_energy_defect(
    s0: MixedSpectralState, T: float = 5.0, panels: int = 100, nodes: int = 10
) -> float:
    """Largest ``| ||v(t)||^2 + 2 int_0^t D - ||v0||^2 | / ||v0||^2`` over panel ends."""
    cache = PropagatorCache(s0.grid, s0.nu, s0.kappa)
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, T, panels + 1)
    e0 = norm_sq(s0)
    integral = 0.0
    worst = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        integral += half * sum(
            wi * dissipation(apply_semigroup(s0, mid + half * xi, cache, check=False))
            for xi, wi in zip(x, w)
        )
        e = norm_sq(apply_semigroup(s0, b, cache, check=False))
        worst = max(worst, abs(e + 2.0 * integral - e0) / e0)
    return worst


def criterion_linear_energy(seed: int = 3) -> CriterionResult:
    with _Timer() as tm:
        g = build_grid(2 * math.pi, 32, math.pi, 32)
        s0 = generate_initial_data(InitialDataSpec(amplitude=1.0, rng_seed=seed), g)
        defect = linear_energy_defect(s0)
    return CriterionResult(
        3, "linear-energy-identity", {"relative_defect": defect}, "<= 1e-8",
        defect <= 1e-8, tm.elapsed, 30.0,
    )


# ---------------------------------------------------------------------------
# 4. Leray projection
# ---------------------------------------------------------------------------


def literal_projection(w: np.ndarray, g) -> np.ndarray:
    """The projector written out componentwise, independent of the solver code."""
    k2 = np.where(g.xi_sq == 0.0, 1.0, g.xi_sq)
    dot = g.xi1 * w[0] + g.xi2 * w[1]
    out = w.copy()
    out[0] = w[0] - g.xi1 * dot / k2 + 1j * g.xi1 * g.xi3 * w[2] / k2
    out[1] = w[1] - g.xi2 * dot / k2 + 1j * g.xi2 * g.xi3 * w[2] / k2
    out[2] = g.xi_h_sq / k2 * w[2] - 1j * g.xi3 * dot / k2
    # the xi = 0 column has no gradient part to remove
    zero = g.xi_sq == 0.0
    out[:3, zero] = w[:3, zero]
    return out


def random_terms(g, rng) -> np.ndarray:
    w = rng.standard_normal((4,) + g.spectral_shape) + 1j * rng.standard_normal(
        (4,) + g.spectral_shape
    )
    w[:2, ..., -1] = 0.0
    w[2:, ..., 0] = 0.0
    return w


def criterion_leray(seed: int = 4) -> CriterionResult:
    rng = np.random.default_rng(seed)
    with _Timer() as tm:
        g = build_grid(2 * math.pi, 32, math.pi, 32)
        eq = idem = 0.0
        for _ in range(3):
            w = random_terms(g, rng)
            scale = float(np.abs(w).max())
            p = leray_project(NonlinearTerms(g, w)).data
            eq = max(eq, float(np.abs(p - literal_projection(w, g)).max()) / scale)
            pp = leray_project(NonlinearTerms(g, p)).data
            idem = max(idem, float(np.abs(pp - p).max()) / scale)
    return CriterionResult(
        4, "leray-equivalence", {"vs_literal": eq, "idempotence": idem},
        "literal <= 1e-13, idempotent <= 1e-14", eq <= 1e-13 and idem <= 1e-14, tm.elapsed, 5.0,
    )


# ---------------------------------------------------------------------------
# 5. oracle rates
# ---------------------------------------------------------------------------


def criterion_oracle_rates(sigma: float = 0.95) -> CriterionResult:
    with _Timer() as tm:
        times = np.geomspace(10.0, 1e4, 40)
        full = RadialProfile(a=1.0, k0=1.0)
        full.check_admissible(sigma)
        l2 = oracle_decay_fit(full, times, "v", "l2").exponent
        gh = oracle_decay_fit(full, times, "v", "grad_h").exponent
        heat = oracle_decay_fit(RadialProfile(a=1.0, k0=1.0, seeded=("u_h",)), times, "u").exponent
    lim_l2 = -sigma / 2 + 0.05
    lim_gh = -(sigma + 1) / 2 + 0.05
    ok = l2 <= lim_l2 and gh <= lim_gh and abs(heat + 1.0) <= 0.03
    return CriterionResult(
        5, "oracle-rates", {"l2": l2, "grad_h": gh, "heat_only": heat},
        f"l2 <= {lim_l2:g}, grad_h <= {lim_gh:g}, heat_only = -1.00+-0.03", ok, tm.elapsed, 300.0,
    )


# ---------------------------------------------------------------------------
# 6. nonlinear conservation
# ---------------------------------------------------------------------------


def criterion_nonlinear_conservation(
    n: int = 64, T: float = 10.0, dt: float = 1e-3, seed: int = 6
) -> CriterionResult:
    with _Timer() as tm:
        g = build_grid(2 * math.pi, n, math.pi, n)
        s0 = generate_initial_data(InitialDataSpec(a=1.0, k0=1.0, amplitude=1e-2, rng_seed=seed), g)
        _, bal = energy_balance_run(s0, dt, T, record_every=10**9, check_every=100)
    ok = (
        bal.residual <= 1e-4
        and bal.max_divergence <= 1e-10
        and bal.max_trace <= 1e-9
        and bal.increases == 0
    )
    return CriterionResult(
        6, "nonlinear-conservation",
        {
            "energy_residual": bal.residual,
            "divergence": bal.max_divergence,
            "trace": bal.max_trace,
            "energy_increases": bal.increases,
            "steps": bal.steps,
        },
        "residual <= 1e-4, divergence <= 1e-10, trace <= 1e-9, increases = 0",
        ok, tm.elapsed, 1200.0,
    )


# ---------------------------------------------------------------------------
# 7. integrator cross-validation
# ---------------------------------------------------------------------------


def _step_to(s0: MixedSpectralState, dt: float, T: float) -> MixedSpectralState:
    state = s0
    for _, state in evolve(s0, StepperConfig(dt=dt, T=T, record_every=10**9)):
        pass
    return state


def criterion_integrators(seed: int = 7, amplitude: float = 20.0, T: float = 0.5) -> CriterionResult:
    with _Timer() as tm:
        g = build_grid(2 * math.pi, 16, math.pi, 16)
        s0 = generate_initial_data(
            InitialDataSpec(a=1.0, k0=2.0, amplitude=amplitude, rng_seed=seed), g
        )
        duh = duhamel_solve(s0, DuhamelConfig(T=T, K=129))
        ref = _step_to(s0, T / 1024, T)

        def rel(a, b):
            return math.sqrt(norm_sq(a.with_data(a.data - b.data)) / norm_sq(b))

        cross = rel(duh, ref)
        lin = apply_semigroup(s0, T)
        nonlinear_effect = rel(lin, ref)
        errs = [rel(_step_to(s0, T / m, T), ref) for m in (16, 32, 64)]
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        order = orders[-1]
    ok = cross <= 1e-4 and abs(order - 2.0) <= 0.1
    return CriterionResult(
        7, "integrator-cross-validation",
        {"duhamel_vs_step": cross, "order": order, "nonlinear_effect": nonlinear_effect},
        "difference <= 1e-4, order = 2.0+-0.1", ok, tm.elapsed, 300.0,
        notes={"errors": errs, "orders": orders},
    )


# ---------------------------------------------------------------------------
# 8. grid rate ordering
# ---------------------------------------------------------------------------


def criterion_rate_ordering(
    seed: int = 8, n: int = 128, n3: int = 32, dt: float = 0.05, window=(5.0, 50.0)
) -> CriterionResult:
    with _Timer() as tm:
        g = build_grid(16 * math.pi, n, math.pi, n3)
        s0 = generate_initial_data(InitialDataSpec(a=1.0, k0=1.0, amplitude=1e-2, rng_seed=seed), g)
        series = NormSeries(0.95)
        every = max(1, int(round(1.0 / dt)))
        for t, s in evolve(s0, StepperConfig(dt=dt, T=window[1], record_every=every)):
            if t >= window[0] - 1e-9:
                series.add(s, t)
        fu = fit_power_law(series.t, series.column("u"), window)
        fg = fit_power_law(series.t, series.column("grad_h_u"), window)
        gap = fg.exponent - fu.exponent
    return CriterionResult(
        8, "rate-ordering",
        {"u": fu.exponent, "grad_h_u": fg.exponent, "difference": gap,
         "r2_u": fu.r_squared, "r2_grad_h_u": fg.r_squared},
        "difference = -0.5+-0.2", abs(gap + 0.5) <= 0.2, tm.elapsed, 1800.0,
    )


# ---------------------------------------------------------------------------
# 9. rate-table gatekeeping
# ---------------------------------------------------------------------------


def _admissible_lattice(k: int, j: int) -> bool:
    """Integer form of the admissible set at ``sigma = k/1000``, ``delta = j/10000``."""
    return 900 < k < 1000 and j >= 5000 - 5 * k and 8 * j < 10 * k - 5000


def _accepts(sigma, delta) -> bool:
    try:
        expected_rates(sigma, delta)
        return True
    except InadmissibleParameters:
        return False


PLANTED = (
    ("sigma at lower bound", 0.9, 0.06),
    ("delta at upper bound", 0.95, 0.05625),
    ("delta below lower bound", 0.95, 0.0249),
)


def criterion_gatekeeping() -> CriterionResult:
    with _Timer() as tm:
        planted_rejected = sum(not _accepts(s, d) for _, s, d in PLANTED)
        mismatches = 0
        checked = 0
        for k in range(890, 1005):
            for j in range(0, 800):
                checked += 1
                if _accepts(k / 1000, j / 10000) != _admissible_lattice(k, j):
                    mismatches += 1
        # the closed lower boundary in delta must be accepted
        edge_ok = _accepts(0.95, 0.025) and _accepts(Fraction(19, 20), Fraction(1, 40))
    ok = planted_rejected == len(PLANTED) and mismatches == 0 and edge_ok
    return CriterionResult(
        9, "rate-table-gatekeeping",
        {"planted_rejected": planted_rejected, "lattice_mismatches": mismatches,
         "lattice_points": checked, "closed_edge_accepted": edge_ok},
        "3 planted rejected, 0 mismatches", ok, tm.elapsed, 60.0,
    )


CRITERIA = {
    1: criterion_transforms,
    2: criterion_semigroup,
    3: criterion_linear_energy,
    4: criterion_leray,
    5: criterion_oracle_rates,
    6: criterion_nonlinear_conservation,
    7: criterion_integrators,
    8: criterion_rate_ordering,
    9: criterion_gatekeeping,
}

SUITES = {"fast": (1, 2, 3, 4, 9), "full": tuple(range(1, 10))}


def run_suite(name: str, emit=None) -> list[CriterionResult]:
    """Run a suite; ``emit`` receives each report line as it is produced."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    results = []
    for cid in SUITES[name]:
        r = CRITERIA[cid]()
        results.append(r)
        if emit is not None:
            emit(format_line(r))
    return results
