"""Named, fully parameterized reproductions of the five worked examples.

Each ``run_*`` function returns a :class:`ScenarioResult` whose headline
metrics carry a provenance tag (``published``, ``derived`` or ``trivial``) and
a tolerance. Output-mode scenarios follow the two-stage pipeline: propagate
once to build the coherence kernel and pick the dominant modes, then
propagate again with capture cavities for those modes.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import itertools
import json
import logging
import math
import os
import time

import numpy as np

from . import __version__
from . import analysis as an
from . import cascade as cs
from . import correlations as co
from . import evolve as ev
from . import hilbert as hb
from . import pulses as pu
from .errors import ConfigError
from .moments import LinearCascade

log = logging.getLogger(__name__)


# -- results ------------------------------------------------------------------------

@dataclass
class Metric:
    """Scalar result with an acceptance rule.

    ``kind`` is ``"abs"`` (``|value - target| <= tolerance``), ``"min"``
    (``value >= target``), ``"max"`` (``value <= target``), ``"range"``
    (``target[0] <= value <= target[1]``) or ``"info"`` (no check).
    """

    value: complex
    target: object = None
    tolerance: float = None
    provenance: str = "derived"
    kind: str = "abs"

    @property
    def passed(self):
        v = self.value
        if self.kind == "info":
            return None
        if self.kind == "abs":
            return bool(abs(v - self.target) <= self.tolerance)
        if self.kind == "min":
            return bool(v >= self.target)
        if self.kind == "max":
            return bool(v <= self.target)
        if self.kind == "range":
            return bool(self.target[0] <= v <= self.target[1])
        raise ValueError(f"unknown metric kind {self.kind!r}")


def _check(value, target, tol, provenance="published"):
    return Metric(float(value), target, tol, provenance, "abs")


def _info(value):
    return Metric(value, kind="info", provenance="derived")


@dataclass
class ScenarioResult:
    name: str
    parameters: dict
    metrics: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    runtime: float = 0.0

    @property
    def passed(self):
        checks = [m.passed for m in self.metrics.values() if m.passed is not None]
        return all(checks)

    def failures(self):
        return [k for k, m in self.metrics.items() if m.passed is False]

    def write(self, outdir):
        """Write ``metrics.csv``, one file per artifact and ``manifest.json``."""
        os.makedirs(outdir, exist_ok=True)
        files = {"metrics": "metrics.csv"}
        _write_metrics(self.metrics, os.path.join(outdir, "metrics.csv"))
        for key, obj in self.artifacts.items():
            files.update(_write_artifact(key, obj, outdir))
        manifest = dict(
            scenario=self.name, version=__version__, parameters=_jsonable(self.parameters),
            passed=self.passed, failures=self.failures(), runtime_s=round(self.runtime, 3),
            warnings=self.warnings, files=files)
        with open(os.path.join(outdir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        return files


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    return x


def _write_metrics(metrics, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "value_re", "value_im", "target", "tolerance", "kind",
                    "provenance", "passed"])
        for name, m in metrics.items():
            v = complex(m.value)
            target = "" if m.target is None else (
                ";".join(repr(float(t)) for t in m.target) if m.kind == "range" else repr(m.target))
            passed = "" if m.passed is None else ("pass" if m.passed else "fail")
            w.writerow([name, repr(v.real), repr(v.imag), target,
                        "" if m.tolerance is None else repr(m.tolerance), m.kind,
                        m.provenance, passed])


def _write_artifact(key, obj, outdir):
    p = lambda suffix: os.path.join(outdir, f"{key}{suffix}")
    if isinstance(obj, co.CorrelationKernel):
        co.save_kernel_csv(obj, p(".csv"))
        return {key: f"{key}.csv"}
    if isinstance(obj, co.ModeSpectrum):
        co.save_spectrum(obj, p("_occupations.csv"), p("_modes.csv"))
        out = {f"{key}_occupations": f"{key}_occupations.csv"}
        if obj.modes:
            out[f"{key}_modes"] = f"{key}_modes.csv"
        return out
    if isinstance(obj, an.WignerGrid):
        an.save_wigner_csv(obj, p(".csv"))
        return {key: f"{key}.csv"}
    if isinstance(obj, ev.Trajectory):
        ev.save_observables_csv(obj, p("_observables.csv"))
        ev.save_states(obj, p("_states.bin"))
        return {f"{key}_observables": f"{key}_observables.csv",
                f"{key}_states": f"{key}_states.bin"}
    if isinstance(obj, pu.TemporalMode):
        pu.save_mode_csv(obj, p(".csv"))
        return {key: f"{key}.csv"}
    if isinstance(obj, an.HintonTable):
        with open(p(".csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(obj.labels) + ["re", "im", "population"])
            for idx in np.ndindex(*obj.dims):
                a = obj.amplitudes[idx]
                w.writerow(list(idx) + [repr(float(a.real)), repr(float(a.imag)),
                                        repr(float(abs(a) ** 2))])
        return {key: f"{key}.csv"}
    if isinstance(obj, np.ndarray):
        with open(p(".csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "re", "im"])
            for (i, j), z in np.ndenumerate(np.atleast_2d(obj)):
                w.writerow([i, j, repr(float(z.real)), repr(float(z.imag))])
        return {key: f"{key}.csv"}
    if hasattr(obj, "save_csv"):
        obj.save_csv(p(".csv"))
        return {key: f"{key}.csv"}
    raise TypeError(f"no writer for artifact {key!r} of type {type(obj).__name__}")


# -- shared pipeline pieces ------------------------------------------------------------

def kernel_stride(n_steps, kernel_points):
    """Largest stride (in integration steps) giving at least ``kernel_points`` kernel intervals."""
    if n_steps % 2:
        raise ConfigError(f"n_steps must be even, got {n_steps}", key="n_steps")
    half = n_steps // 2
    for s in range(max(1, half // max(1, kernel_points)), 0, -1):
        if half % s == 0:
            return s
    return 1


def dominant_modes(generator, rho0, stride, n_keep, channel=None, carrier=0.0):
    """First pipeline stage: coherence kernel and its ``n_keep`` most occupied modes."""
    K = co.g1_kernel(generator, rho0, stride, channel, carrier)
    S = co.decompose(K, n_keep)
    return K, S


def _grid(t_end, n_steps, t0=0.0):
    if n_steps % 2:
        raise ConfigError(f"n_steps must be even, got {n_steps}", key="n_steps")
    return pu.TimeGrid(t0, t_end, int(n_steps))


def _positive(**kw):
    for k, v in kw.items():
        if v is None or not v > 0:
            raise ConfigError(f"{k} must be positive, got {v}", key=k)


def _nonneg(**kw):
    for k, v in kw.items():
        if v is None or v < 0:
            raise ConfigError(f"{k} must be nonnegative, got {v}", key=k)


def _cfg(strict):
    return ev.IntegratorConfig(strict=strict)


# -- scenarios -------------------------------------------------------------------------

PHASE_NOISE_TARGETS = (0.54, 0.26, 0.13, 0.072, 0.047, 0.033, 0.025, 0.019, 0.015)


def run_phase_noise(gamma=1.0, gamma_p=1.5, tau=1.0, t_p=4.0, t_end=16.0, n_steps=1280,
                    kernel_points=160, cavity_dim=3, n_modes=9, strict=False):
    """One photon reflected from an empty cavity with pure dephasing ``gamma_p``."""
    _positive(gamma=gamma, tau=tau, t_end=t_end, n_steps=n_steps)
    _nonneg(gamma_p=gamma_p)
    params = dict(gamma=gamma, gamma_p=gamma_p, tau=tau, t_p=t_p, t_end=t_end,
                  n_steps=n_steps, kernel_points=kernel_points, cavity_dim=cavity_dim,
                  n_modes=n_modes)
    t_start = time.perf_counter()
    grid = _grid(t_end, n_steps)
    u = pu.gaussian_mode(grid, tau, t_p)
    net = cs.CascadeNetwork(grid, cs.empty_cavity(cavity_dim, 0.0, gamma, gamma_p),
                            inputs=pu.single_input(u))
    gen = cs.build_single(net)
    stride = kernel_stride(n_steps, kernel_points)
    K, S = dominant_modes(gen, net.initial_state(inputs=[hb.fock(2, 1)]), stride, n_modes)

    res = ScenarioResult("phase_noise", params)
    occ = S.occupations
    published = (math.isclose(gamma_p / gamma, 1.5) and math.isclose(tau * gamma, 1.0)
                 and math.isclose(t_p * gamma, 4.0))
    for i, n in enumerate(occ):
        key = f"occupation_{i + 1}"
        if published and i < len(PHASE_NOISE_TARGETS):
            res.metrics[key] = _check(n, PHASE_NOISE_TARGETS[i], 0.01)
        else:
            res.metrics[key] = _info(float(n))
    res.metrics["total_occupation"] = _check(K.total(), 1.0, 1e-3, "trivial")
    if gamma_p == 0:
        res.metrics["occupation_1"] = _check(occ[0], 1.0, 1e-3, "trivial")
    res.metrics["kernel_hermiticity"] = Metric(K.hermiticity_error(), 1e-8, None, "trivial", "max")
    res.artifacts.update(kernel=K, spectrum=co.ModeSpectrum(S.occupations, S.modes[:4], S.residual),
                         input_mode=u)
    res.runtime = time.perf_counter() - t_start
    return res


def run_kpo_cat(K=5.0, gamma=1.0, detuning=0.0, amplitude=4.45, bandwidth=2.5, order=4,
                t_end=14.0, n_steps=22400, kernel_points=140, kpo_dim=22, capture_dim=22,
                wigner_extent=4.0, wigner_points=81, strict=False):
    """Travelling cat state emitted by a Kerr parametric oscillator under a filtered pump."""
    _positive(K=K, gamma=gamma, amplitude=amplitude, bandwidth=bandwidth, order=order,
              t_end=t_end, n_steps=n_steps)
    params = dict(K=K, gamma=gamma, detuning=detuning, amplitude=amplitude,
                  bandwidth=bandwidth, order=order, t_end=t_end, n_steps=n_steps,
                  kernel_points=kernel_points, kpo_dim=kpo_dim, capture_dim=capture_dim)
    t_start = time.perf_counter()
    grid = _grid(t_end, n_steps)
    pump = an.kpo_pump(grid, K, amplitude, bandwidth, int(order), gamma)
    s = cs.kpo(K, pump, kpo_dim, gamma, detuning)
    net = cs.CascadeNetwork(grid, s)
    stride = kernel_stride(n_steps, kernel_points)
    Kern, S = dominant_modes(cs.build_single(net), net.initial_state(), stride, 5)

    v = S.modes[0].resample(grid)
    net2 = cs.CascadeNetwork(grid, s, outputs=pu.single_output(v), output_dims=[capture_dim])
    cfg = _cfg(strict)
    cfg.store_stride = max(1, n_steps // 2 // 14)
    tr = ev.propagate(net2.initial_state(), cs.build_single(net2), cfg)
    rv = net2.space.partial_trace(tr.final_state, "v1")
    beta, fid = an.optimize_beta(rv)

    res = ScenarioResult("kpo_cat", params, warnings=list(tr.warnings))
    m = res.metrics
    m["dominant_occupation"] = _check(S.occupations[0], 4.03, 0.05)
    m["other_modes_sum"] = Metric(float(np.sum(S.occupations[1:])), 0.05, None, "published", "max")
    m["cat_fidelity"] = Metric(fid, 0.96, None, "published", "min")
    m["beta_abs"] = _check(abs(beta), 2.0, 0.05)
    m["beta_arg_over_pi"] = _check(np.angle(beta) / np.pi, -0.31, 0.05)
    m["captured_photons"] = _info(float(np.real(hb.expectation(rv, hb.number(capture_dim)))))
    m["capture_loss"] = _info(tr.total_loss("L0"))
    m["kernel_total"] = _info(Kern.total())
    x = np.linspace(-wigner_extent, wigner_extent, int(wigner_points))
    res.artifacts.update(pump=pump, kernel=Kern, spectrum=S, trajectory=tr,
                         captured_state=rv, wigner=an.wigner(rv, x))
    res.runtime = time.perf_counter() - t_start
    return res


def run_lambda(g=0.1, omega12=0.5, gamma=1.0, t_end=150.0, n_steps=5000, kernel_points=150,
               cavity_dim=3, capture_dim=3, strict=False):
    """Lambda atom in a cavity decaying into two orthogonal output modes."""
    _positive(g=g, gamma=gamma, t_end=t_end, n_steps=n_steps)
    _nonneg(omega12=omega12)
    params = dict(g=g, omega12=omega12, gamma=gamma, t_end=t_end, n_steps=n_steps,
                  kernel_points=kernel_points, cavity_dim=cavity_dim, capture_dim=capture_dim)
    t_start = time.perf_counter()
    grid = _grid(t_end, n_steps)
    s = cs.lambda_system(g, omega12, gamma, cavity_dim)
    excited = s.local_space().basis(2, 0)
    net = cs.CascadeNetwork(grid, s)
    stride = kernel_stride(n_steps, kernel_points)
    Kern, S = dominant_modes(cs.build_single(net), net.initial_state(scatterer=excited),
                             stride, 4)

    modes = pu.orthonormalize([mode.resample(grid) for mode in S.modes[:2]])
    net2 = cs.CascadeNetwork(grid, s, outputs=pu.multimode_output_couplings(modes),
                             output_dims=[capture_dim] * 2)
    tr = ev.propagate(net2.initial_state(scatterer=excited), cs.build_multi(net2), _cfg(strict))
    space = net2.space
    levels = np.arange(capture_dim)
    n1 = space.populations(tr.final_state, "v1") @ levels
    n2 = space.populations(tr.final_state, "v2") @ levels
    red = space.partial_trace(tr.final_state, ["atom", "v1", "v2"])
    H = an.hinton_amplitudes(red, (3, capture_dim, capture_dim), ("atom", "v1", "v2"))

    res = ScenarioResult("lambda", params, warnings=list(tr.warnings))
    m = res.metrics
    m["n1"] = _check(n1, 0.67, 0.01)
    m["n2"] = _check(n2, 0.33, 0.01)
    m["hinton_g1_1_0"] = _check(H.population(0, 1, 0), 0.645, 0.01)
    m["hinton_g2_0_1"] = _check(H.population(1, 0, 1), 0.317, 0.01)
    m["excited_population"] = Metric(float(space.populations(tr.final_state, "atom")[2]), 1e-3,
                                     None, "trivial", "max")
    m["kernel_occupation_1"] = _info(float(S.occupations[0]))
    m["kernel_occupation_2"] = _info(float(S.occupations[1]))
    res.artifacts.update(kernel=Kern, spectrum=S, trajectory=tr, hinton=H)
    res.runtime = time.perf_counter() - t_start
    return res


def blockade_point(n_photons, tau, g, kappa=1.0, samples_per_time=200.0, kernel_points=150,
                   n_steps=None, strict=False):
    """Single (tau, g) point of the photon-blockade sweep.

    Returns a dict with the kernel occupations and the captured Fock
    populations of the reflected (``pv``) and transmitted (``pw``) modes.
    """
    if n_photons not in (1, 2):
        raise ConfigError(f"n_photons must be 1 or 2, got {n_photons}", key="n_photons")
    _positive(tau=tau, kappa=kappa)
    _nonneg(g=g)
    T = 12 * tau + 10.0 / kappa
    # capture couplings switch on at a rate ~ n_photons / tau, so short pulses need finer steps
    density = max(samples_per_time, 30 * n_photons / tau)
    n = n_steps or int(math.ceil(T * density / 8)) * 8
    grid = _grid(T, n)
    u = pu.gaussian_mode(grid, tau, 6 * tau, detuning=g)
    # excitation number is conserved, so these cutoffs are exact
    s = cs.jaynes_cummings(g, kappa, cavity_dim=n_photons + 2)
    d = n_photons + 1
    fock_in = [hb.fock(d, n_photons)]
    net = cs.CascadeNetwork(grid, s, inputs=pu.single_input(u), input_dims=[d])
    gen = cs.build_blockade(net)
    rho0 = net.initial_state(inputs=fock_in)
    stride = kernel_stride(n, kernel_points)
    Kr, Sr = dominant_modes(gen, rho0, stride, 2, "L_r", carrier=g)
    Kt, St = dominant_modes(gen, rho0, stride, 2, "L_t", carrier=g)
    v, w = Sr.modes[0].resample(grid), St.modes[0].resample(grid)
    net2 = cs.CascadeNetwork(grid, s, inputs=pu.single_input(u), outputs=pu.single_output(v),
                             transmission=pu.single_output(w), input_dims=[d], output_dims=[d],
                             transmission_dim=d)
    tr = ev.propagate(net2.initial_state(inputs=fock_in), cs.build_blockade(net2),
                      ev.IntegratorConfig(strict=strict, store_stride=n,
                                          leakage_skip=("cav", "v1", "w")))
    pv = net2.space.populations(tr.final_state, "v1")
    pw = net2.space.populations(tr.final_state, "w")
    return dict(tau=tau, g=g, n_photons=n_photons, n_steps=n,
                reflected_occupations=Sr.occupations, transmitted_occupations=St.occupations,
                pv=pv, pw=pw, warnings=list(tr.warnings))


def _point(args):
    return blockade_point(*args[0], **args[1])


def run_blockade(n_photons=1, tau=(0.1, 0.25, 1.0, 4.0), g=(0.0, 2.0, 8.0), kappa=1.0,
                 samples_per_time=200.0, kernel_points=150, n_steps=None, jobs=1, strict=False):
    """Photon blockade sweep over every ``(tau, g)`` pair; ``jobs`` worker processes."""
    taus = [float(x) for x in np.atleast_1d(tau)]
    gs = [float(x) for x in np.atleast_1d(g)]
    params = dict(n_photons=n_photons, tau=taus, g=gs, kappa=kappa,
                  samples_per_time=samples_per_time, kernel_points=kernel_points, n_steps=n_steps)
    t_start = time.perf_counter()
    kw = dict(kappa=kappa, samples_per_time=samples_per_time, kernel_points=kernel_points,
              n_steps=n_steps, strict=strict)
    tasks = [((n_photons, t, gg), kw) for t, gg in itertools.product(taus, gs)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_point, tasks))
    else:
        points = [_point(a) for a in tasks]

    res = ScenarioResult(f"blockade_n{n_photons}", params)
    m = res.metrics
    rows = []
    for p in points:
        tag = f"[tau={p['tau']:g},g={p['g']:g}]"
        levels = np.arange(len(p["pv"]))
        nv, nw = float(p["pv"] @ levels), float(p["pw"] @ levels)
        res.warnings += [f"{tag} {w}" for w in p["warnings"]]
        if n_photons == 1:
            R, T = an.blockade_populations(p["tau"], p["g"], kappa)
            m[f"reflected{tag}"] = _check(nv, R, 1e-3, "derived")
            m[f"transmitted{tag}"] = _check(nw, T, 1e-3, "derived")
            if math.isclose(p["tau"] * kappa, 0.1):
                m[f"near_full_reflection{tag}"] = Metric(nv, 0.95, None, "published", "min")
            if math.isclose(p["tau"] * kappa, 4.0) and math.isclose(p["g"], 8.0 * kappa):
                m[f"high_transmission{tag}"] = Metric(nw, 0.9, None, "published", "min")
        else:
            m[f"retained{tag}"] = Metric((nv + nw) / 2, (0.75, 1.0), None, "published", "range")
            if p["g"] == 0:
                R, T = an.blockade_populations(p["tau"], 0.0, kappa)
                ref = an.beamsplitter_reference(math.sqrt(R / (R + T)), math.sqrt(T / (R + T)))
                pair = abs(ref[1, 1]) ** 2
                expect = dict(v2=abs(ref[2, 0]) ** 2, w2=abs(ref[0, 2]) ** 2, v1=pair, w1=pair)
                got = dict(v2=p["pv"][2], w2=p["pw"][2], v1=p["pv"][1], w1=p["pw"][1])
                for k in expect:
                    m[f"beamsplitter_{k}{tag}"] = _check(got[k], expect[k], 1e-3, "derived")
            if p["tau"] * kappa >= 4 and p["g"] >= 8 * kappa:
                m[f"transmitted_pair_dominates{tag}"] = Metric(
                    float(p["pw"][2] - p["pv"][2]), 0.0, None, "published", "min")
        rows.append([p["tau"], p["g"], nv, nw] + list(p["pv"]) + list(p["pw"]))
    d = n_photons + 1
    res.artifacts["sweep"] = _Table(["tau", "g", "n_reflected", "n_transmitted"]
                                    + [f"pv{i}" for i in range(d)] + [f"pw{i}" for i in range(d)],
                                    rows)
    res.runtime = time.perf_counter() - t_start
    return res


@dataclass
class _Table:
    header: list
    rows: list

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header)
            w.writerows([[repr(float(x)) for x in r] for r in self.rows])


SNOWBALL_STATES = {
    "vacuum": (1.0,),
    "superposition_12": (0.0, 1 / math.sqrt(2), 1 / math.sqrt(2)),
    "superposition_01": (1 / math.sqrt(2), 1 / math.sqrt(2)),
}


def _input_ket(input_state, dim):
    amps = SNOWBALL_STATES.get(input_state, input_state) if isinstance(input_state, str) \
        else input_state
    if isinstance(amps, str):
        raise ConfigError(f"unknown input state {input_state!r}", key="input_state")
    amps = np.asarray(amps, dtype=complex)
    if amps.size > dim:
        raise ConfigError(f"input state needs {amps.size} levels, cutoff is {dim}",
                          key="input_state")
    ket = np.zeros(dim, complex)
    ket[:amps.size] = amps
    return ket / np.linalg.norm(ket)


def run_snowball(input_state="vacuum", tau=0.5, t_p=6.0, t_end=12.0, flux=3.0, kappa=1.0,
                 kappa_prime=1.0, n_steps=2400, capture_dim=6, engine="moments",
                 thermal_dim=None, v_initial="thermal", wigner_extent=4.0, wigner_points=81,
                 strict=False):
    """Pure pulse state sent through a thermally occupied channel and recaptured.

    ``engine="moments"`` uses the exact Gaussian moment equations (any flux);
    ``engine="dense"`` propagates the full density matrix (small flux only).
    ``v_initial`` is ``"thermal"`` (capture cavity starts at the source
    occupation) or ``"vacuum"``.
    """
    _positive(tau=tau, t_end=t_end, kappa=kappa, kappa_prime=kappa_prime, n_steps=n_steps)
    _nonneg(flux=flux)
    if engine not in ("moments", "dense"):
        raise ConfigError(f"engine must be 'moments' or 'dense', got {engine!r}", key="engine")
    if v_initial not in ("thermal", "vacuum"):
        raise ConfigError(f"v_initial must be 'thermal' or 'vacuum', got {v_initial!r}",
                          key="v_initial")
    label = input_state if isinstance(input_state, str) else "custom"
    params = dict(input_state=input_state, tau=tau, t_p=t_p, t_end=t_end, flux=flux,
                  kappa=kappa, kappa_prime=kappa_prime, n_steps=n_steps,
                  capture_dim=capture_dim, engine=engine, v_initial=v_initial)
    t_start = time.perf_counter()
    grid = _grid(t_end, n_steps)
    u = pu.gaussian_mode(grid, tau, t_p)
    N = flux / kappa
    thermal_dim = thermal_dim or int(math.ceil(4 + 6 * N))
    th = cs.ThermalSource.for_flux(flux, kappa, kappa_prime, dim=thermal_dim)
    net = cs.CascadeNetwork(grid, None, inputs=pu.single_input(u), outputs=pu.single_output(u),
                            thermal=th, input_dims=[capture_dim], output_dims=[capture_dim])
    psi = _input_ket(input_state, capture_dim)
    n_v = th.N if v_initial == "thermal" else 0.0
    res = ScenarioResult(f"snowball_{label}", params)
    if engine == "moments":
        ch = LinearCascade(net).channel("u1", "v1", {"v1": n_v})
        rv = ch.apply(psi, capture_dim)
        res.metrics["transmissivity"] = _info(ch.eta)
        res.metrics["environment_occupation"] = _info(ch.n_env)
        res.metrics["channel_phase"] = _info(ch.phase)
    else:
        v0 = th.thermal_state(capture_dim) if v_initial == "thermal" else None
        rho0 = net.initial_state(inputs=[psi], outputs=[v0])
        tr = ev.propagate(rho0, cs.build_thermal(net), _cfg(strict))
        res.warnings += tr.warnings
        rv = net.space.partial_trace(tr.final_state, "v1")
        res.artifacts["trajectory"] = tr
    fid = hb.state_fidelity(rv, psi)
    if flux == 0:
        target, prov = 0.999, "trivial"
    elif label == "vacuum":
        target, prov = 0.99, "published"
    else:
        target, prov = 0.98, "published"
    res.metrics["fidelity"] = Metric(fid, target, None, prov, "min")
    res.metrics["thermal_occupation"] = _info(th.N)
    x = np.linspace(-wigner_extent, wigner_extent, int(wigner_points))
    res.artifacts.update(captured_state=rv, wigner=an.wigner(rv, x))
    res.runtime = time.perf_counter() - t_start
    return res


def run_custom(scatterer="empty_cavity", gamma=1.0, detuning=0.0, gamma_phase=0.0, g=1.0,
               cavity_dim=3, input_shape="gaussian", tau=1.0, t_p=4.0, input_photons=1,
               t_end=16.0, n_steps=1280, kernel_points=160, n_modes=4, capture=True,
               strict=False):
    """User-described network: one input pulse on a one-sided scatterer.

    Computes the output kernel and spectrum, then (with ``capture``)
    recaptures the dominant mode and reports its photon statistics.
    """
    _positive(tau=tau, t_end=t_end, n_steps=n_steps)
    _nonneg(gamma=gamma, gamma_phase=gamma_phase, input_photons=input_photons)
    params = dict(scatterer=scatterer, gamma=gamma, detuning=detuning, gamma_phase=gamma_phase,
                  g=g, cavity_dim=cavity_dim, input_shape=input_shape, tau=tau, t_p=t_p,
                  input_photons=input_photons, t_end=t_end, n_steps=n_steps,
                  kernel_points=kernel_points, n_modes=n_modes, capture=capture)
    t_start = time.perf_counter()
    builders = {
        "empty_cavity": lambda: cs.empty_cavity(cavity_dim, detuning, gamma, gamma_phase),
        "two_level_atom": lambda: cs.two_level_atom(gamma, detuning),
        "jaynes_cummings": lambda: cs.jaynes_cummings(g, gamma, cavity_dim, two_sided=False),
    }
    if scatterer not in builders:
        raise ConfigError(f"scatterer must be one of {sorted(builders)}, got {scatterer!r}",
                          key="scatterer")
    shapes = {"gaussian": lambda grid: pu.gaussian_mode(grid, tau, t_p, detuning),
              "exponential": lambda grid: pu.exponential_mode(grid, 1.0 / tau, t_p)}
    if input_shape not in shapes:
        raise ConfigError(f"input_shape must be one of {sorted(shapes)}, got {input_shape!r}",
                          key="input_shape")
    s = builders[scatterer]()
    grid = _grid(t_end, n_steps)
    u = shapes[input_shape](grid)
    d = int(input_photons) + 1
    fock_in = [hb.fock(d, int(input_photons))]
    net = cs.CascadeNetwork(grid, s, inputs=pu.single_input(u), input_dims=[d])
    Kern, S = dominant_modes(cs.build_single(net), net.initial_state(inputs=fock_in),
                             kernel_stride(n_steps, kernel_points), n_modes, carrier=detuning)
    res = ScenarioResult("custom", params)
    for i, n in enumerate(S.occupations):
        res.metrics[f"occupation_{i + 1}"] = _info(float(n))
    res.metrics["kernel_hermiticity"] = Metric(Kern.hermiticity_error(), 1e-8, None, "trivial",
                                               "max")
    res.artifacts.update(kernel=Kern, spectrum=S, input_mode=u)
    if capture:
        v = S.modes[0].resample(grid)
        net2 = cs.CascadeNetwork(grid, s, inputs=pu.single_input(u),
                                 outputs=pu.single_output(v), input_dims=[d], output_dims=[d + 1])
        cfg = _cfg(strict)
        # excitation number is conserved, so the capture cutoff d + 1 is exact
        cfg.leakage_skip = ("v1",)
        tr = ev.propagate(net2.initial_state(inputs=fock_in), cs.build_single(net2), cfg)
        rv = net2.space.partial_trace(tr.final_state, "v1")
        res.warnings += tr.warnings
        res.metrics["captured_photons"] = _info(float(np.real(hb.expectation(rv, hb.number(d + 1)))))
        res.metrics["captured_purity"] = _info(hb.purity(rv))
        res.artifacts.update(trajectory=tr, captured_state=rv)
    res.runtime = time.perf_counter() - t_start
    return res


# -- registry --------------------------------------------------------------------------

SCENARIOS = {
    "phase_noise": run_phase_noise,
    "kpo_cat": run_kpo_cat,
    "lambda": run_lambda,
    "blockade": run_blockade,
    "snowball": run_snowball,
    "custom": run_custom,
}

DESCRIPTIONS = {
    "phase_noise": "one photon reflected from a dephasing empty cavity; output mode spectrum",
    "kpo_cat": "travelling cat state from a Kerr parametric oscillator; fidelity and beta",
    "lambda": "Lambda atom emitting into two orthogonal modes; occupations and Hinton weights",
    "blockade": "one- or two-photon pulse on a two-sided Jaynes-Cummings cavity; (tau, g) sweep",
    "snowball": "pure pulse state through a thermal channel; transfer fidelity",
    "custom": "user-described one-sided network; output spectrum and dominant-mode capture",
}
