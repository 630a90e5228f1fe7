"""End-to-end acceptance runs of the published scenarios.

Each test prints one PASS/FAIL line, repeated in the terminal summary.
Runs are slow (about an hour in total on one core).
"""
import numpy as np
import pytest
from scipy.linalg import sqrtm

from conftest import ACCEPTANCE
from pulsecascade import cascade as cs
from pulsecascade import correlations as co
from pulsecascade import evolve as ev
from pulsecascade import hilbert as hb
from pulsecascade import pulses as pu
from pulsecascade import scenarios as sc
from test_evolve import _direct_cascade, _driven_atom_oracle, _phase_noise_final
from test_pulses import _hermite_modes


def report(n, title, checks, runtime=None):
    """Record the outcome of criterion ``n``; ``checks`` maps a label to (ok, detail)."""
    failed = [f"{k}: {d}" for k, (ok, d) in checks.items() if not ok]
    extra = f" ({runtime:.0f} s)" if runtime is not None else ""
    line = f"criterion {n} {title}: {'PASS' if not failed else 'FAIL'}{extra}"
    if failed:
        line += " | " + "; ".join(failed)
    ACCEPTANCE[n] = line
    print(line)
    assert not failed, line


def uhlmann(a, b):
    r = sqrtm(a)
    return float(np.real(np.trace(sqrtm(r @ b @ r))) ** 2)


def metric_checks(result, keys=None):
    return {k: (m.passed, f"{complex(m.value).real:.4g} vs {m.target}")
            for k, m in result.metrics.items()
            if m.passed is not None and (keys is None or k in keys)}


def budget(result, minutes):
    return {"runtime": (result.runtime < 60 * minutes,
                        f"{result.runtime:.0f} s vs {60 * minutes} s")}


@pytest.mark.acceptance
def test_criterion_1_phase_noise():
    r = sc.run_phase_noise()
    keys = [f"occupation_{i}" for i in range(1, 10)]
    report(1, "phase-noise occupations", {**metric_checks(r, keys), **budget(r, 2)}, r.runtime)


@pytest.mark.acceptance
def test_criterion_2_kpo_cat():
    r = sc.run_kpo_cat()
    keys = ["dominant_occupation", "cat_fidelity", "beta_abs", "beta_arg_over_pi"]
    report(2, "KPO travelling cat", {**metric_checks(r, keys), **budget(r, 20)}, r.runtime)


@pytest.mark.acceptance
def test_criterion_3_lambda():
    r = sc.run_lambda()
    keys = ["n1", "n2", "hinton_g1_1_0", "hinton_g2_0_1"]
    report(3, "lambda two-mode emission", {**metric_checks(r, keys), **budget(r, 10)}, r.runtime)


@pytest.mark.acceptance
def test_criterion_4_blockade_one_photon():
    r = sc.run_blockade(n_photons=1)
    checks = metric_checks(r)
    taus = {float(k.split("tau=")[1].split(",")[0]) for k in checks if "tau=" in k}
    assert {0.1, 0.25, 1.0, 4.0} <= taus
    report(4, "one-photon blockade", checks, r.runtime)


@pytest.mark.acceptance
def test_criterion_5_blockade_two_photons():
    r = sc.run_blockade(n_photons=2)
    checks = metric_checks(r)
    assert any(k.startswith("beamsplitter") for k in checks)
    assert any(k.startswith("transmitted_pair_dominates") for k in checks)
    report(5, "two-photon blockade", checks, r.runtime)


@pytest.mark.acceptance
def test_criterion_6_snowball():
    checks, total = {}, 0.0
    for state in ("vacuum", "superposition_01", "superposition_12"):
        r = sc.run_snowball(input_state=state)
        m = r.metrics["fidelity"]
        checks[f"{state} fidelity"] = (m.passed, f"{m.value:.4f} vs {m.target}")
        checks[f"{state} runtime"] = budget(r, 10)["runtime"]
        total += r.runtime
    report(6, "thermal snowball", checks, total)


@pytest.mark.acceptance
def test_criterion_7_properties():
    checks = {}

    # trace and positivity on a two-photon cascade through a dephased Kerr-free cavity
    grid = pu.TimeGrid(0, 18, 1800)
    u = pu.gaussian_mode(grid, 1.0, 6.0)
    net = cs.CascadeNetwork(grid, cs.empty_cavity(4, 1.0, 1.0, 0.5), inputs=pu.single_input(u),
                            input_dims=[3], outputs=pu.single_output(u), output_dims=[3])
    tr = ev.propagate(net.initial_state(inputs=[hb.fock(3, 2)]), cs.build_single(net),
                      ev.IntegratorConfig(positivity_checks=40, leakage_skip=("c", "v1")))
    checks["trace"] = (tr.max_trace_error < 1e-6, f"{tr.max_trace_error:.2e}")
    checks["positivity"] = (tr.min_eigenvalue >= -1e-6, f"{tr.min_eigenvalue:.2e}")

    # coherent input factorizes and matches the classically driven atom
    grid = pu.TimeGrid(0, 12, 2400)
    alpha0 = 1.2 * np.exp(0.3j)
    u = pu.gaussian_mode(grid, 1.0, 6.0)
    net = cs.CascadeNetwork(grid, cs.two_level_atom(1.0), inputs=pu.single_input(u),
                            input_dims=[12])
    tr = ev.propagate(net.initial_state(inputs=[hb.coherent_state(12, alpha0)]),
                      cs.build_single(net), ev.IntegratorConfig(store_stride=200))
    keys = sorted(tr.states)
    oracle = _driven_atom_oracle(1.0, 6.0, 1.0, alpha0, tr.times[keys])
    worst = 1.0
    for k, rs in zip(keys, oracle):
        rho = tr.states[k]
        ra = net.space.partial_trace(rho, "atom")
        ru = net.space.partial_trace(rho, "u1")
        worst = min(worst, uhlmann(ra, rs), uhlmann(rho, np.kron(ru, ra)))
    checks["factorization"] = (worst > 1 - 1e-4, f"{1 - worst:.2e}")

    # matched capture leaves nothing in the loss channel
    _, tr = _direct_cascade()
    loss = ev.channel_loss(tr, "L0")
    checks["dark capture"] = (loss < 1e-3, f"{loss:.2e}")

    # kernel Hermiticity
    grid = pu.TimeGrid(0, 12, 1200)
    u = pu.gaussian_mode(grid, 1.0, 4.0)
    net = cs.CascadeNetwork(grid, cs.empty_cavity(3, 0.5, 1.0, 1.5), inputs=pu.single_input(u))
    K = co.g1_kernel(cs.build_single(net), net.initial_state(inputs=[hb.fock(2, 1)]), kernel_stride=10)
    herm = K.hermiticity_error()
    checks["kernel hermiticity"] = (herm < 1e-8, f"{herm:.2e}")

    # reshaped mode Gram matrices
    grid = pu.TimeGrid(0, 20, 4000)
    gram = 0.0
    for builder in (pu.multimode_output_couplings, pu.multimode_input_couplings):
        b = builder(_hermite_modes(grid, 3))
        for j in range(3):
            stage = [b.reshaped[i][j] for i in range(j, 3)]
            gram = max(gram, np.max(np.abs(pu.gram_matrix(stage) - np.eye(len(stage)))))
    checks["gram"] = (gram < 1e-3, f"{gram:.2e}")

    # step halving
    a, b = _phase_noise_final(600).final_state, _phase_noise_final(1200).final_state
    rel = np.linalg.norm(a - b) / np.linalg.norm(b)
    checks["step halving"] = (rel < 1e-4, f"{rel:.2e}")
    report(7, "property suite", checks)
