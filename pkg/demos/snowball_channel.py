"""A pulse crosses a hot channel and survives.

Thermal photons emitted by the source occupy modes orthogonal to the pulse
mode, so a pulse prepared in vacuum (or a superposition) is recaptured
almost intact even at thermal flux 3. The exact Gaussian moment equations
reduce the whole network to a loss channel; at small flux the dense
density-matrix engine gives the same answer.
"""
from pulsecascade import scenarios as sc

for state in sc.SNOWBALL_STATES:
    r = sc.run_snowball(input_state=state)
    m = r.metrics
    print(f"{state:18s} fidelity {m['fidelity'].value:.5f}  "
          f"transmissivity {m['transmissivity'].value:.6f}  "
          f"thermal occupation {m['thermal_occupation'].value:.1f}")

kw = dict(input_state="superposition_01", flux=0.1, capture_dim=5, n_steps=1200)
dense = sc.run_snowball(engine="dense", thermal_dim=5, **kw)
moments = sc.run_snowball(**kw)
print(f"flux 0.1: dense {dense.metrics['fidelity'].value:.5f}, "
      f"moments {moments.metrics['fidelity'].value:.5f}")
