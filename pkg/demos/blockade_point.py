"""One point of the photon-blockade sweep, with the frequency-domain check.

A single photon detuned by g hits a two-sided cavity holding an atom with
coupling g. The reflected and transmitted pulses are recaptured in their
dominant modes; for one photon the captured populations follow from the
linear transmission spectrum, which serves as an independent check.
"""
import sys

from pulsecascade import analysis as an
from pulsecascade import scenarios as sc

tau, g = (float(x) for x in sys.argv[1:3]) if len(sys.argv) > 2 else (1.0, 2.0)
for n in (1, 2):
    p = sc.blockade_point(n, tau, g)
    print(f"{n} photon(s), tau={tau:g}, g={g:g}")
    print("  reflected Fock populations  ", p["pv"].round(5))
    print("  transmitted Fock populations", p["pw"].round(5))
    if n == 1:
        R, T = an.blockade_populations(tau, g)
        print(f"  frequency-domain reference   R={R:.5f} T={T:.5f}")
