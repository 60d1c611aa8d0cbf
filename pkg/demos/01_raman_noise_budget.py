"""How much noise does a classical 10 Gbps link put into the quantum channel?

Run with ``python demos/01_raman_noise_budget.py``.
"""
import numpy as np

from mdiqkd_coexist import calibration
from mdiqkd_coexist.channel import ClassicalChannel, Direction, FibreSpec, raman_co, raman_counter
from mdiqkd_coexist.runner import Scenario

print("== 1. calibrate the scattering factor from the measured spectrum ==")
table = calibration.load_table()
fibre = FibreSpec(20.0, alpha_q=0.20, alpha_c=0.30)
for wl in (1530.0, 1548.0, 1565.0):
    counts = calibration.noise_counts_at(table, wl)
    beta = calibration.beta_from_table(table, wl, fibre)
    print(f"   {wl:.0f} nm: {counts / 1e3:6.3f} kHz measured -> beta*dlambda = {beta:.3e} /km")

print("\n== 2. where the Raman light comes from ==")
beta = calibration.beta_from_table(table, 1548.0, fibre)
print("   8 uW launched, output at the far end of the arm (pW):")
print("   L [km]   co-propagating   counter-propagating")
for length in (1, 5, 10, 20, 40, 80):
    co = raman_co(8e-6, beta, fibre.alpha_q_nat, fibre.alpha_c_nat, length)
    ct = raman_counter(8e-6, beta, fibre.alpha_q_nat, fibre.alpha_c_nat, length)
    print(f"   {length:6d}   {co * 1e12:14.4f}   {ct * 1e12:19.4f}")
print("   counter-propagating light is scattered next to the receiver and saturates;")
print("   co-propagating light is scattered near the sender and mostly absorbed on the way.")

print("\n== 3. noise click probability per detector and 0.5 ns window ==")
for direction in ("bidirectional", "unidirectional_co"):
    probs = [Scenario(id="d", length_km=20.0, n_channels=n, direction=direction).noise_prob() for n in (0, 1, 5, 10)]
    print(f"   {direction:<18}" + "  ".join(f"N={n}: {p:.2e}" for n, p in zip((0, 1, 5, 10), probs)))

print("\n== 4. an O-band quantum channel ==")
o = Scenario(id="o", length_km=20.0, n_channels=10, lambda_q_nm=1310.0)
c = Scenario(id="c", length_km=20.0, n_channels=10)
print(f"   10 channels, 2 x 20 km: 1532 nm p = {c.noise_prob():.2e}, 1310 nm p = {o.noise_prob():.2e}")
print(f"   (1310 nm beta*dlambda = {o.beta_dlambda():.1e} /km is a default, not a measurement)")
print(f"   extra quantum-channel loss at 1310 nm: {np.round((0.33 - 0.20) * 20, 2)} dB per arm")
