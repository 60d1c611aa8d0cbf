"""Secret key rate as classical channels are added, and where it runs out.

Run with ``python demos/02_key_rate_vs_channels.py``.
"""
import dataclasses

from mdiqkd_coexist import runner
from mdiqkd_coexist.runner import Scenario

print("== 1. analytic model against the measured key rates ==")
print(runner.format_table2(runner.table2_comparison()))

print("== 2. key rate per clock cycle vs number of 10 Gbps channels, 2 x 20 km ==")
configs = {
    "1532 nm, bidirectional": Scenario(id="c-bi", length_km=20.0),
    "1532 nm, co-propagating": Scenario(id="c-uni", length_km=20.0, direction="unidirectional_co"),
    "1310 nm, bidirectional": Scenario(id="o-bi", length_km=20.0, lambda_q_nm=1310.0),
    "1310 nm, co-propagating": Scenario(id="o-uni", length_km=20.0, lambda_q_nm=1310.0, direction="unidirectional_co"),
}
counts = (0, 1, 2, 5, 10, 50, 100, 500, 1000)
print("   N      " + "".join(f"{name:>26}" for name in configs))
for n in counts:
    print(f"   {n:<6} " + "".join(f"{runner.rate_at(sc, n):26.3e}" for sc in configs.values()))

print("\n== 3. largest number of channels with a positive key rate ==")
for name, sc in configs.items():
    n_max = runner.find_n_max(sc)
    flag = "  (depends on the default 1310 nm Raman factor)" if sc.conditional else ""
    print(f"   {name:<26} N_max = {n_max:5d}  ~ {n_max * 10 / 1000:.2f} Tbps{flag}")

print("\n== 4. the same at 2 x 40 km ==")
for name, sc in configs.items():
    far = dataclasses.replace(sc, length_km=40.0)
    print(f"   {name:<26} N_max = {runner.find_n_max(far)}")

print("\n== 5. what a faster clock buys (1532 nm, N = 2) ==")
for clock in (20e6, 625e6, 2.5e9):
    sc = Scenario(id="clk", length_km=20.0, n_channels=2, clock_rate_hz=clock)
    row, _ = runner.evaluate_scenario(sc)
    print(f"   {clock / 1e6:7.0f} MHz: {row.r_inf_bps:10.1f} bit/s")
