"""
Capturing a GPS receiver with a stronger replica
================================================

The receiver searches code phase and Doppler for the C/A code of PRN 1. An
attacker first raises the noise floor, then transmits the same code with a
different delay. Whichever correlation peak is higher wins.
"""

import numpy as np

from tsagrid.gps import GpsScene, SatelliteSignal, acquire, gen_ca_code, run_spoof_scenario, synthesize_baseband
from tsagrid.phasor import time_offset_to_phase

code = gen_ca_code(1)
print("first ten chips of PRN 1:", "".join("0" if c > 0 else "1" for c in code[:10]))

x = synthesize_baseband(GpsScene((SatelliteSignal(1, 1.0, 200.0, 1500.0),), noise_sigma=0.5), seed=1)
r = acquire(x, 1)
print(f"clean acquisition: code phase {r.code_phase_est:.2f} chips, Doppler {r.doppler_est:.0f} Hz, peak/floor {r.peak_to_floor:.1f}")

auth = GpsScene((SatelliteSignal(1, 1.0, 200.0, 1500.0),), noise_sigma=0.5)
for ratio in (0.5, 1.0, 2.0, 4.0):
    spoof = GpsScene((SatelliteSignal(1, ratio, 700.0, 1500.0),))
    out = run_spoof_scenario(auth, spoof, jam_sigma=3.0, seed=7)
    print(
        f"spoof/authentic power {ratio:>3}: locked at {out.after.code_phase_est:7.2f} chips, "
        f"captured={out.captured}, tie={out.ambiguous}, clock error {out.timing_error * 1e6:8.1f} us"
        f" = {time_offset_to_phase(out.timing_error):8.2f} deg at 60 Hz"
    )

# the forger can dial in any delay; 1421.6 chips is a 30 deg phase error
dt = 1421.6 / 1.023e6
print(f"1421.6 chips -> {dt * 1e3:.5f} ms -> {time_offset_to_phase(dt):.2f} deg")
print("peak cross-correlation PRN1/PRN2:", int(np.max(np.abs([np.dot(code, np.roll(gen_ca_code(2), k)) for k in range(1023)]))))
