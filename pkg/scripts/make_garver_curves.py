"""Generate the bundled hourly net-load curves for the 6-bus example.

Writes src/robex/data/garver6_curves.csv: one synthetic year (8760 h) per
load bus, built from seasonal/weekly/daily cycles plus seeded noise so the
hour-to-hour ramps have realistic spread. Deterministic; re-running
reproduces the shipped file byte-for-byte.
"""

from pathlib import Path

import numpy as np

# peak net load per bus, MW (bus 6 carries no load)
PEAKS = {"b1": 56.0, "b2": 168.0, "b3": 28.0, "b4": 112.0, "b5": 168.0}
HOURS = 8760
SEED = 20240601


def shape(rng: np.random.Generator, phase: float) -> np.ndarray:
    t = np.arange(HOURS)
    day = t % 24
    seasonal = 0.14 * np.cos(2 * np.pi * (t / HOURS - 0.02))       # winter peak
    daily = 0.20 * np.cos(2 * np.pi * (day - 18.0 - phase) / 24.0)  # evening peak
    weekly = 0.05 * np.cos(2 * np.pi * ((t // 24) % 7) / 7.0)
    noise = 0.02 * rng.standard_normal(HOURS)
    base = 0.64 + seasonal + daily + weekly + noise
    # one-sided smoothing keeps hour-to-hour ramps moderate without
    # flattening the duration curve
    base = 0.5 * (base + np.roll(base, 1))
    return np.clip(base, 0.25, 1.0)


def main():
    rng = np.random.default_rng(SEED)
    out = Path(__file__).resolve().parents[1] / "src" / "robex" / "data" / "garver6_curves.csv"
    cols = {}
    for n, (bus, peak) in enumerate(PEAKS.items()):
        cols[bus] = peak * shape(rng, phase=0.7 * n)
    with out.open("w") as fh:
        fh.write("hour," + ",".join(PEAKS) + "\n")
        for t in range(HOURS):
            fh.write(f"{t + 1}," + ",".join(f"{cols[b][t]:.3f}" for b in PEAKS) + "\n")
    print(f"wrote {out} ({HOURS} hours, {len(PEAKS)} buses)")
    for bus in PEAKS:
        ramps = np.diff(cols[bus])
        print(f"  {bus}: peak {cols[bus].max():7.1f}  min {cols[bus].min():7.1f}  "
              f"worst ramp +{ramps.max():.1f}/{ramps.min():.1f}")


if __name__ == "__main__":
    main()
