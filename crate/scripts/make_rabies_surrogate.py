"""Writes data/rabies_surrogate.csv: 151 synthetic case reports.

Dates span 2003-01-06 to 2012-03-06. Interarrival gaps mix a short regime
(mean 8 days) and a long one (mean 44 days). Locations come from two
spatial foci in a local km grid; a few rows have no coordinates.
"""
import csv
import datetime as dt
import random
from pathlib import Path

rng = random.Random(20030106)
start = dt.date(2003, 1, 6)
end = dt.date(2012, 3, 6)
n = 151

gaps = [rng.expovariate(1 / 8) if rng.random() < 0.6 else rng.expovariate(1 / 44) for _ in range(n - 1)]
scale = (end - start).days / sum(gaps)
days = [0]
acc = 0.0
for g in gaps:
    acc += g * scale
    days.append(round(acc))
days[-1] = (end - start).days

foci = [(12.0, 30.0, 4.0), (41.0, 8.0, 6.0)]
missing = set(rng.sample(range(n), 9))
out = Path(__file__).resolve().parent.parent / "data" / "rabies_surrogate.csv"
with out.open("w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["date", "x", "y", "id"])
    for i, d in enumerate(days):
        date = (start + dt.timedelta(days=d)).isoformat()
        if i in missing:
            x, y = "NA", "NA"
        else:
            cx, cy, sd = foci[0] if rng.random() < 0.55 else foci[1]
            x, y = f"{rng.gauss(cx, sd):.3f}", f"{rng.gauss(cy, sd):.3f}"
        w.writerow([date, x, y, f"case_{i + 1:03d}"])
