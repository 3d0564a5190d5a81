"""Regenerates metrics.jsonl, metrics.csv and spikes.json.

Latency noise is uniform with standard deviation 10 ms, so no ordinary
sample can reach a z-score of 3. Five latency spikes of +100 ms (10 sigma)
are injected 120 steps apart. Cost metrics are constant.
"""
import csv
import json
import math
import random

rng = random.Random(20240611)
T0 = 1_700_000_000_000
STEP_MS = 10_000
STEPS = 720
SPIKES = [150, 270, 390, 510, 630]
HALF = 10.0 * math.sqrt(3.0)

rows = []
for k in range(STEPS):
    ts = T0 + k * STEP_MS
    lat = 120.0 + rng.uniform(-HALF, HALF)
    if k in SPIKES:
        lat += 100.0
    cpu = 0.55 + rng.uniform(-0.05, 0.05)
    thr = 30.0 + rng.uniform(-2.0, 2.0)
    rows += [
        (ts, "api-gw", "latency_ms", round(lat, 3), "ms"),
        (ts, "api-gw", "cpu_util", round(cpu, 4), "fraction"),
        (ts, "api-gw", "throughput_rps", round(thr, 3), "rps"),
        (ts, "billing", "cost_infra", 20.0, "currency-per-step"),
        (ts, "billing", "cost_license", 2.0, "currency-per-step"),
        (ts, "billing", "cost_maintenance", 1.0, "currency-per-step"),
        (ts, "billing", "cost_ops", 3.0, "currency-per-step"),
    ]

with open("metrics.jsonl", "w") as f:
    for ts, src, m, v, u in rows:
        f.write(json.dumps({"ts": ts, "source": src, "metric": m, "value": v, "unit": u}) + "\n")

with open("metrics.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["ts", "source", "metric", "value", "unit"])
    for r in rows[-7 * 30:]:
        w.writerow(r)

with open("spikes.json", "w") as f:
    json.dump({"metric": "latency_ms", "spike_ts": [T0 + k * STEP_MS for k in SPIKES]}, f, indent=2)
    f.write("\n")
