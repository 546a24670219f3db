#!/usr/bin/env python3
"""Regenerates data/sample_trace: ten replayable jobs on data/clusters/tx_mini.json
with CPU telemetry at 10 s, GPU telemetry at 100 ms and measured job power at 10 s."""
import os
import random
import sys

out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data", "sample_trace")
rng = random.Random(20240917)

# job_id, submit, start, nodes, cores, gpus, mem, walltime, samples(10 s)
jobs = [
    ("tx0001", 0, 0, ["c-0"], 40, 0, 64000, 300, 30),
    ("tx0002", 5, 10, ["c-1"], 20, 0, 32000, 200, 20),
    ("tx0003", 12, 20, ["c-1"], 20, 0, 32000, 250, 25),
    ("tx0004", 0, 30, ["g-0"], 20, 2, 96000, 120, 12),
    ("tx0005", 40, 60, ["c-2", "c-3"], 40, 0, 128000, 180, 18),
    ("tx0006", 50, 50, ["g-1"], 10, 1, 48000, 90, 9),
    ("tx0007", 60, 70, ["g-1"], 10, 1, 48000, 150, 10),   # telemetry shorter than walltime
    ("tx0008", 100, 160, ["g-0"], 40, 2, 192000, 100, 14),  # telemetry longer than walltime
    ("tx0009", 200, 250, ["c-2", "c-3"], 16, 0, 32000, 120, 12),
    ("tx0010", 210, 300, ["c-0", "c-1"], 8, 0, 16000, 60, 6),
]

os.makedirs(os.path.join(out, "telemetry"), exist_ok=True)
with open(os.path.join(out, "jobs.csv"), "w") as f:
    f.write("job_id,submit_time_s,node_count,cores,gpus,memory_mb,walltime_s,trace_start_time_s,trace_nodes,gflops_estimate\n")
    for jid, sub, start, nodes, cores, gpus, mem, wall, n in jobs:
        gflops = round(cores * len(nodes) * 18.5 + gpus * len(nodes) * 7000.0, 1)
        f.write(f"{jid},{sub},{len(nodes)},{cores},{gpus},{mem},{wall},{start},{';'.join(nodes)},{gflops}\n")

for jid, sub, start, nodes, cores, gpus, mem, wall, n in jobs:
    cpu = [round(rng.uniform(0.35, 0.98), 3) for _ in range(n)]
    rows = [f"{jid},10,cpu_util," + ";".join(str(v) for v in cpu)]
    if gpus:
        gpu = [round(rng.uniform(0.0, 1.0), 2) for _ in range(n * 100)]
        rows.append(f"{jid},0.1,gpu_util," + ";".join(str(v) for v in gpu))
    per_node_idle = 200.0 if nodes[0].startswith("g") else 150.0
    power = []
    for u in cpu:
        p = len(nodes) * (per_node_idle * cores / 40 + 300.0 * u * cores / 40 + gpus * (50 + 250 * rng.uniform(0.2, 0.9)))
        power.append(round(p, 1))
    rows.append(f"{jid},10,power_w," + ";".join(str(v) for v in power))
    with open(os.path.join(out, "telemetry", f"{jid}.csv"), "w") as f:
        f.write("job_id,quanta_s,kind,values\n")
        f.write("\n".join(rows) + "\n")
