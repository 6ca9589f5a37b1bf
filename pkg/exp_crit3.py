"""Exploratory run for the desk-scale SL acceptance analog (criterion 3)."""
import time

import numpy as np

import meltgraph as mg
from meltgraph.gnn import LossSpec, init_params, predict
from meltgraph.meshgraph import (
    ConcatSamples,
    FeatureVariant,
    grid_to_graph,
    propagation_matrix,
    samples_from_history,
)
from meltgraph.scanpath import enumerate_island_sequences, island_plan
from meltgraph.thermal import simulate
from meltgraph.training import TrainConfig, evaluate_metrics, train_sequential

t0 = time.perf_counter()
mat = mg.MaterialTable.in625()
proc = mg.ProcessParams()
grid = mg.GridSpec.square(2.0, 0.05)
graph = grid_to_graph(grid)
prop = propagation_matrix(graph, "mean")
variant = FeatureVariant.single_laser()

seqs = enumerate_island_sequences(grid, 1.0, 100, 0)
cases = []
for i, seq in enumerate(seqs):
    hist = simulate(island_plan(grid, 1.0, seq), mat, proc)
    cases.append(samples_from_history(hist, graph, prop, variant, f"case{i}"))
print(f"simulated 24 histories in {time.perf_counter()-t0:.1f}s", flush=True)

config = TrainConfig(
    loss=LossSpec("mse"),
    learning_rate=1e-3,
    max_steps_per_case=2500,
    patience=5000,
    val_check_every=100,
    dropout=0.1,
    seed=0,
)
params = init_params("SL", variant.feature_width, seed=0)
t1 = time.perf_counter()
params, trace = train_sequential(cases[:20], config, params)
print(f"trained in {time.perf_counter()-t1:.1f}s, steps={len(trace)}", flush=True)
print(f"last train losses: {[f'{r.train_loss:.1f}' for r in trace[-3:]]}")

holdout = ConcatSamples(cases[20:])
report = evaluate_metrics(params, holdout, 1000.0)
print(f"holdout RMSE={report.rmse:.2f} degC MAPE={report.mape:.3f}% max_peak_APE={report.max_peak_ape:.3f}%")
pa = np.array(report.peak_apes)
print(f"peak APEs: n={pa.size} mean={pa.mean():.3f} p99={np.percentile(pa,99):.3f} p999={np.percentile(pa,99.9):.3f} max={pa.max():.3f}")

# locate the worst offenders
worst = []
for ci in range(20, 24):
    case = cases[ci]
    for si in range(len(case)):
        s = case[si]
        y = predict(params, s.features, s.propagation)
        t = s.target
        mask = t > 1000.0
        if not np.any(mask):
            continue
        apes = np.abs(y[mask] - t[mask]) / t[mask] * 100.0
        j = int(np.argmax(apes))
        if apes[j] > 15.0:
            node = np.flatnonzero(mask)[j]
            worst.append((float(apes[j]), ci, s.timestep, int(node), float(t[node]), float(y[node])))
worst.sort(reverse=True)
print(f"frames with peak APE>15%: {len(worst)}")
for w in worst[:15]:
    print(f"  ape={w[0]:7.1f}% case={w[1]} t={w[2]:5d} node={w[3]:4d} target={w[4]:9.1f} pred={w[5]:9.1f}")
ts = [w[2] for w in worst]
if ts:
    print(f"timesteps of offenders: min={min(ts)} median={sorted(ts)[len(ts)//2]} max={max(ts)}")
