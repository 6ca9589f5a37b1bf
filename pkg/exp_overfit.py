"""Single-case overfit probe: how well can the SL architecture fit the
spec-default oracle data it has seen?"""
import sys
import time

import numpy as np

import meltgraph as mg
from meltgraph.gnn import LossSpec, init_adam_state, init_params, predict
from meltgraph.meshgraph import FeatureVariant, grid_to_graph, propagation_matrix, samples_from_history
from meltgraph.scanpath import enumerate_island_sequences, island_plan
from meltgraph.thermal import simulate
from meltgraph.training import TrainConfig, _train_on, evaluate_metrics

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 20000
lr = float(sys.argv[2]) if len(sys.argv) > 2 else 1e-3

mat = mg.MaterialTable.in625()
proc = mg.ProcessParams()
grid = mg.GridSpec.square(2.0, 0.05)
graph = grid_to_graph(grid)
prop = propagation_matrix(graph, "mean")
variant = FeatureVariant.single_laser()
seq = enumerate_island_sequences(grid, 1.0, 100, 0)[0]
hist = simulate(island_plan(grid, 1.0, seq), mat, proc)
case = samples_from_history(hist, graph, prop, variant, "c0")

config = TrainConfig(
    loss=LossSpec("mse"),
    learning_rate=lr,
    max_steps_per_case=steps,
    patience=10**9,
    val_check_every=10**9,
    dropout=0.1,
    seed=0,
)
params = init_params("SL", variant.feature_width, seed=0)
state = init_adam_state(params)
trace = []
t0 = time.perf_counter()
params, state = _train_on(case, [], params, state, config, 0, trace)
print(f"steps={len(trace)} in {time.perf_counter()-t0:.0f}s last losses:",
      [f"{r.train_loss:.0f}" for r in trace[-3:]], flush=True)

report = evaluate_metrics(params, case, 1000.0)
pa = np.array(report.peak_apes)
print(f"seen-data RMSE={report.rmse:.1f} MAPE={report.mape:.2f}% "
      f"peakAPE mean={pa.mean():.2f} p99={np.percentile(pa,99):.2f} max={pa.max():.2f}")

# frame-450 paper-style check
s = case[449]
y = predict(params, s.features, s.propagation)
t = s.target
mask = t > 1000.0
apes = np.abs(y[mask] - t[mask]) / t[mask] * 100.0
print(f"frame450: n_peaks={mask.sum()} maxAPE={apes.max():.2f}% meanAPE={apes.mean():.2f}%")
