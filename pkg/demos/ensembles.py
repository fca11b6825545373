"""
Forests and boosting
====================

Ensemble scores are per-tree normalized scores averaged over members. The
forest run below averages ten simulated replicates, which is where the
biased-noise block x3-x5 picks up a clearly negative fairness score.
"""

from fairfis import BiasMetric, SimulationSpec, fit_gradient_boosting, fit_random_forest, simulate
from fairfis.ensemble import aggregate_importance, predict_ensemble
from fairfis.simulate import run_replicates

d = simulate(SimulationSpec(n=1000, seed=3))

forest = fit_random_forest(d, n_trees=50, seed=1)
boost = fit_gradient_boosting(d, n_stages=100, learning_rate=0.1, seed=1)
for name, model in (("forest", forest), ("boosting", boost)):
    acc = (predict_ensemble(model, d.x) == d.y.values).mean()
    s = aggregate_importance(model, BiasMetric("DP"))
    print(f"{name}: train accuracy {acc:.3f}")
    print("  fis    ", " ".join(f"{v:.3f}" for v in s.fis))
    print("  fairfis", " ".join(f"{v:+.3f}" for v in s.fairfis))

print("boosting training loss, first and last stage:", boost.train_loss[0], boost.train_loss[-1])

summary = run_replicates(SimulationSpec(n=1000, seed=11), "forest", BiasMetric("DP"), n_reps=10, n_trees=100)
for group, vals in summary.group_means().items():
    print(f"{group}: mean fis {vals['fis']:.4f}  mean fairfis {vals['fairfis']:+.4f}")
