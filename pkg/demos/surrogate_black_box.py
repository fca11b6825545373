"""
Explaining a black box with a tree surrogate
============================================

Any model's training-set predictions can be distilled into a fully grown
tree. Where the rows are distinct the surrogate reproduces the predictions
exactly, and its scores describe the black box. Here the "black box" is a
boosted model; in practice predictions would come from a file.
"""

from fairfis import BiasMetric, SimulationSpec, fit_gradient_boosting, fit_surrogate, simulate
from fairfis.ensemble import predict_ensemble

d = simulate(SimulationSpec(scenario="interactions", n=800, seed=5))
black_box = fit_gradient_boosting(d, n_stages=60, seed=2)
preds = predict_ensemble(black_box, d.x)

for kind in ("DP", "EQOP"):
    report = fit_surrogate(d, preds, metric=BiasMetric(kind))
    print(f"{kind}: fidelity {report.fidelity:.3f}, surrogate nodes {report.tree.node_count}, "
          f"black-box accuracy {report.black_box_accuracy:.3f}, fairness {report.black_box_fairness:.3f}")
    ranked = sorted(zip(report.scores.names(), report.scores.fairfis), key=lambda kv: kv[1])
    print("  least fair features:", ", ".join(f"{n} ({v:+.3f})" for n, v in ranked[:3]))
