"""Cross gap-size-tuned bridgers against corpora damaged at other sizes.

Mirrors the question "how sensitive is the repair to the damage size it
was tuned for": each row is an operator with d_max matched to one train
size, each column a corpus disconnected at one test size, one operator
application per image.  eps_beta0 should improve over the before row in
every cell.
"""

from vesselmend.experiments import ExperimentPlan, ablation_to_csv, run_ablation
from vesselmend.reconnect import BridgeReconnector
from vesselmend.synthtree import TreeParams, generate_tree

corpus = [
    generate_tree(TreeParams(dims=(192, 192), depth=5, seed=50 + k))
    for k in range(8)
]

plan = ExperimentPlan(
    train_sizes=(6.0, 12.0),
    test_sizes=(6.0, 12.0),
    n_disconnections=12,
    seed=3,
)
operators = {s: BridgeReconnector(d_max=s) for s in plan.train_sizes}
results = run_ablation(plan, operators, corpus, jobs=2)

print(ablation_to_csv(plan, results))
for cell in results:
    before = sum(r.eps_beta0 for r in cell.before) / len(cell.before)
    after = sum(r.eps_beta0 for r in cell.after) / len(cell.after)
    print(f"d_max={cell.s_train:>4g} on s_test={cell.s_test:>4g}: "
          f"eps_beta0 {before:6.2f} -> {after:6.2f}")
