"""Replicated error table for the splitting-rate reconstruction.

A scaled-down version of the benchmark table: both trial rates, two tree
depths, whole-tree versus last-generation samples, threshold estimator
versus oracle.  Increase ``reps`` to 100 for the full protocol (a few
minutes on a laptop); the seeds make any setting exactly reproducible.
"""

from bmcwave import TableConfig, run_table
from bmcwave.experiment import replicates_to_csv, table_to_csv

cfg = TableConfig(
    spikes=("large", "high"),
    n_list=(12, 15),
    reps=10,
    index_sets=("tree", "generation"),
    estimators=("threshold", "oracle"),
    base_seed=0,
)
stats, records = run_table(cfg)

print(f"{'spike':6s} {'n':>3s} {'sample':11s} {'estimator':10s}"
      f" {'mean':>7s} {'sd':>7s} {'zeroed':>7s} {'level':>6s}")
for s in stats:
    comp = f"{s.compression:6.1f}%" if s.compressions.size else "      -"
    level = s.j_star if s.j_star is not None else "-"
    print(
        f"{s.spike:6s} {s.n:3d} {s.index_set:11s} {s.estimator:10s}"
        f" {s.mean:7.4f} {s.sd:7.4f} {comp} {level:>6}"
    )

table_to_csv(stats, "table.csv")
replicates_to_csv(records, "table_replicates.csv")
print("\nwrote table.csv and table_replicates.csv")
print("whole-tree errors sit below last-generation errors cell by cell,")
print("and deeper trees improve every cell; compare with the reference table.")
