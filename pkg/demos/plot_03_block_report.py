"""
Reading a crossed clustering of product listings
================================================

The committed fixture ``tests/data/table5.tsv`` counts listing-page
requests by period of the week (rows) and product group (columns).
We cluster it at several sizes and read the shares off the block report.
"""

from pathlib import Path

from intersite import FitConfig, block_report, chi2_of, fit, read_table

table = read_table(Path(__file__).parent.parent / "tests" / "data" / "table5.tsv")
print(f"{table.shape[0]} x {table.shape[1]} table, total {table.grand_total}")
print(f"chi-squared of the full table: {chi2_of(table):.2f}")

# %%
# At full size the clustering keeps every row and column on its own and
# all of the association survives.
full = fit(table, FitConfig(k=7, l=5, restarts=20, seed=0))
report = block_report(full, table)
print(f"Product_5 share of the total: {100 * report.total_share[4]:.1f}%")
print(f"Product_5 share within Period_6: {100 * report.row_share[5, 4]:.1f}%")

# %%
# Coarser summaries keep less of the statistic.
for k, l in [(2, 2), (3, 2), (4, 3)]:
    model = fit(table, FitConfig(k=k, l=l, restarts=20, seed=0))
    kept = model.chi2 / chi2_of(table)
    print(f"k={k} l={l}: chi2 {model.chi2:10.2f} ({kept:.1%} kept)")

# %%
# The 3 x 2 summary in full.
print(block_report(fit(table, FitConfig(3, 2, restarts=20)), table).to_text())
