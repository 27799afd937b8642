"""
A small benchmark table
=======================

The full sweep (three images, three noise levels, five lambdas, 20
realizations) is run with::

    spfreg benchmark --csv results.csv

This script runs a reduced version through the same entry point: Cameraman
only, ``eta = 20``, three lambdas, three realizations. It then re-reads the
CSV to show that the summary is recomputed from the stored rows.
"""

import tempfile
from pathlib import Path

from spfreg.cli import main, read_benchmark_csv, summarize

with tempfile.TemporaryDirectory() as tmp:
    csv_path = Path(tmp) / "bench.csv"
    main(["benchmark", "--images", "cameraman", "--eta", "20", "--lambda", "14", "16", "18",
          "--realizations", "3", "--csv", str(csv_path)])

    # %%
    # Rows on disk
    # ------------
    rows = read_benchmark_csv(csv_path)
    print(f"{len(rows)} rows; first: {rows[0]}")
    print(summarize(rows))
