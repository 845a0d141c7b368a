# coding: utf-8

# # A tour of the command line
#
# Everything below goes through `ddpcut.cli.main`, the same entry point as
# the installed `ddpcut` command.

import csv
import json
import tempfile
from pathlib import Path

from ddpcut.cli import main

work = Path(tempfile.mkdtemp(prefix="ddpcut-"))
print("working in", work)

# ## Generate an instance and solve it

main(["generate", "inventory", "--T", "40", "--out", str(work)])
inst = str(work / "inventory_T40.json")

main(["solve", "--algo", "ddp-cs-1", "--eps", "1e-6", inst, "--out", str(work / "cs1")])
report = json.loads((work / "cs1" / "report.json").read_text())
print("report keys:", sorted(report)[:6], "...")

# ## Compare algorithms on one instance

main(["compare", inst, "--algo", "simplex", "--algo", "ddp", "--algo", "ddp-cs-2",
      "--algo", "dp-oracle", "--out", str(work / "cmp")])

# ## The grid oracle on its own

main(["oracle", "inventory", "--T", "40", "--N", "1001", "--out", str(work / "oracle")])

# ## A small size sweep
#
# bench.csv has one row per (size, algorithm, tolerance).

main(["bench", "portfolio", "--T", "4", "--sizes-n", "2", "4", "--algo", "simplex", "--algo", "ddp-cs-1",
      "--eps", "1e-6", "--out", str(work / "bench")])
with open(work / "bench" / "bench.csv") as fh:
    for row in csv.DictReader(fh):
        print(row["size"], row["algo"], row["value"], row["iters"], row["status"])
