"""The command-line workflow end to end: CSV in, selection record, report out.

Equivalent shell session:

    selboot fit --data reg.csv --response y --lam 3.5 --seed 11 --out rec.json
    selboot infer --record rec.json --seed 11 --format table
"""

import pathlib
import tempfile

import numpy as np

from selboot import cli

work = pathlib.Path(tempfile.mkdtemp(prefix="selboot-demo-"))
rng = np.random.default_rng(11)
X = rng.standard_normal((120, 5))
y = 0.3 * X[:, 0] - 0.25 * X[:, 2] + rng.standard_normal(120)
header = "age,dose,weight,height,score,y"
rows = [",".join(f"{v:.5f}" for v in row) for row in np.c_[X, y]]
(work / "reg.csv").write_text("\n".join([header] + rows) + "\n")

record = work / "rec.json"
cli.main(["fit", "--data", str(work / "reg.csv"), "--response", "y", "--lam", "3.5",
          "--seed", "11", "--out", str(record)])
print(f"selection record written to {record}", flush=True)
cli.main(["infer", "--record", str(record), "--seed", "11", "--format", "table"])
cli.main(["oracle1d", "--threshold", "1", "--t=-1,0,1"])
