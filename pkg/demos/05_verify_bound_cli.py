"""Drive the experiment harness end to end: the verify-bound tool.

One run: build a toy-ladder partition, measure per-part gaps, volumes and
escape probabilities, check the six structural assumptions, verify the
differential inequality for psi_t at interior grid points, fit the decay
constants, and confirm the measured series stays below the closed-form
bound curve.  Everything lands in CSV + JSON under out/.
"""

import json
import pathlib
import tempfile

from lrplab.cli import main as cli_main

out = pathlib.Path(tempfile.mkdtemp(prefix="lrplab_demo_"))
config = {
    "kind": "verify-bound",
    "params": {"d": 1, "s": 1.5, "beta": 1.0, "L": 0},
    "geometry": "box",
    "N": [512],
    "seed": 11,
    "replicas": 1,
    "ladder": {"mode": "toy_override", "rho": 0.3},
    "settings": {"T1": 0.5, "T2": 24.0, "t_points": 160},
    "out": str(out),
}
cfg_path = out / "config.json"
cfg_path.write_text(json.dumps(config, indent=2))

code = cli_main(["verify-bound", "--config", str(cfg_path)])
print(f"exit code {code}")

summary = json.loads((out / "verify_bound_summary.json").read_text())
r = summary["results"]
if "replicas" in r:
    r = r["replicas"][0]
print("events:     ", {k: v["ok"] for k, v in r["events"].items()})
print("assumptions:", {k: v["ok"] for k, v in r["assumptions"].items()})
print("diff ineq:  ", r["differential_inequality"])
print("bound violations:", r["bound_violations"])
print(f"files in {out}:")
for p in sorted(out.iterdir()):
    print("  ", p.name)
