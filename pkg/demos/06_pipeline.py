# The whole chain on the bundled 2-D example, written to a temporary directory.
import json
import tempfile
from pathlib import Path

from pwlcis import load_config, run_pipeline

out = Path(tempfile.mkdtemp(prefix="pwlcis_"))
run_pipeline(load_config("example1"), out)
print("artifacts in", out)
print(sorted(p.name for p in out.iterdir()))
for stage in ("prune", "fit", "assemble", "certify", "oracle"):
    print(stage, json.loads((out / "stats" / f"{stage}.json").read_text()))
print((out / "invariant_set.txt").read_text())
