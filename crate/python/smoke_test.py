"""Smoke test for the smoothlab_py extension module.

Uses an installed module when one is importable (e.g. after `maturin develop`
in crates/py); otherwise builds the crate with cargo and loads the shared
library from a temporary directory.
"""

import importlib
import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    try:
        return importlib.import_module("smoothlab_py")
    except ImportError:
        pass
    subprocess.run(["cargo", "build", "-p", "smoothlab-py"], cwd=ROOT, check=True)
    lib = ROOT / "target" / "debug" / "libsmoothlab_py.so"
    dest = pathlib.Path(tempfile.mkdtemp()) / "smoothlab_py.so"
    shutil.copy(lib, dest)
    sys.path.insert(0, str(dest.parent))
    return importlib.import_module("smoothlab_py")


def config(name):
    return json.loads((ROOT / "configs" / name).read_text())


def main():
    sl = load_module()

    split = sl.Law.from_json(json.dumps(config("split.json")["law"]))
    assert split.validate()["pass"]
    assert split.classify()["verdict"] == "UNIQUE_L1"
    curve = split.iterate(["split"] * 30)
    for u in (0.01, 1.0, 10.0):
        assert abs(curve.eval(u) - math.exp(-u)) < 1e-12, u
    assert not curve.invariant_violations()

    mean_two = sl.Law.from_json(json.dumps(config("mean_two.json")["law"]))
    report = mean_two.validate()
    assert not report["pass"]
    assert any(c["name"] == "quenched_mean" and not c["pass"] for c in report["checks"])

    cfg = config("atom_brw.json")
    law = sl.Law.from_json(json.dumps(cfg["law"]))
    us = sl.log_points(1e-3, 10.0, 21)
    exact = law.exact_transform(cfg["env"], us, 3)
    grid = law.iterate(cfg["env"])
    assert max(abs(grid.eval(u) - e) for u, e in zip(us, exact)) < 1e-4

    brw = sl.BrwLaw.from_json(json.dumps(cfg["brw_law"]))
    assert brw.verdict(1.0)["verdict"] == "MEAN_ONE"
    finals = brw.final_w(1.0, cfg["env"], 3, 7, 2000)
    done = [w for w in finals if w is not None]
    mean = sum(done) / len(done)
    sd = math.sqrt(sum((w - mean) ** 2 for w in done) / (len(done) - 1))
    assert abs(mean - 1.0) < 4 * sd / math.sqrt(len(done)), mean
    assert finals == brw.final_w(1.0, cfg["env"], 3, 7, 2000)

    assert sl.derive_seed(1, ["env"]) == sl.derive_seed(1, ["env"])
    assert sl.derive_seed(1, ["env"]) != sl.derive_seed(1, ["env", 0])

    try:
        sl.Law.from_json('{"states": [], "colour": 1}')
    except sl.SmoothlabError as e:
        assert str(e).startswith("parse")
    else:
        raise AssertionError("unknown field accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
