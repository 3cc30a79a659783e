"""Smoke test for the tmcurv_py extension module.

Build first with `maturin develop` from this directory, or copy the built
library next to this file as tmcurv_py.so.
"""

import json
import os
import sys
import tempfile

import tmcurv_py as t

HERE = os.path.dirname(os.path.abspath(__file__))
SCENARIOS = os.path.join(HERE, "..", "crates", "core", "scenarios")


def main():
    assert "vhv" in t.FLAGGED and len(t.EQUATIONS) == 12

    assert abs(t.eval_expr("exp(x1)*u2", 2, [0.0, 0.0, 0.0, 3.0]) - 3.0) < 1e-15

    sc = t.Scenario.load(os.path.join(SCENARIOS, "energy_alpha_flat.json"))
    closed, oracle = sc.laplacian([0.0, 0.0], [1.0, 0.0])
    print(f"laplacian closed={closed:.12f} oracle={oracle:.12f}")
    assert abs(closed - 12.0) < 1e-10

    with open(os.path.join(SCENARIOS, "sasaki_sphere.json")) as f:
        doc = json.load(f)
    doc["sample"]["count"] = 8
    report = t.Scenario.from_json(json.dumps(doc)).verify()
    print(report)
    assert report.status == "pass" and report.exit_code == 0
    assert t.Report.from_json(report.to_json()) == report

    with tempfile.TemporaryDirectory() as d:
        out = os.path.join(d, "r.csv")
        report.write(out, "csv")
        with open(out) as f:
            rows = f.read().splitlines()
        assert rows[0].startswith("check_id,suite,point_index")

    audit = sc.audit("ricci_v")
    for eq, verdict in audit.verdicts():
        print(f"{eq}: {verdict}")

    try:
        t.Scenario.from_json('{"schema_version": 99}')
    except ValueError as e:
        print(f"rejected: {e}")
    else:
        raise AssertionError("bad schema accepted")

    print("smoke test ok")


if __name__ == "__main__":
    sys.exit(main())
