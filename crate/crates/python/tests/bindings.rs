use std::ffi::CString;

use pyo3::prelude::*;

fn scenarios() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../core/scenarios").to_string()
}

fn run(code: &str) {
    pyo3::append_to_inittab!(tmcurv_py);
    Python::with_gil(|py| {
        let globals = pyo3::types::PyDict::new(py);
        globals.set_item("SCENARIOS", scenarios()).unwrap();
        let src = CString::new(code).unwrap();
        py.run(&src, Some(&globals), None).map_err(|e| e.display(py)).unwrap();
    });
}

use tmcurv_py::tmcurv_py;

#[test]
fn module_round_trip() {
    run(r#"
import json, tmcurv_py as t
assert abs(t.eval_expr("sin(x1)^2+u1", 1, [0.5, 2.0]) - (0.229848847065930 + 2.0)) < 1e-12
try:
    t.eval_expr("sin(x1", 1, [0.0, 0.0])
    raise AssertionError("parse error expected")
except ValueError:
    pass
sc = t.Scenario.load(SCENARIOS + "/energy_alpha_flat.json")
closed, oracle = sc.laplacian([0.0, 0.0], [1.0, 0.0])
assert abs(closed - 12.0) < 1e-10 and abs(oracle - 12.0) < 1e-8
text = open(SCENARIOS + "/sasaki_flat.json").read()
doc = json.loads(text)
doc["sample"]["count"] = 10
r = t.Scenario.from_json(json.dumps(doc)).verify(seed=3)
assert r.status == "pass" and r.exit_code == 0 and r.seed == 3 and r.point_count == 10
assert t.Report.from_json(r.to_json()) == r
a = t.Scenario.from_json(json.dumps(doc)).audit("vhv")
assert a.verdicts()[0][0] == "vhv"
"#);
}
