use pyo3::ffi::c_str;
use pyo3::prelude::*;
use pylinkgreg::pylinkgreg;

#[test]
fn module_estimates_through_python() {
    pyo3::append_to_inittab!(pylinkgreg);
    Python::initialize();
    Python::attach(|py| {
        let code = c_str!(
            r#"
import pylinkgreg as lg
x = [0.1, 0.4, 0.7, 0.2, 0.9]
ctx = lg.Context([[v] for v in x], [(i, i) for i in range(5)], 5, best=[True] * 5)
e = ctx.estimate("sbl", [0, 2, 4], [2.3, 4.1, 4.7], target="total")
assert abs(e.value - 5 * (2 + 3 * sum(x) / 5)) < 1e-12, e
assert e.variance < 1e-20
try:
    ctx.estimate("pi", [0, 2, 4], [2.3, 4.1, 4.7])
except ValueError as err:
    assert "incidence" in str(err)
else:
    raise AssertionError("PI without incidence weights")
m = lg.ht_exact_moments([1.0, 2.0, 4.0, 8.0], 2)
assert m[0] == 6 and abs(m[1] - 15.0) < 1e-12
"#
        );
        py.run(code, None, None).unwrap();
    });
}
