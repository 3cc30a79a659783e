#![allow(clippy::needless_range_loop)]

mod common;

use proptest::prelude::*;

use common::*;
use tmcurv::expr::{eval_jet, parse, Expr};
use tmcurv::jets::{ArithOp, Jet};
use tmcurv::oracle::{FrameChange, TmOracle};
use tmcurv::tm_geom::{LiftVector, TangentPoint};
use tmcurv::verify::{sample_points, SampleSpec};

/// Smooth expressions over `(x1, x2, u1, u2)` that stay finite on `[-1, 1]^4`.
fn smooth_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x1".to_string()),
        Just("x2".to_string()),
        Just("u1".to_string()),
        Just("u2".to_string()),
        (-3.0f64..3.0).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})+({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})-({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            inner.clone().prop_map(|a| format!("({a})/(2+sin({a}))")),
            (inner.clone(), 0i32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("exp(0.3*({a}))")),
            inner.clone().prop_map(|a| format!("sqrt(1+({a})^2)")),
            inner.prop_map(|a| format!("-({a})")),
        ]
    })
}

fn point4() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 4)
}

fn eval_at(e: &Expr, p: &[f64]) -> f64 {
    e.eval(p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn display_round_trips(src in smooth_expr(), p in point4()) {
        let e = parse(&src, 2).unwrap();
        let again = parse(&e.to_string(), 2).unwrap();
        let (a, b) = (eval_at(&e, &p), eval_at(&again, &p));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn jets_are_linear(f in smooth_expr(), g in smooth_expr(), a in -2.0f64..2.0, b in -2.0f64..2.0, p in point4()) {
        let (ef, eg) = (parse(&f, 2).unwrap(), parse(&g, 2).unwrap());
        let combined = parse(&format!("({a})*({f})+({b})*({g})"), 2).unwrap();
        let jf = eval_jet(&ef, &p, 3).unwrap();
        let jg = eval_jet(&eg, &p, 3).unwrap();
        let expect = jf.scale(a).arith(&jg.scale(b), ArithOp::Add).unwrap();
        let got = eval_jet(&combined, &p, 3).unwrap();
        for (x, y) in got.coeffs().iter().zip(expect.coeffs()) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0));
        }
    }

    #[test]
    fn jet_derivatives_match_finite_differences(src in smooth_expr(), p in prop::collection::vec(-0.8f64..0.8, 4)) {
        let e = parse(&src, 2).unwrap();
        let j = eval_jet(&e, &p, 3).unwrap();
        let h = 1e-4;
        let shifted = |i: usize, s: f64| {
            let mut q = p.clone();
            q[i] += s;
            eval_at(&e, &q)
        };
        for i in 0..4 {
            let fd = (shifted(i, h) - shifted(i, -h)) / (2.0 * h);
            let d = j.partial(i);
            prop_assert!((fd - d).abs() <= 1e-5 * d.abs().max(1.0), "d/dv{}: jet {} fd {}", i, d, fd);
            let fd2 = (shifted(i, h) - 2.0 * eval_at(&e, &p) + shifted(i, -h)) / (h * h);
            let d2 = j.second(i, i);
            prop_assert!((fd2 - d2).abs() <= 1e-3 * d2.abs().max(1.0), "d2/dv{}2: jet {} fd {}", i, d2, fd2);
        }
        // differentiating the jet agrees with its own second-order coefficient
        let dj = j.diff(0).unwrap();
        prop_assert_eq!(dj.order(), 2);
        prop_assert!((dj.partial(1) - j.second(0, 1)).abs() <= 1e-9 * j.second(0, 1).abs().max(1.0));
    }

    #[test]
    fn frame_change_round_trips(n in prop::collection::vec(-3.0f64..3.0, 4), h in prop::collection::vec(-2.0f64..2.0, 2), v in prop::collection::vec(-2.0f64..2.0, 2)) {
        let fc = FrameChange { n: vec![n[..2].to_vec(), n[2..].to_vec()] };
        let a = LiftVector::new(h, v);
        let back = fc.to_adapted(&fc.to_coordinate(&a));
        prop_assert!((&back - &a).max_abs() <= 1e-12);
        let m = fc.matrix();
        let mi = fc.inverse_matrix();
        for i in 0..4 {
            for j in 0..4 {
                let prod: f64 = (0..4).map(|k| m[i][k] * mi[k][j]).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                prop_assert!((prod - id).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn complex_structure_and_hermitian_metric(
        x in prop::collection::vec(0.4f64..2.7, 2),
        u in prop::collection::vec(-1.0f64..1.0, 2),
        a in prop::collection::vec(-1.0f64..1.0, 4),
        b in prop::collection::vec(-1.0f64..1.0, 4),
        sigma in -0.8f64..0.8,
    ) {
        let sg = sphere("1+0.5*u1^2+0.2*sin(x2)", &format!("{sigma}"));
        let tp = sg.at(&TangentPoint::new(x, u)).unwrap();
        let va = LiftVector::new(a[..2].to_vec(), a[2..].to_vec());
        let vb = LiftVector::new(b[..2].to_vec(), b[2..].to_vec());
        let jj = tp.j_apply(&tp.j_apply(&va));
        prop_assert!((&jj + &va).max_abs() <= 1e-12);
        let lhs = tp.gbar(&tp.j_apply(&va), &tp.j_apply(&vb));
        prop_assert!((lhs - tp.gbar(&va, &vb)).abs() <= 1e-12 * lhs.abs().max(1.0));
        prop_assert!(tp.gbar(&va, &va) > 0.0 || va.max_abs() == 0.0);
    }

    #[test]
    fn closed_metric_matches_oracle_metric(
        x in prop::collection::vec(0.4f64..2.7, 2),
        u in prop::collection::vec(-1.0f64..1.0, 2),
        a in prop::collection::vec(-1.0f64..1.0, 4),
        sigma in -0.8f64..0.8,
    ) {
        let sg = sphere("1+u2^2", &format!("{sigma}"));
        let pt = TangentPoint::new(x, u);
        let tp = sg.at(&pt).unwrap();
        let oracle = TmOracle::new(&sg, &pt).unwrap();
        let va = LiftVector::new(a[..2].to_vec(), a[2..].to_vec());
        let (c, o) = (tp.gbar(&va, &va), oracle.gbar(&va, &va));
        prop_assert!((c - o).abs() <= 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn sampling_is_reproducible_and_respects_bounds(seed in any::<u64>(), count in 1usize..40, margin in 0.0f64..0.5, radius in 0.0f64..2.0) {
        let sg = flat("1", "0");
        let spec = SampleSpec { count, seed, margin, fiber_radius: radius, alpha_floor: 0.0 };
        let a = sample_points(&sg, &spec).unwrap();
        prop_assert_eq!(&a, &sample_points(&sg, &spec).unwrap());
        prop_assert_eq!(a.len(), count);
        for p in &a {
            prop_assert!(p.x.iter().all(|c| c.abs() <= 1.0 - margin));
            prop_assert!(p.u.iter().map(|c| c * c).sum::<f64>() <= radius * radius);
        }
        // a longer draw extends a shorter one
        let longer = sample_points(&sg, &SampleSpec { count: count + 5, ..spec }).unwrap();
        prop_assert_eq!(&longer[..count], &a[..]);
    }
}

#[test]
fn jet_truncation_and_constants() {
    let c = Jet::constant(2.5, 3, 3);
    assert_eq!(c.value(), 2.5);
    assert!(c.gradient().iter().all(|&g| g == 0.0));
    let v = Jet::variables(&[0.5, -1.0, 2.0], 3);
    let p = v[0].arith(&v[1], ArithOp::Mul).unwrap().arith(&v[2], ArithOp::Mul).unwrap();
    assert_eq!(p.extract(&[1, 1, 1]).unwrap(), 1.0);
    assert_eq!(p.truncate(2).order(), 2);
    assert!(p.truncate(2).extract(&[1, 1, 1]).is_err());
}
