mod common;

use std::f64::consts::PI;

use common::storage_fd_residual;
use deltapinn::problems::BarryMercerConstants;
use deltapinn::reference::barry_mercer_series::{barry_mercer_mesh, BarryMercerSeries, ModeDenominator};
use deltapinn::reference::poisson_series::{poisson_mesh, poisson_reference, poisson_series, poisson_series_value};
use deltapinn::reference::relative_l2;
use deltapinn::tensor::Tensor;
use proptest::prelude::*;

const X0: [f64; 2] = [PI / 2.0, PI / 2.0];

/// Same double sum, accumulated by increasing `m² + n²`.
fn poisson_by_frequency(p: [f64; 2], terms: usize) -> f64 {
    let mut modes: Vec<(usize, usize)> = (1..=terms).flat_map(|m| (1..=terms).map(move |n| (m, n))).collect();
    modes.sort_by_key(|&(m, n)| (m * m + n * n, m));
    let mut s = 0.0;
    for (m, n) in modes {
        let (mf, nf) = (m as f64, n as f64);
        s += (mf * p[0]).sin() * (mf * X0[0]).sin() * (nf * p[1]).sin() * (nf * X0[1]).sin() / (mf * mf + nf * nf);
    }
    4.0 / (PI * PI) * s
}

#[test]
fn poisson_truncation_converges() {
    let a = poisson_series_value([PI / 4.0, PI / 4.0], X0, 400);
    let b = poisson_series_value([PI / 4.0, PI / 4.0], X0, 2000);
    assert!((a - b).abs() <= 1e-4, "{a} vs {b}");
    // Off the lines through the source the tail is tiny at distance >= 0.1.
    for (r, th) in [(0.1, 0.3), (0.1, 0.785), (0.15, 2.0), (0.5, 1.0), (1.2, 4.0)] {
        let p = [X0[0] + r * f64::cos(th), X0[1] + r * f64::sin(th)];
        let a = poisson_series_value(p, X0, 400);
        let b = poisson_series_value(p, X0, 2000);
        assert!((a - b).abs() <= 1e-4, "r {r}: {a} vs {b}");
    }
    // On them the square truncation converges only like 1/M.
    for r in [0.1, 0.2, 0.5, 1.0] {
        let a = poisson_series_value([X0[0] + r, X0[1]], X0, 400);
        let b = poisson_series_value([X0[0] + r, X0[1]], X0, 2000);
        assert!((a - b).abs() <= 3e-3, "r {r}: {a} vs {b}");
    }
}

#[test]
fn poisson_series_matches_free_space_log_near_source() {
    // Near x0 the solution behaves like -ln(r)/(2π) plus a smooth part; the
    // difference at two small radii must match the log difference.
    let u = |r: f64| poisson_series_value([X0[0] + r, X0[1]], X0, 2000);
    let d = u(0.05) - u(0.1);
    let expected = (2f64).ln() / (2.0 * PI);
    assert!((d - expected).abs() <= 5e-3, "{d} vs {expected}");
}

#[test]
fn poisson_summation_order_is_irrelevant() {
    for p in [[0.3, 2.9], [1.0, 1.0], [2.2, 0.7]] {
        let a = poisson_series_value(p, X0, 120);
        let b = poisson_by_frequency(p, 120);
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn poisson_reference_mesh_and_metric() {
    let r = poisson_reference(21, 100).unwrap();
    assert_eq!(r.len(), 19 * 19 - 1);
    assert!(r.values.data().iter().all(|v| *v > 0.0));
    assert_eq!(relative_l2(&r, &r).unwrap().mean, 0.0);
    let zero = r.with_values(Tensor::zeros(vec![r.len(), 1])).unwrap();
    assert_eq!(relative_l2(&zero, &r).unwrap().mean, 1.0);
    let pts = poisson_mesh(21, X0).unwrap();
    assert!(poisson_series(&pts, X0, 0).is_err());
}

fn series(modes: usize) -> BarryMercerSeries {
    BarryMercerSeries::new(BarryMercerConstants::default(), modes).unwrap()
}

#[test]
fn barry_mercer_vanishes_initially() {
    let s = series(32);
    for (x, z) in [(0.1, 0.9), (0.25, 0.25), (0.6, 0.3)] {
        assert_eq!(s.value(x, z, 0.0), [0.0, 0.0, 0.0]);
    }
}

#[test]
fn barry_mercer_boundary_values() {
    let s = series(32);
    for k in 0..=10 {
        let y = k as f64 / 10.0;
        let t = 0.3 + y;
        let left = s.value(0.0, y, t);
        assert_eq!((left[1], left[2]), (0.0, 0.0));
        let bottom = s.value(y, 0.0, t);
        assert_eq!((bottom[0], bottom[2]), (0.0, 0.0));
        let right = s.value(1.0, y, t);
        let top = s.value(y, 1.0, t);
        assert!(right[1].abs() <= 1e-12 && right[2].abs() <= 1e-12);
        assert!(top[0].abs() <= 1e-12 && top[2].abs() <= 1e-12);
    }
}

#[test]
fn barry_mercer_truncation_converges_away_from_source() {
    let (a, b) = (series(64), series(256));
    let t = PI / 2.0;
    for (x, z) in [(0.6, 0.6), (0.75, 0.25), (0.25, 0.75), (0.5, 0.1), (0.4, 0.4)] {
        let (u, w) = (a.value(x, z, t), b.value(x, z, t));
        for c in 0..3 {
            assert!((u[c] - w[c]).abs() <= 1e-3, "({x}, {z}) component {c}: {} vs {}", u[c], w[c]);
        }
    }
}

#[test]
fn storage_equation_selects_the_denominator() {
    let mut s = series(8);
    let probes = [(0.6, 0.6, 1.0), (0.75, 0.3, 2.0), (0.3, 0.8, 4.5)];
    let worst = |s: &BarryMercerSeries| {
        probes
            .iter()
            .map(|&(x, z, t)| storage_fd_residual(s, x, z, t, 1e-4).abs())
            .fold(0.0, f64::max)
    };
    let with_frequency = worst(&s);
    s.denominator = ModeDenominator::StiffnessOnly;
    let stiffness_only = worst(&s);
    assert!(with_frequency <= 1e-5, "{with_frequency}");
    assert!(stiffness_only >= 1e-3, "{stiffness_only}");
}

#[test]
fn barry_mercer_field_layout() {
    let pts = barry_mercer_mesh(5, 2, 2.0 * PI).unwrap();
    assert_eq!(pts.rows(), 2 * 3 * 3);
    let f = series(4).field(&pts).unwrap();
    assert_eq!(f.value_names, vec!["u", "v", "p"]);
    assert!(f.values.is_finite());
    assert!(series(1).field(&Tensor::zeros(vec![1, 2])).is_err());
    assert!(BarryMercerSeries::new(BarryMercerConstants::default(), 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn poisson_series_is_symmetric_about_the_source(d in 0.01f64..1.5, e in -1.5f64..1.5) {
        let a = poisson_series_value([X0[0] + d, X0[1] + e], X0, 200);
        let b = poisson_series_value([X0[0] - d, X0[1] + e], X0, 200);
        let c = poisson_series_value([X0[0] + e, X0[1] + d], X0, 200);
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((a - c).abs() <= 1e-12);
    }

    #[test]
    fn barry_mercer_is_deterministic(x in 0.0f64..1.0, z in 0.0f64..1.0, t in 0.0f64..6.3) {
        let s = series(6);
        prop_assert_eq!(s.value(x, z, t), s.value(x, z, t));
    }
}
