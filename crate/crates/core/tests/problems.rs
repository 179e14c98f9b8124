mod common;

use std::f64::consts::PI;

use common::{bundle, mode, point, Local};

use deltapinn::geometry::Side;
use deltapinn::kernel::KernelFamily;
use deltapinn::problems::{barry_mercer, maxwell, poisson, BarryMercerConstants, MaxwellConstants, ProblemKind, ProblemSpec};
use deltapinn::reference::barry_mercer_series::{BarryMercerSeries, ModeDenominator};

/// TE plane wave with profile `f(s) = exp(-s²/w²)`, `s = x cosθ + y sinθ - t`:
/// `Ex = -sinθ f`, `Ey = cosθ f`, `Hz = f`.
fn plane_wave(theta: f64, p: [f64; 3], w: f64) -> (Local, f64) {
    let (c, s) = (theta.cos(), theta.sin());
    let arg = p[0] * c + p[1] * s - p[2];
    let f = (-(arg * arg) / (w * w)).exp();
    let f1 = -2.0 * arg / (w * w) * f;
    let f2 = (4.0 * arg * arg / w.powi(4) - 2.0 / (w * w)) * f;
    let ds = [c, s, -1.0];
    let amp = [-s, c, 1.0];
    let local = Local {
        value: amp.iter().map(|a| a * f).collect(),
        grad: amp.iter().map(|a| ds.iter().map(|d| a * d * f1).collect()).collect(),
        hess: amp
            .iter()
            .map(|a| ds.iter().map(|di| ds.iter().map(|dj| a * di * dj * f2).collect()).collect())
            .collect(),
    };
    (local, f1)
}

fn maxwell_problem() -> ProblemSpec {
    maxwell::problem(KernelFamily::Gaussian, 0.01, MaxwellConstants::default()).unwrap()
}

#[test]
fn plane_waves_solve_the_te_equations() {
    let m = maxwell_problem();
    for theta in [0.0, 0.3, 1.2, 2.5, 4.0] {
        for p in [[0.5, 0.3, 0.6], [-0.7, 0.8, 0.2], [0.9, -0.9, 1.1]] {
            let (l, f1) = plane_wave(theta, p, 0.2);
            let r = m.residual(&bundle(&l), &point(&p)).unwrap();
            for e in 0..3 {
                assert!(r.get(&[0, e]).abs() <= 1e-12 * f1.abs().max(1.0), "theta {theta} eq {e}");
            }
        }
    }
}

#[test]
fn source_current_enters_the_hz_equation() {
    let m = maxwell_problem();
    let zero = Local {
        value: vec![0.0; 3],
        grad: vec![vec![0.0; 3]; 3],
        hess: vec![vec![vec![0.0; 3]; 3]; 3],
    };
    let c = MaxwellConstants::default();
    let t = c.delay;
    let r = m.residual(&bundle(&zero), &point(&[0.0, 0.0, t])).unwrap();
    let peak = KernelFamily::Gaussian.density_1d(0.0, 0.01).powi(2);
    assert_eq!(r.get(&[0, 0]), 0.0);
    assert_eq!(r.get(&[0, 1]), 0.0);
    assert!((r.get(&[0, 2]) - peak).abs() <= 1e-12 * peak);
}

fn outward_angle(side: Side) -> f64 {
    match side {
        Side::Left => PI,
        Side::Right => 0.0,
        Side::Bottom => -PI / 2.0,
        Side::Top => PI / 2.0,
    }
}

fn wall_point(side: Side) -> [f64; 3] {
    match side {
        Side::Left => [-1.0, 0.2, 0.9],
        Side::Right => [1.0, -0.4, 0.9],
        Side::Bottom => [0.3, -1.0, 0.9],
        Side::Top => [-0.6, 1.0, 0.95],
    }
}

#[test]
fn absorbing_conditions_pass_outgoing_waves() {
    let m = maxwell_problem();
    for side in Side::ALL {
        let p = wall_point(side);
        // Normal incidence is exact.
        let (l, f1) = plane_wave(outward_angle(side), p, 0.2);
        let r = m.bc_residual(&bundle(&l), &point(&p), side).unwrap().get(&[0, 0]);
        assert!(r.abs() <= 1e-12 * f1.abs(), "{side:?} normal: {r}");
        // Oblique incidence leaves an O(phi^4) residual.
        for phi in [0.1, -0.2, 0.3] {
            let (l, f1) = plane_wave(outward_angle(side) + phi, p, 0.2);
            let r = m.bc_residual(&bundle(&l), &point(&p), side).unwrap().get(&[0, 0]);
            let bound = phi.powi(4) / 8.0 * f1.abs() * 1.01;
            assert!(r.abs() <= bound, "{side:?} phi {phi}: {r} > {bound}");
        }
        // Incoming waves are penalized.
        let (l, f1) = plane_wave(outward_angle(side) + PI, p, 0.2);
        let r = m.bc_residual(&bundle(&l), &point(&p), side).unwrap().get(&[0, 0]);
        assert!((r.abs() - 2.0 * f1.abs()).abs() <= 1e-12 * f1.abs(), "{side:?} incoming: {r}");
    }
}

#[test]
fn initial_condition_is_quiescent_fields() {
    let m = maxwell_problem();
    let (l, _) = plane_wave(0.4, [0.1, 0.2, 0.0], 0.3);
    let r = m.ic_residual(&bundle(&l), &point(&[0.1, 0.2, 0.0])).unwrap().unwrap();
    for o in 0..3 {
        assert_eq!(r.get(&[0, o]), l.value[o]);
    }
}

#[test]
fn poisson_residual_and_boundary() {
    let p = poisson::problem(KernelFamily::Laplace, 0.05).unwrap();
    assert_eq!(p.kind, ProblemKind::Poisson);
    assert!(!p.is_transient());
    // u = sin(x) sin(y): -Δu = 2u.
    let (x, y) = (1.0f64, 2.5f64);
    let u = x.sin() * y.sin();
    let l = Local {
        value: vec![u],
        grad: vec![vec![x.cos() * y.sin(), x.sin() * y.cos()]],
        hess: vec![vec![vec![-u, x.cos() * y.cos()], vec![x.cos() * y.cos(), -u]]],
    };
    let eta = p.source.density_at(&[x, y]);
    let r = p.residual(&bundle(&l), &point(&[x, y])).unwrap().get(&[0, 0]);
    assert!((r - (2.0 * u - eta)).abs() <= 1e-14);
    for side in Side::ALL {
        let b = p.bc_residual(&bundle(&l), &point(&[x, y]), side).unwrap();
        assert_eq!(b.get(&[0, 0]), u);
    }
    assert!(p.ic_residual(&bundle(&l), &point(&[x, y])).unwrap().is_none());
}

#[test]
fn poroelastic_modes_balance_momentum() {
    let bm = barry_mercer::problem(KernelFamily::Gaussian, 0.01, BarryMercerConstants::default()).unwrap();
    let (x, z) = (0.61, 0.37);
    let pts = point(&[x, z, 1.0]);
    for n in 1..=64 {
        for q in 1..=64 {
            let l = mode(n, q, 1.0, x, z);
            let r = bm.residual(&bundle(&l), &pts).unwrap();
            let scale = 2.5 * (n.max(q) as f64) * PI;
            for e in 1..3 {
                assert!(r.get(&[0, e]).abs() <= 1e-12 * scale, "mode ({n},{q}) eq {e}: {}", r.get(&[0, e]));
            }
        }
    }
}

#[test]
fn poroelastic_boundary_operators_vanish_on_modes() {
    let bm = barry_mercer::problem(KernelFamily::Gaussian, 0.01, BarryMercerConstants::default()).unwrap();
    for side in Side::ALL {
        for (n, q) in [(1, 1), (3, 7), (64, 5)] {
            let (x, z) = match side {
                Side::Left => (0.0, 0.3),
                Side::Right => (1.0, 0.3),
                Side::Bottom => (0.7, 0.0),
                Side::Top => (0.7, 1.0),
            };
            let l = mode(n, q, 1.0, x, z);
            let r = bm.bc_residual(&bundle(&l), &point(&[x, z, 0.5]), side).unwrap();
            for e in 0..3 {
                assert!(r.get(&[0, e]).abs() <= 1e-12 * (n.max(q) as f64) * PI, "{side:?} ({n},{q}) {e}");
            }
        }
    }
}

/// `dp̂/dt` of the series amplitude with the frequency term in the
/// denominator, differentiated by hand.
fn p_hat_rate(s: &BarryMercerSeries, n: usize, q: usize, t: f64) -> f64 {
    let (ln, lq) = (s.lambda_n(n), s.lambda_q(q));
    let lam = ln * ln + lq * lq;
    let c = &s.constants;
    let w = c.omega;
    let s0 = (ln * s.source[0]).sin() * (lq * s.source[1]).sin();
    -c.beta * s0 / (lam * lam + w * w) * (lam * w * (w * t).cos() + w * w * (w * t).sin() - lam * w * (-lam * t).exp())
}

#[test]
fn mode_amplitudes_solve_the_storage_equation() {
    let mut s = BarryMercerSeries::new(BarryMercerConstants::default(), 64).unwrap();
    let c = s.constants;
    for t in [0.0, 0.3, 2.0, 5.9] {
        for n in 1..=64 {
            for q in 1..=64 {
                let (ln, lq) = (s.lambda_n(n), s.lambda_q(q));
                let lam = ln * ln + lq * lq;
                let s0 = (ln * s.source[0]).sin() * (lq * s.source[1]).sin();
                let res = p_hat_rate(&s, n, q, t) + lam * s.p_hat(n, q, t) + c.beta * s0 * (c.omega * t).sin();
                assert!(res.abs() <= 1e-12 * c.beta, "({n},{q}) t={t}: {res}");
            }
        }
        assert_eq!(s.p_hat(5, 9, 0.0), 0.0);
    }
    // Dropping the frequency term breaks the balance for the slowest mode.
    s.denominator = ModeDenominator::StiffnessOnly;
    let lam = 2.0 * PI * PI;
    let s0 = (PI * 0.25f64).sin().powi(2);
    let t = 2.0;
    let with = BarryMercerSeries::new(c, 64).unwrap();
    let rate = p_hat_rate(&with, 1, 1, t) * (lam * lam + 1.0) / (lam * lam);
    let res = rate + lam * s.p_hat(1, 1, t) + c.beta * s0 * t.sin();
    assert!(res.abs() > 1e-3 * c.beta * s0);
}
