use std::f64::consts::PI;

use deltapinn::kernel::KernelFamily;
use deltapinn::reference::poisson_series::poisson_series_value;
use deltapinn_web::{kernel_profile_values, poisson_grid, Wave};

#[test]
fn profile_samples_the_density() {
    let v = kernel_profile_values("cauchy", 0.1, 1.0, 201).unwrap();
    assert_eq!(v.len(), 201);
    assert_eq!(v[100], KernelFamily::Cauchy.density_1d(0.0, 0.1));
    assert!((v[0] - v[200]).abs() <= 1e-15);
    // Trapezoid mass over ±1 is close to one for a narrow Gaussian.
    let g = kernel_profile_values("gaussian", 0.05, 1.0, 2001).unwrap();
    let mass: f64 = g.iter().sum::<f64>() * 0.001;
    assert!((mass - 1.0).abs() <= 1e-6, "{mass}");
    assert!(kernel_profile_values("box", 0.1, 1.0, 10).is_err());
    assert!(kernel_profile_values("laplace", 0.0, 1.0, 10).is_err());
}

#[test]
fn heatmap_matches_the_series() {
    let n = 9;
    let g = poisson_grid(n, 50, PI / 2.0, PI / 2.0).unwrap();
    assert_eq!(g.len(), n * n);
    let h = PI / 8.0;
    assert_eq!(g[3 * n + 2], poisson_series_value([2.0 * h, 3.0 * h], [PI / 2.0, PI / 2.0], 50));
    assert!(g[..n].iter().all(|v| v.abs() <= 1e-12));
    assert!(poisson_grid(n, 50, 0.0, 1.0).is_err());
    assert!(poisson_grid(1, 50, 1.0, 1.0).is_err());
}

#[test]
fn wave_demo_steps_forward() {
    let mut w = Wave::new(0.05, "gaussian", 0.05).unwrap();
    assert_eq!(w.side(), 41);
    assert_eq!(w.time(), 0.0);
    let dt = 0.5 * 0.05 / 2f64.sqrt();
    w.advance(40);
    assert!((w.time() - 40.0 * dt).abs() <= 1e-12);
    let hz = w.hz().unwrap();
    assert_eq!(hz.len(), 41 * 41);
    assert!(hz.iter().any(|v| *v != 0.0));
    assert!(Wave::new(0.3, "gaussian", 0.05).is_err());
}
