#![allow(dead_code)]

use std::f64::consts::PI;

use deltapinn::autodiff::{forward_with_derivatives, loss_parameter_gradient, DerivativeBundle, Entry, Expr};
use deltapinn::net::{Activation, MsSirenNet, NetConfig};
use deltapinn::problems::MaxwellConstants;
use deltapinn::reference::barry_mercer_series::BarryMercerSeries;
use deltapinn::reference::fdtd::{fdtd_run, subsample, Boundary, Fdtd, FdtdConfig};
use deltapinn::reference::{relative_l2_values, ReferenceField};
use deltapinn::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Net with 1-2 hidden layers of width <= 8 and parameters in [-1, 1].
pub fn random_net(rng: &mut ChaCha8Rng, act: Activation, in_dim: usize, out_dim: usize) -> MsSirenNet {
    let subnets = rng.random_range(1..=2);
    let layers = rng.random_range(2..=3);
    let width = rng.random_range(2..=8);
    let mut cfg = NetConfig::new(in_dim, out_dim).with_shape(subnets, layers, width);
    cfg.activation = act;
    cfg.skip_connections = rng.random_bool(0.5);
    let n = cfg.param_count();
    let params = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    MsSirenNet::from_params(cfg, params).unwrap()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Tensor {
    let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(vec![n, d], data).unwrap()
}

pub fn loss_value(net: &MsSirenNet, points: &Tensor, loss: &Expr) -> f64 {
    let bundle = forward_with_derivatives(net, points).unwrap();
    let lookup = |e: Entry| (0..bundle.batch()).map(|b| bundle.get(b, e)).collect();
    loss.evaluate(points.rows(), &lookup).unwrap().scalar().unwrap()
}

/// Worst `|a - fd| / (|a| + 1e-12)` over all parameters. Each parameter is
/// scored against the better of two central differences: second order with
/// step `1e-6` (exact for vanishing gradients, but round-off limited when the
/// gradient is small next to the loss) and fourth order with step `1e-5`.
pub fn worst_param_gradient_error(net: &MsSirenNet, points: &Tensor, loss: &Expr) -> f64 {
    let g = loss_parameter_gradient(net, points, loss).unwrap();
    let mut worst: f64 = 0.0;
    let mut p = net.clone();
    for k in 0..net.param_count() {
        let orig = p.params()[k];
        let mut at = |s: f64| {
            p.params_mut()[k] = orig + s;
            loss_value(&p, points, loss)
        };
        let (h2, h4) = (1e-6, 1e-5);
        let second = (at(h2) - at(-h2)) / (2.0 * h2);
        let fourth = (at(-2.0 * h4) - 8.0 * at(-h4) + 8.0 * at(h4) - at(2.0 * h4)) / (12.0 * h4);
        p.params_mut()[k] = orig;
        let a = g.grad.data()[k];
        let err = (a - second).abs().min((a - fourth).abs());
        worst = worst.max(err / (a.abs() + 1e-12));
    }
    worst
}

/// Radius of the maximum of the azimuthal mean of `|values[:, component]|`
/// about the origin, using bins of width `dx`.
pub fn ring_radius(field: &ReferenceField, component: usize, dx: f64) -> f64 {
    let bins = (1.0 / dx).round() as usize + 1;
    let mut sum = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for k in 0..field.len() {
        let p = field.points.row(k);
        let b = ((p[0] * p[0] + p[1] * p[1]).sqrt() / dx).round() as usize;
        if b < bins {
            sum[b] += field.values.row(k)[component].abs();
            count[b] += 1;
        }
    }
    let mut best = (0, f64::NEG_INFINITY);
    for b in 0..bins {
        if count[b] > 0 {
            let m = sum[b] / count[b] as f64;
            if m > best.1 {
                best = (b, m);
            }
        }
    }
    best.0 as f64 * dx
}

/// Relative L2 of one component between two fields on the same points.
pub fn component_difference(a: &ReferenceField, b: &ReferenceField, component: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..a.len() {
        num += (a.values.row(k)[component] - b.values.row(k)[component]).abs();
        den += b.values.row(k)[component].abs();
    }
    num / den
}

/// Central-difference storage residual `u_tx + v_tz − p_xx − p_zz − β Q_N`
/// of a truncated series, with `Q_N` the equally truncated source.
pub fn storage_fd_residual(s: &BarryMercerSeries, x: f64, z: f64, t: f64, h: f64) -> f64 {
    let f = |x: f64, z: f64, t: f64| s.value(x, z, t);
    let mixed = |c: usize, dx: f64, dz: f64| {
        (f(x + dx, z + dz, t + h)[c] - f(x + dx, z + dz, t - h)[c] - f(x - dx, z - dz, t + h)[c]
            + f(x - dx, z - dz, t - h)[c])
            / (4.0 * h * h)
    };
    let u_tx = mixed(0, h, 0.0);
    let v_tz = mixed(1, 0.0, h);
    let p0 = f(x, z, t)[2];
    let p_xx = (f(x + h, z, t)[2] - 2.0 * p0 + f(x - h, z, t)[2]) / (h * h);
    let p_zz = (f(x, z + h, t)[2] - 2.0 * p0 + f(x, z - h, t)[2]) / (h * h);
    u_tx + v_tz - p_xx - p_zz - s.constants.beta * s.truncated_source(x, z, t)
}

/// Short pulse (`τ = 0.02`, delay `0.1`) whose wavefront sits at `t − 0.1`.
pub fn narrow_pulse(resolution: f64) -> FdtdConfig {
    FdtdConfig {
        resolution,
        pulse: Some(MaxwellConstants {
            t_end: 1.0,
            tau: 0.02,
            delay: 0.1,
        }),
        ..FdtdConfig::default()
    }
}

/// Snapshot at `t` for resolutions `Δ`, `Δ/2`, `Δ/4`, restricted to the
/// coarse nodes. Returns `(‖u_Δ − u_Δ/2‖ / ‖u_Δ/2 − u_Δ/4‖,
/// ‖u_Δ − u_Δ/4‖ / ‖u_Δ/2 − u_Δ/4‖)` in the mean relative metric.
pub fn convergence_ratios(base: &FdtdConfig, t: f64) -> (f64, f64) {
    let snap = |k: usize| {
        let cfg = FdtdConfig {
            resolution: base.resolution / k as f64,
            ..base.clone()
        };
        let f = fdtd_run(&cfg, t, &[t]).unwrap().remove(0);
        subsample(&f, k).unwrap()
    };
    let (a, b, c) = (snap(1), snap(2), snap(4));
    let none = vec![false; a.len()];
    let d = |x: &ReferenceField, y: &ReferenceField| relative_l2_values(&x.values, &y.values, &none).unwrap().mean;
    let (ab, bc, ac) = (d(&a, &b), d(&b, &c), d(&a, &c));
    (ab / bc, ac / bc)
}

/// Peak energy and energy at `t_end` of a run with absorbing walls.
pub fn residual_energy(cfg: &FdtdConfig, t_end: f64) -> (f64, f64) {
    let mut sim = Fdtd::new(FdtdConfig {
        boundary: Boundary::Mur,
        ..cfg.clone()
    })
    .unwrap();
    let steps = (t_end / sim.dt()).round() as usize;
    let (mut peak, mut last) = (0.0f64, 0.0);
    sim.run(steps, |s, _| {
        last = s.energy();
        peak = peak.max(last);
    });
    (peak, last)
}

/// Trapezoid rule in `u` with `z = alpha * sinh(u)`, covering `|z| <= reach * alpha`.
pub fn stretched_nodes(alpha: f64, reach: f64, n: usize) -> Vec<(f64, f64)> {
    let umax = reach.asinh();
    let h = 2.0 * umax / (n - 1) as f64;
    (0..n)
        .map(|k| {
            let u = -umax + k as f64 * h;
            let w = if k == 0 || k == n - 1 { 0.5 * h } else { h };
            (alpha * u.sinh(), w * alpha * u.cosh())
        })
        .collect()
}

/// Analytic value, gradient and Hessian of each output at one point.
pub struct Local {
    pub value: Vec<f64>,
    pub grad: Vec<Vec<f64>>,
    pub hess: Vec<Vec<Vec<f64>>>,
}

pub fn bundle(l: &Local) -> DerivativeBundle {
    let (out, dim) = (l.value.len(), l.grad[0].len());
    let mut b = DerivativeBundle {
        value: Tensor::new(vec![1, out], l.value.clone()).unwrap(),
        grad_input: Tensor::zeros(vec![1, out, dim]),
        hess_input: Tensor::zeros(vec![1, out, dim, dim]),
    };
    for o in 0..out {
        for i in 0..dim {
            b.grad_input.set(&[0, o, i], l.grad[o][i]);
            for j in 0..dim {
                b.hess_input.set(&[0, o, i, j], l.hess[o][i][j]);
            }
        }
    }
    b
}

pub fn point(p: &[f64]) -> Tensor {
    Tensor::new(vec![1, p.len()], p.to_vec()).unwrap()
}

/// One double-sine mode of the poroelastic series with amplitude `a`:
/// `u = (λn/Λ) a cos sin`, `v = (λq/Λ) a sin cos`, `p = -a sin sin`.
pub fn mode(n: usize, q: usize, a: f64, x: f64, z: f64) -> Local {
    let (ln, lq) = (n as f64 * PI, q as f64 * PI);
    let lam = ln * ln + lq * lq;
    let (sx, cx) = (ln * x).sin_cos();
    let (sz, cz) = (lq * z).sin_cos();
    let (cu, cv) = (ln / lam * a, lq / lam * a);
    // Spatial parts only; the time column is left at zero.
    let u = [cu * cx * sz, -cu * ln * sx * sz, cu * lq * cx * cz];
    let uh = [-cu * ln * ln * cx * sz, -cu * ln * lq * sx * cz, -cu * lq * lq * cx * sz];
    let v = [cv * sx * cz, cv * ln * cx * cz, -cv * lq * sx * sz];
    let vh = [-cv * ln * ln * sx * cz, -cv * ln * lq * cx * sz, -cv * lq * lq * sx * cz];
    let p = [-a * sx * sz, -a * ln * cx * sz, -a * lq * sx * cz];
    let ph = [a * ln * ln * sx * sz, -a * ln * lq * cx * cz, a * lq * lq * sx * sz];
    let pack = |f: [f64; 3], h: [f64; 3]| {
        (
            f[0],
            vec![f[1], f[2], 0.0],
            vec![vec![h[0], h[1], 0.0], vec![h[1], h[2], 0.0], vec![0.0; 3]],
        )
    };
    let parts = [pack(u, uh), pack(v, vh), pack(p, ph)];
    Local {
        value: parts.iter().map(|p| p.0).collect(),
        grad: parts.iter().map(|p| p.1.clone()).collect(),
        hess: parts.iter().map(|p| p.2.clone()).collect(),
    }
}

