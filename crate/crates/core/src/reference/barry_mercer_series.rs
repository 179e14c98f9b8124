//! Double sine/cosine series for the oscillating-source consolidation problem.
//!
//! Each mode `(n, q)` of the pressure obeys
//! `p̂' + λ_nq p̂ = −β sin(λ_n x₀) sin(λ_q z₀) sin(ωt)` with `p̂(0) = 0`, whose
//! solution carries the factor `1 / (λ_nq² + ω²)`. The variant without `ω²`
//! is kept for comparison; it does not satisfy the flow equation.

use std::f64::consts::PI;

use super::ReferenceField;
use crate::error::{Error, Result};
use crate::problems::BarryMercerConstants;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeDenominator {
    /// `λ_nq² + ω²`, the exact solution of the per-mode equation.
    WithFrequency,
    /// `λ_nq²` alone.
    StiffnessOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarryMercerSeries {
    pub constants: BarryMercerConstants,
    pub a: f64,
    pub b: f64,
    pub source: [f64; 2],
    pub modes: usize,
    pub denominator: ModeDenominator,
}

impl BarryMercerSeries {
    pub fn new(constants: BarryMercerConstants, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Parameter("series needs at least one mode".into()));
        }
        Ok(Self {
            constants,
            a: 1.0,
            b: 1.0,
            source: [0.25, 0.25],
            modes,
            denominator: ModeDenominator::WithFrequency,
        })
    }

    pub fn lambda_n(&self, n: usize) -> f64 {
        n as f64 * PI / self.a
    }

    pub fn lambda_q(&self, q: usize) -> f64 {
        q as f64 * PI / self.b
    }

    /// Pressure mode amplitude `p̂(n, q, t)`.
    pub fn p_hat(&self, n: usize, q: usize, t: f64) -> f64 {
        let (ln, lq) = (self.lambda_n(n), self.lambda_q(q));
        let lnq = ln * ln + lq * lq;
        let c = &self.constants;
        let w = c.omega;
        let den = match self.denominator {
            ModeDenominator::WithFrequency => lnq * lnq + w * w,
            ModeDenominator::StiffnessOnly => lnq * lnq,
        };
        let s0 = (ln * self.source[0]).sin() * (lq * self.source[1]).sin();
        -c.beta * s0 / den * (lnq * (w * t).sin() - w * (w * t).cos() + w * (-lnq * t).exp())
    }

    /// `(u, v, p)` at `(x, z, t)`.
    pub fn value(&self, x: f64, z: f64, t: f64) -> [f64; 3] {
        let n_modes = self.modes;
        let mut sx = Vec::with_capacity(n_modes);
        let mut cx = Vec::with_capacity(n_modes);
        let mut sz = Vec::with_capacity(n_modes);
        let mut cz = Vec::with_capacity(n_modes);
        for k in 1..=n_modes {
            let (s, c) = (self.lambda_n(k) * x).sin_cos();
            sx.push(s);
            cx.push(c);
            let (s, c) = (self.lambda_q(k) * z).sin_cos();
            sz.push(s);
            cz.push(c);
        }
        let (mut u, mut v, mut p) = (0.0, 0.0, 0.0);
        for n in 1..=n_modes {
            let ln = self.lambda_n(n);
            for q in 1..=n_modes {
                let lq = self.lambda_q(q);
                let lnq = ln * ln + lq * lq;
                let ph = self.p_hat(n, q, t);
                u += ln / lnq * ph * cx[n - 1] * sz[q - 1];
                v += lq / lnq * ph * sx[n - 1] * cz[q - 1];
                p += ph * sx[n - 1] * sz[q - 1];
            }
        }
        let amp = 4.0 / (self.a * self.b);
        [amp * u, amp * v, -amp * p]
    }

    /// Spectral truncation of the source `Q` with the same modes.
    pub fn truncated_source(&self, x: f64, z: f64, t: f64) -> f64 {
        let mut s = 0.0;
        for n in 1..=self.modes {
            let ln = self.lambda_n(n);
            let fx = (ln * self.source[0]).sin() * (ln * x).sin();
            for q in 1..=self.modes {
                let lq = self.lambda_q(q);
                s += fx * (lq * self.source[1]).sin() * (lq * z).sin();
            }
        }
        4.0 / (self.a * self.b) * s * (self.constants.omega * t).sin()
    }

    /// Series at `points` (`[N × 3]`, columns `x, z, t`).
    pub fn field(&self, points: &Tensor) -> Result<ReferenceField> {
        if points.shape().len() != 2 || points.row_len() != 3 {
            return Err(Error::contract("barry-mercer series expects [N × 3] points"));
        }
        let mut vals = Vec::with_capacity(points.rows() * 3);
        for i in 0..points.rows() {
            let p = points.row(i);
            vals.extend_from_slice(&self.value(p[0], p[1], p[2]));
        }
        Ok(ReferenceField::new(
            points.clone(),
            Tensor::new(vec![points.rows(), 3], vals)?,
            &["x", "z", "t"],
            &["u", "v", "p"],
        )?
        .with_meta("generator", "barry-mercer-series")
        .with_meta("modes", self.modes))
    }
}

/// Space-time mesh: `mesh × mesh` interior nodes of the unit square at each of
/// `times` uniformly spaced instants in `(0, t_end]`.
pub fn barry_mercer_mesh(mesh: usize, times: usize, t_end: f64) -> Result<Tensor> {
    if mesh < 3 || times == 0 {
        return Err(Error::Parameter("mesh needs at least 3 nodes and one time".into()));
    }
    let mut rows = Vec::new();
    for k in 1..=times {
        let t = t_end * k as f64 / times as f64;
        for p in super::grid_2d([0.0, 0.0], [1.0, 1.0], mesh, true) {
            rows.push(vec![p[0], p[1], t]);
        }
    }
    Tensor::from_rows(&rows)
}
