//! Smooth stand-ins for the Dirac delta and the kernel-width schedule.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    Cauchy,
    Laplace,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [KernelFamily::Gaussian, KernelFamily::Cauchy, KernelFamily::Laplace];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Cauchy => "cauchy",
            KernelFamily::Laplace => "laplace",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s.to_ascii_lowercase())
    }

    /// One-dimensional density of width `alpha` at offset `z`.
    pub fn density_1d(self, z: f64, alpha: f64) -> f64 {
        let s = z / alpha;
        match self {
            KernelFamily::Gaussian => (-0.5 * s * s).exp() / (alpha * (2.0 * std::f64::consts::PI).sqrt()),
            KernelFamily::Cauchy => 1.0 / (std::f64::consts::PI * alpha * (1.0 + s * s)),
            KernelFamily::Laplace => (-s.abs()).exp() / (2.0 * alpha),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSource {
    pub location: Vec<f64>,
    pub kernel: KernelFamily,
    pub alpha: f64,
}

impl PointSource {
    pub fn new(location: Vec<f64>, kernel: KernelFamily, alpha: f64) -> Result<Self> {
        let src = Self {
            location,
            kernel,
            alpha,
        };
        src.check_alpha()?;
        Ok(src)
    }

    fn check_alpha(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha.is_finite() {
            Ok(())
        } else {
            Err(Error::Parameter(format!("kernel width must be positive, got {}", self.alpha)))
        }
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    /// Product density at a single point of dimension `self.dim()`.
    pub fn density_at(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.location)
            .map(|(xi, ci)| self.kernel.density_1d(xi - ci, self.alpha))
            .product()
    }

    /// Density at each row of `x` (`[batch × d]`).
    pub fn density(&self, x: &Tensor) -> Result<Tensor> {
        self.check_alpha()?;
        if x.shape().len() != 2 || x.row_len() != self.dim() {
            return Err(Error::contract(format!(
                "density expects points of dimension {}, got shape {:?}",
                self.dim(),
                x.shape()
            )));
        }
        let data = (0..x.rows()).map(|i| self.density_at(x.row(i))).collect();
        Tensor::new(vec![x.rows()], data)
    }

    /// Radius of the near-source region.
    pub fn omega0_radius(&self) -> f64 {
        3.0 * self.alpha
    }

    /// Whether the spatial point `x` lies in the near-source region.
    pub fn in_omega0(&self, x: &[f64]) -> bool {
        let r2: f64 = x.iter().zip(&self.location).map(|(a, b)| (a - b) * (a - b)).sum();
        r2 <= self.omega0_radius().powi(2)
    }
}

/// Piecewise-constant halving of the kernel width during training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WidthSchedule {
    pub initial_alpha: f64,
    pub first_halving_iter: usize,
    pub halving_period: usize,
}

impl WidthSchedule {
    pub fn new(initial_alpha: f64, first_halving_iter: usize, halving_period: usize) -> Result<Self> {
        if !(initial_alpha > 0.0) || first_halving_iter == 0 || halving_period == 0 {
            return Err(Error::Parameter(
                "width schedule needs positive alpha, first halving and period".into(),
            ));
        }
        Ok(Self {
            initial_alpha,
            first_halving_iter,
            halving_period,
        })
    }

    pub fn halvings(&self, iter: usize) -> u32 {
        if iter < self.first_halving_iter {
            0
        } else {
            1 + ((iter - self.first_halving_iter) / self.halving_period) as u32
        }
    }

    pub fn alpha_at(&self, iter: usize) -> f64 {
        self.initial_alpha * 0.5f64.powi(self.halvings(iter) as i32)
    }
}
