//! BLUE and BLUP from finitely many observations, optionally including
//! derivative observations.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::design::{Design, Observation};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, Pattern, Point};
use crate::numerics::{DenseMatrix, LuFactor, SpdFactor};
use crate::trend::Trend;

/// Absolute slack (scaled by `max(1, variance)`) below which a negative MSE
/// is treated as roundoff and clamped to zero.
pub const MSE_SLACK: f64 = 1e-12;

/// Quantity to be predicted.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// `∂^p y(t0)`.
    Point(Point, Pattern),
    /// `Σ_j ν_j y(s_j)` for a finite atomic measure `ν`.
    Average(Vec<(Point, f64)>),
}

impl Target {
    pub fn value(t0: impl Into<Point>) -> Self {
        Target::Point(t0.into(), Pattern::VALUE)
    }
}

/// Result of one prediction.
#[derive(Debug, Clone)]
pub struct BlupSolution {
    /// Observation layout the weights refer to.
    pub observations: Arc<[Observation]>,
    pub weights: DVector<f64>,
    pub mse: f64,
    /// BLUE weights, `m × n`.
    pub blue_weights: DenseMatrix,
    /// Covariance of the BLUE, `m × m`.
    pub d: DenseMatrix,
    /// `f(t0) - Xᵀ Σ⁻¹ k`.
    pub c: DVector<f64>,
    /// The target coincided with observations and was returned exactly.
    pub interpolated: bool,
}

impl BlupSolution {
    pub fn rmse(&self) -> f64 {
        self.mse.sqrt()
    }

    /// Predicted value given observed data in layout order.
    pub fn predict(&self, data: &[f64]) -> Result<f64> {
        if data.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights but {} data values",
                self.weights.len(),
                data.len()
            )));
        }
        Ok(self.weights.iter().zip(data).map(|(w, y)| w * y).sum())
    }
}

/// A factorized discrete model, reusable across many targets.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    kernel: Kernel,
    trend: Trend,
    design: Design,
    observations: Arc<[Observation]>,
    x: DenseMatrix,
    sigma: DenseMatrix,
    chol: SpdFactor,
    sigma_inv_x: DenseMatrix,
    d: DenseMatrix,
    blue_weights: DenseMatrix,
    bordered: LuFactor,
}

impl DiscreteModel {
    pub fn new(kernel: Kernel, trend: Trend, design: Design) -> Result<Self> {
        Self::with_jitter(kernel, trend, design, 0.0)
    }

    /// As [`DiscreteModel::new`], adding `jitter` to the Gram diagonal.
    pub fn with_jitter(kernel: Kernel, trend: Trend, design: Design, jitter: f64) -> Result<Self> {
        kernel.validate()?;
        if design.dim() != kernel.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}D design for a {}D kernel",
                design.dim(),
                kernel.dim()
            )));
        }
        let observations: Arc<[Observation]> = design.observations().into();
        for o in observations.iter() {
            kernel.check_pattern(o.pattern)?;
            kernel.check_domain(&o.point)?;
        }
        let n = observations.len();
        let m = trend.dim();

        let mut x = DenseMatrix::zeros(n, m);
        for (i, o) in observations.iter().enumerate() {
            x.row_mut(i).copy_from(&trend.features(&o.point, o.pattern)?.transpose());
        }

        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let a = &observations[i];
                (i..n)
                    .map(|j| {
                        let b = &observations[j];
                        kernel.deriv_unchecked(&a.point, &b.point, a.pattern, b.pattern)
                    })
                    .collect()
            })
            .collect();
        let mut sigma = DenseMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            for (off, v) in row.iter().enumerate() {
                sigma[(i, i + off)] = *v;
                sigma[(i + off, i)] = *v;
            }
            sigma[(i, i)] += jitter;
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("non-finite Gram entry".into()));
        }

        let chol = SpdFactor::new(&sigma)?;
        let sigma_inv_x = chol.solve(&x);
        let c = x.transpose() * &sigma_inv_x;
        let c = (&c + c.transpose()) * 0.5;
        let c_factor = SpdFactor::new(&c)
            .map_err(|_| Error::Singular("trend not identifiable from the design".into()))?;
        let d = c_factor.inverse();
        let blue_weights = &d * sigma_inv_x.transpose();

        let mut border = DenseMatrix::zeros(m + n, m + n);
        border.view_mut((m, 0), (n, m)).copy_from(&x);
        border.view_mut((0, m), (m, n)).copy_from(&x.transpose());
        border.view_mut((m, m), (n, n)).copy_from(&sigma);
        let bordered = LuFactor::new(&border)?;

        Ok(Self {
            kernel,
            trend,
            design,
            observations,
            x,
            sigma,
            chol,
            sigma_inv_x,
            d,
            blue_weights,
            bordered,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn trend(&self) -> &Trend {
        &self.trend
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Design feature matrix `X` (`n × m`).
    pub fn features(&self) -> &DenseMatrix {
        &self.x
    }

    /// Gram matrix `Σ` of the flattened observations.
    pub fn gram(&self) -> &DenseMatrix {
        &self.sigma
    }

    pub fn blue_cov(&self) -> &DenseMatrix {
        &self.d
    }

    pub fn blue_weights(&self) -> &DenseMatrix {
        &self.blue_weights
    }

    /// `Σ⁻¹X`.
    pub fn sigma_inv_x(&self) -> &DenseMatrix {
        &self.sigma_inv_x
    }

    /// Simple-kriging weights `Σ⁻¹k` for `∂^p y(t)`, and whether the target
    /// is itself one of the observations.
    pub fn kriging_weights(&self, t: &Point, p: Pattern) -> Result<(DVector<f64>, bool)> {
        self.check_point(t, p)?;
        self.simple_kriging(t, p)
    }

    fn check_point(&self, t: &Point, p: Pattern) -> Result<()> {
        if t.dim() != self.kernel.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}D target for a {}D kernel",
                t.dim(),
                self.kernel.dim()
            )));
        }
        self.kernel.check_domain(t)?;
        self.kernel.check_pattern(p)
    }

    /// Covariances between `∂^p y(t)` and every observation.
    pub fn cross_cov(&self, t: &Point, p: Pattern) -> Result<DVector<f64>> {
        self.check_point(t, p)?;
        Ok(DVector::from_iterator(
            self.observations.len(),
            self.observations
                .iter()
                .map(|o| self.kernel.deriv_unchecked(t, &o.point, p, o.pattern)),
        ))
    }

    /// Index of the observation that is exactly `∂^p y(t)`, if any.
    fn observed_index(&self, t: &Point, p: Pattern) -> Option<usize> {
        let site = self.design.find_site(t)?;
        self.observations
            .iter()
            .position(|o| o.site == site && o.pattern == p)
    }

    /// `(Var(target), cov(target, Y), trend moment of the target)`.
    pub fn target_moments(&self, target: &Target) -> Result<(f64, DVector<f64>, DVector<f64>)> {
        match target {
            Target::Point(t, p) => {
                let v = self.kernel.deriv(t, t, *p, *p)?;
                Ok((v, self.cross_cov(t, *p)?, self.trend.features(t, *p)?))
            }
            Target::Average(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::InvalidDesign("empty averaging measure".into()));
                }
                let n = self.observations.len();
                let mut k = DVector::zeros(n);
                let mut f = DVector::zeros(self.trend.dim());
                let mut v = 0.0;
                for (s, w) in atoms {
                    k.axpy(*w, &self.cross_cov(s, Pattern::VALUE)?, 1.0);
                    f.axpy(*w, &self.trend.features(s, Pattern::VALUE)?, 1.0);
                    for (r, u) in atoms {
                        v += w * u * self.kernel.eval(s, r)?;
                    }
                }
                Ok((v, k, f))
            }
        }
    }

    fn clamp_mse(mse: f64, variance: f64) -> Result<f64> {
        if mse >= 0.0 {
            Ok(mse)
        } else if mse >= -MSE_SLACK * variance.abs().max(1.0) {
            Ok(0.0)
        } else {
            Err(Error::NegativeMse(mse))
        }
    }

    fn solution(&self, weights: DVector<f64>, mse: f64, c: DVector<f64>, interpolated: bool) -> BlupSolution {
        BlupSolution {
            observations: Arc::clone(&self.observations),
            weights,
            mse,
            blue_weights: self.blue_weights.clone(),
            d: self.d.clone(),
            c,
            interpolated,
        }
    }

    /// `Σ⁻¹ k` with the exact indicator when the target is itself observed.
    fn simple_kriging(&self, t: &Point, p: Pattern) -> Result<(DVector<f64>, bool)> {
        if let Some(i) = self.observed_index(t, p) {
            let mut e = DVector::zeros(self.observations.len());
            e[i] = 1.0;
            return Ok((e, true));
        }
        Ok((self.chol.solve_vec(&self.cross_cov(t, p)?), false))
    }

    /// BLUP of `∂^p y(t0)`, with MSE from the bordered system.
    pub fn predict(&self, t0: &Point, p: Pattern) -> Result<BlupSolution> {
        self.check_point(t0, p)?;
        let (zeta, exact) = self.simple_kriging(t0, p)?;
        let f0 = self.trend.features(t0, p)?;
        if exact {
            let c = DVector::zeros(self.trend.dim());
            return Ok(self.solution(zeta, 0.0, c, true));
        }
        let c = &f0 - self.x.transpose() * &zeta;
        let weights = &zeta + &self.sigma_inv_x * (&self.d * &c);
        let k = self.cross_cov(t0, p)?;
        let v = self.kernel.deriv(t0, t0, p, p)?;
        let mse = Self::clamp_mse(self.bordered_mse(v, &f0, &k)?, v)?;
        Ok(self.solution(weights, mse, c, false))
    }

    /// `V - [f; k]ᵀ [[0, Xᵀ], [X, Σ]]⁻¹ [f; k]`.
    pub fn bordered_mse(&self, v: f64, f: &DVector<f64>, k: &DVector<f64>) -> Result<f64> {
        let rhs = self.stack(f, k);
        let sol = self.bordered.solve(&rhs)?;
        Ok(v - rhs.column(0).dot(&sol.column(0)))
    }

    fn stack(&self, f: &DVector<f64>, k: &DVector<f64>) -> DenseMatrix {
        let m = f.len();
        let mut rhs = DenseMatrix::zeros(m + k.len(), 1);
        rhs.view_mut((0, 0), (m, 1)).copy_from(f);
        rhs.view_mut((m, 0), (k.len(), 1)).copy_from(k);
        rhs
    }

    /// Weights read off the bordered system instead of the expanded formula.
    pub fn bordered_weights(&self, t0: &Point, p: Pattern) -> Result<DVector<f64>> {
        let f = self.trend.features(t0, p)?;
        let k = self.cross_cov(t0, p)?;
        let sol = self.bordered.solve(&self.stack(&f, &k))?;
        let m = f.len();
        Ok(DVector::from_iterator(k.len(), sol.column(0).iter().skip(m).copied()))
    }

    /// BLUP of `Σ_j ν_j y(s_j)`: the ν-average of the pointwise BLUPs.
    pub fn predict_average(&self, nu: &[(Point, f64)]) -> Result<BlupSolution> {
        let target = Target::Average(nu.to_vec());
        let (v, k, f) = self.target_moments(&target)?;
        let mut zeta = DVector::zeros(self.observations.len());
        let mut exact = true;
        for (s, w) in nu {
            let (z, e) = self.simple_kriging(s, Pattern::VALUE)?;
            zeta.axpy(*w, &z, 1.0);
            exact &= e;
        }
        let c = &f - self.x.transpose() * &zeta;
        let weights = &zeta + &self.sigma_inv_x * (&self.d * &c);
        let mse = v + c.dot(&(&self.d * &f)) - k.dot(&weights);
        let mse = if exact { mse.max(0.0) } else { Self::clamp_mse(mse, v)? };
        Ok(self.solution(weights, mse, c, exact))
    }

    /// MSE of an arbitrary linear predictor `Σ w_i Y_i` for `target`:
    /// `V - 2 wᵀk + wᵀΣw`.
    pub fn quadratic_mse(&self, weights: &DVector<f64>, target: &Target) -> Result<f64> {
        self.check_len(weights)?;
        let (v, k, _) = self.target_moments(target)?;
        Ok(v - 2.0 * weights.dot(&k) + weights.dot(&(&self.sigma * weights)))
    }

    /// `Xᵀw - f(target)`; zero exactly when `w` is unbiased.
    pub fn unbiasedness_gap(&self, weights: &DVector<f64>, target: &Target) -> Result<DVector<f64>> {
        self.check_len(weights)?;
        let (_, _, f) = self.target_moments(target)?;
        Ok(self.x.transpose() * weights - f)
    }

    fn check_len(&self, weights: &DVector<f64>) -> Result<()> {
        if weights.len() != self.observations.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} observations",
                weights.len(),
                self.observations.len()
            )));
        }
        Ok(())
    }

    /// MSE at many value targets, computed in parallel.
    pub fn mse_many(&self, points: &[Point], p: Pattern) -> Result<Vec<f64>> {
        points
            .par_iter()
            .map(|t| self.predict(t, p).map(|s| s.mse))
            .collect()
    }
}

/// BLUP of `y(t0)`.
pub fn discrete_blup(kernel: &Kernel, trend: &Trend, design: &Design, t0: impl Into<Point>) -> Result<BlupSolution> {
    DiscreteModel::new(kernel.clone(), trend.clone(), design.clone())?.predict(&t0.into(), Pattern::VALUE)
}

/// BLUP of `y^{(p)}(t0)` in one dimension; designs may contain derivative
/// observations.
pub fn discrete_blup_derivs(
    kernel: &Kernel,
    trend: &Trend,
    design: &Design,
    t0: f64,
    p: u8,
) -> Result<BlupSolution> {
    DiscreteModel::new(kernel.clone(), trend.clone(), design.clone())?.predict(&Point::Line(t0), Pattern::order(p))
}

/// BLUP of `Σ_j ν_j y(s_j)`.
pub fn discrete_blup_average(
    kernel: &Kernel,
    trend: &Trend,
    design: &Design,
    nu: &[(Point, f64)],
) -> Result<BlupSolution> {
    DiscreteModel::new(kernel.clone(), trend.clone(), design.clone())?.predict_average(nu)
}

/// BLUE weights (`m × n`) and covariance `D` (`m × m`).
pub fn blue_discrete(kernel: &Kernel, trend: &Trend, design: &Design) -> Result<(DenseMatrix, DenseMatrix)> {
    let model = DiscreteModel::new(kernel.clone(), trend.clone(), design.clone())?;
    Ok((model.blue_weights, model.d))
}
