//! Independent checks: integral-equation residuals, Monte Carlo MSE
//! estimates, fine-grid discrete limits and optimality under perturbation.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::continuous::{ibm_printed_mse, ContinuousModel, RESIDUAL_POINTS, RESIDUAL_TOL};
use crate::design::DesignFamily;
use crate::discrete::{BlupSolution, DiscreteModel, Target};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, Pattern, Point};
use crate::measures::{ProductMeasure2D, VectorMeasure};
use crate::numerics::{DenseMatrix, SpdFactor};
use crate::product::ProductModel;
use crate::trend::Trend;

/// Diagonal lift applied when the sampled covariance is numerically singular.
pub const MC_LIFT: f64 = 1e-12;

/// `n` equispaced points of `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// `max_s |Σ_i ∫ ∂^i_t K(t, s) ζ_i(dt) − rhs(s)|`.
pub fn residual_scan(kernel: &Kernel, measure: &VectorMeasure, rhs: &dyn Fn(f64) -> f64, s_grid: &[f64]) -> f64 {
    residual_scan_orders(kernel, measure, &|s, _| rhs(s), s_grid, 0)
}

/// As [`residual_scan`], also checking the equations differentiated up to
/// `order` times in `s`; `rhs(s, j)` is the `j`-th derivative.
pub fn residual_scan_orders(
    kernel: &Kernel,
    measure: &VectorMeasure,
    rhs: &dyn Fn(f64, u8) -> f64,
    s_grid: &[f64],
    order: u8,
) -> f64 {
    s_grid
        .iter()
        .flat_map(|&s| (0..=order).map(move |j| (s, j)))
        .map(|(s, j)| (measure.kernel_action(kernel, s, j) - rhs(s, j)).abs())
        .fold(0.0, f64::max)
}

/// One entry of the residual suite.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    /// `true` for negative controls, which must exceed the tolerance.
    pub expect_failure: bool,
}

impl ResidualCheck {
    pub fn passed(&self) -> bool {
        if self.expect_failure {
            self.residual > self.tolerance
        } else {
            self.residual <= self.tolerance
        }
    }
}

/// Residuals of the target measure and the BLUE measures of a 1D model.
pub fn continuous_residuals(model: &ContinuousModel, t0: f64) -> Result<(f64, f64)> {
    let (a, b) = model.interval();
    let grid = uniform_grid(a, b, RESIDUAL_POINTS);
    let kernel = model.kernel().clone();
    let q = model.observed_order();
    let target = model.target_measure(t0, 0)?;
    let zeta = residual_scan_orders(
        &kernel,
        &target.measure,
        &|s, j| kernel.deriv_1d_unchecked(s, t0, j, 0),
        &grid,
        q,
    );
    let system = model.trend_system()?;
    let trend = model.trend().clone();
    let mut g = 0.0f64;
    for (k, gk) in system.g.iter().enumerate() {
        let rhs = |s: f64, j: u8| -> f64 {
            let f = trend.eval(s, j as usize);
            (0..trend.dim()).map(|i| system.d[(k, i)] * f[i]).sum()
        };
        g = g.max(residual_scan_orders(&kernel, gk, &rhs, &grid, q));
    }
    Ok((zeta, g))
}

/// Every shipped closed form, plus the `δ_A` negative control for OU.
pub fn residual_suite() -> Result<Vec<ResidualCheck>> {
    let mut out = Vec::new();
    let mut push = |name: String, residual: f64, expect_failure: bool| {
        out.push(ResidualCheck {
            name,
            residual,
            tolerance: if expect_failure { 0.1 } else { RESIDUAL_TOL },
            expect_failure,
        })
    };
    let cases: Vec<(&str, Kernel, Trend, (f64, f64), f64)> = vec![
        ("ou", Kernel::exponential(2.0), Trend::constant(), (0.0, 1.0), 2.0),
        ("bm const1", Kernel::BrownianMotion, Trend::constant(), (0.0, 1.0), 2.0),
        ("bm t", Kernel::BrownianMotion, Trend::linear(), (0.0, 1.0), 2.0),
        ("bm t2", Kernel::BrownianMotion, Trend::quadratic(), (0.0, 1.0), 2.0),
        ("bm const1 shifted", Kernel::BrownianMotion, Trend::constant(), (0.5, 1.5), 2.5),
        ("matern32", Kernel::matern32(2.0), Trend::constant(), (0.0, 1.0), 2.0),
        ("ibm", Kernel::IntegratedBrownian, Trend::constant(), (1.0, 2.0), 3.0),
    ];
    for (name, kernel, trend, (a, b), t0) in cases {
        let model = ContinuousModel::new(kernel, trend, a, b)?;
        let (z, g) = continuous_residuals(&model, t0)?;
        push(format!("{name}: target measure"), z, false);
        push(format!("{name}: BLUE measure"), g, false);
    }
    for (name, k) in [("exponential", Kernel::exponential(2.0)), ("matern32", Kernel::matern32(2.0))] {
        let model = ProductModel::unit_square(k.clone(), k)?;
        let s = model.blup((2.0, 2.0))?;
        let (g, z) = model.residuals(&s, RESIDUAL_POINTS);
        push(format!("{name} product: target measure"), z, false);
        push(format!("{name} product: BLUE measure"), g, false);
    }
    let ou = Kernel::exponential(2.0);
    let wrong = VectorMeasure::scalar(crate::measures::SignedMeasure::dirac(0.0, 1.0, 1, 0.0, 1.0)?);
    let r = residual_scan(&ou, &wrong, &|s| (-2.0 * (2.0 - s)).exp(), &uniform_grid(0.0, 1.0, RESIDUAL_POINTS));
    push("ou: δ_A negative control".into(), r, true);
    Ok(out)
}

/// Monte Carlo settings. The sampled sites are the predictor's atoms and
/// the target, so densities must already be discretized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub sample_count: usize,
    pub seed: u64,
    /// Independent RNG streams, one per parallel task.
    pub streams: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            sample_count: 100_000,
            seed: 42,
            streams: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mse: f64,
    pub standard_error: f64,
    pub samples: usize,
}

/// A linear predictor as point masses `(site, pattern, weight)`.
pub type PointPredictor = Vec<(Point, Pattern, f64)>;

pub fn discrete_predictor(solution: &BlupSolution) -> PointPredictor {
    solution
        .observations
        .iter()
        .zip(solution.weights.iter())
        .map(|(o, &w)| (o.point, o.pattern, w))
        .collect()
}

/// Quadrature-node point masses of a 1D vector measure.
pub fn measure_predictor(q: &VectorMeasure) -> PointPredictor {
    q.discretize()
        .into_iter()
        .map(|(t, i, w)| (Point::Line(t), Pattern::order(i), w))
        .collect()
}

pub fn product_predictor(q: &ProductMeasure2D) -> PointPredictor {
    q.discretize()
        .into_iter()
        .map(|(x, y, p, w)| (Point::Plane(x, y), p, w))
        .collect()
}

/// Empirical MSE of `predictor` for `∂^p y(target)` over Gaussian draws of
/// `y = Fθ + ε`.
pub fn mc_mse(
    kernel: &Kernel,
    trend: &Trend,
    theta: &[f64],
    predictor: &[(Point, Pattern, f64)],
    target: (Point, Pattern),
    cfg: &McConfig,
) -> Result<McEstimate> {
    if theta.len() != trend.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a {}-dimensional trend",
            theta.len(),
            trend.dim()
        )));
    }
    if cfg.sample_count < 2 {
        return Err(Error::InvalidDesign("at least two Monte Carlo samples are needed".into()));
    }
    let mut sites: Vec<(Point, Pattern)> = Vec::new();
    let mut index_of = |p: Point, pat: Pattern| -> usize {
        match sites.iter().position(|(s, q)| *q == pat && s.close_to(&p, 0.0)) {
            Some(i) => i,
            None => {
                sites.push((p, pat));
                sites.len() - 1
            }
        }
    };
    let target_index = index_of(target.0, target.1);
    let mut weights = Vec::with_capacity(predictor.len());
    for &(p, pat, w) in predictor {
        weights.push((index_of(p, pat), w));
    }
    let n = sites.len();
    let mut cov = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.deriv(&sites[i].0, &sites[j].0, sites[i].1, sites[j].1)?;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let factor = match SpdFactor::new(&cov) {
        Ok(f) => f,
        Err(_) => {
            for i in 0..n {
                cov[(i, i)] += MC_LIFT * cov[(i, i)].abs().max(1.0);
            }
            SpdFactor::new(&cov)?
        }
    };
    let l = factor.l();
    let theta = DVector::from_column_slice(theta);
    let mean: Vec<f64> = sites
        .iter()
        .map(|(p, pat)| trend.features(p, *pat).map(|f| f.dot(&theta)))
        .collect::<Result<_>>()?;

    let streams = cfg.streams.clamp(1, cfg.sample_count);
    let (sum, sum_sq) = (0..streams)
        .into_par_iter()
        .map(|stream| {
            let count = cfg.sample_count / streams + usize::from(stream < cfg.sample_count % streams);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream as u64);
            let mut z = DVector::zeros(n);
            let mut acc = (0.0, 0.0);
            for _ in 0..count {
                for v in z.iter_mut() {
                    *v = rng.sample::<f64, _>(StandardNormal);
                }
                let y = &l * &z;
                let value = |i: usize| mean[i] + y[i];
                let pred: f64 = weights.iter().map(|&(i, w)| w * value(i)).sum();
                let e = value(target_index) - pred;
                let e2 = e * e;
                acc.0 += e2;
                acc.1 += e2 * e2;
            }
            acc
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = cfg.sample_count as f64;
    let mse = sum / m;
    let var = ((sum_sq / m) - mse * mse).max(0.0) * m / (m - 1.0);
    Ok(McEstimate {
        mse,
        standard_error: (var / m).sqrt(),
        samples: cfg.sample_count,
    })
}

/// Discrete MSE of `∂^p y(target)` along a sequence of design sizes.
pub fn fine_grid_limit(
    kernel: &Kernel,
    trend: &Trend,
    family: DesignFamily,
    domain: [(f64, f64); 2],
    target: Point,
    ns: &[usize],
) -> Result<Vec<f64>> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidDesign("N sequence must be increasing".into()));
    }
    ns.iter()
        .map(|&n| {
            let design = family.expand_on(n, domain[0], domain[1])?;
            let model = DiscreteModel::new(kernel.clone(), trend.clone(), design)?;
            Ok(model.predict(&target, Pattern::VALUE)?.mse)
        })
        .collect()
}

/// Random trend-annihilating perturbations `v` (`Xᵀv = 0`) of the BLUP
/// weights; returns how many gave a strictly smaller MSE.
pub fn perturbation_violations(model: &DiscreteModel, target: &Target, count: usize, seed: u64) -> Result<usize> {
    let solution = match target {
        Target::Point(t, p) => model.predict(t, *p)?,
        Target::Average(nu) => model.predict_average(nu)?,
    };
    let base = model.quadratic_mse(&solution.weights, target)?;
    let x = model.features();
    let n = x.nrows();
    let xtx = SpdFactor::new(&(x.transpose() * x))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..count {
        let raw = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = &raw - x * xtx.solve_vec(&(x.transpose() * &raw));
        let scale = 10f64.powf(rng.random_range(-3.0..0.0)) / v.norm().max(f64::MIN_POSITIVE);
        let w = &solution.weights + v * scale;
        let mse = model.quadratic_mse(&w, target)?;
        if mse < base - 1e-12 * base.abs().max(1.0) {
            violations += 1;
        }
    }
    Ok(violations)
}

/// Generic and tabulated location-scale MSE for integrated Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IbmReport {
    pub a: f64,
    pub b: f64,
    pub t0: f64,
    pub generic_mse: f64,
    pub printed_mse: f64,
    pub disagree: bool,
}

pub fn ibm_mse_report(a: f64, b: f64, t0: f64) -> Result<IbmReport> {
    let model = ContinuousModel::new(Kernel::IntegratedBrownian, Trend::constant(), a, b)?;
    let s = model.blup(t0, 0)?;
    let generic = model.mse_of_measure(&s.q_star, &s.target)?;
    let printed = ibm_printed_mse(b, t0);
    Ok(IbmReport {
        a,
        b,
        t0,
        generic_mse: generic,
        printed_mse: printed,
        disagree: (generic - printed).abs() > 1e-8 * generic.abs().max(1.0),
    })
}
