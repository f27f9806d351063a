//! Location-scale prediction on rectangles with separable kernels.
//!
//! The continuous solution is assembled from 1D factor measures: the target
//! measure is `ζ_{T1} ⊗ ζ_{T2}` component by component and the BLUE measure is
//! `G₁ ⊗ G₂` with variance `D₁ D₂`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::continuous::{ContinuousModel, ZetaPath};
use crate::design::{Design, DesignFamily, Observation};
use crate::discrete::{BlupSolution, DiscreteModel};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, Pattern, Point};
use crate::measures::{ProductMeasure2D, VectorMeasure};
use crate::numerics::DenseMatrix;
use crate::trend::Trend;

const MSE_SLACK: f64 = 1e-10;

/// `y(t) = θ + ε(t)` on `[A₁,B₁]×[A₂,B₂]` with covariance `K₁(t₁,s₁) K₂(t₂,s₂)`.
#[derive(Debug, Clone)]
pub struct ProductModel {
    factors: [ContinuousModel; 2],
    derivatives: bool,
}

/// Continuous BLUP of `y(T)` for a product model.
#[derive(Debug, Clone)]
pub struct ProductSolution {
    pub target: (f64, f64),
    pub zeta: ProductMeasure2D,
    /// BLUE measure.
    pub g: ProductMeasure2D,
    pub c: f64,
    /// Variance of the BLUE.
    pub d: f64,
    pub q_star: ProductMeasure2D,
    pub mse: f64,
    pub paths: [ZetaPath; 2],
    /// Largest residual of the 1D factor measures.
    pub factor_residual: f64,
}

impl ProductSolution {
    pub fn rmse(&self) -> f64 {
        self.mse.max(0.0).sqrt()
    }
}

impl ProductModel {
    /// Derivative observations are used exactly when both factors are once
    /// differentiable; factors of different smoothness are rejected.
    pub fn new(first: Kernel, second: Kernel, domain: [(f64, f64); 2]) -> Result<Self> {
        let q1 = first.smoothness().0;
        let q2 = second.smoothness().0;
        if first.dim() != 1 || second.dim() != 1 {
            return Err(Error::DimensionMismatch("product factors must be 1D kernels".into()));
        }
        if q1 != q2 {
            return Err(Error::Unsupported(format!(
                "factor smoothness differs ({q1} vs {q2})"
            )));
        }
        let f1 = ContinuousModel::new(first, Trend::constant(), domain[0].0, domain[0].1)?;
        let f2 = ContinuousModel::new(second, Trend::constant(), domain[1].0, domain[1].1)?;
        Ok(Self {
            factors: [f1, f2],
            derivatives: q1 == 1,
        })
    }

    pub fn unit_square(first: Kernel, second: Kernel) -> Result<Self> {
        Self::new(first, second, [(0.0, 1.0), (0.0, 1.0)])
    }

    pub fn factor(&self, i: usize) -> &ContinuousModel {
        &self.factors[i]
    }

    pub fn domain(&self) -> [(f64, f64); 2] {
        [self.factors[0].interval(), self.factors[1].interval()]
    }

    pub fn derivatives(&self) -> bool {
        self.derivatives
    }

    pub fn kernel(&self) -> Kernel {
        Kernel::product(self.factors[0].kernel().clone(), self.factors[1].kernel().clone())
    }

    /// Observed derivative patterns of the continuous path.
    pub fn patterns(&self) -> Vec<Pattern> {
        if self.derivatives {
            Pattern::PLANE_ORDER.to_vec()
        } else {
            vec![Pattern::VALUE]
        }
    }

    fn check_target(&self, t: (f64, f64)) -> Result<()> {
        let k = self.kernel();
        k.check_domain(&Point::Plane(t.0, t.1))?;
        if !t.0.is_finite() || !t.1.is_finite() {
            return Err(Error::InvalidDesign(format!("non-finite target {t:?}")));
        }
        Ok(())
    }

    /// `∫ Σ_p ∂^p_t ∂^{ps}_s K(t, s) m_p(dt)`.
    pub fn kernel_action(&self, m: &ProductMeasure2D, s: (f64, f64), ps: Pattern) -> f64 {
        let k1 = self.factors[0].kernel();
        let k2 = self.factors[1].kernel();
        m.patterns()
            .map(|p| {
                m.terms(p)
                    .iter()
                    .filter(|term| term.weight != 0.0)
                    .map(|term| {
                        let a = term
                            .first
                            .integrate_with_breaks(|t| k1.deriv_1d_unchecked(t, s.0, p.0, ps.0), &[s.0]);
                        let b = term
                            .second
                            .integrate_with_breaks(|t| k2.deriv_1d_unchecked(t, s.1, p.1, ps.1), &[s.1]);
                        term.weight * a * b
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// Continuous BLUP of `y(T)`.
    pub fn blup(&self, t: (f64, f64)) -> Result<ProductSolution> {
        self.check_target(t)?;
        let s1 = self.factors[0].trend_system()?;
        let s2 = self.factors[1].trend_system()?;
        if s1.degenerate || s2.degenerate {
            return Err(Error::Singular("factor BLUE is degenerate".into()));
        }
        let z1 = self.factors[0].target_measure(t.0, 0)?;
        let z2 = self.factors[1].target_measure(t.1, 0)?;

        let zeta = tensor(&z1.measure, &z2.measure, &self.patterns(), 1.0);
        let g = tensor(&s1.g[0], &s2.g[0], &self.patterns(), 1.0);
        let m1 = z1.measure.components()[0].total_mass();
        let m2 = z2.measure.components()[0].total_mass();
        let c = 1.0 - m1 * m2;
        let d = s1.d[(0, 0)] * s2.d[(0, 0)];
        let q_star = zeta.axpy(c, &g);

        let v = self.factors[0].kernel().deriv_1d_unchecked(t.0, t.0, 0, 0)
            * self.factors[1].kernel().deriv_1d_unchecked(t.1, t.1, 0, 0);
        let raw = v + c * d - self.kernel_action(&q_star, t, Pattern::VALUE);
        let mse = if raw >= 0.0 {
            raw
        } else if raw >= -MSE_SLACK * v.max(1.0) {
            0.0
        } else {
            return Err(Error::NegativeMse(raw));
        };
        Ok(ProductSolution {
            target: t,
            zeta,
            g,
            c,
            d,
            q_star,
            mse,
            paths: [z1.path, z2.path],
            factor_residual: z1.residual.max(z2.residual).max(s1.residual).max(s2.residual),
        })
    }

    /// Invariance of the BLUE measure: `max |∫𝐊ᵀ(t, s) 𝐆(dt) − D|` and of the
    /// target measure `max |∫𝐊ᵀ(t, s) 𝐙_T(dt) − K(s, T)|` over an
    /// `points × points` grid of the domain, for every observed pattern of `s`.
    pub fn residuals(&self, solution: &ProductSolution, points: usize) -> (f64, f64) {
        let [(a1, b1), (a2, b2)] = self.domain();
        let points = points.max(2);
        let axis = |a: f64, b: f64| -> Vec<f64> {
            (0..points).map(|i| a + (b - a) * i as f64 / (points - 1) as f64).collect()
        };
        let (xs, ys) = (axis(a1, b1), axis(a2, b2));
        let k = self.kernel();
        let target = Point::Plane(solution.target.0, solution.target.1);
        let patterns = self.patterns();
        let g = self.tabulate(&solution.g, &xs, &ys);
        let z = self.tabulate(&solution.zeta, &xs, &ys);
        let mut worst = (0.0f64, 0.0f64);
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                for &ps in &patterns {
                    let eval = |table: &[(f64, Vec<[f64; 2]>, Vec<[f64; 2]>)]| -> f64 {
                        table
                            .iter()
                            .map(|(w, a, b)| w * a[i][ps.0 as usize] * b[j][ps.1 as usize])
                            .sum()
                    };
                    let g_rhs = if ps.is_value() { solution.d } else { 0.0 };
                    let z_rhs = k.deriv_unchecked(&Point::Plane(x, y), &target, ps, Pattern::VALUE);
                    worst.0 = worst.0.max((eval(&g) - g_rhs).abs());
                    worst.1 = worst.1.max((eval(&z) - z_rhs).abs());
                }
            }
        }
        worst
    }

    /// Per term: weight and the factor actions `∫ ∂^p_t ∂^j_s K_i(t, s) m(dt)`
    /// on each axis grid for `j = 0, 1`.
    #[allow(clippy::type_complexity)]
    fn tabulate(&self, m: &ProductMeasure2D, xs: &[f64], ys: &[f64]) -> Vec<(f64, Vec<[f64; 2]>, Vec<[f64; 2]>)> {
        let q = if self.derivatives { 1 } else { 0 };
        let action = |kernel: &Kernel, factor: &crate::measures::SignedMeasure, p: u8, grid: &[f64]| {
            grid.par_iter()
                .map(|&s| {
                    let mut out = [0.0; 2];
                    for (j, slot) in out.iter_mut().enumerate().take(q + 1) {
                        *slot = factor.integrate_with_breaks(|t| kernel.deriv_1d_unchecked(t, s, p, j as u8), &[s]);
                    }
                    out
                })
                .collect::<Vec<_>>()
        };
        m.patterns()
            .flat_map(|p| m.terms(p).iter().map(move |t| (p, t)))
            .filter(|(_, t)| t.weight != 0.0)
            .map(|(p, t)| {
                (
                    t.weight,
                    action(self.factors[0].kernel(), &t.first, p.0, xs),
                    action(self.factors[1].kernel(), &t.second, p.1, ys),
                )
            })
            .collect()
    }

    /// Discrete model for one of the grid design families on this domain.
    pub fn discrete(&self, family: DesignFamily, n: usize) -> Result<DiscreteModel> {
        self.discrete_on(self.design(family, n)?)
    }

    pub fn discrete_on(&self, design: Design) -> Result<DiscreteModel> {
        DiscreteModel::new(self.kernel(), Trend::constant(), design)
    }

    pub fn design(&self, family: DesignFamily, n: usize) -> Result<Design> {
        if family.dim() != 2 {
            return Err(Error::InvalidDesign(format!("{family} is not a 2D design family")));
        }
        let [x, y] = self.domain();
        family.expand_on(n, x, y)
    }

    /// Kronecker-factored solver for the full tensor designs.
    pub fn tensor_grid(&self, family: DesignFamily, n: usize) -> Result<TensorGridModel> {
        TensorGridModel::new(self, family, n)
    }
}

/// `weight · Σ_{(a,b)} m1_a ⊗ m2_b` over the listed patterns.
fn tensor(m1: &VectorMeasure, m2: &VectorMeasure, patterns: &[Pattern], weight: f64) -> ProductMeasure2D {
    let mut out = ProductMeasure2D::new();
    for &p in patterns {
        let (Some(a), Some(b)) = (m1.component(p.0 as usize), m2.component(p.1 as usize)) else {
            continue;
        };
        if a.is_zero() || b.is_zero() {
            continue;
        }
        out.add_term(p, weight, a.clone(), b.clone());
    }
    out
}

/// Continuous BLUP when only the path itself is observed.
pub fn product_blup(model: &ProductModel, t: (f64, f64)) -> Result<ProductSolution> {
    if model.derivatives() {
        return Err(Error::Unsupported(
            "factors are differentiable; use product_blup_derivs".into(),
        ));
    }
    model.blup(t)
}

/// Continuous BLUP when the path and its partials up to `(1,1)` are observed.
pub fn product_blup_derivs(model: &ProductModel, t: (f64, f64)) -> Result<ProductSolution> {
    if !model.derivatives() {
        return Err(Error::Unsupported(
            "factors are not differentiable; use product_blup".into(),
        ));
    }
    model.blup(t)
}

/// Parse a design tag and expand it on the unit interval or square.
pub fn design_family(tag: &str, n: usize) -> Result<Design> {
    tag.parse::<DesignFamily>()?.expand(n)
}

/// BLUP for `N×N` grids observed with a full tensor set of patterns, from
/// the two 1D factorizations.
#[derive(Debug, Clone)]
pub struct TensorGridModel {
    factors: [DiscreteModel; 2],
    observations: Arc<[Observation]>,
    index: Vec<(usize, usize)>,
}

impl TensorGridModel {
    pub fn new(model: &ProductModel, family: DesignFamily, n: usize) -> Result<Self> {
        let line = match (family, model.derivatives()) {
            (DesignFamily::Grid, _) => DesignFamily::Values,
            (DesignFamily::GridFull, true) => DesignFamily::AllDerivatives,
            _ => {
                return Err(Error::Unsupported(format!(
                    "{family} is not a full tensor design for this model"
                )))
            }
        };
        let [x, y] = model.domain();
        let f1 = DiscreteModel::new(
            model.factor(0).kernel().clone(),
            Trend::constant(),
            line.expand_on(n, x, x)?,
        )?;
        let f2 = DiscreteModel::new(
            model.factor(1).kernel().clone(),
            Trend::constant(),
            line.expand_on(n, y, y)?,
        )?;
        let observations: Arc<[Observation]> = model.design(family, n)?.observations().into();
        let lookup = |m: &DiscreteModel| -> HashMap<(usize, u8), usize> {
            m.observations()
                .iter()
                .enumerate()
                .map(|(k, o)| ((o.site, o.pattern.0), k))
                .collect()
        };
        let (l1, l2) = (lookup(&f1), lookup(&f2));
        let index = observations
            .iter()
            .map(|o| {
                let (i, j) = (o.site % n, o.site / n);
                match (l1.get(&(i, o.pattern.0)), l2.get(&(j, o.pattern.1))) {
                    (Some(&a), Some(&b)) => Ok((a, b)),
                    _ => Err(Error::InvalidDesign("tensor factor lacks an observation".into())),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            factors: [f1, f2],
            observations,
            index,
        })
    }

    pub fn factor(&self, i: usize) -> &DiscreteModel {
        &self.factors[i]
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// BLUP of `y(T)`, weights ordered as the 2D design's observations.
    pub fn predict(&self, t: (f64, f64)) -> Result<BlupSolution> {
        let [f1, f2] = &self.factors;
        let (p1, p2) = (Point::Line(t.0), Point::Line(t.1));
        let (z1, e1) = f1.kriging_weights(&p1, Pattern::VALUE)?;
        let (z2, e2) = f2.kriging_weights(&p2, Pattern::VALUE)?;
        let (s1, s2) = (f1.sigma_inv_x().column(0), f2.sigma_inv_x().column(0));
        let m = f1.features().column(0).dot(&z1) * f2.features().column(0).dot(&z2);
        let c = 1.0 - m;
        let d = f1.blue_cov()[(0, 0)] * f2.blue_cov()[(0, 0)];
        let weights = DVector::from_iterator(
            self.index.len(),
            self.index.iter().map(|&(i, j)| z1[i] * z2[j] + c * d * s1[i] * s2[j]),
        );
        let blue = DenseMatrix::from_iterator(1, self.index.len(), self.index.iter().map(|&(i, j)| d * s1[i] * s2[j]));
        let interpolated = e1 && e2;
        let mse = if interpolated {
            0.0
        } else {
            let v = f1.kernel().deriv_1d_unchecked(t.0, t.0, 0, 0) * f2.kernel().deriv_1d_unchecked(t.1, t.1, 0, 0);
            let kz = f1.cross_cov(&p1, Pattern::VALUE)?.dot(&z1) * f2.cross_cov(&p2, Pattern::VALUE)?.dot(&z2);
            let raw = v - kz + c * c * d;
            if raw < -MSE_SLACK * v.max(1.0) {
                return Err(Error::NegativeMse(raw));
            }
            raw.max(0.0)
        };
        Ok(BlupSolution {
            observations: Arc::clone(&self.observations),
            weights,
            mse,
            blue_weights: blue,
            d: DenseMatrix::from_element(1, 1, d),
            c: DVector::from_element(1, c),
            interpolated,
        })
    }
}

/// Rectangle `[t1.0, t1.1] × [t2.0, t2.1]` of prediction points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub t1: (f64, f64),
    pub t2: (f64, f64),
}

impl Default for Region {
    fn default() -> Self {
        Region {
            t1: (0.5, 2.0),
            t2: (0.5, 2.0),
        }
    }
}

/// What to evaluate on the grid.
#[derive(Debug, Clone)]
pub enum GridSource {
    Continuous,
    Family(DesignFamily, usize),
    Design(Design),
}

/// Root MSE on a rectangular lattice; `rmse[i * t2.len() + j]` belongs to
/// `(t1[i], t2[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct MseGrid {
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub rmse: Vec<f64>,
}

pub const DEFAULT_RESOLUTION: usize = 61;

impl MseGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rmse[i * self.t2.len() + j]
    }

    /// CSV with header `t1,t2,rmse`, 10 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t1,t2,rmse\n");
        for (i, &x) in self.t1.iter().enumerate() {
            for (j, &y) in self.t2.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    significant(x, 10),
                    significant(y, 10),
                    significant(self.get(i, j), 10)
                );
            }
        }
        out
    }

    /// Largest change of the surface under the symmetries of the square
    /// lattice (axis reflections and transposition). Only meaningful for
    /// square lattices centred on the design's centre.
    pub fn symmetry_gap(&self) -> f64 {
        let n = self.t1.len();
        let m = self.t2.len();
        let mut gap = 0.0f64;
        for i in 0..n {
            for j in 0..m {
                let v = self.get(i, j);
                gap = gap.max((v - self.get(n - 1 - i, j)).abs());
                gap = gap.max((v - self.get(i, m - 1 - j)).abs());
                if n == m {
                    gap = gap.max((v - self.get(j, i)).abs());
                }
            }
        }
        gap
    }
}

/// Format with `digits` significant digits in fixed notation.
pub fn significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Root MSE of the discrete or continuous BLUP over `region`, at
/// `resolution.0 × resolution.1` equidistant points.
pub fn mse_grid(
    model: &ProductModel,
    source: &GridSource,
    region: Region,
    resolution: (usize, usize),
) -> Result<MseGrid> {
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(Error::InvalidDesign("grid resolution must be at least 2 per axis".into()));
    }
    let axis = |(a, b): (f64, f64), n: usize| -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    };
    let t1 = axis(region.t1, resolution.0);
    let t2 = axis(region.t2, resolution.1);
    let points: Vec<(f64, f64)> = t1.iter().flat_map(|&x| t2.iter().map(move |&y| (x, y))).collect();
    let rmse = match source {
        GridSource::Continuous => points
            .par_iter()
            .map(|&t| model.blup(t).map(|s| s.rmse()))
            .collect::<Result<Vec<_>>>()?,
        GridSource::Family(family, n) => discrete_rmse(&model.discrete(*family, *n)?, &points)?,
        GridSource::Design(design) => discrete_rmse(&model.discrete_on(design.clone())?, &points)?,
    };
    Ok(MseGrid { t1, t2, rmse })
}

fn discrete_rmse(model: &DiscreteModel, points: &[(f64, f64)]) -> Result<Vec<f64>> {
    let pts: Vec<Point> = points.iter().map(|&(x, y)| Point::Plane(x, y)).collect();
    Ok(model
        .mse_many(&pts, Pattern::VALUE)?
        .into_iter()
        .map(|m| m.max(0.0).sqrt())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp2() -> ProductModel {
        ProductModel::unit_square(Kernel::exponential(2.0), Kernel::exponential(2.0)).unwrap()
    }

    fn matern2() -> ProductModel {
        ProductModel::unit_square(Kernel::matern32(2.0), Kernel::matern32(2.0)).unwrap()
    }

    /// `G = (δ₀ + δ₁ + λ du)/(2 + λ)`, `D = 1/(1 + λ/2)` per axis; with
    /// `T` outside on both axes, `ζ_T` is a single corner atom.
    fn exponential_oracle(lambda: f64, t: (f64, f64)) -> f64 {
        let near = |x: f64| x.clamp(0.0, 1.0);
        let mass = |x: f64| (-lambda * (x - near(x)).abs()).exp();
        let (m1, m2) = (mass(t.0), mass(t.1));
        let c = 1.0 - m1 * m2;
        let d1 = 2.0 / (2.0 + lambda);
        let d = d1 * d1;
        let g_action = |x: f64| -> f64 {
            let k = |u: f64| (-lambda * (u - x).abs()).exp();
            let n = 4000;
            let h = 1.0 / n as f64;
            let dens: f64 = (0..n).map(|i| k((i as f64 + 0.5) * h) * h).sum();
            (k(0.0) + k(1.0) + lambda * dens) / (2.0 + lambda)
        };
        let z_action = m1 * m2 * (-lambda * (t.0 - near(t.0)).abs()).exp() * (-lambda * (t.1 - near(t.1)).abs()).exp();
        1.0 + c * d - z_action - c * g_action(t.0) * g_action(t.1)
    }

    #[test]
    fn exponential_far_corner() {
        let s = product_blup(&exp2(), (2.0, 2.0)).unwrap();
        assert!((s.mse - exponential_oracle(2.0, (2.0, 2.0))).abs() < 1e-7, "{} {}", s.mse, exponential_oracle(2.0, (2.0, 2.0)));
        assert_eq!(s.paths, [ZetaPath::Operator, ZetaPath::Operator]);
        assert!(s.factor_residual < 1e-8);
    }

    #[test]
    fn exponential_edge_target() {
        let s = product_blup(&exp2(), (0.5, 2.0)).unwrap();
        assert!((s.mse - exponential_oracle(2.0, (0.5, 2.0))).abs() < 1e-7);
        assert_eq!(s.paths[0], ZetaPath::Interior);
    }

    #[test]
    fn dense_grids_approach_the_continuous_solution() {
        for m in [exp2(), matern2()] {
            let family = if m.derivatives() { DesignFamily::GridFull } else { DesignFamily::Grid };
            for t in [(2.0, 2.0), (0.5, 2.0)] {
                let limit = m.blup(t).unwrap().mse;
                let mut last = f64::INFINITY;
                for n in [8, 32, 128] {
                    let mse = m.tensor_grid(family, n).unwrap().predict(t).unwrap().mse;
                    assert!(mse >= limit - 1e-9 && mse <= last + 1e-12, "{family} {n} {t:?} {mse} {limit} {last}");
                    last = mse;
                }
                let tol = if m.derivatives() { 1e-7 } else { 5e-4 };
                assert!(last - limit < tol, "{t:?}: {last} vs {limit}");
            }
        }
    }

    #[test]
    fn interior_target_is_exact() {
        let s = product_blup(&exp2(), (0.3, 0.7)).unwrap();
        assert_eq!(s.mse, 0.0);
        assert_eq!(s.c, 0.0);
        let atoms = s.q_star.discretize();
        let at: f64 = atoms
            .iter()
            .filter(|a| (a.0 - 0.3).abs() < 1e-14 && (a.1 - 0.7).abs() < 1e-14)
            .map(|a| a.3)
            .sum();
        assert!((at - 1.0).abs() < 1e-14);
    }

    #[test]
    fn matern_table_limits() {
        let m = matern2();
        let s = product_blup_derivs(&m, (2.0, 2.0)).unwrap();
        assert!((s.rmse() - 1.119510).abs() < 5e-7, "{}", s.rmse());
        let s = product_blup_derivs(&m, (0.5, 2.0)).unwrap();
        assert!((s.rmse() - 0.9584934).abs() < 5e-8, "{}", s.rmse());
    }

    #[test]
    fn matern_corner_measures() {
        let s = product_blup_derivs(&matern2(), (2.0, 2.0)).unwrap();
        let lambda: f64 = 2.0;
        let z0 = (1.0 + lambda) * (-lambda).exp();
        let z1 = (-lambda).exp();
        for (p, expected) in [
            (Pattern::VALUE, z0 * z0),
            (Pattern::D1, z1 * z0),
            (Pattern::D2, z0 * z1),
            (Pattern::D12, z1 * z1),
        ] {
            let got = s.zeta.integrate_separable(p, |_| 1.0, |_| 1.0);
            assert!((got - expected).abs() < 1e-12, "{p}: {got} vs {expected}");
        }
        assert!((s.c - (1.0 - z0 * z0)).abs() < 1e-12);
    }

    #[test]
    fn measures_solve_their_equations() {
        for (m, t) in [(exp2(), (2.0, 2.0)), (exp2(), (-0.5, 0.4)), (matern2(), (2.0, 0.5))] {
            let s = m.blup(t).unwrap();
            let (g, z) = m.residuals(&s, 21);
            assert!(g < 1e-8 && z < 1e-8, "{g} {z}");
        }
    }

    #[test]
    fn wrong_mode_is_rejected() {
        assert!(product_blup(&matern2(), (2.0, 2.0)).is_err());
        assert!(product_blup_derivs(&exp2(), (2.0, 2.0)).is_err());
        assert!(ProductModel::unit_square(Kernel::exponential(1.0), Kernel::matern32(1.0)).is_err());
    }

    #[test]
    fn tensor_path_matches_full_solve() {
        for (m, family) in [(exp2(), DesignFamily::Grid), (matern2(), DesignFamily::GridFull)] {
            for n in [2, 3, 4] {
                let full = m.discrete(family, n).unwrap();
                let tensor = m.tensor_grid(family, n).unwrap();
                for t in [(2.0, 2.0), (0.5, 2.0), (0.2, 0.9), (1.0 / 3.0, 0.5)] {
                    let a = full.predict(&Point::Plane(t.0, t.1), Pattern::VALUE).unwrap();
                    let b = tensor.predict(t).unwrap();
                    assert!((a.mse - b.mse).abs() < 1e-10, "{family} {n} {t:?}: {} {}", a.mse, b.mse);
                    assert!((&a.weights - &b.weights).amax() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn small_grid_value() {
        let s = exp2()
            .discrete(DesignFamily::Grid, 2)
            .unwrap()
            .predict(&Point::Plane(2.0, 2.0), Pattern::VALUE)
            .unwrap();
        assert!((s.rmse() - 1.1446).abs() < 5e-5);
    }

    #[test]
    fn grid_zero_at_site_and_csv() {
        let g = mse_grid(
            &exp2(),
            &GridSource::Family(DesignFamily::Grid, 3),
            Region { t1: (0.0, 1.0), t2: (0.0, 1.0) },
            (5, 5),
        )
        .unwrap();
        assert_eq!(g.get(2, 2), 0.0);
        assert!(g.symmetry_gap() < 1e-9);
        let csv = g.to_csv();
        assert!(csv.starts_with("t1,t2,rmse\n0.000000000,0.000000000,0.000000000\n"));
        assert_eq!(csv.lines().count(), 26);
    }

    #[test]
    fn symmetric_surfaces() {
        let region = Region { t1: (-1.0, 2.0), t2: (-1.0, 2.0) };
        for source in [GridSource::Family(DesignFamily::Grid, 4), GridSource::Continuous] {
            let g = mse_grid(&exp2(), &source, region, (9, 9)).unwrap();
            assert!(g.symmetry_gap() < 1e-9, "{source:?}: {}", g.symmetry_gap());
        }
        let g = mse_grid(&matern2(), &GridSource::Family(DesignFamily::GridCorners, 3), region, (7, 7)).unwrap();
        assert!(g.symmetry_gap() < 1e-9);
    }

    #[test]
    fn far_field_is_flat() {
        let m = exp2();
        let a = m.blup((3.0, 3.0)).unwrap().rmse();
        let b = m.blup((2.9, 3.0)).unwrap().rmse();
        assert!((a - b).abs() < 1e-2);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(significant(1.11383, 10), "1.113830000");
        assert_eq!(significant(0.5, 10), "0.5000000000");
        assert_eq!(significant(12.5, 4), "12.50");
        assert_eq!(significant(0.0, 10), "0.000000000");
    }

    #[test]
    fn design_tags() {
        assert_eq!(design_family("xi_N2_0_0_0", 2).unwrap().len(), 4);
        assert_eq!(design_family("xi_N2_N2_N2_N2", 3).unwrap().len(), 36);
        assert!(design_family("nope", 3).is_err());
    }
}
