//! Covariance kernel zoo with analytic partial derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::trend::Trend;

/// A location in the observation domain: a real line or the plane.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Point {
    Line(f64),
    Plane(f64, f64),
}

impl Point {
    pub fn dim(&self) -> usize {
        match self {
            Point::Line(_) => 1,
            Point::Plane(..) => 2,
        }
    }

    pub fn coords(&self) -> [f64; 2] {
        match *self {
            Point::Line(t) => [t, 0.0],
            Point::Plane(a, b) => [a, b],
        }
    }

    /// Coordinatewise closeness with absolute tolerance `tol`.
    pub fn close_to(&self, other: &Point, tol: f64) -> bool {
        match (self, other) {
            (Point::Line(a), Point::Line(b)) => (a - b).abs() <= tol,
            (Point::Plane(a1, a2), Point::Plane(b1, b2)) => {
                (a1 - b1).abs() <= tol && (a2 - b2).abs() <= tol
            }
            _ => false,
        }
    }
}

impl From<f64> for Point {
    fn from(t: f64) -> Self {
        Point::Line(t)
    }
}

impl From<(f64, f64)> for Point {
    fn from((a, b): (f64, f64)) -> Self {
        Point::Plane(a, b)
    }
}

/// Derivative pattern of an observation: orders along the first and second
/// coordinate. One-dimensional patterns use the first slot only.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize,
)]
pub struct Pattern(pub u8, pub u8);

impl Pattern {
    pub const VALUE: Pattern = Pattern(0, 0);
    pub const D1: Pattern = Pattern(1, 0);
    pub const D2: Pattern = Pattern(0, 1);
    pub const D12: Pattern = Pattern(1, 1);

    /// The 2D observation order `(0,0), (1,0), (0,1), (1,1)`.
    pub const PLANE_ORDER: [Pattern; 4] = [Self::VALUE, Self::D1, Self::D2, Self::D12];

    pub fn order(p: u8) -> Pattern {
        Pattern(p, 0)
    }

    /// Sort key consistent with the flattened observation layout.
    pub fn rank(&self) -> u32 {
        self.0 as u32 + 2 * self.1 as u32
    }

    pub fn is_value(&self) -> bool {
        *self == Self::VALUE
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0, self.1)
    }
}

type Profile = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// `K(t, s) = u(min(t,s)) v(max(t,s))` with user-supplied `u`, `v`.
///
/// Each profile returns `[value, first derivative, second derivative]`.
#[derive(Clone)]
pub struct MarkovFns {
    name: String,
    u: Profile,
    v: Profile,
}

impl fmt::Debug for MarkovFns {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarkovFns").field("name", &self.name).finish()
    }
}

impl PartialEq for MarkovFns {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl MarkovFns {
    pub fn new(
        name: impl Into<String>,
        u: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static,
        v: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            u: Arc::new(u),
            v: Arc::new(v),
        }
    }

    /// `u = t`, `v = 1`: Brownian motion.
    pub fn brownian() -> Self {
        Self::new("u=t,v=1", |t| [t, 1.0, 0.0], |_| [1.0, 0.0, 0.0])
    }

    /// `u = e^{λt}`, `v = e^{-λt}`: Ornstein–Uhlenbeck.
    pub fn ornstein_uhlenbeck(lambda: f64) -> Self {
        Self::new(
            format!("u=exp({lambda}t),v=exp(-{lambda}t)"),
            move |t| {
                let e = (lambda * t).exp();
                [e, lambda * e, lambda * lambda * e]
            },
            move |t| {
                let e = (-lambda * t).exp();
                [e, -lambda * e, lambda * lambda * e]
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn u(&self, t: f64) -> [f64; 3] {
        (self.u)(t)
    }

    pub fn v(&self, t: f64) -> [f64; 3] {
        (self.v)(t)
    }

    /// `q = u / v` and its first two derivatives.
    pub fn q(&self, t: f64) -> [f64; 3] {
        let [u, u1, u2] = self.u(t);
        let [v, v1, v2] = self.v(t);
        let q = u / v;
        let q1 = (u1 * v - u * v1) / (v * v);
        let q2 = (u2 * v - u * v2) / (v * v) - 2.0 * (u1 * v - u * v1) * v1 / (v * v * v);
        [q, q1, q2]
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
        self.u(lo)[0] * self.v(hi)[0]
    }

    /// Check that `q` is strictly increasing and `v` nonvanishing on the given nodes.
    pub fn validate_on(&self, nodes: &[f64]) -> Result<()> {
        for &t in nodes {
            if self.v(t)[0] == 0.0 {
                return Err(Error::InvalidKernel(format!("v vanishes at {t}")));
            }
            if !(self.q(t)[1] > 0.0) {
                return Err(Error::InvalidKernel(format!(
                    "q = u/v is not strictly increasing at {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Covariance kernel descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `exp(-λ|t-s|)`, the Ornstein–Uhlenbeck covariance.
    Exponential { lambda: f64 },
    /// `(1 + λ|t-s|) exp(-λ|t-s|)`.
    Matern32 { lambda: f64 },
    /// `min(t, s)`.
    BrownianMotion,
    /// `min(t,s)^2 (3 max(t,s) - min(t,s)) / 6`.
    IntegratedBrownian,
    Markovian(MarkovFns),
    /// Separable 2D kernel `K1(t1, s1) K2(t2, s2)`.
    Product(Box<Kernel>, Box<Kernel>),
}

impl Kernel {
    pub fn exponential(lambda: f64) -> Self {
        Kernel::Exponential { lambda }
    }

    pub fn matern32(lambda: f64) -> Self {
        Kernel::Matern32 { lambda }
    }

    pub fn product(left: Kernel, right: Kernel) -> Self {
        Kernel::Product(Box::new(left), Box::new(right))
    }

    /// Validate parameters (positive λ, 1D factors for products).
    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Exponential { lambda } | Kernel::Matern32 { lambda } => {
                if !(*lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::InvalidKernel(format!("lambda must be > 0, got {lambda}")));
                }
                Ok(())
            }
            Kernel::Product(l, r) => {
                if l.dim() != 1 || r.dim() != 1 {
                    return Err(Error::InvalidKernel(
                        "product factors must be one-dimensional".into(),
                    ));
                }
                l.validate()?;
                r.validate()
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Kernel::Product(..) => 2,
            _ => 1,
        }
    }

    /// Highest observable derivative order per coordinate.
    pub fn smoothness(&self) -> Pattern {
        match self {
            Kernel::Exponential { .. } | Kernel::BrownianMotion | Kernel::Markovian(_) => {
                Pattern(0, 0)
            }
            Kernel::Matern32 { .. } | Kernel::IntegratedBrownian => Pattern(1, 0),
            Kernel::Product(l, r) => Pattern(l.smoothness().0, r.smoothness().0),
        }
    }

    /// Rate parameter, where the kernel has one (used for quadrature panel counts).
    pub fn rate(&self) -> f64 {
        match self {
            Kernel::Exponential { lambda } | Kernel::Matern32 { lambda } => *lambda,
            Kernel::Product(l, r) => l.rate().max(r.rate()),
            _ => 1.0,
        }
    }

    /// Markovian representation of the kernel, when it has one.
    pub fn as_markov(&self) -> Option<MarkovFns> {
        match self {
            Kernel::Exponential { lambda } => Some(MarkovFns::ornstein_uhlenbeck(*lambda)),
            Kernel::BrownianMotion => Some(MarkovFns::brownian()),
            Kernel::Markovian(m) => Some(m.clone()),
            _ => None,
        }
    }

    /// `K(t, s)`.
    pub fn eval(&self, t: &Point, s: &Point) -> Result<f64> {
        self.deriv(t, s, Pattern::VALUE, Pattern::VALUE)
    }

    /// `∂^{i+j} K / ∂t^i ∂s^j` for a one-dimensional kernel.
    pub fn deriv_1d(&self, t: f64, s: f64, i: u8, j: u8) -> Result<f64> {
        let q = match self {
            Kernel::Product(..) => {
                return Err(Error::DimensionMismatch(
                    "product kernel evaluated at 1D points".into(),
                ))
            }
            k => k.smoothness().0,
        };
        if i > q || j > q {
            return Err(Error::DerivativeOrder {
                requested: i.max(j),
                smoothness: q,
            });
        }
        Ok(self.deriv_1d_unchecked(t, s, i, j))
    }

    /// As [`Kernel::deriv_1d`] without the smoothness check. Orders above the
    /// smoothness return `NaN`.
    pub(crate) fn deriv_1d_unchecked(&self, t: f64, s: f64, i: u8, j: u8) -> f64 {
        match self {
            Kernel::Exponential { lambda } => match (i, j) {
                (0, 0) => (-lambda * (t - s).abs()).exp(),
                _ => f64::NAN,
            },
            Kernel::Matern32 { lambda } => {
                let l = *lambda;
                let d = t - s;
                let a = d.abs();
                let e = (-l * a).exp();
                match (i, j) {
                    (0, 0) => (1.0 + l * a) * e,
                    (1, 0) => -l * l * d * e,
                    (0, 1) => l * l * d * e,
                    (1, 1) => l * l * (1.0 - l * a) * e,
                    _ => f64::NAN,
                }
            }
            Kernel::BrownianMotion => match (i, j) {
                (0, 0) => t.min(s),
                _ => f64::NAN,
            },
            Kernel::IntegratedBrownian => match (i, j) {
                (0, 0) => {
                    let (m, x) = (t.min(s), t.max(s));
                    m * m * (3.0 * x - m) / 6.0
                }
                (1, 0) => {
                    if t <= s {
                        t * s - 0.5 * t * t
                    } else {
                        0.5 * s * s
                    }
                }
                (0, 1) => {
                    if s <= t {
                        t * s - 0.5 * s * s
                    } else {
                        0.5 * t * t
                    }
                }
                (1, 1) => t.min(s),
                _ => f64::NAN,
            },
            Kernel::Markovian(m) => match (i, j) {
                (0, 0) => m.eval(t, s),
                _ => f64::NAN,
            },
            Kernel::Product(..) => f64::NAN,
        }
    }

    /// Partial derivative `∂^{|i|+|j|} K(t, s)` with derivative pattern `i` in
    /// `t` and `j` in `s`.
    pub fn deriv(&self, t: &Point, s: &Point, i: Pattern, j: Pattern) -> Result<f64> {
        match (self, t, s) {
            (Kernel::Product(l, r), Point::Plane(t1, t2), Point::Plane(s1, s2)) => {
                Ok(l.deriv_1d(*t1, *s1, i.0, j.0)? * r.deriv_1d(*t2, *s2, i.1, j.1)?)
            }
            (Kernel::Product(..), _, _) => Err(Error::DimensionMismatch(
                "product kernel needs 2D points".into(),
            )),
            (k, Point::Line(t), Point::Line(s)) => {
                if i.1 != 0 || j.1 != 0 {
                    return Err(Error::DimensionMismatch(
                        "second-coordinate derivative on a 1D kernel".into(),
                    ));
                }
                k.deriv_1d(*t, *s, i.0, j.0)
            }
            _ => Err(Error::DimensionMismatch(format!(
                "{}D kernel evaluated at {}D/{}D points",
                self.dim(),
                t.dim(),
                s.dim()
            ))),
        }
    }

    /// Fast path for Gram assembly: no smoothness or dimension validation.
    pub(crate) fn deriv_unchecked(&self, t: &Point, s: &Point, i: Pattern, j: Pattern) -> f64 {
        match (self, t, s) {
            (Kernel::Product(l, r), Point::Plane(t1, t2), Point::Plane(s1, s2)) => {
                l.deriv_1d_unchecked(*t1, *s1, i.0, j.0) * r.deriv_1d_unchecked(*t2, *s2, i.1, j.1)
            }
            (k, Point::Line(t), Point::Line(s)) => k.deriv_1d_unchecked(*t, *s, i.0, j.0),
            _ => f64::NAN,
        }
    }

    /// Brownian-type kernels live on `t ≥ 0`.
    pub fn check_domain(&self, p: &Point) -> Result<()> {
        let ok = match (self, p) {
            (Kernel::BrownianMotion | Kernel::IntegratedBrownian, Point::Line(t)) => *t >= 0.0,
            (Kernel::Product(l, r), Point::Plane(a, b)) => {
                l.check_domain(&Point::Line(*a)).is_ok() && r.check_domain(&Point::Line(*b)).is_ok()
            }
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidKernel(format!("{p:?} outside the kernel's domain")))
        }
    }

    /// Check that derivative pattern `p` can be observed under this kernel.
    pub fn check_pattern(&self, p: Pattern) -> Result<()> {
        let q = self.smoothness();
        let bad = if self.dim() == 1 {
            p.1 != 0 || p.0 > q.0
        } else {
            p.0 > q.0 || p.1 > q.1
        };
        if bad {
            return Err(Error::DerivativeOrder {
                requested: p.0.max(p.1),
                smoothness: q.0.max(q.1),
            });
        }
        Ok(())
    }

    /// Kernel of the detrended process `y - fᵀ θ̂_BLUE`.
    pub fn reduced<'a>(&'a self, trend: &'a Trend, d: &DenseMatrix) -> Result<ReducedKernel<'a>> {
        if d.nrows() != trend.dim() || d.ncols() != trend.dim() {
            return Err(Error::DimensionMismatch(format!(
                "D is {}x{}, trend has {} components",
                d.nrows(),
                d.ncols(),
                trend.dim()
            )));
        }
        crate::numerics::check_symmetric(d)?;
        Ok(ReducedKernel {
            kernel: self,
            trend,
            d: d.clone(),
        })
    }
}

/// `K̃(t, s) = K(t, s) - f(t)ᵀ D f(s)`.
#[derive(Debug, Clone)]
pub struct ReducedKernel<'a> {
    kernel: &'a Kernel,
    trend: &'a Trend,
    d: DenseMatrix,
}

impl ReducedKernel<'_> {
    pub fn eval(&self, t: &Point, s: &Point) -> Result<f64> {
        self.deriv(t, s, Pattern::VALUE, Pattern::VALUE)
    }

    /// `∂^i_t ∂^j_s K̃(t, s)`.
    pub fn deriv(&self, t: &Point, s: &Point, i: Pattern, j: Pattern) -> Result<f64> {
        let k = self.kernel.deriv(t, s, i, j)?;
        let ft = self.trend.features(t, i)?;
        let fs = self.trend.features(s, j)?;
        Ok(k - ft.dot(&(&self.d * fs)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zoo() -> Vec<Kernel> {
        vec![
            Kernel::exponential(2.0),
            Kernel::matern32(2.0),
            Kernel::matern32(0.7),
            Kernel::BrownianMotion,
            Kernel::IntegratedBrownian,
            Kernel::Markovian(MarkovFns::ornstein_uhlenbeck(1.5)),
            Kernel::Markovian(MarkovFns::brownian()),
        ]
    }

    #[test]
    fn matern_at_zero_distance() {
        let k = Kernel::matern32(2.0);
        assert_eq!(k.deriv_1d(0.3, 0.3, 0, 0).unwrap(), 1.0);
    }

    #[test]
    fn integrated_brownian_value() {
        let k = Kernel::IntegratedBrownian;
        let v = k.eval(&Point::Line(1.0), &Point::Line(2.0)).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_product_value() {
        let k = Kernel::product(Kernel::exponential(2.0), Kernel::exponential(2.0));
        let v = k.eval(&Point::Plane(0.0, 0.0), &Point::Plane(1.0, 1.0)).unwrap();
        assert!((v - (-4.0_f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn matern_mixed_derivative_on_diagonal() {
        // finite-difference oracle of ∂²K/∂t∂s at t = s, from the profile (1+λ|d|)e^{-λ|d|}
        let lambda = 2.0;
        let prof = |d: f64| (1.0 + lambda * d.abs()) * (-lambda * d.abs()).exp();
        let h = 1e-4;
        // ∂t∂s K(t,s) = -K''(d) at d = 0
        let fd = -(prof(h) - 2.0 * prof(0.0) + prof(-h)) / (h * h);
        let k = Kernel::matern32(lambda);
        let an = k.deriv_1d(0.4, 0.4, 1, 1).unwrap();
        assert!((an - lambda * lambda).abs() < 1e-15);
        assert!((fd - an).abs() < 1e-3 * an);
        // symmetric-limit convention for the first derivative
        assert_eq!(k.deriv_1d(0.4, 0.4, 1, 0).unwrap(), 0.0);
    }

    #[test]
    fn integrated_brownian_mixed_is_min() {
        let k = Kernel::IntegratedBrownian;
        let (t, s) = (0.6, 1.3);
        assert_eq!(k.deriv_1d(t, s, 1, 1).unwrap(), t);
        let h = 1e-4;
        let f = |a: f64, b: f64| k.deriv_1d(a, b, 0, 0).unwrap();
        let fd = (f(t + h, s + h) - f(t + h, s - h) - f(t - h, s + h) + f(t - h, s - h))
            / (4.0 * h * h);
        assert!((fd - t).abs() < 1e-6);
    }

    #[test]
    fn zeroth_derivative_is_value() {
        for k in zoo() {
            for (t, s) in [(0.2, 0.9), (1.1, 0.4), (0.5, 0.5)] {
                let a = k.deriv_1d(t, s, 0, 0).unwrap();
                let b = k.eval(&Point::Line(t), &Point::Line(s)).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn derivative_beyond_smoothness_errors() {
        assert!(matches!(
            Kernel::exponential(1.0).deriv_1d(0.1, 0.2, 1, 0),
            Err(Error::DerivativeOrder { requested: 1, smoothness: 0 })
        ));
        assert!(Kernel::matern32(1.0).deriv_1d(0.1, 0.2, 2, 0).is_err());
        assert!(Kernel::BrownianMotion.deriv_1d(0.1, 0.2, 0, 1).is_err());
    }

    #[test]
    fn dimension_mismatch_errors() {
        let k = Kernel::matern32(1.0);
        assert!(matches!(
            k.eval(&Point::Plane(0.0, 0.0), &Point::Line(1.0)),
            Err(Error::DimensionMismatch(_))
        ));
        let p = Kernel::product(Kernel::matern32(1.0), Kernel::matern32(1.0));
        assert!(p.eval(&Point::Line(0.0), &Point::Line(1.0)).is_err());
        assert!(Kernel::product(p.clone(), p).validate().is_err());
        assert!(Kernel::matern32(-1.0).validate().is_err());
    }

    #[test]
    fn markov_catalogue_matches_named_kernels() {
        let ou = MarkovFns::ornstein_uhlenbeck(2.0);
        let bm = MarkovFns::brownian();
        for (t, s) in [(0.1, 0.8), (0.9, 0.3), (0.5, 0.5)] {
            assert!((ou.eval(t, s) - (-2.0 * (t - s as f64).abs()).exp()).abs() < 1e-15);
            assert_eq!(bm.eval(t, s), (t as f64).min(s));
        }
        let nodes: Vec<f64> = (0..50).map(|i| 0.02 * i as f64 + 0.01).collect();
        assert!(ou.validate_on(&nodes).is_ok());
        let bad = MarkovFns::new("decreasing", |t| [-t, -1.0, 0.0], |_| [1.0, 0.0, 0.0]);
        assert!(bad.validate_on(&nodes).is_err());
    }

    #[test]
    fn reduced_kernel_cases() {
        let k = Kernel::exponential(2.0);
        let f = Trend::constant();
        let zero = DenseMatrix::zeros(1, 1);
        let r = k.reduced(&f, &zero).unwrap();
        let (a, b) = (Point::Line(0.2), Point::Line(0.7));
        assert_eq!(r.eval(&a, &b).unwrap(), k.eval(&a, &b).unwrap());
        let d = DenseMatrix::from_element(1, 1, 0.3);
        let r = k.reduced(&f, &d).unwrap();
        assert!((r.eval(&a, &b).unwrap() - (k.eval(&a, &b).unwrap() - 0.3)).abs() < 1e-16);
        assert_eq!(r.eval(&a, &b).unwrap(), r.eval(&b, &a).unwrap());
        // OU on [0,1], D = (1 + λ(B-A)/2)^{-1} = 1/2
        let d = DenseMatrix::from_element(1, 1, 1.0 / (1.0 + 2.0 / 2.0));
        let r = k.reduced(&f, &d).unwrap();
        let v = r.eval(&Point::Line(0.0), &Point::Line(1.0)).unwrap();
        assert!((v - ((-2.0_f64).exp() - 0.5)).abs() < 1e-15);
        assert!(k.reduced(&f, &DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn product_derivative_factors_exactly() {
        let (k1, k2) = (Kernel::matern32(2.0), Kernel::matern32(1.3));
        let k = Kernel::product(k1.clone(), k2.clone());
        let (t, s) = (Point::Plane(0.2, 0.9), Point::Plane(0.7, 0.1));
        for i in Pattern::PLANE_ORDER {
            for j in Pattern::PLANE_ORDER {
                let full = k.deriv(&t, &s, i, j).unwrap();
                let fac = k1.deriv_1d(0.2, 0.7, i.0, j.0).unwrap()
                    * k2.deriv_1d(0.9, 0.1, i.1, j.1).unwrap();
                assert_eq!(full, fac);
            }
        }
    }

    #[test]
    fn gram_positive_definite_with_derivative_blocks() {
        use nalgebra::SymmetricEigen;
        let sites = [0.05, 0.13, 0.3, 0.42, 0.5, 0.61, 0.77, 0.8, 0.93, 1.2, 1.5, 1.9];
        for k in zoo() {
            let q = k.smoothness().0;
            let obs: Vec<(f64, u8)> = (0..=q)
                .flat_map(|o| sites.iter().map(move |&t| (t, o)))
                .collect();
            let n = obs.len();
            let g = DenseMatrix::from_fn(n, n, |a, b| {
                k.deriv_1d(obs[a].0, obs[b].0, obs[a].1, obs[b].1).unwrap()
            });
            let eig = SymmetricEigen::new(g).eigenvalues;
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > -1e-10, "{k:?}: min eigenvalue {min}");
        }
    }

    proptest! {
        #[test]
        fn symmetry(t in 0.0f64..3.0, s in 0.0f64..3.0) {
            for k in zoo() {
                let a = k.deriv_1d(t, s, 0, 0).unwrap();
                let b = k.deriv_1d(s, t, 0, 0).unwrap();
                prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
                if k.smoothness().0 == 1 {
                    prop_assert!((k.deriv_1d(t, s, 1, 0).unwrap() - k.deriv_1d(s, t, 0, 1).unwrap()).abs() < 1e-14);
                    prop_assert!((k.deriv_1d(t, s, 1, 1).unwrap() - k.deriv_1d(s, t, 1, 1).unwrap()).abs() < 1e-14);
                }
            }
        }

        #[test]
        fn derivatives_match_finite_differences(t in 0.05f64..2.0, s in 0.05f64..2.0) {
            prop_assume!((t - s).abs() >= 1e-3);
            let h = 1e-5;
            for k in [Kernel::matern32(2.0), Kernel::matern32(0.5), Kernel::IntegratedBrownian] {
                let f = |a: f64, b: f64| k.deriv_1d(a, b, 0, 0).unwrap();
                let dt = (f(t + h, s) - f(t - h, s)) / (2.0 * h);
                let ds = (f(t, s + h) - f(t, s - h)) / (2.0 * h);
                let g = 1e-4;
                let dts = (f(t + g, s + g) - f(t + g, s - g) - f(t - g, s + g) + f(t - g, s - g)) / (4.0 * g * g);
                prop_assert!((dt - k.deriv_1d(t, s, 1, 0).unwrap()).abs() < 1e-6);
                prop_assert!((ds - k.deriv_1d(t, s, 0, 1).unwrap()).abs() < 1e-6);
                prop_assert!((dts - k.deriv_1d(t, s, 1, 1).unwrap()).abs() < 1e-6);
            }
        }
    }
}
