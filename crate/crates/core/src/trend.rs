//! Regression functions `f(t)` with analytic derivatives up to order 4.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernels::{Pattern, Point};

/// Highest derivative order any closed form needs.
pub const MAX_TREND_ORDER: usize = 4;

type TrendFn = Arc<dyn Fn(f64, usize) -> Vec<f64> + Send + Sync>;

/// Vector of regression functions.
#[derive(Clone)]
pub enum Trend {
    /// `(t^{k_1}, …, t^{k_m})`.
    Monomials(Vec<u32>),
    /// User-supplied components: `f(t, order)` returns the `order`-th
    /// derivative of every component.
    Custom { name: String, dim: usize, f: TrendFn },
}

impl fmt::Debug for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trend::Monomials(k) => f.debug_tuple("Monomials").field(k).finish(),
            Trend::Custom { name, dim, .. } => f
                .debug_struct("Custom")
                .field("name", name)
                .field("dim", dim)
                .finish(),
        }
    }
}

impl Trend {
    pub fn constant() -> Self {
        Trend::Monomials(vec![0])
    }

    pub fn linear() -> Self {
        Trend::Monomials(vec![1])
    }

    pub fn quadratic() -> Self {
        Trend::Monomials(vec![2])
    }

    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        f: impl Fn(f64, usize) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Trend::Custom {
            name: name.into(),
            dim,
            f: Arc::new(f),
        }
    }

    /// Trend by catalogue id: `const1`, `t`, `t2`.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "const1" | "1" => Ok(Self::constant()),
            "t" => Ok(Self::linear()),
            "t2" => Ok(Self::quadratic()),
            other => Err(Error::InvalidTrend(format!("unknown trend id {other:?}"))),
        }
    }

    pub fn id(&self) -> String {
        match self {
            Trend::Monomials(k) if k == &[0] => "const1".into(),
            Trend::Monomials(k) if k == &[1] => "t".into(),
            Trend::Monomials(k) if k == &[2] => "t2".into(),
            Trend::Monomials(k) => format!("monomials{k:?}"),
            Trend::Custom { name, .. } => name.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Trend::Monomials(k) => k.len(),
            Trend::Custom { dim, .. } => *dim,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Trend::Monomials(k) if k == &[0])
    }

    /// `f^{(order)}(t)`.
    pub fn eval(&self, t: f64, order: usize) -> DVector<f64> {
        match self {
            Trend::Monomials(ks) => DVector::from_iterator(
                ks.len(),
                ks.iter().map(|&k| monomial_derivative(k, order, t)),
            ),
            Trend::Custom { f, dim, .. } => {
                let v = f(t, order);
                debug_assert_eq!(v.len(), *dim);
                DVector::from_vec(v)
            }
        }
    }

    /// Feature vector of an observation with the given derivative pattern.
    ///
    /// In the plane only the constant trend is supported.
    pub fn features(&self, p: &Point, pattern: Pattern) -> Result<DVector<f64>> {
        match p {
            Point::Line(t) => {
                if pattern.1 != 0 {
                    return Err(Error::DimensionMismatch(
                        "second-coordinate derivative at a 1D point".into(),
                    ));
                }
                Ok(self.eval(*t, pattern.0 as usize))
            }
            Point::Plane(..) => {
                if !self.is_constant() {
                    return Err(Error::Unsupported(
                        "only the constant trend is available in the plane".into(),
                    ));
                }
                Ok(DVector::from_element(
                    1,
                    if pattern.is_value() { 1.0 } else { 0.0 },
                ))
            }
        }
    }
}

fn monomial_derivative(k: u32, order: usize, t: f64) -> f64 {
    let order = order as u32;
    if order > k {
        return 0.0;
    }
    let coef: f64 = ((k - order + 1)..=k).map(f64::from).product();
    coef * t.powi((k - order) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_derivatives() {
        let f = Trend::Monomials(vec![0, 1, 2, 4]);
        let t = 1.5;
        assert_eq!(f.eval(t, 0).as_slice(), &[1.0, 1.5, 2.25, 1.5f64.powi(4)]);
        assert_eq!(f.eval(t, 1).as_slice(), &[0.0, 1.0, 3.0, 4.0 * 1.5f64.powi(3)]);
        assert_eq!(f.eval(t, 2).as_slice(), &[0.0, 0.0, 2.0, 12.0 * 2.25]);
        assert_eq!(f.eval(t, 4).as_slice(), &[0.0, 0.0, 0.0, 24.0]);
    }

    #[test]
    fn catalogue_ids_round_trip() {
        for id in ["const1", "t", "t2"] {
            assert_eq!(Trend::from_id(id).unwrap().id(), id);
        }
        assert!(Trend::from_id("t3").is_err());
    }

    #[test]
    fn plane_features() {
        let f = Trend::constant();
        let p = Point::Plane(0.1, 0.2);
        assert_eq!(f.features(&p, Pattern::VALUE).unwrap()[0], 1.0);
        assert_eq!(f.features(&p, Pattern::D12).unwrap()[0], 0.0);
        assert!(Trend::linear().features(&p, Pattern::VALUE).is_err());
    }
}
