//! Finite observation designs: sites with per-site derivative patterns, and
//! the named equidistant families used in the reference tables.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernels::{Pattern, Point};

/// One scalar observation `∂^pattern y(point)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub site: usize,
    pub point: Point,
    pub pattern: Pattern,
}

/// Named design families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignFamily {
    /// `ξ_{N,0}`: values at N equidistant points.
    Values,
    /// `ξ_{N,2}`: values at N equidistant points, derivatives at both ends.
    EndDerivatives,
    /// `ξ_{N,N}`: values and derivatives at N equidistant points.
    AllDerivatives,
    /// `ξ_{N²,0,0,0}`: values on an N×N grid.
    Grid,
    /// `ξ_{N²,4,4,4}`: grid values plus all derivative patterns at the 4 corners.
    GridCorners,
    /// `ξ_{N²,N²,N²,0}`: values and both first partials on the whole grid.
    GridFirstPartials,
    /// `ξ_{N²,4N−4,4N−4,4N−4}`: grid values plus all derivative patterns at the
    /// 4N−4 boundary grid sites.
    GridBoundary,
    /// `ξ_{N²,N²,N²,N²}`: all four patterns at every grid site.
    GridFull,
}

impl DesignFamily {
    pub const ALL: [DesignFamily; 8] = [
        DesignFamily::Values,
        DesignFamily::EndDerivatives,
        DesignFamily::AllDerivatives,
        DesignFamily::Grid,
        DesignFamily::GridCorners,
        DesignFamily::GridFirstPartials,
        DesignFamily::GridBoundary,
        DesignFamily::GridFull,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            DesignFamily::Values => "xi_N_0",
            DesignFamily::EndDerivatives => "xi_N_2",
            DesignFamily::AllDerivatives => "xi_N_N",
            DesignFamily::Grid => "xi_N2_0_0_0",
            DesignFamily::GridCorners => "xi_N2_4_4_4",
            DesignFamily::GridFirstPartials => "xi_N2_N2_N2_0",
            DesignFamily::GridBoundary => "xi_N2_4N-4_4N-4_4N-4",
            DesignFamily::GridFull => "xi_N2_N2_N2_N2",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DesignFamily::Values | DesignFamily::EndDerivatives | DesignFamily::AllDerivatives => 1,
            _ => 2,
        }
    }

    /// Expand on the unit interval or unit square.
    pub fn expand(&self, n: usize) -> Result<Design> {
        self.expand_on(n, (0.0, 1.0), (0.0, 1.0))
    }

    /// Expand with sites `A + i(B−A)/(N−1)`; the second interval is ignored in 1D.
    pub fn expand_on(&self, n: usize, first: (f64, f64), second: (f64, f64)) -> Result<Design> {
        if n < 2 {
            return Err(Error::InvalidDesign(format!("N must be at least 2, got {n}")));
        }
        let axis = |(a, b): (f64, f64)| -> Vec<f64> {
            (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
        };
        let value = vec![Pattern::VALUE];
        let with_deriv = vec![Pattern::VALUE, Pattern::D1];
        let all = Pattern::PLANE_ORDER.to_vec();
        let design = match self {
            DesignFamily::Values | DesignFamily::EndDerivatives | DesignFamily::AllDerivatives => {
                let xs = axis(first);
                let patterns = (0..n)
                    .map(|i| match self {
                        DesignFamily::Values => value.clone(),
                        DesignFamily::EndDerivatives if i == 0 || i == n - 1 => with_deriv.clone(),
                        DesignFamily::EndDerivatives => value.clone(),
                        _ => with_deriv.clone(),
                    })
                    .collect();
                Design::new(xs.into_iter().map(Point::Line).collect(), patterns)?
            }
            _ => {
                let (xs, ys) = (axis(first), axis(second));
                let mut sites = Vec::with_capacity(n * n);
                let mut patterns = Vec::with_capacity(n * n);
                for (j, &y) in ys.iter().enumerate() {
                    for (i, &x) in xs.iter().enumerate() {
                        let boundary = i == 0 || j == 0 || i == n - 1 || j == n - 1;
                        let corner = (i == 0 || i == n - 1) && (j == 0 || j == n - 1);
                        sites.push(Point::Plane(x, y));
                        patterns.push(match self {
                            DesignFamily::Grid => value.clone(),
                            DesignFamily::GridCorners if corner => all.clone(),
                            DesignFamily::GridBoundary if boundary => all.clone(),
                            DesignFamily::GridCorners | DesignFamily::GridBoundary => value.clone(),
                            DesignFamily::GridFirstPartials => {
                                vec![Pattern::VALUE, Pattern::D1, Pattern::D2]
                            }
                            _ => all.clone(),
                        });
                    }
                }
                Design::new(sites, patterns)?
            }
        };
        Ok(design.with_family(*self))
    }
}

/// Reject sites closer than `SITE_TOL`, bucketing by cells of that size.
fn check_distinct(sites: &[Point]) -> Result<()> {
    let cell = |x: f64| (x / SITE_TOL).floor() as i64;
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::with_capacity(sites.len());
    for (i, p) in sites.iter().enumerate() {
        let [x, y] = p.coords();
        let (cx, cy) = (cell(x), cell(y));
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(others) = buckets.get(&(cx + dx, cy + dy)) {
                    if let Some(&j) = others.iter().find(|&&j| sites[j].close_to(p, SITE_TOL)) {
                        return Err(Error::InvalidDesign(format!("sites {j} and {i} coincide")));
                    }
                }
            }
        }
        buckets.entry((cx, cy)).or_default().push(i);
    }
    Ok(())
}

impl fmt::Display for DesignFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DesignFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let alias = match s {
            "equidistant" => Some(DesignFamily::Values),
            "grid" => Some(DesignFamily::Grid),
            "xi_N2_4N4_4N4_4N4" | "boundary" => Some(DesignFamily::GridBoundary),
            _ => None,
        };
        alias
            .or_else(|| Self::ALL.iter().copied().find(|f| f.tag() == s))
            .ok_or_else(|| Error::InvalidDesign(format!("unknown design family {s:?}")))
    }
}

/// Observation sites and the derivative patterns observed at each.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    sites: Vec<Point>,
    patterns: Vec<Vec<Pattern>>,
    family: Option<DesignFamily>,
}

const SITE_TOL: f64 = 1e-12;

impl Design {
    /// Every site must observe the value itself.
    pub fn new(sites: Vec<Point>, patterns: Vec<Vec<Pattern>>) -> Result<Self> {
        Self::build(sites, patterns, false)
    }

    /// Like [`Design::new`], but sites may observe derivatives only.
    pub fn allowing_derivative_only(sites: Vec<Point>, patterns: Vec<Vec<Pattern>>) -> Result<Self> {
        Self::build(sites, patterns, true)
    }

    /// Value observations only.
    pub fn values(sites: Vec<Point>) -> Result<Self> {
        let patterns = vec![vec![Pattern::VALUE]; sites.len()];
        Self::new(sites, patterns)
    }

    fn build(sites: Vec<Point>, mut patterns: Vec<Vec<Pattern>>, derivative_only: bool) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidDesign("design has no sites".into()));
        }
        if sites.len() != patterns.len() {
            return Err(Error::InvalidDesign(format!(
                "{} sites but {} pattern sets",
                sites.len(),
                patterns.len()
            )));
        }
        let dim = sites[0].dim();
        if sites.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidDesign("sites of mixed dimension".into()));
        }
        for (i, set) in patterns.iter_mut().enumerate() {
            set.sort_by_key(Pattern::rank);
            set.dedup();
            if set.is_empty() {
                return Err(Error::InvalidDesign(format!("site {i} observes nothing")));
            }
            if !derivative_only && !set.contains(&Pattern::VALUE) {
                return Err(Error::InvalidDesign(format!("site {i} does not observe the value")));
            }
            if dim == 1 && set.iter().any(|p| p.1 != 0) {
                return Err(Error::InvalidDesign(format!("site {i}: 2D pattern at a 1D site")));
            }
        }
        check_distinct(&sites)?;
        Ok(Self {
            sites,
            patterns,
            family: None,
        })
    }

    fn with_family(mut self, family: DesignFamily) -> Self {
        self.family = Some(family);
        self
    }

    pub fn family(&self) -> Option<DesignFamily> {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.sites[0].dim()
    }

    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    pub fn patterns(&self, site: usize) -> &[Pattern] {
        &self.patterns[site]
    }

    /// Flattened observation vector: all value observations in site order,
    /// then each derivative pattern in turn.
    pub fn observations(&self) -> Vec<Observation> {
        let mut kinds: Vec<Pattern> = self.patterns.iter().flatten().copied().collect();
        kinds.sort_by_key(Pattern::rank);
        kinds.dedup();
        let mut out = Vec::new();
        for kind in kinds {
            for (site, point) in self.sites.iter().enumerate() {
                if self.patterns[site].contains(&kind) {
                    out.push(Observation {
                        site,
                        point: *point,
                        pattern: kind,
                    });
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.patterns.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of a site within `1e-12` of `p`, if any.
    pub fn find_site(&self, p: &Point) -> Option<usize> {
        self.sites.iter().position(|s| s.close_to(p, SITE_TOL))
    }

    /// Design with one more site (used for information monotonicity checks).
    pub fn with_site(&self, point: Point, patterns: Vec<Pattern>) -> Result<Self> {
        let mut sites = self.sites.clone();
        let mut pats = self.patterns.clone();
        sites.push(point);
        pats.push(patterns);
        Self::new(sites, pats)
    }
}
