//! Real polynomial diffeomorphisms in composition normal form.
//!
//! A map is stored as `f = f_1 ∘ f_2 ∘ ... ∘ f_m` where every factor is the
//! elementary shear `f_j(x, y) = (y, p_j(y) - a_j x)`. The quadratic Hénon map
//! `(x, y) ↦ (a - b y - x², x)` is represented in its conjugated chart
//! `(x, y) ↦ (y, y² - a - b x)`; [`to_henon_chart`] converts back.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::{horner, Scalar};

/// Coordinates above this magnitude are treated as escaped.
pub const ESCAPE_LIMIT: f64 = 1e150;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("shear constant must be nonzero (got {0})")]
    ZeroShear(f64),
    #[error("factor polynomial must have degree >= 2 (got {0})")]
    LowDegree(usize),
    #[error("leading coefficient must be nonzero")]
    ZeroLeading,
    #[error("map needs at least one factor")]
    Empty,
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("map spec: {0}")]
    Spec(String),
}

/// Point in the plane over any scalar kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2<S = f64> {
    pub x: S,
    pub y: S,
}

impl<S> Point2<S> {
    pub const fn new(x: S, y: S) -> Self {
        Point2 { x, y }
    }
}

impl<S: Scalar> Point2<S> {
    pub fn magnitude(&self) -> f64 {
        self.x.magnitude().max(self.y.magnitude())
    }

    pub fn is_escaped(&self) -> bool {
        let m = self.magnitude();
        !(m.is_finite() && m <= ESCAPE_LIMIT)
    }
}

impl Point2<f64> {
    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sup_dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Orbit left the representable range.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("orbit escaped past {ESCAPE_LIMIT:e}")]
pub struct Escaped;

pub type Mat2<S = f64> = [[S; 2]; 2];

pub fn mat2_mul<S: Scalar>(a: &Mat2<S>, b: &Mat2<S>) -> Mat2<S> {
    let e = |i: usize, j: usize| a[i][0].clone() * b[0][j].clone() + a[i][1].clone() * b[1][j].clone();
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

pub fn mat2_det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// `(x, y) ↦ (y, p(y) - a x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementaryFactor {
    coeffs: Vec<f64>,
    shear: f64,
}

impl ElementaryFactor {
    /// `coeffs[k]` multiplies `y^k`.
    pub fn new(coeffs: Vec<f64>, shear: f64) -> Result<Self, MapError> {
        if coeffs.iter().any(|c| !c.is_finite()) || !shear.is_finite() {
            return Err(MapError::NonFinite);
        }
        if shear == 0.0 {
            return Err(MapError::ZeroShear(shear));
        }
        let degree = coeffs.len().saturating_sub(1);
        if degree < 2 {
            return Err(MapError::LowDegree(degree));
        }
        if *coeffs.last().unwrap() == 0.0 {
            return Err(MapError::ZeroLeading);
        }
        Ok(ElementaryFactor { coeffs, shear })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn shear(&self) -> f64 {
        self.shear
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn poly<S: Scalar>(&self, y: &S) -> S {
        horner(&self.coeffs, y)
    }

    pub fn poly_deriv<S: Scalar>(&self, y: &S) -> S {
        let d: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect();
        horner(&d, y)
    }

    pub fn apply<S: Scalar>(&self, p: &Point2<S>) -> Point2<S> {
        let y = self.poly(&p.y) - p.x.scale(self.shear);
        Point2::new(p.y.clone(), y)
    }

    pub fn apply_inverse<S: Scalar>(&self, p: &Point2<S>) -> Point2<S> {
        let x = (self.poly(&p.x) - p.y.clone()).scale(1.0 / self.shear);
        Point2::new(x, p.x.clone())
    }

    pub fn jacobian<S: Scalar>(&self, p: &Point2<S>) -> Mat2<S> {
        [
            [S::constant(0.0), S::constant(1.0)],
            [S::constant(-self.shear), self.poly_deriv(&p.y)],
        ]
    }

    pub fn jacobian_inverse<S: Scalar>(&self, p: &Point2<S>) -> Mat2<S> {
        let inv = 1.0 / self.shear;
        [
            [self.poly_deriv(&p.x).scale(inv), S::constant(-inv)],
            [S::constant(1.0), S::constant(0.0)],
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Epsilon {
    Plus,
    Minus,
}

impl Epsilon {
    pub fn sign(self) -> i8 {
        match self {
            Epsilon::Plus => 1,
            Epsilon::Minus => -1,
        }
    }
}

/// Where a map came from; used for reporting and re-serialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Henon { a: f64, b: f64 },
    Composition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// `f = factors[0] ∘ factors[1] ∘ ... ∘ factors[m-1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyDiffeo {
    factors: Vec<ElementaryFactor>,
    degree: usize,
    orientation: i8,
    epsilon: Epsilon,
    family: Family,
}

impl PolyDiffeo {
    pub fn new(factors: Vec<ElementaryFactor>) -> Result<Self, MapError> {
        Self::with_family(factors, Family::Composition)
    }

    fn with_family(factors: Vec<ElementaryFactor>, family: Family) -> Result<Self, MapError> {
        if factors.is_empty() {
            return Err(MapError::Empty);
        }
        let degree = factors.iter().map(|f| f.degree()).product();
        let det: f64 = factors.iter().map(|f| f.shear).product();
        let orientation = if det > 0.0 { 1 } else { -1 };
        let epsilon = epsilon_of(&factors, degree);
        Ok(PolyDiffeo {
            factors,
            degree,
            orientation,
            epsilon,
            family,
        })
    }

    pub fn factors(&self) -> &[ElementaryFactor] {
        &self.factors
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Sign of the constant Jacobian determinant.
    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    pub fn epsilon(&self) -> Epsilon {
        self.epsilon
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// The constant Jacobian determinant.
    pub fn det(&self) -> f64 {
        self.factors.iter().map(|f| f.shear).product()
    }

    pub fn henon_params(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::Henon { a, b } => Some((a, b)),
            Family::Composition => None,
        }
    }

    /// `f^m` as a composition with `m` copies of the factor list.
    pub fn power(&self, m: usize) -> PolyDiffeo {
        assert!(m >= 1);
        let factors = self.factors.iter().cloned().cycle().take(m * self.factors.len()).collect();
        let family = if m == 1 {
            self.family.clone()
        } else {
            Family::Composition
        };
        PolyDiffeo::with_family(factors, family).expect("powers of a valid map are valid")
    }

    /// Composition `self ∘ other`.
    pub fn compose(&self, other: &PolyDiffeo) -> PolyDiffeo {
        let factors = self.factors.iter().chain(other.factors.iter()).cloned().collect();
        PolyDiffeo::new(factors).expect("compositions of valid maps are valid")
    }

    pub fn eval<S: Scalar>(&self, p: &Point2<S>) -> Point2<S> {
        let mut q = p.clone();
        for f in self.factors.iter().rev() {
            q = f.apply(&q);
        }
        q
    }

    pub fn eval_inverse<S: Scalar>(&self, p: &Point2<S>) -> Point2<S> {
        let mut q = p.clone();
        for f in self.factors.iter() {
            q = f.apply_inverse(&q);
        }
        q
    }

    pub fn step<S: Scalar>(&self, p: &Point2<S>, dir: Direction) -> Point2<S> {
        match dir {
            Direction::Forward => self.eval(p),
            Direction::Backward => self.eval_inverse(p),
        }
    }

    /// Evaluation that reports overflow instead of producing infinities.
    pub fn eval_checked(&self, p: &Point2) -> Result<Point2, Escaped> {
        self.step_checked(p, Direction::Forward)
    }

    pub fn eval_inverse_checked(&self, p: &Point2) -> Result<Point2, Escaped> {
        self.step_checked(p, Direction::Backward)
    }

    pub fn step_checked<S: Scalar>(&self, p: &Point2<S>, dir: Direction) -> Result<Point2<S>, Escaped> {
        let mut q = p.clone();
        let n = self.factors.len();
        for i in 0..n {
            q = match dir {
                Direction::Forward => self.factors[n - 1 - i].apply(&q),
                Direction::Backward => self.factors[i].apply_inverse(&q),
            };
            if q.is_escaped() {
                return Err(Escaped);
            }
        }
        Ok(q)
    }

    /// Chain-rule Jacobian of `f` at `p`.
    pub fn jacobian<S: Scalar>(&self, p: &Point2<S>) -> Mat2<S> {
        let mut q = p.clone();
        let mut acc: Option<Mat2<S>> = None;
        for f in self.factors.iter().rev() {
            let j = f.jacobian(&q);
            acc = Some(match acc {
                None => j,
                Some(m) => mat2_mul(&j, &m),
            });
            q = f.apply(&q);
        }
        acc.unwrap()
    }

    /// Jacobian of `f^{-1}` at `p`.
    pub fn jacobian_inverse<S: Scalar>(&self, p: &Point2<S>) -> Mat2<S> {
        let mut q = p.clone();
        let mut acc: Option<Mat2<S>> = None;
        for f in self.factors.iter() {
            let j = f.jacobian_inverse(&q);
            acc = Some(match acc {
                None => j,
                Some(m) => mat2_mul(&j, &m),
            });
            q = f.apply_inverse(&q);
        }
        acc.unwrap()
    }

    pub fn jacobian_dir(&self, p: &Point2, dir: Direction) -> Mat2 {
        match dir {
            Direction::Forward => self.jacobian(p),
            Direction::Backward => self.jacobian_inverse(p),
        }
    }

    /// Log of the leading-coefficient growth `γ` with `|y'| ≈ e^γ |y|^d` for
    /// large `|y|` (forward), and the mirror quantity for `f^{-1}` in `|x|`.
    pub fn leading_log_growth(&self, dir: Direction) -> f64 {
        // apply order: forward applies factors[m-1] first
        let order: Vec<&ElementaryFactor> = match dir {
            Direction::Forward => self.factors.iter().rev().collect(),
            Direction::Backward => self.factors.iter().collect(),
        };
        let mut gamma = 0.0;
        for f in order {
            let c = match dir {
                Direction::Forward => f.leading(),
                Direction::Backward => f.leading() / f.shear,
            };
            gamma = f.degree() as f64 * gamma + c.abs().ln();
        }
        gamma
    }

    /// Serialize as the plain-text `key=value` map specification.
    pub fn to_spec_string(&self) -> String {
        match self.family {
            Family::Henon { a, b } => format!("family=henon\na={a}\nb={b}\n"),
            Family::Composition => {
                let mut s = format!("family=composition\nfactors={}\n", self.factors.len());
                for (i, f) in self.factors.iter().enumerate() {
                    let c: Vec<String> = f.coeffs.iter().map(|c| c.to_string()).collect();
                    s.push_str(&format!("factor{}.coeffs={}\n", i + 1, c.join(",")));
                    s.push_str(&format!("factor{}.a={}\n", i + 1, f.shear));
                }
                s
            }
        }
    }

    /// Parse a `key=value` map specification. Blank lines, `#` comments and
    /// `[section]` headers are ignored.
    pub fn from_spec_str(text: &str) -> Result<Self, MapError> {
        let kv = parse_key_values(text).map_err(MapError::Spec)?;
        Self::from_key_values(&kv)
    }

    pub fn from_key_values(kv: &[(String, String)]) -> Result<Self, MapError> {
        let get = |k: &str| kv.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        let num = |k: &str| -> Result<f64, MapError> {
            let v = get(k).ok_or_else(|| MapError::Spec(format!("missing key `{k}`")))?;
            v.trim()
                .parse::<f64>()
                .map_err(|_| MapError::Spec(format!("`{k}` is not a number: {v}")))
        };
        match get("family").map(str::trim) {
            Some("henon") => henon(num("a")?, num("b")?),
            Some("composition") => {
                let count = num("factors")? as usize;
                let mut factors = Vec::with_capacity(count);
                for i in 1..=count {
                    let key = format!("factor{i}.coeffs");
                    let raw = get(&key).ok_or_else(|| MapError::Spec(format!("missing key `{key}`")))?;
                    let coeffs = raw
                        .split(',')
                        .map(|c| c.trim().parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| MapError::Spec(format!("bad coefficient list in `{key}`")))?;
                    factors.push(ElementaryFactor::new(coeffs, num(&format!("factor{i}.a"))?)?);
                }
                PolyDiffeo::new(factors)
            }
            Some(other) => Err(MapError::Spec(format!("unknown family `{other}`"))),
            None => Err(MapError::Spec("missing key `family`".into())),
        }
    }
}

impl fmt::Display for PolyDiffeo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Henon { a, b } => write!(f, "henon(a={a}, b={b})"),
            Family::Composition => write!(f, "composition of {} factors, degree {}", self.factors.len(), self.degree),
        }
    }
}

fn epsilon_of(factors: &[ElementaryFactor], degree: usize) -> Epsilon {
    if degree.is_multiple_of(2) {
        return Epsilon::Plus;
    }
    // odd total degree: every factor is odd, and a diagonal conjugacy cannot
    // change the sign of an odd-degree leading coefficient
    let negatives = factors.iter().filter(|f| f.leading() < 0.0).count();
    if negatives % 2 == 0 {
        Epsilon::Plus
    } else {
        Epsilon::Minus
    }
}

/// The quadratic Hénon map in the chart `(x, y) ↦ (y, y² - a - b x)`.
pub fn henon(a: f64, b: f64) -> Result<PolyDiffeo, MapError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(MapError::NonFinite);
    }
    let factor = ElementaryFactor::new(vec![-a, 0.0, 1.0], b)?;
    PolyDiffeo::with_family(vec![factor], Family::Henon { a, b })
}

/// `ε(f)` for a map in normalized form; multiplicative over odd-degree
/// compositions and `+1` for even degree.
pub fn epsilon_sign(f: &PolyDiffeo) -> i8 {
    f.epsilon().sign()
}

/// The involution `L(x, y) = (-y, -x)` relating the working chart to the
/// classical `(a - b y - x², x)` form.
pub fn to_henon_chart(p: &Point2) -> Point2 {
    Point2::new(-p.y, -p.x)
}

/// Split `key=value` lines, dropping comments and section headers.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut section = String::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
        let key = k.trim().to_string();
        let key = if section.is_empty() || section == "map" {
            key
        } else {
            format!("{section}.{key}")
        };
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn cubic(eps: f64, a: f64) -> ElementaryFactor {
        ElementaryFactor::new(vec![0.0, 0.0, 0.0, eps], a).unwrap()
    }

    #[test]
    fn henon_basic_properties() {
        let f = henon(6.0, 0.8).unwrap();
        assert_eq!(f.degree(), 2);
        assert_eq!(f.orientation(), 1);
        assert_eq!(epsilon_sign(&f), 1);
        assert_eq!(f.eval(&Point2::new(0.0, 0.0)), Point2::new(0.0, -6.0));
        assert_eq!(henon(6.0, -0.3).unwrap().orientation(), -1);
    }

    #[test]
    fn henon_rejects_zero_b() {
        assert_eq!(henon(2.0, 0.0), Err(MapError::ZeroShear(0.0)));
    }

    #[test]
    fn eval_by_substitution() {
        let f = henon(6.0, 0.8).unwrap();
        let p = f.eval(&Point2::new(1.0, 1.0));
        assert!((p.x - 1.0).abs() < 1e-15 && (p.y + 5.8).abs() < 1e-15);
        let q = f.eval(&f.eval(&Point2::new(0.0, 0.0)));
        assert_eq!(q, Point2::new(-6.0, 30.0));
    }

    #[test]
    fn inverse_round_trip() {
        let f = henon(6.0, 0.8).unwrap();
        let p = f.eval_inverse(&Point2::new(1.0, -5.8));
        assert!((p.x - 1.0).abs() < 1e-14 && (p.y - 1.0).abs() < 1e-14);
    }

    #[test]
    fn composition_degree_and_inverse_order() {
        let quad = ElementaryFactor::new(vec![-3.0, 0.0, 1.0], 0.5).unwrap();
        let cub = ElementaryFactor::new(vec![0.0, -4.0, 0.0, 1.0], 0.7).unwrap();
        let f = PolyDiffeo::new(vec![cub.clone(), quad.clone()]).unwrap();
        assert_eq!(f.degree(), 6);
        let p = Point2::new(0.3, -0.2);
        let manual = quad.apply_inverse(&cub.apply_inverse(&p));
        assert_eq!(f.eval_inverse(&p), manual);
        let back = f.eval(&f.eval_inverse(&p));
        assert!(back.sup_dist(&p) < 1e-12);
    }

    #[test]
    fn jacobian_of_henon() {
        let f = henon(6.0, 0.8).unwrap();
        let j = f.jacobian(&Point2::new(0.4, 1.5));
        assert_eq!(j, [[0.0, 1.0], [-0.8, 3.0]]);
        assert!((mat2_det(&j) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_eigenvalues_match_quadratic_formula() {
        // fixed points of the working chart solve x² - (1+b)x - a = 0
        let (a, b) = (6.0_f64, 0.8_f64);
        let x = ((1.0 + b) + ((1.0 + b) * (1.0 + b) + 4.0 * a).sqrt()) / 2.0;
        let f = henon(a, b).unwrap();
        let p = Point2::new(x, x);
        assert!(f.eval(&p).sup_dist(&p) < 1e-14);
        // in the classical chart the fixed point is at -x
        assert!((to_henon_chart(&p).x + 3.50960).abs() < 1e-5);
        let j = f.jacobian(&p);
        let tr = j[0][0] + j[1][1];
        let det = mat2_det(&j);
        let disc = (tr * tr - 4.0 * det).sqrt();
        let (lu, ls) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
        assert!((lu - 6.90331).abs() < 1e-5);
        assert!((ls - 0.11589).abs() < 1e-5);
        assert!((lu * ls - b).abs() < 1e-12);
    }

    #[test]
    fn complex_and_real_paths_agree() {
        let f = henon(4.2, -0.3).unwrap();
        let p = Point2::new(0.7, -1.1);
        let q = f.eval(&p);
        let pc = Point2::new(Complex64::new(0.7, 0.0), Complex64::new(-1.1, 0.0));
        let qc = f.eval(&pc);
        assert!((qc.x.re - q.x).abs() < 1e-15 && (qc.y.re - q.y).abs() < 1e-15);
        assert_eq!(qc.y.im, 0.0);
    }

    #[test]
    fn epsilon_examples() {
        let plus = PolyDiffeo::new(vec![cubic(1.0, 0.5)]).unwrap();
        let minus = PolyDiffeo::new(vec![cubic(-1.0, 0.5)]).unwrap();
        assert_eq!(epsilon_sign(&plus), 1);
        assert_eq!(epsilon_sign(&minus), -1);
        assert_eq!(epsilon_sign(&plus.compose(&minus)), -1);
        assert_eq!(epsilon_sign(&minus.compose(&minus)), 1);
        // a diagonal conjugacy does not change an odd leading sign
        let scaled = PolyDiffeo::new(vec![cubic(-4.0, 0.5)]).unwrap();
        assert_eq!(epsilon_sign(&scaled), -1);
    }

    #[test]
    fn escape_is_reported() {
        let f = henon(6.0, 0.8).unwrap();
        let mut p = Point2::new(0.0, 1e3);
        let mut escaped = false;
        for _ in 0..20 {
            match f.eval_checked(&p) {
                Ok(q) => p = q,
                Err(Escaped) => {
                    escaped = true;
                    break;
                }
            }
        }
        assert!(escaped);
    }

    #[test]
    fn factor_validation() {
        assert_eq!(ElementaryFactor::new(vec![1.0, 2.0], 1.0), Err(MapError::LowDegree(1)));
        assert_eq!(ElementaryFactor::new(vec![1.0, 2.0, 0.0], 1.0), Err(MapError::ZeroLeading));
        assert!(PolyDiffeo::new(vec![]).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let f = henon(4.64339843, 0.8).unwrap();
        assert_eq!(PolyDiffeo::from_spec_str(&f.to_spec_string()).unwrap(), f);
        let g = PolyDiffeo::new(vec![cubic(-1.0, 0.3), cubic(1.0, 0.6)]).unwrap();
        assert_eq!(PolyDiffeo::from_spec_str(&g.to_spec_string()).unwrap(), g);
        let text = "# map\n[map]\nfamily = henon\na = 6.0\nb = 0.8\n";
        assert_eq!(PolyDiffeo::from_spec_str(text).unwrap(), henon(6.0, 0.8).unwrap());
        assert!(PolyDiffeo::from_spec_str("family=henon\na=1\n").is_err());
    }
}
