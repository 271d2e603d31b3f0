//! Periodic points by symbolic seeding and homotopy continuation.
//!
//! A point of period `n` for `f = f_1∘…∘f_m` is encoded by the scalar
//! sequence `Y_k` (`k` modulo `N = n·m`) of second coordinates visited by the
//! individual factors, which satisfies
//!
//! ```text
//! E_k(Y) = p_{j(k)}(Y_k) − Y_{k+1} − a_{j(k)} Y_{k−1} = 0.
//! ```
//!
//! The continuation follows `H_k(Y, t) = p_{j(k)}(Y_k) − t (Y_{k+1} + a_{j(k)} Y_{k−1})`
//! from `t = 0`, where every choice of roots of the `p_j` is a solution, to
//! `t = 1`. For the Hénon factor the substitution `Y = u/t` turns `H(·, t)`
//! into the orbit equation of the same map with `a/t²` in place of `a`, so the
//! path runs through the horseshoe regime at large `a`.

use std::fmt;
use std::fmt::Write as _;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::map::{mat2_mul, Mat2, Point2, PolyDiffeo, IDENTITY};
use crate::scalar::{horner, Scalar};

pub const DEDUP_TOL: f64 = 1e-8;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const UNIT_MODULUS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PeriodicError {
    #[error("continuation failed for code {0}")]
    NonConvergence(SymbolCode),
    #[error("codes {0} and {1} converged to the same point")]
    Collision(SymbolCode, SymbolCode),
    #[error("code {0} continued to a non-real orbit (max |Im| = {1:e})")]
    ComplexOrbit(SymbolCode, f64),
    #[error("orbit {0} has complex multipliers")]
    ComplexMultipliers(SymbolCode),
    #[error("orbit {0} has a multiplier of modulus 1")]
    UnitModulus(SymbolCode),
    #[error("period must be at least 1")]
    ZeroPeriod,
}

/// One root index per iterate of `f`; for degree 2 the indices are shown as
/// `-`/`+` (negative/positive root of the quadratic).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolCode {
    pub symbols: Vec<u16>,
    pub alphabet: u16,
}

impl SymbolCode {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn rotate(&self, k: usize) -> SymbolCode {
        let mut s = self.symbols.clone();
        let len = s.len().max(1);
        s.rotate_left(k % len);
        SymbolCode {
            symbols: s,
            alphabet: self.alphabet,
        }
    }

    /// Lexicographically smallest cyclic rotation; identifies the orbit.
    pub fn orbit_representative(&self) -> SymbolCode {
        (0..self.len()).map(|k| self.rotate(k)).min().unwrap_or_else(|| self.clone())
    }

    pub fn parse(text: &str, alphabet: u16) -> Option<SymbolCode> {
        let symbols = text
            .chars()
            .map(|c| match (alphabet, c) {
                (2, '-') => Some(0),
                (2, '+') => Some(1),
                (_, c) => c.to_digit(36).map(|v| v as u16).filter(|&v| v < alphabet),
            })
            .collect::<Option<Vec<u16>>>()?;
        if symbols.is_empty() {
            return None;
        }
        Some(SymbolCode { symbols, alphabet })
    }
}

impl fmt::Display for SymbolCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.symbols {
            let c = if self.alphabet == 2 {
                if s == 0 {
                    '-'
                } else {
                    '+'
                }
            } else {
                std::char::from_digit(s as u32, 36).unwrap_or('?')
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlipClass {
    NonFlipping,
    Flipping,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub code: SymbolCode,
    pub point: Point2,
    pub period_n: usize,
    pub least_period: usize,
    /// `orbit[k] = f^k(point)` for `k < least_period`.
    pub orbit: Vec<Point2>,
    /// Multipliers of `Df^{least_period}(point)`.
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub eigvec_u: [f64; 2],
    pub eigvec_s: [f64; 2],
    pub flipping: bool,
    /// Largest one-step closure defect `|f(orbit[k]) − orbit[k+1]|`.
    pub residual: f64,
}

impl PeriodicPoint {
    pub fn flip_class(&self) -> FlipClass {
        flip_class(self.lambda_u, self.lambda_s)
    }

    pub fn is_saddle(&self) -> bool {
        self.lambda_s.abs() < 1.0 && self.lambda_u.abs() > 1.0
    }
}

pub fn flip_class(lu: f64, ls: f64) -> FlipClass {
    match (lu > 0.0, ls > 0.0) {
        (true, true) => FlipClass::NonFlipping,
        (false, false) => FlipClass::Flipping,
        _ => FlipClass::Mixed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierProduct {
    pub lambda_u_n: f64,
    pub lambda_s_n: f64,
    pub eigvec_u: [f64; 2],
    pub eigvec_s: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Largest continuation step in `t`.
    pub steps: usize,
    pub min_step: f64,
    pub newton_iters: usize,
    pub complex_fallback: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            steps: 32,
            min_step: 1e-7,
            newton_iters: 12,
            complex_fallback: true,
        }
    }
}

/// Arithmetic shared by the real and complex continuation.
trait Field: ComplexField<RealField = f64> + Scalar + Copy {}

impl Field for f64 {}

impl Field for Complex64 {}

/// The cyclic recurrence for period `n` of a given map.
struct Recurrence<'a> {
    f: &'a PolyDiffeo,
    n: usize,
    /// factor index used at position `k`
    factor_at: Vec<usize>,
    derivs: Vec<Vec<f64>>,
}

impl<'a> Recurrence<'a> {
    fn new(f: &'a PolyDiffeo, n: usize) -> Self {
        let m = f.factors().len();
        let factor_at = (0..n * m).map(|k| m - 1 - k % m).collect();
        let derivs = f
            .factors()
            .iter()
            .map(|fac| fac.coeffs().iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect())
            .collect();
        Recurrence { f, n, factor_at, derivs }
    }

    fn len(&self) -> usize {
        self.factor_at.len()
    }

    fn shear(&self, k: usize) -> f64 {
        self.f.factors()[self.factor_at[k]].shear()
    }

    /// `H(Y, t)` and `∂H/∂t`.
    fn residual<T: Field>(&self, y: &DVector<T>, t: T) -> (DVector<T>, DVector<T>) {
        let n = self.len();
        let mut h = DVector::from_element(n, T::zero());
        let mut ht = DVector::from_element(n, T::zero());
        for k in 0..n {
            let next = y[(k + 1) % n];
            let prev = y[(k + n - 1) % n];
            let coupling = next + prev.scale(self.shear(k));
            let p = horner(self.f.factors()[self.factor_at[k]].coeffs(), &y[k]);
            h[k] = p - t * coupling;
            ht[k] = -coupling;
        }
        (h, ht)
    }

    fn jacobian<T: Field>(&self, y: &DVector<T>, t: T) -> DMatrix<T> {
        let n = self.len();
        let mut j = DMatrix::from_element(n, n, T::zero());
        for k in 0..n {
            let dp = horner(&self.derivs[self.factor_at[k]], &y[k]);
            j[(k, k)] += dp;
            j[(k, (k + 1) % n)] -= t;
            j[(k, (k + n - 1) % n)] -= t.scale(self.shear(k));
        }
        j
    }

    /// One continuation step from `(y, t0)` to `t1` (Euler predictor then
    /// Newton corrector). `None` when the corrector does not contract.
    fn step<T: Field>(&self, y: &DVector<T>, t0: T, t1: T, iters: usize) -> Option<DVector<T>> {
        let (_, ht) = self.residual(y, t0);
        let lu = self.jacobian(y, t0).lu();
        let dy = lu.solve(&ht)?;
        let mut z = y - dy * (t1 - t0);
        let scale = 1.0 + y.iter().map(|v| v.magnitude()).fold(0.0, f64::max);
        let mut last = f64::INFINITY;
        for it in 0..iters {
            let (h, _) = self.residual(&z, t1);
            let delta = self.jacobian(&z, t1).lu().solve(&h)?;
            let size = delta.iter().map(|v| v.magnitude()).fold(0.0, f64::max);
            if !size.is_finite() || (it == 0 && size > 0.1 * scale) || (it > 0 && size > 0.5 * last && size > 1e-13 * scale) {
                return None;
            }
            z -= delta;
            if size <= 1e-14 * scale {
                return Some(z);
            }
            last = size;
        }
        (last <= 1e-11 * scale).then_some(z)
    }

    fn continue_path<T: Field>(&self, start: DVector<T>, path: impl Fn(f64) -> T, opts: &SolverOptions) -> Option<DVector<T>> {
        let h_max = 1.0 / opts.steps as f64;
        let mut s = 0.0;
        let mut h = h_max;
        let mut y = start;
        let mut good = 0;
        while s < 1.0 {
            let s1 = (s + h).min(1.0);
            match self.step(&y, path(s), path(s1), opts.newton_iters) {
                Some(z) => {
                    y = z;
                    s = s1;
                    good += 1;
                    if good >= 3 && h < h_max {
                        h = (h * 2.0).min(h_max);
                        good = 0;
                    }
                }
                None => {
                    h *= 0.5;
                    good = 0;
                    if h < opts.min_step {
                        return None;
                    }
                }
            }
        }
        Some(y)
    }

    /// Real Newton polish at `t = 1`.
    fn polish(&self, mut y: DVector<f64>) -> DVector<f64> {
        for _ in 0..8 {
            let (h, _) = self.residual(&y, 1.0);
            let Some(delta) = self.jacobian(&y, 1.0).lu().solve(&h) else {
                break;
            };
            y -= &delta;
            if delta.amax() < 1e-15 * (1.0 + y.amax()) {
                break;
            }
        }
        y
    }

    fn max_residual(&self, y: &DVector<f64>) -> f64 {
        self.residual(y, 1.0).0.amax()
    }
}

/// Roots of `c[0] + c[1] y + … + c[d] y^d`, sorted by real then imaginary
/// part. Nearly real roots are snapped to the real axis.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let d = coeffs.len() - 1;
    let lead = coeffs[d];
    let mut comp = DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        comp[(i, d - 1)] = -coeffs[i] / lead;
    }
    let mut roots: Vec<Complex64> = comp.complex_eigenvalues().iter().copied().collect();
    let deriv: Vec<f64> = coeffs.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let dp = horner(&deriv, r);
            if dp.norm() == 0.0 {
                break;
            }
            *r -= horner(coeffs, r) / dp;
        }
        if r.im.abs() < 1e-12 * (1.0 + r.re.abs()) {
            r.im = 0.0;
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Outcome of the per-code solve before deduplication.
#[derive(Debug, Clone)]
pub struct CodeOutcome {
    pub code: SymbolCode,
    pub result: Result<DVector<f64>, PeriodicError>,
}

fn all_codes(alphabet: u16, n: usize) -> Vec<SymbolCode> {
    let total = (alphabet as usize).pow(n as u32);
    (0..total)
        .map(|mut v| {
            let mut symbols = vec![0u16; n];
            for s in symbols.iter_mut().rev() {
                *s = (v % alphabet as usize) as u16;
                v /= alphabet as usize;
            }
            SymbolCode { symbols, alphabet }
        })
        .collect()
}

/// Solve the recurrence for every symbol code of length `n`.
pub fn solve_codes(f: &PolyDiffeo, n: usize, opts: &SolverOptions) -> Result<Vec<CodeOutcome>, PeriodicError> {
    if n == 0 {
        return Err(PeriodicError::ZeroPeriod);
    }
    let rec = Recurrence::new(f, n);
    let roots: Vec<Vec<Complex64>> = f.factors().iter().map(|fac| poly_roots(fac.coeffs())).collect();
    let alphabet = f.degree() as u16;
    let m = f.factors().len();
    let codes = all_codes(alphabet, n);
    let outcomes = codes
        .into_par_iter()
        .map(|code| {
            // expand each symbol into one root index per factor
            let mut start = Vec::with_capacity(n * m);
            for &s in &code.symbols {
                let mut v = s as usize;
                for i in 0..m {
                    let j = m - 1 - i;
                    let dj = roots[j].len();
                    start.push(roots[j][v % dj]);
                    v /= dj;
                }
            }
            let result = solve_one(&rec, &start, opts).map_err(|e| match e {
                SolveFailure::Diverged => PeriodicError::NonConvergence(code.clone()),
                SolveFailure::Complex(im) => PeriodicError::ComplexOrbit(code.clone(), im),
            });
            CodeOutcome { code, result }
        })
        .collect();
    Ok(outcomes)
}

enum SolveFailure {
    Diverged,
    Complex(f64),
}

fn solve_one(rec: &Recurrence<'_>, start: &[Complex64], opts: &SolverOptions) -> Result<DVector<f64>, SolveFailure> {
    let all_real = start.iter().all(|z| z.im == 0.0);
    if all_real {
        let y0 = DVector::from_iterator(start.len(), start.iter().map(|z| z.re));
        if let Some(y) = rec.continue_path(y0, |s| s, opts) {
            return Ok(rec.polish(y));
        }
    }
    if !opts.complex_fallback {
        return Err(SolveFailure::Diverged);
    }
    // detour through complex t to avoid real fold points
    let y0 = DVector::from_iterator(start.len(), start.iter().copied());
    let path = |s: f64| Complex64::new(s, 0.37 * s * (1.0 - s));
    let y = rec.continue_path(y0, path, opts).ok_or(SolveFailure::Diverged)?;
    let im = y.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let scale = 1.0 + y.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if im > 1e-8 * scale {
        return Err(SolveFailure::Complex(im));
    }
    let yr = rec.polish(y.map(|z| z.re));
    Ok(yr)
}

/// Real periodic points of `f^n` for every code, deduplicated and sorted by
/// `(least_period, orbit representative, code)`.
pub fn find_fixed_points(f: &PolyDiffeo, n: usize, opts: &SolverOptions) -> Result<Vec<PeriodicPoint>, PeriodicError> {
    let outcomes = solve_codes(f, n, opts)?;
    let rec = Recurrence::new(f, n);
    let mut points = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let y = o.result?;
        points.push(build_point(f, &rec, o.code, &y)?);
    }
    dedup_check(&points)?;
    sort_points(&mut points);
    Ok(points)
}

/// Real points only; failures are returned alongside instead of aborting.
pub fn find_fixed_points_lenient(f: &PolyDiffeo, n: usize, opts: &SolverOptions) -> Result<(Vec<PeriodicPoint>, Vec<PeriodicError>), PeriodicError> {
    let outcomes = solve_codes(f, n, opts)?;
    let rec = Recurrence::new(f, n);
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o.result.and_then(|y| build_point(f, &rec, o.code, &y)) {
            Ok(p) => points.push(p),
            Err(e) => failures.push(e),
        }
    }
    sort_points(&mut points);
    // merge coincident points, keeping the first code
    let mut distinct: Vec<PeriodicPoint> = Vec::new();
    for p in points {
        if let Some(q) = distinct.iter().find(|q| q.point.sup_dist(&p.point) < DEDUP_TOL) {
            failures.push(PeriodicError::Collision(q.code.clone(), p.code.clone()));
        } else {
            distinct.push(p);
        }
    }
    Ok((distinct, failures))
}

fn sort_points(points: &mut [PeriodicPoint]) {
    points.sort_by(|a, b| {
        (a.least_period, a.code.orbit_representative(), &a.code).cmp(&(b.least_period, b.code.orbit_representative(), &b.code))
    });
}

fn dedup_check(points: &[PeriodicPoint]) -> Result<(), PeriodicError> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| points[i].point.x.total_cmp(&points[j].point.x));
    for w in 0..idx.len() {
        for v in w + 1..idx.len() {
            let (p, q) = (&points[idx[w]], &points[idx[v]]);
            if q.point.x - p.point.x >= DEDUP_TOL {
                break;
            }
            if p.point.sup_dist(&q.point) < DEDUP_TOL {
                let (a, b) = if p.code < q.code { (p, q) } else { (q, p) };
                return Err(PeriodicError::Collision(a.code.clone(), b.code.clone()));
            }
        }
    }
    Ok(())
}

fn build_point(f: &PolyDiffeo, rec: &Recurrence<'_>, code: SymbolCode, y: &DVector<f64>) -> Result<PeriodicPoint, PeriodicError> {
    let n = rec.n;
    let m = f.factors().len();
    let len = y.len();
    let residual = rec.max_residual(y);
    if !(residual < RESIDUAL_TOL) {
        return Err(PeriodicError::NonConvergence(code));
    }
    let at = |k: usize| Point2::new(y[(k + len - 1) % len], y[k % len]);
    let least_period = (1..=n)
        .filter(|l| n.is_multiple_of(*l))
        .find(|&l| (0..len).all(|k| (y[k] - y[(k + l * m) % len]).abs() < DEDUP_TOL))
        .unwrap_or(n);
    let orbit: Vec<Point2> = (0..least_period).map(|k| at(k * m)).collect();
    let mut jac: Mat2 = IDENTITY;
    for k in 0..least_period * m {
        let fac = &f.factors()[rec.factor_at[k]];
        let step: Mat2 = [[0.0, 1.0], [-fac.shear(), fac.poly_deriv(&y[k])]];
        jac = mat2_mul(&step, &jac);
    }
    let mp = eigen_split(&jac).ok_or_else(|| PeriodicError::ComplexMultipliers(code.clone()))?;
    if (mp.lambda_u_n.abs() - 1.0).abs() < UNIT_MODULUS_TOL || (mp.lambda_s_n.abs() - 1.0).abs() < UNIT_MODULUS_TOL {
        return Err(PeriodicError::UnitModulus(code));
    }
    Ok(PeriodicPoint {
        code,
        point: orbit[0],
        period_n: n,
        least_period,
        orbit,
        lambda_u: mp.lambda_u_n,
        lambda_s: mp.lambda_s_n,
        eigvec_u: mp.eigvec_u,
        eigvec_s: mp.eigvec_s,
        flipping: mp.lambda_u_n < 0.0 && mp.lambda_s_n < 0.0,
        residual,
    })
}

/// Unit eigenvector of `m` for the real eigenvalue `lambda`, with positive
/// first component (ties broken on the second).
pub fn eigenvector(m: &Mat2, lambda: f64) -> [f64; 2] {
    let c1 = [m[0][1], lambda - m[0][0]];
    let c2 = [lambda - m[1][1], m[1][0]];
    let n1 = c1[0].hypot(c1[1]);
    let n2 = c2[0].hypot(c2[1]);
    let (v, n) = if n1 >= n2 { (c1, n1) } else { (c2, n2) };
    let mut v = [v[0] / n, v[1] / n];
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    v
}

/// Split the real spectrum of a 2×2 matrix into expanding/contracting parts.
pub fn eigen_split(m: &Mat2) -> Option<MultiplierProduct> {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        return None;
    }
    let lu = 0.5 * (tr + tr.signum() * disc.sqrt());
    if lu == 0.0 {
        return None;
    }
    let ls = det / lu;
    Some(MultiplierProduct {
        lambda_u_n: lu,
        lambda_s_n: ls,
        eigvec_u: eigenvector(m, lu),
        eigvec_s: eigenvector(m, ls),
    })
}

/// Multipliers of `Df^{least_period}` recomputed along the stored orbit.
pub fn multipliers(f: &PolyDiffeo, p: &PeriodicPoint) -> Result<MultiplierProduct, PeriodicError> {
    let mut jac = IDENTITY;
    for q in &p.orbit {
        jac = mat2_mul(&f.jacobian(q), &jac);
    }
    let mp = eigen_split(&jac).ok_or_else(|| PeriodicError::ComplexMultipliers(p.code.clone()))?;
    if (mp.lambda_u_n.abs() - 1.0).abs() < UNIT_MODULUS_TOL || (mp.lambda_s_n.abs() - 1.0).abs() < UNIT_MODULUS_TOL {
        return Err(PeriodicError::UnitModulus(p.code.clone()));
    }
    Ok(mp)
}

/// Margins of the multiplier bounds for one orbit, as ratios `> 1` when the
/// bound holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub code: String,
    pub least_period: usize,
    pub lambda_u: f64,
    pub lambda_s: f64,
    /// `|λᵘ| / d^n`
    pub margin_u: f64,
    /// `d^{-n} / |λˢ|`
    pub margin_s: f64,
    /// Both `|λᵘ| > d^{2n}` and `|λˢ| < d^{-2n}`.
    pub strong: bool,
}

impl BoundEntry {
    pub fn holds(&self) -> bool {
        self.margin_u > 1.0 && self.margin_s > 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub entries: Vec<BoundEntry>,
}

impl BoundsReport {
    pub fn violations(&self) -> impl Iterator<Item = &BoundEntry> {
        self.entries.iter().filter(|e| !e.holds())
    }

    pub fn all_hold(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn min_margin(&self) -> f64 {
        self.entries.iter().map(|e| e.margin_u.min(e.margin_s)).fold(f64::INFINITY, f64::min)
    }
}

/// One entry per orbit.
pub fn check_bounds(points: &[PeriodicPoint], d: usize) -> BoundsReport {
    let entries = distinct_orbits(points)
        .into_iter()
        .map(|p| {
            let dn = (d as f64).powi(p.least_period as i32);
            BoundEntry {
                code: p.code.to_string(),
                least_period: p.least_period,
                lambda_u: p.lambda_u,
                lambda_s: p.lambda_s,
                margin_u: p.lambda_u.abs() / dn,
                margin_s: 1.0 / (dn * p.lambda_s.abs()),
                strong: p.lambda_u.abs() > dn * dn && p.lambda_s.abs() * dn * dn < 1.0,
            }
        })
        .collect();
    BoundsReport { entries }
}

/// Orbit identity that is stable across census levels: the least period and
/// the smallest rotation of the first `least_period` symbols.
pub fn orbit_key(p: &PeriodicPoint) -> (usize, Vec<u16>) {
    let base = SymbolCode {
        symbols: p.code.symbols[..p.least_period].to_vec(),
        alphabet: p.code.alphabet,
    };
    (p.least_period, base.orbit_representative().symbols)
}

/// One representative point per orbit, in input order.
pub fn distinct_orbits(points: &[PeriodicPoint]) -> Vec<&PeriodicPoint> {
    let mut seen = std::collections::BTreeSet::new();
    points.iter().filter(|p| seen.insert(orbit_key(p))).collect()
}

pub fn flipping_flags(points: &[PeriodicPoint]) -> Vec<(SymbolCode, FlipClass)> {
    points.iter().map(|p| (p.code.clone(), p.flip_class())).collect()
}

/// The saddle fixed point with `λᵘ > 0` (`plus`) or `λᵘ < 0` (`minus`).
pub fn select_fixed_point(f: &PolyDiffeo, plus: bool) -> Result<PeriodicPoint, PeriodicError> {
    let pts = find_fixed_points(f, 1, &SolverOptions::default())?;
    pts.into_iter()
        .find(|p| (p.lambda_u > 0.0) == plus)
        .ok_or(PeriodicError::NonConvergence(SymbolCode {
            symbols: vec![u16::from(plus)],
            alphabet: f.degree() as u16,
        }))
}

/// The periodic point with the given code at period `code.len()`.
pub fn select_by_code(f: &PolyDiffeo, code: &SymbolCode) -> Result<PeriodicPoint, PeriodicError> {
    let pts = find_fixed_points(f, code.len(), &SolverOptions::default())?;
    pts.into_iter().find(|p| &p.code == code).ok_or_else(|| PeriodicError::NonConvergence(code.clone()))
}

pub fn orbits_csv(points: &[PeriodicPoint]) -> String {
    let mut s = String::from("code,n,least_period,x,y,lambda_u,lambda_s,flipping,residual\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:e}",
            p.code, p.period_n, p.least_period, p.point.x, p.point.y, p.lambda_u, p.lambda_s, p.flipping, p.residual
        );
    }
    s
}
