//! Stable and unstable manifold parametrizations at periodic saddles.
//!
//! A chart solves `g(ψ(ζ)) = ψ(μζ)` with `g = f^L` and `μ = λᵘ` for the
//! unstable kind, and `g = f^{−L}`, `μ = 1/λˢ` for the stable kind, so both
//! kinds share the expanding code path. The power series is valid on a disk of
//! radius `rho`; outside it `ψ(ζ) = g^k(ψ(ζ/μ^k))`.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::greens::{GreenSolver, Rect, R_BIG};
use crate::map::{mat2_mul, Direction, Mat2, Point2, PolyDiffeo, IDENTITY};
use crate::periodic::{eigenvector, find_fixed_points, PeriodicPoint, SolverOptions};
use crate::scalar::{Scalar, Series};

pub const DEFAULT_ORDER: usize = 30;
pub const SERIES_TOL: f64 = 1e-12;
pub const MIN_RADIUS: f64 = 1e-6;
/// Distance from the saddle below which one-sidedness is not examined.
pub const SADDLE_EXCLUSION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ManifoldError {
    #[error("resonant multiplier at order {0}")]
    Resonance(usize),
    #[error("validated chart radius {0:e} is below the minimum")]
    SmallRadius(f64),
    #[error("adaptive tracing could not resolve the curve near zeta = {0}")]
    StepCollapse(f64),
    #[error("point escaped while evaluating the chart at zeta = {0}")]
    Escaped(f64),
    #[error("saddle has no real splitting (|lambda_s| < 1 < |lambda_u| fails)")]
    NotSaddle,
    #[error("normalization failed: {0}")]
    Normalization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ManifoldKind {
    Stable,
    Unstable,
}

impl ManifoldKind {
    pub fn label(self) -> &'static str {
        match self {
            ManifoldKind::Stable => "stable",
            ManifoldKind::Unstable => "unstable",
        }
    }

    /// Direction in which the chart map expands along the manifold.
    pub fn direction(self) -> Direction {
        match self {
            ManifoldKind::Unstable => Direction::Forward,
            ManifoldKind::Stable => Direction::Backward,
        }
    }
}

/// Power-series parametrization of a real stable or unstable manifold.
#[derive(Debug, Clone)]
pub struct ManifoldChart {
    pub saddle: PeriodicPoint,
    pub kind: ManifoldKind,
    /// Multiplier of `Df^L` along the manifold (`λᵘ` or `λˢ`).
    pub lambda: f64,
    /// Expansion factor of the chart map (`λᵘ` or `1/λˢ`).
    pub mu: f64,
    /// `a_0 = p, a_1, …, a_M` in the current `ζ` units.
    pub coeffs: Vec<[f64; 2]>,
    pub rho: f64,
    /// Factor relating the current `ζ` to the unit-eigenvector chart:
    /// `ψ(ζ) = ψ_unit(scale · ζ)`.
    pub scale: f64,
    /// Functional-equation residual on `|ζ| = rho`.
    pub residual: f64,
    period_map: PolyDiffeo,
}

fn jacobian_along(f: &PolyDiffeo, p: &Point2, steps: usize, dir: Direction) -> Mat2 {
    let mut j = IDENTITY;
    let mut q = *p;
    for _ in 0..steps {
        j = mat2_mul(&f.jacobian_dir(&q, dir), &j);
        q = f.step(&q, dir);
    }
    j
}

/// Solve `g ∘ ψ = ψ(μ ·)` order by order.
pub fn local_chart(f: &PolyDiffeo, p: &PeriodicPoint, kind: ManifoldKind, order: usize) -> Result<ManifoldChart, ManifoldError> {
    if !p.is_saddle() {
        return Err(ManifoldError::NotSaddle);
    }
    let period_map = f.power(p.least_period);
    let dir = kind.direction();
    let (lambda, other) = match kind {
        ManifoldKind::Unstable => (p.lambda_u, p.lambda_s),
        ManifoldKind::Stable => (p.lambda_s, p.lambda_u),
    };
    let mu = match kind {
        ManifoldKind::Unstable => lambda,
        ManifoldKind::Stable => 1.0 / lambda,
    };
    let dg = jacobian_along(&period_map, &p.point, 1, dir);
    let mut coeffs = vec![[p.point.x, p.point.y], eigenvector(&dg, mu)];
    for k in 2..=order {
        let mu_k = mu.powi(k as i32);
        let other_k = match kind {
            ManifoldKind::Unstable => other,
            ManifoldKind::Stable => 1.0 / other,
        };
        if (mu_k - other_k).abs() < 1e-10 * mu_k.abs().max(1.0) {
            return Err(ManifoldError::Resonance(k));
        }
        // order-k coefficient of g(ψ_{<k}(t))
        let xs = Series::new(coeffs.iter().map(|c| c[0]).collect(), k);
        let ys = Series::new(coeffs.iter().map(|c| c[1]).collect(), k);
        let img = period_map.step(&Point2::new(xs, ys), dir);
        let r = [img.x.coeff(k), img.y.coeff(k)];
        // (Dg − μ^k) a_k = −r
        let m = [[dg[0][0] - mu_k, dg[0][1]], [dg[1][0], dg[1][1] - mu_k]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-300 {
            return Err(ManifoldError::Resonance(k));
        }
        let ak = [(-r[0] * m[1][1] + r[1] * m[0][1]) / det, (-r[1] * m[0][0] + r[0] * m[1][0]) / det];
        coeffs.push(ak);
    }
    let mut chart = ManifoldChart {
        saddle: p.clone(),
        kind,
        lambda,
        mu,
        coeffs,
        rho: 1.0,
        scale: 1.0,
        residual: f64::INFINITY,
        period_map,
    };
    chart.validate_radius()?;
    Ok(chart)
}

impl ManifoldChart {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn saddle_point(&self) -> Point2 {
        self.saddle.point
    }

    /// The map `g` (`f^L` or its inverse) with `g∘ψ = ψ(μ·)`.
    pub fn period_map(&self) -> &PolyDiffeo {
        &self.period_map
    }

    fn series_eval<S: Scalar>(&self, z: &S) -> Point2<S> {
        let mut x = S::constant(self.coeffs[self.order()][0]);
        let mut y = S::constant(self.coeffs[self.order()][1]);
        for c in self.coeffs[..self.order()].iter().rev() {
            x = (x * z.clone()).add_const(c[0]);
            y = (y * z.clone()).add_const(c[1]);
        }
        Point2::new(x, y)
    }

    fn residual_on_circle(&self, r: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..100 {
            let th = std::f64::consts::TAU * i as f64 / 100.0;
            let z = Complex64::from_polar(r, th);
            let lhs = self.period_map.step(&self.series_eval(&(z / self.mu)), self.kind.direction());
            let rhs = self.series_eval(&z);
            let d = ((lhs.x - rhs.x).norm()).max((lhs.y - rhs.y).norm());
            worst = worst.max(if d.is_finite() { d } else { f64::INFINITY });
        }
        worst
    }

    /// Shrink `rho` until the residual on `|ζ| = rho` is below the series
    /// tolerance.
    fn validate_radius(&mut self) -> Result<(), ManifoldError> {
        let mut r = self.rho;
        loop {
            let res = self.residual_on_circle(r);
            if res < SERIES_TOL {
                self.rho = r;
                self.residual = res;
                return Ok(());
            }
            r *= 0.7;
            if r < MIN_RADIUS {
                return Err(ManifoldError::SmallRadius(r));
            }
        }
    }

    /// The same curve in units `ζ' = ζ / s`.
    pub fn rescaled(&self, s: f64) -> ManifoldChart {
        let mut c = self.clone();
        let mut pw = 1.0;
        for a in c.coeffs.iter_mut() {
            a[0] *= pw;
            a[1] *= pw;
            pw *= s;
        }
        c.rho = self.rho / s;
        c.scale = self.scale * s;
        c
    }

    /// Number of chart-map applications needed so that `ζ/μ^k` is inside the
    /// series disk.
    pub fn depth(&self, zeta_abs: f64) -> usize {
        if zeta_abs <= self.rho {
            return 0;
        }
        let k = ((zeta_abs / self.rho).ln() / self.mu.abs().ln()).ceil() as usize;
        // guard against rounding at the boundary
        if zeta_abs / self.mu.abs().powi(k as i32) > self.rho {
            k + 1
        } else {
            k
        }
    }

    fn iterate<S: Scalar>(&self, mut q: Point2<S>, k: usize, zeta: f64) -> Result<Point2<S>, ManifoldError> {
        for _ in 0..k {
            q = self.period_map.step_checked(&q, self.kind.direction()).map_err(|_| ManifoldError::Escaped(zeta))?;
        }
        Ok(q)
    }

    pub fn eval(&self, zeta: f64) -> Result<Point2, ManifoldError> {
        self.eval_at_depth(zeta, self.depth(zeta.abs()))
    }

    /// `g^k(ψ_M(ζ/μ^k))`; any `k` at least `depth(|ζ|)` gives the same point
    /// up to rounding.
    pub fn eval_at_depth(&self, zeta: f64, k: usize) -> Result<Point2, ManifoldError> {
        let w = zeta / self.mu.powi(k as i32);
        self.iterate(self.series_eval(&w), k, zeta)
    }

    pub fn eval_complex(&self, zeta: Complex64) -> Result<Point2<Complex64>, ManifoldError> {
        let k = self.depth(zeta.norm());
        let w = zeta / self.mu.powi(k as i32);
        self.iterate(self.series_eval(&w), k, zeta.re)
    }

    /// Taylor coefficients `[ψ, ψ′, ψ″/2, …]` of `ψ` at `ζ`, up to `order`.
    pub fn jet(&self, zeta: f64, order: usize) -> Result<Vec<[f64; 2]>, ManifoldError> {
        let k = self.depth(zeta.abs());
        let muk = self.mu.powi(k as i32);
        let w = Series::variable(zeta / muk, 1.0 / muk, order);
        let q = self.iterate(self.series_eval(&w), k, zeta)?;
        Ok((0..=order).map(|i| [q.x.coeff(i), q.y.coeff(i)]).collect())
    }

    /// `(ψ(ζ), ψ′(ζ))`.
    pub fn eval_with_derivative(&self, zeta: f64) -> Result<(Point2, [f64; 2]), ManifoldError> {
        let j = self.jet(zeta, 1)?;
        Ok((Point2::new(j[0][0], j[0][1]), j[1]))
    }

    /// `‖g(ψ(ζ/μ)) − ψ(ζ)‖`, each side evaluated at its own depth.
    pub fn functional_residual(&self, zeta: f64) -> Result<f64, ManifoldError> {
        let inner = self.eval(zeta / self.mu)?;
        let lhs = self.period_map.step(&inner, self.kind.direction());
        let rhs = self.eval(zeta)?;
        Ok(lhs.dist(&rhs))
    }

    /// Positive `ζ` with `|ψ(σζ) − p| = dist` on the branch `σ`, scanning
    /// outward and then bisecting.
    pub fn radius_for_distance(&self, sign: f64, dist: f64) -> Result<f64, ManifoldError> {
        let p = self.saddle.point;
        let a1 = self.coeffs[1][0].hypot(self.coeffs[1][1]);
        let mut hi = dist / a1;
        let mut guard = 0;
        while self.eval(sign * hi)?.dist(&p) < dist {
            hi *= 1.5;
            guard += 1;
            if guard > 200 {
                return Err(ManifoldError::Escaped(hi));
            }
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.eval(sign * mid)?.dist(&p) < dist {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    fn green_other(&self) -> Direction {
        // G⁺ for unstable charts, G⁻ for stable charts
        self.kind.direction()
    }
}

fn circle_max(chart: &ManifoldChart, solver: &GreenSolver, r: f64) -> f64 {
    let dir = chart.green_other();
    let eval = |th: f64| -> f64 {
        match chart.eval_complex(Complex64::from_polar(r, th)) {
            Ok(q) => solver.evaluate(&q, dir).map(|g| g.value).unwrap_or(0.0),
            // escaped during chart evaluation: far larger than any sampled value
            Err(_) => f64::INFINITY,
        }
    };
    let n = 256;
    let vals: Vec<f64> = (0..=n).into_par_iter().map(|i| eval(std::f64::consts::PI * i as f64 / n as f64)).collect();
    let mut idx: Vec<usize> = (0..=n).collect();
    idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut best = vals[idx[0]];
    let h = std::f64::consts::PI / n as f64;
    for &i in idx.iter().take(3) {
        // golden-section refinement around the sample
        let (mut a, mut b) = (i as f64 * h - h, i as f64 * h + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (eval(c), eval(d));
        for _ in 0..40 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = eval(d);
            }
        }
        best = best.max(fc).max(fd);
    }
    best
}

/// `max_{|ζ|=r} G∘ψ(ζ)` for the Green's function matching the chart kind
/// (`G⁺` on unstable charts, `G⁻` on stable charts).
pub fn max_green_on_circle(chart: &ManifoldChart, solver: &GreenSolver, r: f64) -> f64 {
    circle_max(chart, solver, r)
}

/// Rescale so that `max_{|ζ|=1} G∘ψ = 1`.
pub fn normalize(chart: &ManifoldChart, solver: &GreenSolver) -> Result<ManifoldChart, ManifoldError> {
    let mu = chart.mu.abs();
    let mut hi = chart.rho;
    let mut h = circle_max(chart, solver, hi);
    let mut guard = 0;
    while h < 1.0 {
        hi *= mu;
        h = circle_max(chart, solver, hi);
        guard += 1;
        if guard > 200 || h == 0.0 && guard > 60 {
            return Err(ManifoldError::Normalization("Green's function vanishes on the chart".into()));
        }
    }
    let mut lo = hi / mu;
    while circle_max(chart, solver, lo) >= 1.0 {
        hi = lo;
        lo /= mu;
        guard += 1;
        if guard > 400 {
            return Err(ManifoldError::Normalization("no sign change".into()));
        }
    }
    for _ in 0..60 {
        let mid = (0.5 * (lo.ln() + hi.ln())).exp();
        if circle_max(chart, solver, mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
    }
    let alpha = (0.5 * (lo.ln() + hi.ln())).exp();
    Ok(chart.rescaled(alpha))
}

/// Effective tolerance for "`G = 0`".
///
/// A point of `K` carried in double precision sits about `ε_mach·R` off `K`,
/// and `G` is Hölder there with exponent `log d / χ`, where `χ` is the
/// largest Lyapunov exponent among short periodic orbits. The returned value
/// is the requested `eta` or that floor, whichever is larger.
pub fn zero_tolerance(f: &PolyDiffeo, solver: &GreenSolver, eta: f64) -> f64 {
    let mut chi: f64 = 0.0;
    for n in 1..=2 {
        if let Ok(pts) = find_fixed_points(f, n, &SolverOptions::default()) {
            for p in pts {
                chi = chi.max(p.lambda_u.abs().ln() / p.least_period as f64);
                chi = chi.max(-p.lambda_s.abs().ln() / p.least_period as f64);
            }
        }
    }
    if chi <= 0.0 {
        return eta;
    }
    let d = f.degree() as f64;
    let r = solver.filtration().radius;
    let floor = 10.0 * R_BIG.ln() * (f64::EPSILON * r).powf(d.ln() / chi);
    eta.max(floor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Longest polyline segment near the window, in figure units.
    pub max_step: f64,
    /// Largest turning of `ψ′` across a segment, radians.
    pub angle_tol: f64,
    /// Region where the resolution requirements apply; `None` means
    /// everywhere.
    pub window: Option<Rect>,
    /// Base samples per fundamental domain `[ζ, μζ]`.
    pub per_domain: usize,
    pub max_points: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            max_step: 1e-2,
            angle_tol: 0.2,
            window: None,
            per_domain: 48,
            max_points: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Extent,
    Budget,
    Escaped,
    MaxPoints,
}

/// Sampled real branch of a manifold, ordered outward from the saddle.
#[derive(Debug, Clone)]
pub struct ArcSample {
    pub chart: Arc<ManifoldChart>,
    /// `+1` for `ζ > 0`, `−1` for `ζ < 0`.
    pub branch: i8,
    pub params: Vec<f64>,
    pub points: Vec<Point2>,
    pub derivs: Vec<[f64; 2]>,
    /// Arc length counted inside the window.
    pub arc_length: f64,
    pub stop: StopReason,
}

impl ArcSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn kind(&self) -> ManifoldKind {
        self.chart.kind
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        self.write_csv_rows(&mut s);
        s
    }

    fn write_csv_rows(&self, s: &mut String) {
        for i in 0..self.points.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                self.params[i], self.points[i].x, self.points[i].y, self.derivs[i][0], self.derivs[i][1], self.branch
            );
        }
    }
}

/// CSV with header `zeta,x,y,dx,dy,branch` for several arcs.
pub fn traces_csv(arcs: &[ArcSample]) -> String {
    let mut s = String::from("zeta,x,y,dx,dy,branch\n");
    for a in arcs {
        a.write_csv_rows(&mut s);
    }
    s
}

fn segment_near(window: &Option<Rect>, a: &Point2, b: &Point2, reach: f64, margin: f64) -> bool {
    match window {
        None => true,
        Some(w) => {
            let inflate = reach + margin;
            let lo_x = a.x.min(b.x) - inflate;
            let hi_x = a.x.max(b.x) + inflate;
            let lo_y = a.y.min(b.y) - inflate;
            let hi_y = a.y.max(b.y) + inflate;
            !(hi_x < w.x0 || lo_x > w.x1 || hi_y < w.y0 || lo_y > w.y1)
        }
    }
}

fn turning(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.atan2(dot).abs()
}

fn clipped_length(window: &Option<Rect>, a: &Point2, b: &Point2) -> f64 {
    match window {
        None => a.dist(b),
        Some(w) => crate::render::clip_segment(w, a, b).map(|(p, q)| p.dist(&q)).unwrap_or(0.0),
    }
}

/// Trace one branch (`sign = ±1`) out to `|ζ| = extent` or until the
/// in-window arc length reaches `budget`.
pub fn trace_branch(chart: &Arc<ManifoldChart>, sign: i8, extent: f64, budget: f64, ctl: &StepControl) -> Result<ArcSample, ManifoldError> {
    let start = (0.5 * chart.rho).min(extent);
    trace_span(chart, sign, 0.0, start, extent, budget, ctl)
}

/// Trace `ζ = sign·s` for `s` from `from` to `to`; the base grid is geometric
/// from `geo_start` (which must be positive) with `per_domain` samples per
/// fundamental domain.
pub fn trace_span(
    chart: &Arc<ManifoldChart>,
    sign: i8,
    from: f64,
    geo_start: f64,
    to: f64,
    budget: f64,
    ctl: &StepControl,
) -> Result<ArcSample, ManifoldError> {
    let sg = f64::from(sign);
    let mu = chart.mu.abs();
    let mut base = vec![sg * from];
    let mut z = geo_start;
    let ratio = mu.powf(1.0 / ctl.per_domain.max(1) as f64);
    while z < to {
        if z > from {
            base.push(sg * z);
        }
        z *= ratio;
    }
    base.push(sg * to);

    let mut arc = ArcSample {
        chart: chart.clone(),
        branch: sign,
        params: Vec::new(),
        points: Vec::new(),
        derivs: Vec::new(),
        arc_length: 0.0,
        stop: StopReason::Extent,
    };
    let sample = |z: f64| chart.eval_with_derivative(z);
    let (p0, d0) = sample(base[0])?;
    arc.params.push(base[0]);
    arc.points.push(p0);
    arc.derivs.push(d0);

    let margin = ctl.max_step;
    'outer: for w in base.windows(2) {
        let mut stack: Vec<(f64, Point2, [f64; 2], usize)> = Vec::new();
        match sample(w[1]) {
            Ok((p, d)) => stack.push((w[1], p, d, 0)),
            Err(ManifoldError::Escaped(_)) => {
                arc.stop = StopReason::Escaped;
                break;
            }
            Err(e) => return Err(e),
        }
        while let Some((zb, pb, db, depth)) = stack.pop() {
            let za = *arc.params.last().unwrap();
            let pa = *arc.points.last().unwrap();
            let da = *arc.derivs.last().unwrap();
            let chord = pa.dist(&pb);
            let reach = chord.max(0.5 * (da[0].hypot(da[1]) + db[0].hypot(db[1])) * (zb - za).abs());
            let near = segment_near(&ctl.window, &pa, &pb, reach, margin);
            let refine = near && (chord > ctl.max_step || turning(&da, &db) > ctl.angle_tol);
            if refine {
                let zm = 0.5 * (za + zb);
                if depth > 60 || zm == za || zm == zb {
                    return Err(ManifoldError::StepCollapse(zm));
                }
                match sample(zm) {
                    Ok((pm, dm)) => {
                        stack.push((zb, pb, db, depth + 1));
                        stack.push((zm, pm, dm, depth + 1));
                    }
                    Err(ManifoldError::Escaped(_)) => {
                        arc.stop = StopReason::Escaped;
                        break 'outer;
                    }
                    Err(e) => return Err(e),
                }
                continue;
            }
            arc.arc_length += clipped_length(&ctl.window, &pa, &pb);
            arc.params.push(zb);
            arc.points.push(pb);
            arc.derivs.push(db);
            if arc.arc_length >= budget {
                arc.stop = StopReason::Budget;
                break 'outer;
            }
            if arc.points.len() >= ctl.max_points {
                arc.stop = StopReason::MaxPoints;
                break 'outer;
            }
        }
    }
    Ok(arc)
}

/// Both branches, traced in parallel.
pub fn trace(chart: &ManifoldChart, extent: f64, budget: f64, ctl: &StepControl) -> Result<[ArcSample; 2], ManifoldError> {
    let chart = Arc::new(chart.clone());
    let (a, b) = rayon::join(|| trace_branch(&chart, 1, extent, budget, ctl), || trace_branch(&chart, -1, extent, budget, ctl));
    Ok([a?, b?])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sidedness {
    /// Only the `ζ > 0` branch meets `K`.
    OneSidedPositive,
    /// Only the `ζ < 0` branch meets `K`.
    OneSidedNegative,
    TwoSided,
    /// Neither branch met `K` in the examined range.
    Inconclusive,
}

impl Sidedness {
    pub fn is_one_sided(self) -> bool {
        matches!(self, Sidedness::OneSidedPositive | Sidedness::OneSidedNegative)
    }

    pub fn label(self) -> &'static str {
        match self {
            Sidedness::OneSidedPositive => "one-sided-positive",
            Sidedness::OneSidedNegative => "one-sided-negative",
            Sidedness::TwoSided => "two-sided",
            Sidedness::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSidedResult {
    pub verdict: Sidedness,
    /// Smallest `G` found on the `ζ > 0` and `ζ < 0` branches.
    pub min_positive: f64,
    pub min_negative: f64,
    pub zeta0: [f64; 2],
    pub eta: f64,
}

fn branch_minimum(chart: &ManifoldChart, solver: &GreenSolver, sign: f64, z0: f64, z1: f64) -> f64 {
    let dir = chart.green_other();
    let g = |z: f64| -> f64 {
        match chart.eval(sign * z) {
            Ok(q) => solver.evaluate(&q, dir).map(|v| v.value).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };
    let n = 4096;
    let ratio = (z1 / z0).ln() / (n - 1) as f64;
    let zs: Vec<f64> = (0..n).map(|i| z0 * (ratio * i as f64).exp()).collect();
    let vals: Vec<f64> = zs.par_iter().map(|&z| g(z)).collect();
    // refine the deepest local minima by golden-section search
    let mut minima: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || vals[i] <= vals[i - 1]) && (i == n - 1 || vals[i] <= vals[i + 1]))
        .collect();
    minima.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    for &i in minima.iter().take(8) {
        let (mut a, mut b) = (zs[i.saturating_sub(1)], zs[(i + 1).min(n - 1)]);
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - gr * (b - a);
        let mut d = a + gr * (b - a);
        let (mut fc, mut fd) = (g(c), g(d));
        for _ in 0..60 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = g(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = g(d);
            }
        }
        best = best.min(fc).min(fd);
    }
    best
}

/// Which real branches of the chart meet `K`.
///
/// Uses `G⁺∘ψ` on unstable charts and `G⁻∘ψ` on stable charts (the other
/// Green's function vanishes identically on the manifold), and looks for
/// values below `eta` on each branch over `ζ₀ ≤ |ζ| ≤ max(T, μ³ζ₀)`, where
/// `|ψ(±ζ₀) − p| = 10⁻³`.
pub fn one_sided_test(chart: &ManifoldChart, solver: &GreenSolver, t: f64, eta: f64) -> Result<OneSidedResult, ManifoldError> {
    let mu = chart.mu.abs();
    let mut mins = [0.0; 2];
    let mut z0s = [0.0; 2];
    for (i, sign) in [1.0, -1.0].into_iter().enumerate() {
        let z0 = chart.radius_for_distance(sign, SADDLE_EXCLUSION)?;
        let z1 = t.max(z0 * mu.powi(3));
        z0s[i] = z0;
        mins[i] = branch_minimum(chart, solver, sign, z0, z1);
    }
    let (pos, neg) = (mins[0] < eta, mins[1] < eta);
    let verdict = match (pos, neg) {
        (true, true) => Sidedness::TwoSided,
        (true, false) => Sidedness::OneSidedPositive,
        (false, true) => Sidedness::OneSidedNegative,
        (false, false) => Sidedness::Inconclusive,
    };
    Ok(OneSidedResult {
        verdict,
        min_positive: mins[0],
        min_negative: mins[1],
        zeta0: z0s,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::henon;
    use crate::periodic::select_fixed_point;

    fn setup() -> (PolyDiffeo, PeriodicPoint, PeriodicPoint) {
        let f = henon(6.0, 0.8).unwrap();
        let plus = select_fixed_point(&f, true).unwrap();
        let minus = select_fixed_point(&f, false).unwrap();
        (f, plus, minus)
    }

    #[test]
    fn chart_satisfies_functional_equation() {
        let (f, plus, _) = setup();
        for kind in [ManifoldKind::Unstable, ManifoldKind::Stable] {
            let c = local_chart(&f, &plus, kind, DEFAULT_ORDER).unwrap();
            assert!(c.rho > MIN_RADIUS);
            assert!(c.residual < 1e-12);
            assert_eq!(c.eval(0.0).unwrap(), plus.point);
            // a₁ is the eigenvector of Df(p) for λ
            let j = f.jacobian(&plus.point);
            let a1 = c.coeffs[1];
            let ja = [j[0][0] * a1[0] + j[0][1] * a1[1], j[1][0] * a1[0] + j[1][1] * a1[1]];
            assert!((ja[0] - c.lambda * a1[0]).abs() < 1e-12 && (ja[1] - c.lambda * a1[1]).abs() < 1e-12);
            for i in 0..50 {
                let z = c.rho * (i as f64 / 25.0 - 1.0);
                assert!(c.functional_residual(z).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn stable_chart_conjugates_forward_map() {
        let (f, plus, _) = setup();
        let s = local_chart(&f, &plus, ManifoldKind::Stable, DEFAULT_ORDER).unwrap();
        assert!((s.mu * s.lambda - 1.0).abs() < 1e-15);
        for i in 0..20 {
            let z = 5.0 * (i as f64 / 10.0 - 1.0);
            let lhs = f.eval(&s.eval(z).unwrap());
            let rhs = s.eval(s.lambda * z).unwrap();
            assert!(lhs.dist(&rhs) < 1e-10, "{z}");
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let (f, plus, _) = setup();
        let c = local_chart(&f, &plus, ManifoldKind::Unstable, DEFAULT_ORDER).unwrap();
        for &z in &[-3.0, -0.7, 0.05, 2.0] {
            let j = c.jet(z, 2).unwrap();
            let h = 1e-5;
            let (a, b) = (c.eval(z - h).unwrap(), c.eval(z + h).unwrap());
            let d = [(b.x - a.x) / (2.0 * h), (b.y - a.y) / (2.0 * h)];
            let scale = 1.0 + j[1][0].abs() + j[1][1].abs();
            assert!((d[0] - j[1][0]).abs() < 1e-5 * scale, "{z} {d:?} {:?}", j[1]);
            assert!((d[1] - j[1][1]).abs() < 1e-5 * scale);
        }
    }

    #[test]
    fn normalization_hits_one() {
        let (f, plus, _) = setup();
        let solver = GreenSolver::new(&f).unwrap();
        let c = local_chart(&f, &plus, ManifoldKind::Unstable, DEFAULT_ORDER).unwrap();
        let n = normalize(&c, &solver).unwrap();
        let m = max_green_on_circle(&n, &solver, 1.0);
        assert!((m - 1.0).abs() < 1e-6, "{m}");
        // functional equation for G along the chart
        let m2 = max_green_on_circle(&n, &solver, n.mu.abs());
        assert!((m2 - 2.0).abs() < 1e-5, "{m2}");
        // prescaled charts normalize to the same chart
        let n3 = normalize(&c.rescaled(3.0), &solver).unwrap();
        for (a, b) in n.coeffs.iter().zip(&n3.coeffs).take(6) {
            assert!((a[0] - b[0]).abs() < 1e-6 * (1.0 + a[0].abs()), "{a:?} {b:?}");
        }
    }

    #[test]
    fn fixed_point_sidedness() {
        let (f, plus, minus) = setup();
        let solver = GreenSolver::new(&f).unwrap().with_n_max(300);
        let eta = zero_tolerance(&f, &solver, 1e-9);
        assert!(eta > 1e-5 && eta < 1e-2, "{eta}");
        for kind in [ManifoldKind::Unstable, ManifoldKind::Stable] {
            let c = local_chart(&f, &plus, kind, DEFAULT_ORDER).unwrap();
            let r = one_sided_test(&c, &solver, 0.0, eta).unwrap();
            assert_eq!(r.verdict, Sidedness::OneSidedNegative, "{kind:?} {r:?}");
            let c = local_chart(&f, &minus, kind, DEFAULT_ORDER).unwrap();
            let r = one_sided_test(&c, &solver, 0.0, eta).unwrap();
            assert_eq!(r.verdict, Sidedness::TwoSided, "{kind:?} {r:?}");
        }
    }

    #[test]
    fn trace_resolution_in_window() {
        let (f, plus, _) = setup();
        let c = local_chart(&f, &plus, ManifoldKind::Unstable, DEFAULT_ORDER).unwrap();
        let window = Rect::new(-4.0, -4.0, 4.0, 4.0);
        let ctl = StepControl {
            window: Some(window),
            ..Default::default()
        };
        let [pos, neg] = trace(&c, 200.0, 500.0, &ctl).unwrap();
        for arc in [&pos, &neg] {
            assert!(arc.len() > 10);
            for i in 1..arc.len() {
                let (a, b) = (arc.points[i - 1], arc.points[i]);
                if window.contains(&a) && window.contains(&b) {
                    assert!(a.dist(&b) <= 1e-2 + 1e-12);
                }
            }
        }
        // reality: negative parameters give the other branch
        let q = c.eval(-1.3).unwrap();
        let i = neg.params.iter().position(|&z| z < -1.3).unwrap();
        assert!(neg.points[i].dist(&q) < 0.05);
    }
}
