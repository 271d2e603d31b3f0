//! Stable/unstable intersections, contact classification and the search for
//! the tangency parameter on the horseshoe boundary.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::greens::{filtration_radius, GreenSolver, Rect};
use crate::manifold::{local_chart, normalize, trace_span, ArcSample, ManifoldChart, ManifoldError, ManifoldKind, StepControl, DEFAULT_ORDER, SADDLE_EXCLUSION};
use crate::map::{henon, Point2, PolyDiffeo};
use crate::periodic::{select_by_code, select_fixed_point, PeriodicError, PeriodicPoint, SymbolCode};

pub const ANGLE_EPS: f64 = 1e-4;
pub const KAPPA_MIN: f64 = 1e-3;
pub const MERGE_TOL: f64 = 1e-8;
pub const NEWTON_SWITCH: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TangencyError {
    #[error("contact at ({x}, {y}) is tangential but curvatures agree (|dk| = {dk:e})")]
    DegenerateContact { x: f64, y: f64, dk: f64 },
    #[error("bracket does not straddle a tangency: {0}")]
    BadBracket(String),
    #[error("lost the tracked fold at a = {0}")]
    FoldTrackingLost(f64),
    #[error("Newton refinement of the tangency did not converge")]
    NewtonFailed,
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Periodic(#[from] PeriodicError),
    #[error("map construction failed: {0}")]
    Map(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntersectionKind {
    Transverse,
    TangencyCandidate,
    /// Newton did not converge; position is the polyline crossing.
    RefinementFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionEvent {
    pub point: Point2,
    pub zeta_u: f64,
    pub zeta_s: f64,
    /// Angle between the tangent lines, in `[0, π/2]`.
    pub angle: f64,
    pub kind: IntersectionKind,
    /// `|ψᵘ(ζᵤ) − ψˢ(ζₛ)|` after refinement.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyEvent {
    pub intersection: IntersectionEvent,
    pub curvature_u: f64,
    pub curvature_s: f64,
    pub contact_order: u8,
    /// `(a, b)` when found by the parameter hunt.
    pub parameter: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Contact {
    Transverse(IntersectionEvent),
    Tangency(TangencyEvent),
}

/// A smooth curve `t ↦ c(t)` that can report Taylor coefficients.
pub trait ParametrizedCurve: Sync {
    /// `[c(t), c′(t), c″(t)/2, …]` up to `order`.
    fn jet(&self, t: f64, order: usize) -> Option<Vec<[f64; 2]>>;
}

impl ParametrizedCurve for ManifoldChart {
    fn jet(&self, t: f64, order: usize) -> Option<Vec<[f64; 2]>> {
        ManifoldChart::jet(self, t, order).ok()
    }
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Angle between the lines spanned by `a` and `b`.
pub fn line_angle(a: [f64; 2], b: [f64; 2]) -> f64 {
    let th = cross(a, b).atan2(dot(a, b)).abs();
    th.min(std::f64::consts::PI - th)
}

/// Signed curvature `(x′y″ − y′x″)/|c′|³` from a jet.
pub fn curvature(jet: &[[f64; 2]]) -> f64 {
    let d1 = jet[1];
    let d2 = [2.0 * jet[2][0], 2.0 * jet[2][1]];
    cross(d1, d2) / dot(d1, d1).powf(1.5)
}

/// Newton on `c_u(t_u) − c_s(t_s) = 0`.
pub fn refine_intersection(cu: &dyn ParametrizedCurve, cs: &dyn ParametrizedCurve, tu: f64, ts: f64, max_shift: f64) -> Option<(f64, f64, f64)> {
    let (mut tu, mut ts) = (tu, ts);
    let (tu0, ts0) = (tu, ts);
    for _ in 0..30 {
        let ju = cu.jet(tu, 1)?;
        let js = cs.jet(ts, 1)?;
        let f = [ju[0][0] - js[0][0], ju[0][1] - js[0][1]];
        let gap = f[0].hypot(f[1]);
        let scale = 1.0 + ju[0][0].abs().max(ju[0][1].abs());
        if gap < 1e-13 * scale {
            return Some((tu, ts, gap));
        }
        // [u′  −s′] (dtu, dts)ᵀ = −f
        let det = cross(ju[1], [-js[1][0], -js[1][1]]);
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dtu = cross([-f[0], -f[1]], [-js[1][0], -js[1][1]]) / det;
        let dts = cross(ju[1], [-f[0], -f[1]]) / det;
        tu += dtu;
        ts += dts;
        if (tu - tu0).abs() > max_shift.max(1e-300) * 4.0 + 1e-12 || (ts - ts0).abs() > max_shift * 4.0 + 1e-12 {
            return None;
        }
    }
    let ju = cu.jet(tu, 0)?;
    let js = cs.jet(ts, 0)?;
    let gap = (ju[0][0] - js[0][0]).hypot(ju[0][1] - js[0][1]);
    (gap < 1e-9).then_some((tu, ts, gap))
}

/// Crossing of segments `p0p1` and `q0q1` as fractions `(t, u) ∈ [0,1)²`.
fn segment_crossing(p0: &Point2, p1: &Point2, q0: &Point2, q1: &Point2) -> Option<(f64, f64)> {
    let r = [p1.x - p0.x, p1.y - p0.y];
    let s = [q1.x - q0.x, q1.y - q0.y];
    let den = cross(r, s);
    if den == 0.0 {
        return None;
    }
    let qp = [q0.x - p0.x, q0.y - p0.y];
    let t = cross(qp, s) / den;
    let u = cross(qp, r) / den;
    ((0.0..1.0).contains(&t) && (0.0..1.0).contains(&u)).then_some((t, u))
}

/// Raw polyline crossings `(i + t, j + u)` in segment-index coordinates,
/// found with a uniform spatial hash over `window`.
pub fn polyline_crossings(a: &[Point2], b: &[Point2], window: &Rect) -> Vec<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Vec::new();
    }
    let cells = 256usize;
    let hx = window.width() / cells as f64;
    let hy = window.height() / cells as f64;
    let cell_range = |lo: f64, hi: f64, o: f64, h: f64| -> Option<(usize, usize)> {
        let i0 = ((lo - o) / h).floor();
        let i1 = ((hi - o) / h).floor();
        if i1 < 0.0 || i0 >= cells as f64 || !i0.is_finite() || !i1.is_finite() {
            return None;
        }
        Some((i0.max(0.0) as usize, (i1 as usize).min(cells - 1)))
    };
    let mut grid: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for j in 0..b.len() - 1 {
        let (q0, q1) = (&b[j], &b[j + 1]);
        let Some((i0, i1)) = cell_range(q0.x.min(q1.x), q0.x.max(q1.x), window.x0, hx) else { continue };
        let Some((k0, k1)) = cell_range(q0.y.min(q1.y), q0.y.max(q1.y), window.y0, hy) else { continue };
        if (i1 - i0 + 1) * (k1 - k0 + 1) > 4096 {
            // very long segment: only happens far outside the region of interest
            continue;
        }
        for i in i0..=i1 {
            for k in k0..=k1 {
                grid.entry((i, k)).or_default().push(j);
            }
        }
    }
    let mut out: Vec<(f64, f64)> = (0..a.len() - 1)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (p0, p1) = (&a[i], &a[i + 1]);
            let mut found = Vec::new();
            let xr = cell_range(p0.x.min(p1.x), p0.x.max(p1.x), window.x0, hx);
            let yr = cell_range(p0.y.min(p1.y), p0.y.max(p1.y), window.y0, hy);
            if let (Some((i0, i1)), Some((k0, k1))) = (xr, yr) {
                if (i1 - i0 + 1) * (k1 - k0 + 1) <= 4096 {
                    let mut cands: Vec<usize> = Vec::new();
                    for ci in i0..=i1 {
                        for ck in k0..=k1 {
                            if let Some(v) = grid.get(&(ci, ck)) {
                                cands.extend(v);
                            }
                        }
                    }
                    cands.sort_unstable();
                    cands.dedup();
                    for j in cands {
                        if let Some((t, u)) = segment_crossing(p0, p1, &b[j], &b[j + 1]) {
                            let x = p0.x + t * (p1.x - p0.x);
                            let y = p0.y + t * (p1.y - p0.y);
                            if window.contains(&Point2::new(x, y)) {
                                found.push((i as f64 + t, j as f64 + u));
                            }
                        }
                    }
                }
            }
            found
        })
        .collect();
    out.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    out
}

fn param_at(arc: &ArcSample, s: f64) -> (f64, f64) {
    let i = (s.floor() as usize).min(arc.params.len() - 2);
    let t = s - i as f64;
    let z = arc.params[i] + t * (arc.params[i + 1] - arc.params[i]);
    (z, (arc.params[i + 1] - arc.params[i]).abs())
}

/// Intersections of an unstable and a stable trace inside `window`, refined
/// on the charts and merged within `MERGE_TOL`.
pub fn intersections(arc_u: &ArcSample, arc_s: &ArcSample, window: &Rect) -> Vec<IntersectionEvent> {
    let raw = polyline_crossings(&arc_u.points, &arc_s.points, window);
    let cu: &ManifoldChart = &arc_u.chart;
    let cs: &ManifoldChart = &arc_s.chart;
    let mut events: Vec<IntersectionEvent> = raw
        .par_iter()
        .map(|&(si, sj)| {
            let (zu, du) = param_at(arc_u, si);
            let (zs, ds) = param_at(arc_s, sj);
            match refine_intersection(cu, cs, zu, zs, du.max(ds)) {
                Some((zu, zs, gap)) => {
                    let ju = cu.jet(zu, 1).expect("refined point is finite");
                    let js = cs.jet(zs, 1).expect("refined point is finite");
                    let angle = line_angle(ju[1], js[1]);
                    IntersectionEvent {
                        point: Point2::new(ju[0][0], ju[0][1]),
                        zeta_u: zu,
                        zeta_s: zs,
                        angle,
                        kind: if angle >= ANGLE_EPS {
                            IntersectionKind::Transverse
                        } else {
                            IntersectionKind::TangencyCandidate
                        },
                        gap,
                    }
                }
                None => {
                    let i = si.floor() as usize;
                    let t = si - i as f64;
                    let (p0, p1) = (arc_u.points[i], arc_u.points[(i + 1).min(arc_u.len() - 1)]);
                    let angle = {
                        let j = sj.floor() as usize;
                        let (q0, q1) = (arc_s.points[j], arc_s.points[(j + 1).min(arc_s.len() - 1)]);
                        line_angle([p1.x - p0.x, p1.y - p0.y], [q1.x - q0.x, q1.y - q0.y])
                    };
                    IntersectionEvent {
                        point: Point2::new(p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y)),
                        zeta_u: zu,
                        zeta_s: zs,
                        angle,
                        kind: IntersectionKind::RefinementFailure,
                        gap: f64::NAN,
                    }
                }
            }
        })
        .collect();
    merge_events(&mut events);
    events
}

/// Sort by `(ζᵤ, ζₛ)` and drop events within `MERGE_TOL` of an earlier one.
pub fn merge_events(events: &mut Vec<IntersectionEvent>) {
    events.sort_by(|a, b| a.zeta_u.total_cmp(&b.zeta_u).then(a.zeta_s.total_cmp(&b.zeta_s)));
    let mut out: Vec<IntersectionEvent> = Vec::with_capacity(events.len());
    for e in events.drain(..) {
        let dup = out.iter().rev().take(8).any(|o| {
            (o.zeta_u - e.zeta_u).abs() <= MERGE_TOL * (1.0 + e.zeta_u.abs())
                && (o.zeta_s - e.zeta_s).abs() <= MERGE_TOL * (1.0 + e.zeta_s.abs())
                && o.point.dist(&e.point) <= MERGE_TOL
        });
        if !dup {
            out.push(e);
        }
    }
    *events = out;
}

/// Intersections over every pair of unstable/stable arcs.
pub fn all_intersections(unstable: &[ArcSample], stable: &[ArcSample], window: &Rect) -> Vec<IntersectionEvent> {
    let mut events = Vec::new();
    for u in unstable {
        for s in stable {
            events.extend(intersections(u, s, window));
        }
    }
    merge_events(&mut events);
    events
}

/// Transverse, or a quadratic tangency with distinct curvatures.
///
/// The stable tangent is oriented along the unstable one before comparing
/// signed curvatures, which makes the result symmetric in the two curves.
pub fn classify_contact(evt: &IntersectionEvent, cu: &dyn ParametrizedCurve, cs: &dyn ParametrizedCurve, angle_eps: f64, kappa_min: f64) -> Result<Contact, TangencyError> {
    if evt.angle >= angle_eps {
        return Ok(Contact::Transverse(evt.clone()));
    }
    let ju = cu.jet(evt.zeta_u, 2).ok_or(TangencyError::Manifold(ManifoldError::Escaped(evt.zeta_u)))?;
    let js = cs.jet(evt.zeta_s, 2).ok_or(TangencyError::Manifold(ManifoldError::Escaped(evt.zeta_s)))?;
    let ku = curvature(&ju);
    let mut ks = curvature(&js);
    if dot(ju[1], js[1]) < 0.0 {
        ks = -ks;
    }
    let dk = (ku - ks).abs();
    if dk <= kappa_min {
        return Err(TangencyError::DegenerateContact {
            x: evt.point.x,
            y: evt.point.y,
            dk,
        });
    }
    let mut intersection = evt.clone();
    intersection.kind = IntersectionKind::TangencyCandidate;
    Ok(Contact::Tangency(TangencyEvent {
        intersection,
        curvature_u: ku,
        curvature_s: ks,
        contact_order: 2,
        parameter: None,
    }))
}

/// Closest approach of two nearly tangent curves: solves
/// `c_u′ × c_s′ = 0`, `(c_u − c_s)·c_s′ = 0`. Returns `(t_u, t_s, gap)`.
pub fn closest_approach(cu: &dyn ParametrizedCurve, cs: &dyn ParametrizedCurve, tu: f64, ts: f64, max_shift: f64) -> Option<(f64, f64, f64)> {
    let (mut tu, mut ts) = (tu, ts);
    let (tu0, ts0) = (tu, ts);
    for _ in 0..40 {
        let u = cu.jet(tu, 2)?;
        let s = cs.jet(ts, 2)?;
        let (u0, u1, u2) = (u[0], u[1], [2.0 * u[2][0], 2.0 * u[2][1]]);
        let (s0, s1, s2) = (s[0], s[1], [2.0 * s[2][0], 2.0 * s[2][1]]);
        let w = [u0[0] - s0[0], u0[1] - s0[1]];
        let f1 = cross(u1, s1);
        let f2 = dot(w, s1);
        let j11 = cross(u2, s1);
        let j12 = cross(u1, s2);
        let j21 = dot(u1, s1);
        let j22 = -dot(s1, s1) + dot(w, s2);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dtu = (-f1 * j22 + f2 * j12) / det;
        let dts = (-f2 * j11 + f1 * j21) / det;
        tu += dtu;
        ts += dts;
        if (tu - tu0).abs() > max_shift || (ts - ts0).abs() > max_shift {
            return None;
        }
        if dtu.abs() < 1e-14 * (1.0 + tu.abs()) && dts.abs() < 1e-14 * (1.0 + ts.abs()) {
            break;
        }
    }
    let u = cu.jet(tu, 1)?;
    let s = cs.jet(ts, 1)?;
    let gap = (u[0][0] - s[0][0]).hypot(u[0][1] - s[0][1]);
    Some((tu, ts, gap))
}

/// Which saddle(s) the hunt follows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SaddleSelector {
    /// The fixed point with `λᵘ > 0`, homoclinic.
    Plus,
    Minus,
    /// Unstable manifold of the first orbit, stable manifold of the second.
    Codes(SymbolCode, SymbolCode),
}

impl SaddleSelector {
    fn saddles(&self, f: &PolyDiffeo) -> Result<(PeriodicPoint, PeriodicPoint), TangencyError> {
        Ok(match self {
            SaddleSelector::Plus => {
                let p = select_fixed_point(f, true)?;
                (p.clone(), p)
            }
            SaddleSelector::Minus => {
                let p = select_fixed_point(f, false)?;
                (p.clone(), p)
            }
            SaddleSelector::Codes(u, s) => (select_by_code(f, u)?, select_by_code(f, s)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuntOptions {
    /// Number of parameter values in the coarse downward scan.
    pub scan_steps: usize,
    /// Fundamental domains traced beyond the saddle neighbourhood.
    pub domains_u: i32,
    pub domains_s: i32,
    pub newton_switch: f64,
    pub max_step: f64,
    pub angle_eps: f64,
    pub kappa_min: f64,
}

impl Default for HuntOptions {
    fn default() -> Self {
        HuntOptions {
            scan_steps: 40,
            domains_u: 7,
            domains_s: 6,
            newton_switch: NEWTON_SWITCH,
            max_step: 2e-2,
            angle_eps: ANGLE_EPS,
            kappa_min: KAPPA_MIN,
        }
    }
}

/// Raw (unit-eigenvector) charts and traces at one parameter value.
struct Snapshot {
    cu: Arc<ManifoldChart>,
    cs: Arc<ManifoldChart>,
    window: Rect,
    ext_u: f64,
    ext_s: f64,
}

/// A crossing with the branch signs it was found on.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Crossing {
    zu: f64,
    zs: f64,
    angle: f64,
}

fn snapshot(b: f64, a: f64, sel: &SaddleSelector, opts: &HuntOptions) -> Result<Snapshot, TangencyError> {
    let f = henon(a, b).map_err(|e| TangencyError::Map(e.to_string()))?;
    snapshot_of(&f, sel, opts)
}

fn snapshot_of(f: &PolyDiffeo, sel: &SaddleSelector, opts: &HuntOptions) -> Result<Snapshot, TangencyError> {
    let (pu, ps) = sel.saddles(f)?;
    let cu = local_chart(f, &pu, ManifoldKind::Unstable, DEFAULT_ORDER)?;
    let cs = local_chart(f, &ps, ManifoldKind::Stable, DEFAULT_ORDER)?;
    let r = filtration_radius(f).map_err(|e| TangencyError::Map(e.to_string()))?.radius;
    let z0u = cu.radius_for_distance(1.0, SADDLE_EXCLUSION)?;
    let z0s = cs.radius_for_distance(1.0, SADDLE_EXCLUSION)?;
    Ok(Snapshot {
        ext_u: z0u * cu.mu.abs().powi(opts.domains_u),
        ext_s: z0s * cs.mu.abs().powi(opts.domains_s),
        cu: Arc::new(cu),
        cs: Arc::new(cs),
        window: Rect::new(-r, -r, r, r),
    })
}

impl Snapshot {
    fn ctl(&self, opts: &HuntOptions) -> StepControl {
        StepControl {
            max_step: opts.max_step,
            angle_tol: 0.1,
            window: Some(self.window),
            ..Default::default()
        }
    }

    fn arcs(&self, chart: &Arc<ManifoldChart>, spans: &[(i8, f64, f64)], opts: &HuntOptions) -> Result<Vec<ArcSample>, TangencyError> {
        let ctl = self.ctl(opts);
        spans
            .par_iter()
            .map(|&(sign, lo, hi)| {
                let geo = if lo > 0.0 { lo } else { 0.5 * chart.rho };
                trace_span(chart, sign, lo, geo.min(hi), hi, f64::INFINITY, &ctl).map_err(TangencyError::from)
            })
            .collect()
    }

    /// Refined crossings between the given spans of the two manifolds,
    /// excluding the saddle and crossings near the far ends of the spans.
    fn crossings(&self, u_spans: &[(i8, f64, f64)], s_spans: &[(i8, f64, f64)], opts: &HuntOptions) -> Result<Vec<Crossing>, TangencyError> {
        let ua = self.arcs(&self.cu, u_spans, opts)?;
        let sa = self.arcs(&self.cs, s_spans, opts)?;
        let events = all_intersections(&ua, &sa, &self.window);
        let inside = |z: f64, spans: &[(i8, f64, f64)]| {
            spans.iter().any(|&(sg, lo, hi)| {
                let v = z * f64::from(sg);
                v > lo.max(1e-9) * 1.02 && v < hi / 1.02
            })
        };
        Ok(events
            .into_iter()
            .filter(|e| e.kind != IntersectionKind::RefinementFailure)
            .filter(|e| inside(e.zeta_u, u_spans) && inside(e.zeta_s, s_spans))
            .map(|e| Crossing {
                zu: e.zeta_u,
                zs: e.zeta_s,
                angle: e.angle,
            })
            .collect())
    }

    fn full_spans(&self) -> (Vec<(i8, f64, f64)>, Vec<(i8, f64, f64)>) {
        (
            vec![(1, 0.0, self.ext_u), (-1, 0.0, self.ext_u)],
            vec![(1, 0.0, self.ext_s), (-1, 0.0, self.ext_s)],
        )
    }
}

fn log_dist(a: &Crossing, b: &Crossing) -> f64 {
    if a.zu.signum() != b.zu.signum() || a.zs.signum() != b.zs.signum() {
        return f64::INFINITY;
    }
    (a.zu.abs().ln() - b.zu.abs().ln()).abs().max((a.zs.abs().ln() - b.zs.abs().ln()).abs())
}

/// Crossings of `prev` with no counterpart in `next`.
fn vanished(prev: &[Crossing], next: &[Crossing]) -> Vec<Crossing> {
    prev.iter().filter(|p| next.iter().all(|q| log_dist(p, q) > 0.05)).copied().collect()
}

/// ζ-window around a fold pair: the spans containing both crossings with a
/// margin in log scale.
fn fold_spans(pair: &[Crossing; 2]) -> (Vec<(i8, f64, f64)>, Vec<(i8, f64, f64)>) {
    let span = |a: f64, b: f64| {
        let (lo, hi) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
        let pad = (hi / lo).powf(0.5).max(1.02);
        (a.signum() as i8, lo / pad, hi * pad)
    };
    (vec![span(pair[0].zu, pair[1].zu)], vec![span(pair[0].zs, pair[1].zs)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HuntResult {
    pub a_star: f64,
    pub b: f64,
    pub event: TangencyEvent,
    /// Widths of the parameter bracket after each bisection step.
    pub bracket_widths: Vec<f64>,
    pub newton_iterations: usize,
    /// `(ζᵤ, ζₛ)` of the tangency in the unit-eigenvector charts.
    pub raw_zeta: (f64, f64),
}

/// Locate the boundary parameter `a*` in `[a_lo, a_hi]` at fixed `b` where a
/// pair of transverse crossings merges into a tangency.
///
/// Crossings are followed by nearest-parameter continuation in a downward
/// scan from `a_hi`; the first pair that disappears defines the fold. The
/// step where it vanishes is bisected on the fold-window crossing count
/// (2 versus 0) and finished by Newton on `(ψᵘ − ψˢ, ψᵘ′ × ψˢ′)` in
/// `(ζᵤ, ζₛ, a)`.
pub fn hunt_boundary(b: f64, a_lo: f64, a_hi: f64, sel: &SaddleSelector, opts: &HuntOptions) -> Result<HuntResult, TangencyError> {
    if !(a_lo < a_hi) {
        return Err(TangencyError::BadBracket(format!("a_lo = {a_lo} is not below a_hi = {a_hi}")));
    }
    let count_at = |a: f64| -> Result<Vec<Crossing>, TangencyError> {
        let snap = snapshot(b, a, sel, opts)?;
        let (u, s) = snap.full_spans();
        snap.crossings(&u, &s, opts)
    };
    let da = (a_hi - a_lo) / opts.scan_steps as f64;
    let mut prev_a = a_hi;
    let mut prev = count_at(a_hi)?;
    if prev.is_empty() {
        return Err(TangencyError::BadBracket(format!("no crossings at a = {a_hi}")));
    }
    let mut found: Option<(f64, f64, [Crossing; 2])> = None;
    for k in 1..=opts.scan_steps {
        let a = a_hi - da * k as f64;
        let next = match count_at(a) {
            Ok(c) => c,
            // charts can fail below the horseshoe region; treat as the end
            Err(_) => Vec::new(),
        };
        let gone = vanished(&prev, &next);
        if gone.len() >= 2 {
            // the pair closest in ζᵤ among those nearest the saddle
            let mut best: Option<[Crossing; 2]> = None;
            let mut best_score = f64::INFINITY;
            for i in 0..gone.len() {
                for j in i + 1..gone.len() {
                    let d = log_dist(&gone[i], &gone[j]);
                    if d.is_finite() {
                        let score = gone[i].zu.abs().min(gone[j].zu.abs()).ln() + d;
                        if score < best_score {
                            best_score = score;
                            best = Some([gone[i], gone[j]]);
                        }
                    }
                }
            }
            if let Some(pair) = best {
                found = Some((a, prev_a, pair));
                break;
            }
        }
        prev = next;
        prev_a = a;
    }
    let (mut lo, mut hi, mut pair) = found.ok_or_else(|| TangencyError::BadBracket(format!("no crossing pair disappears in [{a_lo}, {a_hi}]")))?;

    // Signed normal offset at the closest approach near the fold: one sign
    // while the pair crosses, the other once it has separated. Used when the
    // polyline count is ambiguous because the crossings are closer than the
    // trace resolution.
    let signed_gap = |snap: &Snapshot, zu: f64, zs: f64, shift: f64| -> Option<(f64, f64, f64)> {
        let (tu, ts, _) = closest_approach(&*snap.cu, &*snap.cs, zu, zs, shift)?;
        let u = snap.cu.jet(tu, 0).ok()?;
        let s = snap.cs.jet(ts, 1).ok()?;
        let w = [u[0][0] - s[0][0], u[0][1] - s[0][1]];
        Some((tu, ts, cross(s[1], w) / dot(s[1], s[1]).sqrt()))
    };
    let shift = |pair: &[Crossing; 2]| (pair[0].zu - pair[1].zu).abs().max((pair[0].zs - pair[1].zs).abs()).max(1e-3) * 8.0;
    let (mut zu, mut zs) = (0.5 * (pair[0].zu + pair[1].zu), 0.5 * (pair[0].zs + pair[1].zs));
    let crossing_sign = {
        let snap = snapshot(b, hi, sel, opts)?;
        let (tu, ts, g) = signed_gap(&snap, zu, zs, shift(&pair)).ok_or(TangencyError::FoldTrackingLost(hi))?;
        zu = tu;
        zs = ts;
        g.signum()
    };

    let mut widths = vec![hi - lo];
    while hi - lo > opts.newton_switch {
        let mid = 0.5 * (lo + hi);
        let snap = snapshot(b, mid, sel, opts)?;
        let (u, s) = fold_spans(&pair);
        let c = snap.crossings(&u, &s, opts)?;
        let crossing = match c.len() {
            0 => false,
            2 => true,
            _ => {
                let (_, _, g) = signed_gap(&snap, zu, zs, shift(&pair)).ok_or(TangencyError::FoldTrackingLost(mid))?;
                g.signum() == crossing_sign
            }
        };
        if crossing {
            hi = mid;
            if c.len() == 2 {
                pair = [c[0], c[1]];
            }
            if let Some((tu, ts, _)) = signed_gap(&snap, zu, zs, shift(&pair)) {
                zu = tu;
                zs = ts;
            }
        } else {
            lo = mid;
        }
        widths.push(hi - lo);
    }

    // Newton in (ζᵤ, ζₛ, a) from the closest approach at the transverse end
    let mut a = hi;
    let residual = |a: f64, zu: f64, zs: f64| -> Result<([f64; 3], [[f64; 2]; 2], [[f64; 2]; 2]), TangencyError> {
        let snap = snapshot(b, a, sel, opts)?;
        let u = snap.cu.jet(zu, 2)?;
        let s = snap.cs.jet(zs, 2)?;
        Ok((
            [u[0][0] - s[0][0], u[0][1] - s[0][1], cross(u[1], s[1])],
            [u[1], [2.0 * u[2][0], 2.0 * u[2][1]]],
            [s[1], [2.0 * s[2][0], 2.0 * s[2][1]]],
        ))
    };
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..30 {
        iterations = it + 1;
        let (f, [u1, u2], [s1, s2]) = residual(a, zu, zs)?;
        let h = 1e-6;
        let (fp, _, _) = residual(a + h, zu, zs)?;
        let (fm, _, _) = residual(a - h, zu, zs)?;
        let fa = [(fp[0] - fm[0]) / (2.0 * h), (fp[1] - fm[1]) / (2.0 * h), (fp[2] - fm[2]) / (2.0 * h)];
        // columns: ∂/∂ζᵤ, ∂/∂ζₛ, ∂/∂a
        let j = nalgebra::Matrix3::new(u1[0], -s1[0], fa[0], u1[1], -s1[1], fa[1], cross(u2, s1), cross(u1, s2), fa[2]);
        let rhs = nalgebra::Vector3::new(-f[0], -f[1], -f[2]);
        let delta = j.lu().solve(&rhs).ok_or(TangencyError::NewtonFailed)?;
        zu += delta[0];
        zs += delta[1];
        a += delta[2];
        if !a.is_finite() || (a - hi).abs() > 100.0 * opts.newton_switch.max(hi - lo) {
            return Err(TangencyError::NewtonFailed);
        }
        if delta[2].abs() < 1e-13 && delta[0].abs() < 1e-11 * (1.0 + zu.abs()) && delta[1].abs() < 1e-11 * (1.0 + zs.abs()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(TangencyError::NewtonFailed);
    }

    // report in normalized charts
    let snap = snapshot(b, a, sel, opts)?;
    let f = henon(a, b).map_err(|e| TangencyError::Map(e.to_string()))?;
    let solver = GreenSolver::new(&f).map_err(|e| TangencyError::Map(e.to_string()))?;
    let nu = normalize(&snap.cu, &solver)?;
    let ns = normalize(&snap.cs, &solver)?;
    let ju = snap.cu.jet(zu, 2)?;
    let js = snap.cs.jet(zs, 2)?;
    let angle = line_angle(ju[1], js[1]);
    let gap = (ju[0][0] - js[0][0]).hypot(ju[0][1] - js[0][1]);
    let evt = IntersectionEvent {
        point: Point2::new(ju[0][0], ju[0][1]),
        zeta_u: zu / nu.scale,
        zeta_s: zs / ns.scale,
        angle,
        kind: IntersectionKind::TangencyCandidate,
        gap,
    };
    let contact = classify_contact(&evt, &nu, &ns, opts.angle_eps, opts.kappa_min)?;
    let mut event = match contact {
        Contact::Tangency(t) => t,
        Contact::Transverse(_) => return Err(TangencyError::NewtonFailed),
    };
    event.parameter = Some((a, b));
    Ok(HuntResult {
        a_star: a,
        b,
        event,
        bracket_widths: widths,
        newton_iterations: iterations,
        raw_zeta: (zu, zs),
    })
}

/// Contacts of the selected manifolds inside `window` at a fixed map.
#[derive(Debug, Clone)]
pub struct WindowScan {
    pub transverse: Vec<IntersectionEvent>,
    pub tangencies: Vec<TangencyEvent>,
    /// Tangential contacts whose curvatures could not be separated.
    pub degenerate: Vec<IntersectionEvent>,
    /// Unstable and stable traces in normalized charts.
    pub unstable: Vec<ArcSample>,
    pub stable: Vec<ArcSample>,
}

/// Trace both manifolds of the selected saddle(s) over the hunt extents,
/// intersect them in `window`, and classify every contact. Close approaches
/// with gap below `gap_tol` and parallel tangents count as tangencies too,
/// so a map within numerical distance of a tangency parameter reports one.
pub fn scan_window(f: &PolyDiffeo, sel: &SaddleSelector, window: &Rect, gap_tol: f64, opts: &HuntOptions) -> Result<WindowScan, TangencyError> {
    let snap = snapshot_of(f, sel, opts)?;
    let solver = GreenSolver::new(f).map_err(|e| TangencyError::Map(e.to_string()))?;
    let nu = Arc::new(normalize(&snap.cu, &solver)?);
    let ns = Arc::new(normalize(&snap.cs, &solver)?);
    let snap = Snapshot {
        ext_u: snap.ext_u / nu.scale,
        ext_s: snap.ext_s / ns.scale,
        cu: nu,
        cs: ns,
        window: *window,
    };
    let (us, ss) = snap.full_spans();
    let unstable = snap.arcs(&snap.cu, &us, opts)?;
    let stable = snap.arcs(&snap.cs, &ss, opts)?;
    let events = all_intersections(&unstable, &stable, window);
    let near = near_tangencies(&unstable, &stable, window, gap_tol, 0.05);
    let mut out = WindowScan {
        transverse: Vec::new(),
        tangencies: Vec::new(),
        degenerate: Vec::new(),
        unstable,
        stable,
    };
    let p0 = snap.cu.saddle.point;
    for e in events.into_iter().chain(near) {
        if e.point.dist(&p0) < SADDLE_EXCLUSION && snap.cs.saddle.point.dist(&p0) == 0.0 {
            continue;
        }
        if e.kind == IntersectionKind::RefinementFailure {
            out.transverse.push(e);
            continue;
        }
        match classify_contact(&e, &*snap.cu, &*snap.cs, opts.angle_eps.max(if e.gap > 0.0 { 0.05 } else { 0.0 }), opts.kappa_min) {
            Ok(Contact::Transverse(e)) => out.transverse.push(e),
            Ok(Contact::Tangency(mut t)) => {
                t.parameter = f.henon_params();
                if !out.tangencies.iter().any(|o| o.intersection.point.dist(&t.intersection.point) < 1e-6) {
                    out.tangencies.push(t);
                }
            }
            Err(TangencyError::DegenerateContact { .. }) => out.degenerate.push(e),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Nearly tangent close approaches between traces: pairs of segments within
/// `gap_tol` and `angle_tol` of each other, refined by [`closest_approach`].
pub fn near_tangencies(unstable: &[ArcSample], stable: &[ArcSample], window: &Rect, gap_tol: f64, angle_tol: f64) -> Vec<IntersectionEvent> {
    let mut out = Vec::new();
    for u in unstable {
        for s in stable {
            let mut seeds = Vec::new();
            // coarse pairing on a spatial hash of stable vertices
            let h = gap_tol.max(1e-3) * 4.0;
            let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
            for (j, q) in s.points.iter().enumerate() {
                if window.contains(q) {
                    grid.entry(((q.x / h).floor() as i64, (q.y / h).floor() as i64)).or_default().push(j);
                }
            }
            for (i, p) in u.points.iter().enumerate() {
                if !window.contains(p) || u.params[i] == 0.0 {
                    continue;
                }
                let (cx, cy) = ((p.x / h).floor() as i64, (p.y / h).floor() as i64);
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        if let Some(v) = grid.get(&(cx + dx, cy + dy)) {
                            for &j in v {
                                if s.params[j] != 0.0 && line_angle(u.derivs[i], s.derivs[j]) < angle_tol && p.dist(&s.points[j]) < h {
                                    seeds.push((u.params[i], s.params[j]));
                                }
                            }
                        }
                    }
                }
            }
            let mut found: Vec<IntersectionEvent> = seeds
                .par_iter()
                .filter_map(|&(zu, zs)| {
                    let (tu, ts, gap) = closest_approach(&*u.chart, &*s.chart, zu, zs, 1.0 + zu.abs().max(zs.abs()) * 0.1)?;
                    if gap > gap_tol {
                        return None;
                    }
                    let ju = u.chart.jet(tu, 1).ok()?;
                    let js = s.chart.jet(ts, 1).ok()?;
                    let p = Point2::new(0.5 * (ju[0][0] + js[0][0]), 0.5 * (ju[0][1] + js[0][1]));
                    window.contains(&p).then(|| IntersectionEvent {
                        point: p,
                        zeta_u: tu,
                        zeta_s: ts,
                        angle: line_angle(ju[1], js[1]),
                        kind: IntersectionKind::TangencyCandidate,
                        gap,
                    })
                })
                .collect();
            merge_close(&mut found, 1e-6);
            out.extend(found);
        }
    }
    merge_close(&mut out, 1e-6);
    out
}

fn merge_close(events: &mut Vec<IntersectionEvent>, tol: f64) {
    events.sort_by(|a, b| a.zeta_u.total_cmp(&b.zeta_u).then(a.zeta_s.total_cmp(&b.zeta_s)));
    let mut out: Vec<IntersectionEvent> = Vec::new();
    for e in events.drain(..) {
        if !out.iter().any(|o| o.point.dist(&e.point) < tol) {
            out.push(e);
        }
    }
    *events = out;
}

/// One JSON object per line with keys
/// `type, x, y, zeta_u, zeta_s, angle, kappa_u, kappa_s, a, b`.
pub fn events_jsonl(transverse: &[IntersectionEvent], tangencies: &[TangencyEvent], params: Option<(f64, f64)>) -> String {
    let mut s = String::new();
    let line = |s: &mut String, ty: &str, e: &IntersectionEvent, ku: Option<f64>, ks: Option<f64>, p: Option<(f64, f64)>| {
        let v = serde_json::json!({
            "type": ty,
            "x": e.point.x,
            "y": e.point.y,
            "zeta_u": e.zeta_u,
            "zeta_s": e.zeta_s,
            "angle": e.angle,
            "kappa_u": ku,
            "kappa_s": ks,
            "a": p.map(|p| p.0),
            "b": p.map(|p| p.1),
        });
        let _ = writeln!(s, "{v}");
    };
    for e in transverse {
        let ty = match e.kind {
            IntersectionKind::RefinementFailure => "refinement-failure",
            IntersectionKind::TangencyCandidate => "tangency-candidate",
            IntersectionKind::Transverse => "transverse",
        };
        line(&mut s, ty, e, None, None, params);
    }
    for t in tangencies {
        line(&mut s, "tangency", &t.intersection, Some(t.curvature_u), Some(t.curvature_s), t.parameter.or(params));
    }
    s
}
