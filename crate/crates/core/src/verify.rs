//! Theorem-level checks assembled into a verdict report.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::greens::{filtration_radius, classify_grid, CellClass, GreenField, GreenSolver, GridOptions, Rect};
use crate::manifold::{local_chart, one_sided_test, zero_tolerance, ManifoldKind, OneSidedResult, Sidedness, DEFAULT_ORDER};
use crate::map::{Epsilon, Point2, PolyDiffeo};
use crate::periodic::{check_bounds, distinct_orbits, find_fixed_points_lenient, BoundsReport, PeriodicPoint, SolverOptions};
use crate::tangency::{scan_window, HuntOptions, IntersectionEvent, SaddleSelector, TangencyEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Inconclusive,
    Fail,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Inconclusive => "inconclusive",
            Status::Fail => "fail",
        }
    }

    /// Exit code of a command whose overall result is `self`.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }

    /// The worse of two statuses (fail > inconclusive > pass).
    pub fn and(self, other: Status) -> Status {
        self.max(other)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub n: usize,
    pub expected: u64,
    pub real: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntropyCheck {
    pub status: Status,
    pub rows: Vec<CountRow>,
    /// First failure message, if any.
    pub witness: Option<String>,
    pub max_residual: f64,
}

/// Census of fixed points of `fⁿ` for `n = 1..=n_max`, returning the check
/// and all real points found (for the bounds table).
pub fn maxent_check(f: &PolyDiffeo, n_max: usize) -> (MaxEntropyCheck, Vec<PeriodicPoint>) {
    let d = f.degree() as u64;
    let opts = SolverOptions::default();
    let mut rows = Vec::new();
    let mut all = Vec::new();
    let mut witness = None;
    let mut max_residual: f64 = 0.0;
    for n in 1..=n_max.max(1) {
        let expected = d.pow(n as u32);
        match find_fixed_points_lenient(f, n, &opts) {
            Ok((pts, failures)) => {
                if witness.is_none() {
                    if let Some(e) = failures.first() {
                        witness = Some(format!("n = {n}: {e}"));
                    } else if pts.len() as u64 != expected {
                        witness = Some(format!("n = {n}: {} real points, expected {expected}", pts.len()));
                    }
                }
                for p in &pts {
                    max_residual = max_residual.max(p.residual);
                }
                rows.push(CountRow {
                    n,
                    expected,
                    real: pts.len(),
                    failures: failures.len(),
                });
                all.extend(pts);
            }
            Err(e) => {
                witness.get_or_insert_with(|| format!("n = {n}: {e}"));
                rows.push(CountRow {
                    n,
                    expected,
                    real: 0,
                    failures: expected as usize,
                });
            }
        }
    }
    let pass = rows.iter().all(|r| r.real as u64 == r.expected && r.failures == 0);
    (
        MaxEntropyCheck {
            status: if pass { Status::Pass } else { Status::Fail },
            rows,
            witness,
            max_residual,
        },
        all,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsCheck {
    pub status: Status,
    pub report: BoundsReport,
    pub min_margin: f64,
    pub witness: Option<String>,
}

pub fn bounds_check(points: &[PeriodicPoint], d: usize) -> BoundsCheck {
    let report = check_bounds(points, d);
    let witness = report.violations().next().map(|e| format!("orbit {} (period {}): λu = {}, λs = {}", e.code, e.least_period, e.lambda_u, e.lambda_s));
    BoundsCheck {
        status: if witness.is_none() { Status::Pass } else { Status::Fail },
        min_margin: report.min_margin(),
        report,
        witness,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSidedRow {
    pub code: String,
    pub least_period: usize,
    pub point: Point2,
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub unstable: OneSidedResult,
    pub stable: OneSidedResult,
}

impl OneSidedRow {
    pub fn u_one_sided(&self) -> bool {
        self.unstable.verdict.is_one_sided()
    }

    pub fn s_one_sided(&self) -> bool {
        self.stable.verdict.is_one_sided()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSidedTable {
    pub status: Status,
    pub eta: f64,
    pub rows: Vec<OneSidedRow>,
    /// The pattern that was asserted.
    pub pattern: String,
    pub witness: Option<String>,
}

/// One-sidedness of both manifolds at every orbit of period 1 and 2.
pub fn one_sided_table(f: &PolyDiffeo) -> OneSidedTable {
    let fail = |pattern: &str, w: String| OneSidedTable {
        status: Status::Inconclusive,
        eta: f64::NAN,
        rows: Vec::new(),
        pattern: pattern.to_string(),
        witness: Some(w),
    };
    let solver = match GreenSolver::new(f) {
        Ok(s) => s.with_n_max(300),
        Err(e) => return fail("", e.to_string()),
    };
    let eta = zero_tolerance(f, &solver, 1e-9);
    let mut orbits: Vec<PeriodicPoint> = Vec::new();
    for n in 1..=2 {
        match find_fixed_points_lenient(f, n, &SolverOptions::default()) {
            Ok((pts, _)) => orbits.extend(distinct_orbits(&pts).into_iter().filter(|p| p.least_period == n).cloned()),
            Err(e) => return fail("", e.to_string()),
        }
    }
    let rows: Vec<Result<OneSidedRow, String>> = orbits
        .par_iter()
        .map(|p| {
            let test = |kind| -> Result<OneSidedResult, String> {
                let c = local_chart(f, p, kind, DEFAULT_ORDER).map_err(|e| format!("{}: {e}", p.code))?;
                one_sided_test(&c, &solver, 0.0, eta).map_err(|e| format!("{}: {e}", p.code))
            };
            Ok(OneSidedRow {
                code: p.code.to_string(),
                least_period: p.least_period,
                point: p.point,
                lambda_u: p.lambda_u,
                lambda_s: p.lambda_s,
                unstable: test(ManifoldKind::Unstable)?,
                stable: test(ManifoldKind::Stable)?,
            })
        })
        .collect();
    let rows = match rows.into_iter().collect::<Result<Vec<_>, _>>() {
        Ok(r) => r,
        Err(e) => return fail("", e),
    };

    let quadratic = f.degree() == 2;
    let preserving = f.orientation() > 0;
    let pattern = if quadratic && preserving {
        "exactly one doubly one-sided point, the non-flipping fixed point"
    } else if quadratic {
        "one u-one-sided and one s-one-sided fixed point, nothing else one-sided"
    } else if f.degree() % 2 == 1 && f.epsilon() == Epsilon::Minus {
        "one-sided points have positive multiplier; u-one-sided points have period 2"
    } else {
        "one-sided points have positive multiplier"
    };

    let mut witness = None;
    let mut status = Status::Pass;
    if let Some(r) = rows.iter().find(|r| r.unstable.verdict == Sidedness::Inconclusive || r.stable.verdict == Sidedness::Inconclusive) {
        status = Status::Inconclusive;
        witness = Some(format!("orbit {}: neither branch met K in the examined range", r.code));
    }
    let mut violation = |w: String| {
        if status != Status::Fail {
            status = Status::Fail;
            witness = Some(w);
        }
    };
    for r in &rows {
        if r.u_one_sided() && r.lambda_u < 0.0 {
            violation(format!("orbit {} is u-one-sided with λu = {}", r.code, r.lambda_u));
        }
        if r.s_one_sided() && r.lambda_s < 0.0 {
            violation(format!("orbit {} is s-one-sided with λs = {}", r.code, r.lambda_s));
        }
    }
    if quadratic && preserving {
        for r in &rows {
            let expected = r.least_period == 1 && r.lambda_u > 0.0 && r.lambda_s > 0.0;
            let doubly = r.u_one_sided() && r.s_one_sided();
            if expected && !doubly {
                violation(format!("non-flipping fixed point {} is not doubly one-sided", r.code));
            }
            if !expected && (r.u_one_sided() || r.s_one_sided()) {
                violation(format!("orbit {} is one-sided", r.code));
            }
        }
    } else if quadratic {
        let u: Vec<&OneSidedRow> = rows.iter().filter(|r| r.u_one_sided()).collect();
        let s: Vec<&OneSidedRow> = rows.iter().filter(|r| r.s_one_sided()).collect();
        if u.len() != 1 || s.len() != 1 || u[0].least_period != 1 || s[0].least_period != 1 || u[0].code == s[0].code {
            violation(format!("{} u-one-sided and {} s-one-sided orbits", u.len(), s.len()));
        }
    } else if f.degree() % 2 == 1 && f.epsilon() == Epsilon::Minus {
        if let Some(r) = rows.iter().find(|r| r.u_one_sided() && r.least_period != 2) {
            violation(format!("u-one-sided orbit {} has period {}", r.code, r.least_period));
        }
    }
    OneSidedTable {
        status,
        eta,
        rows,
        pattern: pattern.to_string(),
        witness,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorLevel {
    pub resolution: usize,
    pub cell_size: f64,
    pub k_cells: usize,
    pub undecided: usize,
    pub components: usize,
    /// Largest centre-to-centre distance within a component.
    pub max_diameter: f64,
    pub max_diameter_cells: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorCheck {
    pub status: Status,
    pub levels: Vec<CantorLevel>,
    /// Whether the two fixed points lie in different components at the
    /// finest level (quadratic maps only).
    pub fixed_points_separated: Option<bool>,
    pub kplus_interior: InteriorCheck,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorCheck {
    pub status: Status,
    /// Forward-bounded cells checked and how many lacked a nearby
    /// non-forward-bounded cell at the next level.
    pub checked: usize,
    pub interior: usize,
    pub witness: Option<Point2>,
}

/// 8-connected components of the cells with class `K`, as lists of indices.
pub fn k_components(g: &GreenField) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; g.classes.len()];
    let mut comps = Vec::new();
    for start in 0..g.classes.len() {
        if g.classes[start] != CellClass::K || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut comp = vec![start];
        label[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            let (i, j) = ((c % g.nx) as isize, (c / g.nx) as isize);
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (ni, nj) = (i + di, j + dj);
                    if ni < 0 || nj < 0 || ni >= g.nx as isize || nj >= g.ny as isize {
                        continue;
                    }
                    let n = nj as usize * g.nx + ni as usize;
                    if g.classes[n] == CellClass::K && label[n] == usize::MAX {
                        label[n] = id;
                        comp.push(n);
                        queue.push_back(n);
                    }
                }
            }
        }
        comps.push(comp);
    }
    comps
}

fn diameter(g: &GreenField, comp: &[usize]) -> f64 {
    let pts: Vec<Point2> = comp.iter().map(|&c| g.center(c % g.nx, c / g.nx)).collect();
    let mut best: f64 = 0.0;
    for i in 0..pts.len() {
        for q in &pts[i + 1..] {
            best = best.max(pts[i].dist(q));
        }
    }
    best
}

/// Whether each forward-bounded cell of `coarse` has a cell of `fine` that is
/// not forward bounded within `4 ×` the coarse cell size.
pub fn kplus_interior_check(coarse: &GreenField, fine: &GreenField) -> InteriorCheck {
    let (h, _) = coarse.cell_size();
    let (fh, _) = fine.cell_size();
    let reach = (4.0 * h / fh).ceil() as isize;
    let mut checked = 0;
    let mut interior = 0;
    let mut witness = None;
    for j in 0..coarse.ny {
        for i in 0..coarse.nx {
            if !coarse.class_at(i, j).forward_bounded() {
                continue;
            }
            checked += 1;
            let c = coarse.center(i, j);
            let Some((fi, fj)) = fine.locate(&c) else { continue };
            let mut found = false;
            'search: for dj in -reach..=reach {
                for di in -reach..=reach {
                    let (ni, nj) = (fi as isize + di, fj as isize + dj);
                    if ni < 0 || nj < 0 || ni >= fine.nx as isize || nj >= fine.ny as isize {
                        // outside the grid is outside V, hence escaping
                        found = true;
                        break 'search;
                    }
                    let cls = fine.class_at(ni as usize, nj as usize);
                    if matches!(cls, CellClass::KMinus | CellClass::EscapesBoth) && fine.center(ni as usize, nj as usize).dist(&c) <= 4.0 * h {
                        found = true;
                        break 'search;
                    }
                }
            }
            if !found {
                interior += 1;
                witness.get_or_insert(c);
            }
        }
    }
    InteriorCheck {
        status: if interior == 0 { Status::Pass } else { Status::Fail },
        checked,
        interior,
        witness,
    }
}

/// Connected components of `K` at the given grid resolutions of the
/// filtration box (coarsest first).
pub fn cantor_check(f: &PolyDiffeo, resolutions: &[usize]) -> CantorCheck {
    let empty_interior = InteriorCheck {
        status: Status::Inconclusive,
        checked: 0,
        interior: 0,
        witness: None,
    };
    let rect: Rect = match filtration_radius(f) {
        Ok(filt) => filt.rect(),
        Err(e) => {
            return CantorCheck {
                status: Status::Inconclusive,
                levels: Vec::new(),
                fixed_points_separated: None,
                kplus_interior: empty_interior,
                witness: Some(e.to_string()),
            }
        }
    };
    let mut fields = Vec::new();
    for &res in resolutions {
        let opts = GridOptions {
            resolution: res,
            ..Default::default()
        };
        match classify_grid(f, rect, &opts) {
            Ok(g) => fields.push(g),
            Err(e) => {
                return CantorCheck {
                    status: Status::Inconclusive,
                    levels: Vec::new(),
                    fixed_points_separated: None,
                    kplus_interior: empty_interior,
                    witness: Some(e.to_string()),
                }
            }
        }
    }
    let mut levels = Vec::new();
    let mut status = Status::Pass;
    let mut witness = None;
    let mut last_comps = Vec::new();
    for g in &fields {
        let comps = k_components(g);
        let (h, _) = g.cell_size();
        let dmax = comps.par_iter().map(|c| diameter(g, c)).reduce(|| 0.0, f64::max);
        let undecided = g.count(CellClass::Undecided);
        if undecided as f64 > 1e-3 * g.classes.len() as f64 {
            status = status.and(Status::Inconclusive);
            witness.get_or_insert_with(|| format!("{undecided} undecided cells at resolution {}", g.nx));
        }
        levels.push(CantorLevel {
            resolution: g.nx,
            cell_size: h,
            k_cells: g.count(CellClass::K),
            undecided,
            components: comps.len(),
            max_diameter: dmax,
            max_diameter_cells: dmax / h,
        });
        last_comps = comps;
    }
    for w in levels.windows(2) {
        if !(w[1].max_diameter < w[0].max_diameter) {
            status = Status::Fail;
            witness = Some(format!("diameter {} at resolution {} does not decrease from {} at {}", w[1].max_diameter, w[1].resolution, w[0].max_diameter, w[0].resolution));
        }
    }
    if let Some(last) = levels.last() {
        if !(last.max_diameter_cells < 10.0) {
            status = Status::Fail;
            witness = Some(format!("finest component diameter is {:.2} cells", last.max_diameter_cells));
        }
    }
    let fixed_points_separated = fields.last().and_then(|g| {
        let (pts, _) = find_fixed_points_lenient(f, 1, &SolverOptions::default()).ok()?;
        let comp_of = |p: &Point2| -> Option<usize> {
            let (i, j) = g.locate(p)?;
            let idx = j * g.nx + i;
            last_comps.iter().position(|c| c.contains(&idx))
        };
        let ids: Vec<Option<usize>> = pts.iter().map(|p| comp_of(&p.point)).collect();
        (ids.len() == 2).then(|| ids[0].is_none() || ids[1].is_none() || ids[0] != ids[1])
    });
    let kplus_interior = match fields.len() {
        0 | 1 => empty_interior,
        n => {
            let mut agg = kplus_interior_check(&fields[n - 2], &fields[n - 1]);
            for w in fields.windows(2).take(n - 2) {
                let c = kplus_interior_check(&w[0], &w[1]);
                agg.checked += c.checked;
                agg.interior += c.interior;
                agg.witness = agg.witness.or(c.witness);
            }
            agg.status = if agg.interior == 0 { Status::Pass } else { Status::Fail };
            agg
        }
    };
    CantorCheck {
        status,
        levels,
        fixed_points_separated,
        kplus_interior,
        witness,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlamRow {
    pub n: usize,
    pub count: usize,
    /// `|Dfⁿ|` at each root, in increasing order of the root.
    pub roots: Vec<f64>,
    pub derivatives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlamCheck {
    pub status: Status,
    pub rows: Vec<UlamRow>,
    pub witness: Option<String>,
}

fn ulam_iter(x: f64, n: usize) -> (f64, f64) {
    let (mut y, mut dy) = (x, 1.0);
    for _ in 0..n {
        dy *= -2.0 * y;
        y = 2.0 - y * y;
    }
    (y, dy)
}

/// Real fixed points of `fⁿ` for `f(x) = 2 − x²`: with `x = −2 cos θ` the map
/// doubles `θ`, so the roots are `θ = 2πk/(2ⁿ ∓ 1)` in `[0, π]`, polished by
/// Newton on `fⁿ(x) − x`.
pub fn ulam_roots(n: usize) -> Vec<f64> {
    let m = 1u64 << n;
    let mut roots = Vec::new();
    for q in [m - 1, m + 1] {
        for k in 0..=q / 2 {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / q as f64;
            if theta > std::f64::consts::PI + 1e-15 {
                continue;
            }
            let mut x = -2.0 * theta.cos();
            for _ in 0..4 {
                let (y, dy) = ulam_iter(x, n);
                if (dy - 1.0).abs() < 1e-300 {
                    break;
                }
                let step = (y - x) / (dy - 1.0);
                if step.abs() > 1e-6 {
                    break;
                }
                x -= step;
            }
            roots.push(x);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    roots
}

/// Periodic points of the Chebyshev map have `|Dfⁿ| = 2ⁿ`, except the fixed
/// point `−2` where `|Df| = 4`.
pub fn ulam_oracle(n_max: usize) -> UlamCheck {
    let mut rows = Vec::new();
    let mut witness = None;
    for n in 1..=n_max {
        let roots = ulam_roots(n);
        let derivatives: Vec<f64> = roots.iter().map(|&x| ulam_iter(x, n).1.abs()).collect();
        let expect_count = 1usize << n;
        if roots.len() != expect_count {
            witness.get_or_insert_with(|| format!("n = {n}: {} roots, expected {expect_count}", roots.len()));
        }
        for (&x, &dv) in roots.iter().zip(&derivatives) {
            let expected = if (x + 2.0).abs() < 1e-12 { 4f64.powi(n as i32) } else { 2f64.powi(n as i32) };
            if (dv - expected).abs() > 1e-9 * expected {
                witness.get_or_insert_with(|| format!("n = {n}: |Df^n({x})| = {dv}, expected {expected}"));
            }
        }
        rows.push(UlamRow {
            n,
            count: roots.len(),
            roots,
            derivatives,
        });
    }
    UlamCheck {
        status: if witness.is_none() { Status::Pass } else { Status::Fail },
        rows,
        witness,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyCheck {
    pub status: Status,
    pub window: Rect,
    pub transverse: usize,
    pub tangencies: Vec<TangencyEvent>,
    /// Tangential contacts with indistinguishable curvatures.
    pub degenerate: Vec<IntersectionEvent>,
    pub witness: Option<String>,
}

/// Contacts of the stable and unstable manifolds of the non-flipping fixed
/// point inside the filtration box.
pub fn tangency_check(f: &PolyDiffeo) -> TangencyCheck {
    let window = match filtration_radius(f) {
        Ok(r) => r.rect(),
        Err(e) => {
            return TangencyCheck {
                status: Status::Inconclusive,
                window: Rect::new(0.0, 0.0, 0.0, 0.0),
                transverse: 0,
                tangencies: Vec::new(),
                degenerate: Vec::new(),
                witness: Some(e.to_string()),
            }
        }
    };
    match scan_window(f, &SaddleSelector::Plus, &window, NEAR_GAP, &HuntOptions::default()) {
        Ok(s) => TangencyCheck {
            status: if s.degenerate.is_empty() { Status::Pass } else { Status::Inconclusive },
            window,
            transverse: s.transverse.len(),
            witness: s.degenerate.first().map(|e| format!("degenerate contact at ({}, {})", e.point.x, e.point.y)),
            tangencies: s.tangencies,
            degenerate: s.degenerate,
        },
        Err(e) => TangencyCheck {
            status: Status::Inconclusive,
            window,
            transverse: 0,
            tangencies: Vec::new(),
            degenerate: Vec::new(),
            witness: Some(e.to_string()),
        },
    }
}

/// Gap below which a parallel close approach of the manifolds is reported as
/// a tangency.
pub const NEAR_GAP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub period_max: usize,
    pub ulam_max: usize,
    pub cantor_resolutions: Vec<usize>,
    pub one_sided: bool,
    pub cantor: bool,
    pub tangency: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            period_max: 10,
            ulam_max: 8,
            cantor_resolutions: vec![64, 128, 256, 512],
            one_sided: true,
            cantor: true,
            tangency: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub map: String,
    pub parameters: Option<(f64, f64)>,
    pub status: Status,
    pub label: String,
    pub ulam: UlamCheck,
    pub maxent: MaxEntropyCheck,
    pub bounds: BoundsCheck,
    pub one_sided: Option<OneSidedTable>,
    pub tangency: Option<TangencyCheck>,
    pub cantor: Option<CantorCheck>,
}

pub const LABEL_HYPERBOLIC: &str = "hyperbolic (evidence)";
pub const LABEL_NON_HYPERBOLIC: &str = "maximal entropy, non-hyperbolic";
pub const LABEL_NOT_MAXIMAL: &str = "not maximal entropy";
pub const LABEL_UNDETERMINED: &str = "maximal entropy, hyperbolicity undetermined";

/// Run every check. The one-sided, tangency and Cantor checks assume maximal
/// entropy and are skipped when the census fails.
pub fn verify(f: &PolyDiffeo, opts: &VerifyOptions) -> VerdictReport {
    let (ulam, (maxent, points)) = rayon::join(|| ulam_oracle(opts.ulam_max), || maxent_check(f, opts.period_max));
    let bounds = bounds_check(&points, f.degree());
    let maximal = maxent.status == Status::Pass;
    let (one_sided, (tangency, cantor)) = rayon::join(
        || (maximal && opts.one_sided).then(|| one_sided_table(f)),
        || {
            rayon::join(
                || (maximal && opts.tangency).then(|| tangency_check(f)),
                || (maximal && opts.cantor).then(|| cantor_check(f, &opts.cantor_resolutions)),
            )
        },
    );
    let mut status = ulam.status.and(maxent.status).and(bounds.status);
    for s in [
        one_sided.as_ref().map(|t| t.status),
        tangency.as_ref().map(|t| t.status),
        cantor.as_ref().map(|c| c.status.and(c.kplus_interior.status)),
    ]
    .into_iter()
    .flatten()
    {
        status = status.and(s);
    }
    let label = if !maximal {
        LABEL_NOT_MAXIMAL
    } else {
        match &tangency {
            Some(t) if t.status == Status::Pass && t.tangencies.is_empty() => LABEL_HYPERBOLIC,
            Some(t) if !t.tangencies.is_empty() => LABEL_NON_HYPERBOLIC,
            _ => LABEL_UNDETERMINED,
        }
    };
    VerdictReport {
        map: f.to_spec_string(),
        parameters: f.henon_params(),
        status,
        label: label.to_string(),
        ulam,
        maxent,
        bounds,
        one_sided,
        tangency,
        cantor,
    }
}

impl VerdictReport {
    /// Short human-readable summary, one check per line.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let mut line = |name: &str, st: Status, detail: String| {
            s.push_str(&format!("{name:<14} {:<13} {detail}\n", st.label()));
        };
        line("ulam", self.ulam.status, format!("n <= {}", self.ulam.rows.len()));
        let counts: Vec<String> = self.maxent.rows.iter().map(|r| r.real.to_string()).collect();
        line("max-entropy", self.maxent.status, format!("counts {}", counts.join(",")));
        line("bounds", self.bounds.status, format!("min margin {:.4}", self.bounds.min_margin));
        if let Some(t) = &self.one_sided {
            let doubly: Vec<&str> = t.rows.iter().filter(|r| r.u_one_sided() && r.s_one_sided()).map(|r| r.code.as_str()).collect();
            line("one-sided", t.status, format!("doubly one-sided: [{}]", doubly.join(", ")));
        }
        if let Some(t) = &self.tangency {
            line("tangency", t.status, format!("{} transverse, {} tangencies", t.transverse, t.tangencies.len()));
        }
        if let Some(c) = &self.cantor {
            let d: Vec<String> = c.levels.iter().map(|l| format!("{:.2}", l.max_diameter_cells)).collect();
            line("cantor", c.status, format!("diameters (cells) {}", d.join(", ")));
            line("k+ interior", c.kplus_interior.status, format!("{} cells checked", c.kplus_interior.checked));
        }
        s.push_str(&format!("verdict: {} ({})\n", self.label, self.status.label()));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::henon;

    #[test]
    fn ulam_small_periods() {
        let r = ulam_roots(1);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 2.0).abs() < 1e-15 && (r[1] - 1.0).abs() < 1e-15);
        let r2 = ulam_roots(2);
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        assert!(r2.iter().any(|x| (x - phi).abs() < 1e-14));
        assert!(r2.iter().any(|x| (x - (1.0 - phi)).abs() < 1e-14));
        assert_eq!(ulam_oracle(8).status, Status::Pass);
    }

    #[test]
    fn status_ordering() {
        assert_eq!(Status::Pass.and(Status::Inconclusive), Status::Inconclusive);
        assert_eq!(Status::Fail.and(Status::Inconclusive), Status::Fail);
        assert_eq!(Status::Inconclusive.exit_code(), 2);
    }

    #[test]
    fn small_a_fails_census() {
        let f = henon(0.5, 0.8).unwrap();
        let (c, _) = maxent_check(&f, 4);
        assert_eq!(c.status, Status::Fail);
        assert!(c.witness.is_some());
    }

    #[test]
    fn components_of_a_bitmap() {
        let mut g = GreenField {
            rect: Rect::new(0.0, 0.0, 4.0, 4.0),
            nx: 4,
            ny: 4,
            classes: vec![CellClass::EscapesBoth; 16],
            g_plus: None,
            g_minus: None,
        };
        for idx in [0, 5, 10, 3] {
            g.classes[idx] = CellClass::K;
        }
        let comps = k_components(&g);
        assert_eq!(comps.len(), 2);
        let big = comps.iter().find(|c| c.len() == 3).unwrap();
        assert!((diameter(&g, big) - 8f64.sqrt()).abs() < 1e-12);
    }
}
