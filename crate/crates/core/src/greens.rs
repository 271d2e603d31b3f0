//! Escape filtration, Green's functions `G±` and grid classification of
//! `K`, `K±`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::map::{Direction, Point2, PolyDiffeo};
use crate::scalar::{Interval, Scalar};

/// Forward orbits are declared escaping once `|y|` passes this (and `|y| >= |x|`).
pub const R_BIG: f64 = 1e8;
pub const DEFAULT_N_MAX: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GreensError {
    #[error("filtration validation failed after raising R to {0}")]
    FiltrationInvalid(f64),
    #[error("orbit neither escaped nor stayed in V within {0} iterations")]
    Undecided(usize),
    #[error("rectangle [{0}, {1}]x[{2}, {3}] is not inside the filtration box")]
    RectOutsideV(f64, f64, f64, f64),
    #[error("grid resolution must be positive")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    V,
    /// `|y| >= max(R, |x|)`, `y > 0`.
    VPlus1,
    /// `|y| >= max(R, |x|)`, `y < 0`.
    VPlus2,
    VMinus,
}

/// The boxes `V = [-R, R]²`, `V⁺`, `V⁻`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Filtration {
    pub radius: f64,
}

impl Filtration {
    pub fn region<S: Scalar>(&self, p: &Point2<S>) -> Region {
        let (ax, ay) = (p.x.magnitude(), p.y.magnitude());
        if ax <= self.radius && ay <= self.radius {
            Region::V
        } else if ay >= ax {
            // sign of y is only meaningful for real points
            Region::VPlus1
        } else {
            Region::VMinus
        }
    }

    pub fn region_real(&self, p: &Point2) -> Region {
        match self.region(p) {
            Region::VPlus1 if p.y < 0.0 => Region::VPlus2,
            r => r,
        }
    }

    pub fn in_v(&self, p: &Point2) -> bool {
        p.x.abs() <= self.radius && p.y.abs() <= self.radius
    }

    pub fn in_v_plus(&self, p: &Point2) -> bool {
        p.y.abs() >= self.radius.max(p.x.abs())
    }

    pub fn in_v_minus(&self, p: &Point2) -> bool {
        p.x.abs() >= self.radius.max(p.y.abs())
    }

    pub fn rect(&self) -> Rect {
        Rect::new(-self.radius, -self.radius, self.radius, self.radius)
    }
}

/// Smallest `R >= 1` with `lead R^d - Σ|c_i| R^i - slope R >= 0`; the
/// coefficient signs make this a single crossing.
fn growth_radius(coeffs: &[f64], slope: f64) -> f64 {
    let g = |r: f64| {
        let d = coeffs.len() - 1;
        let mut v = coeffs[d].abs() * r.powi(d as i32) - slope * r;
        for (i, c) in coeffs[..d].iter().enumerate() {
            v -= c.abs() * r.powi(i as i32);
        }
        v
    };
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    if g(lo) >= 0.0 {
        return lo.max(1.0);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.max(1.0)
}

/// Conservative filtration radius, checked on 10⁴ boundary samples.
pub fn filtration_radius(f: &PolyDiffeo) -> Result<Filtration, GreensError> {
    let mut r: f64 = 1.0;
    for factor in f.factors() {
        let a = factor.shear().abs();
        r = r.max(growth_radius(factor.coeffs(), 2.0 + a));
        r = r.max(growth_radius(factor.coeffs(), 1.0 + 2.0 * a));
    }
    for _ in 0..20 {
        let filt = Filtration { radius: r };
        if validate_filtration(f, &filt) {
            return Ok(filt);
        }
        r *= 1.25;
    }
    Err(GreensError::FiltrationInvalid(r))
}

/// Samples the boundary of `V⁺`/`V⁻` and the edges of `V`.
pub fn validate_filtration(f: &PolyDiffeo, filt: &Filtration) -> bool {
    let r = filt.radius;
    let n = 1250;
    let mut ok = true;
    for i in 0..=n {
        let t = -1.0 + 2.0 * i as f64 / n as f64;
        let s = 1.0 + 9.0 * i as f64 / n as f64;
        for sign in [-1.0, 1.0] {
            // V⁺ boundary: top/bottom edge and the diagonals
            let edge = Point2::new(t * r, sign * r);
            let diag = Point2::new(sign * s * r, s * r);
            let diag2 = Point2::new(sign * s * r, -s * r);
            for p in [edge, diag, diag2] {
                if let Ok(q) = f.eval_checked(&p) {
                    ok &= filt.in_v_plus(&q);
                }
            }
            // V ∪ V⁺ must not be mapped into the interior of V⁻
            let side = Point2::new(sign * r, t * r);
            if let Ok(q) = f.eval_checked(&side) {
                ok &= !(q.x.abs() > r.max(q.y.abs()));
            }
            // mirror statements for f^{-1}
            let vedge = Point2::new(sign * r, t * r);
            let vdiag = Point2::new(s * r, sign * s * r);
            let vdiag2 = Point2::new(-s * r, sign * s * r);
            for p in [vedge, vdiag, vdiag2] {
                if let Ok(q) = f.eval_inverse_checked(&p) {
                    ok &= filt.in_v_minus(&q);
                }
            }
            let top = Point2::new(t * r, sign * r);
            if let Ok(q) = f.eval_inverse_checked(&top) {
                ok &= !(q.y.abs() > r.max(q.x.abs()));
            }
        }
    }
    ok
}

/// Escape-rate evaluation for `G⁺` (forward) and `G⁻` (backward).
#[derive(Debug, Clone)]
pub struct GreenSolver {
    map: PolyDiffeo,
    filtration: Filtration,
    pub n_max: usize,
    pub tol: f64,
    gamma_plus: f64,
    gamma_minus: f64,
}

/// Result of one escape-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenValue {
    pub value: f64,
    /// Iterations until the escape test fired; `None` when the orbit stayed
    /// in `V` for `n_max` steps.
    pub escape_time: Option<usize>,
}

impl GreenSolver {
    pub fn new(map: &PolyDiffeo) -> Result<Self, GreensError> {
        let filtration = filtration_radius(map)?;
        Ok(Self::with_filtration(map, filtration))
    }

    pub fn with_filtration(map: &PolyDiffeo, filtration: Filtration) -> Self {
        GreenSolver {
            map: map.clone(),
            filtration,
            n_max: DEFAULT_N_MAX,
            tol: DEFAULT_TOL,
            gamma_plus: map.leading_log_growth(Direction::Forward),
            gamma_minus: map.leading_log_growth(Direction::Backward),
        }
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn map(&self) -> &PolyDiffeo {
        &self.map
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn green_plus<S: Scalar>(&self, p: &Point2<S>) -> Result<f64, GreensError> {
        self.evaluate(p, Direction::Forward).map(|g| g.value)
    }

    pub fn green_minus<S: Scalar>(&self, p: &Point2<S>) -> Result<f64, GreensError> {
        self.evaluate(p, Direction::Backward).map(|g| g.value)
    }

    /// `d^{-n} (log|w_n| + γ/(d-1))` where `w` is the dominant coordinate
    /// and `γ` the leading-coefficient growth, which removes the
    /// `d^{-n}`-order bias of the plain `log⁺` quotient.
    pub fn evaluate<S: Scalar>(&self, p: &Point2<S>, dir: Direction) -> Result<GreenValue, GreensError> {
        let d = self.map.degree() as f64;
        let gamma = match dir {
            Direction::Forward => self.gamma_plus,
            Direction::Backward => self.gamma_minus,
        };
        let dominant = |q: &Point2<S>| -> (f64, f64) {
            match dir {
                Direction::Forward => (q.y.magnitude(), q.x.magnitude()),
                Direction::Backward => (q.x.magnitude(), q.y.magnitude()),
            }
        };
        let r = self.filtration.radius;
        let mut q = p.clone();
        for n in 0..=self.n_max {
            let (big, small) = dominant(&q);
            if !big.is_finite() || !small.is_finite() {
                return Ok(GreenValue {
                    value: f64::INFINITY,
                    escape_time: Some(n),
                });
            }
            if big > R_BIG && big >= small {
                // push further out while the neglected lower-order terms
                // could still exceed the tolerance
                let mut n = n;
                let mut big = big;
                let mut small = small;
                for _ in 0..4 {
                    let tail = (small / big + 1.0 / big) / d.powi(n as i32);
                    if tail < self.tol || big > 1e30 {
                        break;
                    }
                    q = self.map.step(&q, dir);
                    let (b2, s2) = dominant(&q);
                    big = b2;
                    small = s2;
                    n += 1;
                }
                let value = (big.ln() + gamma / (d - 1.0)) / d.powi(n as i32);
                return Ok(GreenValue {
                    value: value.max(0.0),
                    escape_time: Some(n),
                });
            }
            if n == self.n_max {
                break;
            }
            q = self.map.step(&q, dir);
        }
        let (big, small) = dominant(&q);
        if big <= r && small <= r {
            Ok(GreenValue {
                value: 0.0,
                escape_time: None,
            })
        } else {
            Err(GreensError::Undecided(self.n_max))
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect {
            x0: x0.min(x1),
            y0: y0.min(y1),
            x1: x0.max(x1),
            y1: y0.max(y1),
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn inflate(&self, m: f64) -> Rect {
        Rect::new(self.x0 - m, self.y0 - m, self.x1 + m, self.y1 + m)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellClass {
    /// Bounded in both time directions.
    K,
    /// Forward bounded only (`K⁺ ∖ K`).
    KPlus,
    /// Backward bounded only (`K⁻ ∖ K`).
    KMinus,
    EscapesBoth,
    Undecided,
}

impl CellClass {
    pub fn code(self) -> char {
        match self {
            CellClass::K => 'K',
            CellClass::KPlus => 'P',
            CellClass::KMinus => 'M',
            CellClass::EscapesBoth => 'E',
            CellClass::Undecided => 'U',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        Some(match c {
            'K' => CellClass::K,
            'P' => CellClass::KPlus,
            'M' => CellClass::KMinus,
            'E' => CellClass::EscapesBoth,
            'U' => CellClass::Undecided,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            CellClass::K => "K",
            CellClass::KPlus => "K+\\K",
            CellClass::KMinus => "K-\\K",
            CellClass::EscapesBoth => "escapes",
            CellClass::Undecided => "undecided",
        }
    }

    pub fn forward_bounded(self) -> bool {
        matches!(self, CellClass::K | CellClass::KPlus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Cells per side of `rect`.
    pub resolution: usize,
    /// Cap on pruning rounds; cells surviving this many rounds are bounded.
    pub n_max: usize,
    /// Each cell is split into `oversample²` sub-cells for image enclosures.
    pub oversample: usize,
    /// Also evaluate `G±` at cell centres.
    pub with_green: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            resolution: 128,
            n_max: DEFAULT_N_MAX,
            oversample: 4,
            with_green: false,
        }
    }
}

/// Classification of a rectangular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenField {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    /// Row-major with `index = j * nx + i`, `j` counting up in `y`.
    pub classes: Vec<CellClass>,
    pub g_plus: Option<Vec<f64>>,
    pub g_minus: Option<Vec<f64>>,
}

impl GreenField {
    pub fn cell_size(&self) -> (f64, f64) {
        (self.rect.width() / self.nx as f64, self.rect.height() / self.ny as f64)
    }

    pub fn center(&self, i: usize, j: usize) -> Point2 {
        let (hx, hy) = self.cell_size();
        Point2::new(self.rect.x0 + (i as f64 + 0.5) * hx, self.rect.y0 + (j as f64 + 0.5) * hy)
    }

    pub fn class_at(&self, i: usize, j: usize) -> CellClass {
        self.classes[j * self.nx + i]
    }

    /// Cell containing `p`, if inside the grid.
    pub fn locate(&self, p: &Point2) -> Option<(usize, usize)> {
        if !self.rect.contains(p) {
            return None;
        }
        let (hx, hy) = self.cell_size();
        let i = (((p.x - self.rect.x0) / hx) as usize).min(self.nx - 1);
        let j = (((p.y - self.rect.y0) / hy) as usize).min(self.ny - 1);
        Some((i, j))
    }

    pub fn count(&self, class: CellClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,Gplus,Gminus,class\n");
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = self.center(i, j);
                let k = j * self.nx + i;
                let gp = self.g_plus.as_ref().map(|g| g[k].to_string()).unwrap_or_default();
                let gm = self.g_minus.as_ref().map(|g| g[k].to_string()).unwrap_or_default();
                let _ = writeln!(s, "{},{},{},{},{}", c.x, c.y, gp, gm, self.classes[k].label());
            }
        }
        s
    }

    /// Run-length text encoding, one line per grid row (bottom row first).
    pub fn to_rle(&self) -> String {
        let r = &self.rect;
        let mut s = format!(
            "# greenfield-rle v1\nrect {} {} {} {}\nsize {} {}\n",
            r.x0, r.y0, r.x1, r.y1, self.nx, self.ny
        );
        for j in 0..self.ny {
            let row = &self.classes[j * self.nx..(j + 1) * self.nx];
            let mut parts = Vec::new();
            let mut start = 0;
            while start < row.len() {
                let mut end = start;
                while end < row.len() && row[end] == row[start] {
                    end += 1;
                }
                parts.push(format!("{}{}", end - start, row[start].code()));
                start = end;
            }
            let _ = writeln!(s, "{}", parts.join(" "));
        }
        s
    }

    pub fn from_rle(text: &str) -> Option<GreenField> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let rect: Vec<f64> = lines.next()?.strip_prefix("rect ")?.split(' ').map(|v| v.parse().ok()).collect::<Option<_>>()?;
        let size: Vec<usize> = lines.next()?.strip_prefix("size ")?.split(' ').map(|v| v.parse().ok()).collect::<Option<_>>()?;
        if rect.len() != 4 || size.len() != 2 {
            return None;
        }
        let (nx, ny) = (size[0], size[1]);
        let mut classes = Vec::with_capacity(nx * ny);
        for _ in 0..ny {
            let line = lines.next()?;
            let before = classes.len();
            for run in line.split_whitespace() {
                let code = run.chars().last()?;
                let count: usize = run[..run.len() - 1].parse().ok()?;
                classes.extend(std::iter::repeat_n(CellClass::from_code(code)?, count));
            }
            if classes.len() - before != nx {
                return None;
            }
        }
        Some(GreenField {
            rect: Rect::new(rect[0], rect[1], rect[2], rect[3]),
            nx,
            ny,
            classes,
            g_plus: None,
            g_minus: None,
        })
    }
}

/// Index range of grid cells overlapping an interval, or `None`.
fn cell_range(iv: Interval, origin: f64, h: f64, n: usize) -> Option<(usize, usize)> {
    if !iv.lo.is_finite() || !iv.hi.is_finite() {
        return None;
    }
    let lo = ((iv.lo - origin) / h).floor();
    let hi = ((iv.hi - origin) / h).floor();
    if hi < 0.0 || lo > (n - 1) as f64 {
        return None;
    }
    Some((lo.max(0.0) as usize, hi.min((n - 1) as f64) as usize))
}

struct CellGraph<'a> {
    map: &'a PolyDiffeo,
    rect: Rect,
    n: usize,
    h: (f64, f64),
}

impl CellGraph<'_> {
    fn image(&self, idx: usize, dir: Direction) -> Option<[usize; 4]> {
        let (i, j) = (idx % self.n, idx / self.n);
        let x = Interval::new(self.rect.x0 + i as f64 * self.h.0, self.rect.x0 + (i + 1) as f64 * self.h.0);
        let y = Interval::new(self.rect.y0 + j as f64 * self.h.1, self.rect.y0 + (j + 1) as f64 * self.h.1);
        let q = self.map.step(&Point2::new(x, y), dir);
        let (i0, i1) = cell_range(q.x, self.rect.x0, self.h.0, self.n)?;
        let (j0, j1) = cell_range(q.y, self.rect.y0, self.h.1, self.n)?;
        Some([i0, i1, j0, j1])
    }

    /// Repeatedly drop cells whose image (in each listed direction) meets no
    /// surviving cell. Returns the round at which each cell died
    /// (`usize::MAX` for survivors of `cap` rounds).
    fn prune(&self, dirs: &[Direction], cap: usize) -> Vec<usize> {
        let n = self.n;
        let mut death = vec![usize::MAX; n * n];
        let images: Vec<Vec<Option<[usize; 4]>>> = dirs
            .iter()
            .map(|&d| (0..n * n).into_par_iter().map(|c| self.image(c, d)).collect())
            .collect();
        let mut alive: Vec<usize> = (0..n * n).collect();
        let mut prefix = vec![0u32; (n + 1) * (n + 1)];
        for round in 1..=cap {
            // 2-D prefix sums of the alive indicator
            prefix.iter_mut().for_each(|v| *v = 0);
            for &c in &alive {
                prefix[(c / n + 1) * (n + 1) + c % n + 1] = 1;
            }
            for j in 1..=n {
                for i in 1..=n {
                    let k = j * (n + 1) + i;
                    prefix[k] += prefix[k - 1] + prefix[k - (n + 1)] - prefix[k - (n + 1) - 1];
                }
            }
            let count = |b: &[usize; 4]| {
                let [i0, i1, j0, j1] = *b;
                let at = |i: usize, j: usize| prefix[j * (n + 1) + i] as i64;
                at(i1 + 1, j1 + 1) - at(i0, j1 + 1) - at(i1 + 1, j0) + at(i0, j0)
            };
            let keep: Vec<bool> = alive
                .par_iter()
                .map(|&c| images.iter().all(|imgs| imgs[c].as_ref().map(|b| count(b) > 0).unwrap_or(false)))
                .collect();
            let before = alive.len();
            let mut next = Vec::with_capacity(before);
            for (&c, k) in alive.iter().zip(keep) {
                if k {
                    next.push(c);
                } else {
                    death[c] = round;
                }
            }
            alive = next;
            if alive.len() == before {
                break;
            }
        }
        death
    }
}

/// Classify cells of `rect` by combinatorial forward/backward boundedness.
///
/// Each cell's image under `f^{±1}` is enclosed by interval evaluation; a cell
/// is forward bounded at depth `N` when it starts a chain of `N` cells whose
/// successive images meet. The computation runs on a grid refined by
/// `oversample` and is projected back: a coarse cell takes the strongest class
/// of its sub-cells.
pub fn classify_grid(f: &PolyDiffeo, rect: Rect, opts: &GridOptions) -> Result<GreenField, GreensError> {
    if opts.resolution == 0 || opts.oversample == 0 {
        return Err(GreensError::EmptyGrid);
    }
    let filt = filtration_radius(f)?;
    if !filt.rect().inflate(1e-12).contains_rect(&rect) {
        return Err(GreensError::RectOutsideV(rect.x0, rect.x1, rect.y0, rect.y1));
    }
    let n = opts.resolution * opts.oversample;
    let graph = CellGraph {
        map: f,
        rect,
        n,
        h: (rect.width() / n as f64, rect.height() / n as f64),
    };
    // pruning normally stabilizes in a handful of rounds; the extra rounds
    // past n_max only serve to flag undecided cells
    let cap = opts.n_max.saturating_mul(4).max(opts.n_max + 1);
    let fwd = graph.prune(&[Direction::Forward], cap);
    let bwd = graph.prune(&[Direction::Backward], cap);
    let both = graph.prune(&[Direction::Forward, Direction::Backward], cap);

    let bounded = |death: usize| death > opts.n_max;
    let undecided = |death: usize| death > opts.n_max && death != usize::MAX;
    let fine: Vec<CellClass> = (0..n * n)
        .map(|c| {
            if undecided(fwd[c]) || undecided(bwd[c]) || undecided(both[c]) {
                CellClass::Undecided
            } else if bounded(both[c]) {
                CellClass::K
            } else if bounded(fwd[c]) {
                CellClass::KPlus
            } else if bounded(bwd[c]) {
                CellClass::KMinus
            } else {
                CellClass::EscapesBoth
            }
        })
        .collect();

    let m = opts.resolution;
    let s = opts.oversample;
    let rank = |c: CellClass| match c {
        CellClass::Undecided => 4,
        CellClass::K => 3,
        CellClass::KPlus => 2,
        CellClass::KMinus => 1,
        CellClass::EscapesBoth => 0,
    };
    let mut classes = vec![CellClass::EscapesBoth; m * m];
    for j in 0..m {
        for i in 0..m {
            let mut best = CellClass::EscapesBoth;
            for dj in 0..s {
                for di in 0..s {
                    let c = fine[(j * s + dj) * n + i * s + di];
                    if rank(c) > rank(best) {
                        best = c;
                    }
                }
            }
            classes[j * m + i] = best;
        }
    }

    let mut field = GreenField {
        rect,
        nx: m,
        ny: m,
        classes,
        g_plus: None,
        g_minus: None,
    };
    if opts.with_green {
        let solver = GreenSolver::with_filtration(f, filt).with_n_max(opts.n_max);
        let centers: Vec<Point2> = (0..m * m).map(|k| field.center(k % m, k / m)).collect();
        let gp = centers.par_iter().map(|p| solver.green_plus(p).unwrap_or(f64::NAN)).collect();
        let gm = centers.par_iter().map(|p| solver.green_minus(p).unwrap_or(f64::NAN)).collect();
        field.g_plus = Some(gp);
        field.g_minus = Some(gm);
    }
    Ok(field)
}
