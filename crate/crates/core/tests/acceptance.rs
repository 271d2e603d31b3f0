//! Acceptance criteria, one line per criterion. Oracles here are written from
//! scratch against the plain formulas and do not call into the code they
//! check, except to obtain the object under test.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saddlescope::app::{run, Command, RunConfig};
use saddlescope::greens::{filtration_radius, CellClass, GreenSolver};
use saddlescope::manifold::{local_chart, normalize, one_sided_test, trace, zero_tolerance, ManifoldChart, ManifoldKind, Sidedness, StepControl, DEFAULT_ORDER, SADDLE_EXCLUSION};
use saddlescope::map::{henon, Point2};
use saddlescope::periodic::{check_bounds, find_fixed_points, select_fixed_point, SolverOptions};
use saddlescope::tangency::{hunt_boundary, HuntOptions, SaddleSelector};
use saddlescope::verify::{cantor_check, maxent_check, tangency_check, ulam_oracle, Status};

const A: f64 = 6.0;
const B: f64 = 0.8;
const A_REF: f64 = 4.64339843;

// ---------------------------------------------------------------- oracles

/// `(x, y) ↦ (y, y² − a − b x)`.
fn fwd(a: f64, b: f64, p: [f64; 2]) -> [f64; 2] {
    [p[1], p[1] * p[1] - a - b * p[0]]
}

fn inv(a: f64, b: f64, p: [f64; 2]) -> [f64; 2] {
    [(p[0] * p[0] - a - p[1]) / b, p[0]]
}

fn jac(b: f64, p: [f64; 2]) -> [[f64; 2]; 2] {
    [[0.0, 1.0], [-b, 2.0 * p[1]]]
}

fn mul(m: [[f64; 2]; 2], n: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [m[0][0] * n[0][0] + m[0][1] * n[1][0], m[0][0] * n[0][1] + m[0][1] * n[1][1]],
        [m[1][0] * n[0][0] + m[1][1] * n[1][0], m[1][0] * n[0][1] + m[1][1] * n[1][1]],
    ]
}

/// Real eigenvalues of a 2×2 matrix, larger modulus first.
fn eig2(m: [[f64; 2]; 2]) -> Option<(f64, f64)> {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        return None;
    }
    let r = tr.signum() * (tr.abs() + disc.sqrt()) / 2.0;
    let r = if r == 0.0 { disc.sqrt() / 2.0 } else { r };
    Some((r, det / r))
}

/// Fixed points of the working-chart Hénon map: `x = y`, `y² − (1+b) y − a = 0`.
fn henon_fixed_points(a: f64, b: f64) -> [[f64; 2]; 2] {
    let s = ((1.0 + b) * (1.0 + b) + 4.0 * a).sqrt();
    let y1 = (1.0 + b + s) / 2.0;
    let y2 = (1.0 + b - s) / 2.0;
    [[y1, y1], [y2, y2]]
}

/// Damped Newton on `fⁿ(p) − p`; `None` if it diverges or stalls away from a root.
fn newton_periodic(a: f64, b: f64, n: usize, mut p: [f64; 2]) -> Option<[f64; 2]> {
    for _ in 0..60 {
        let mut q = p;
        let mut m = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..n {
            m = mul(jac(b, q), m);
            q = fwd(a, b, q);
        }
        let fx = [q[0] - p[0], q[1] - p[1]];
        let res = fx[0].abs().max(fx[1].abs());
        if !res.is_finite() || res > 1e12 {
            return None;
        }
        if res < 1e-11 {
            return Some(p);
        }
        let jm = [[m[0][0] - 1.0, m[0][1]], [m[1][0], m[1][1] - 1.0]];
        let det = jm[0][0] * jm[1][1] - jm[0][1] * jm[1][0];
        let mut dx = [-(jm[1][1] * fx[0] - jm[0][1] * fx[1]) / det, -(-jm[1][0] * fx[0] + jm[0][0] * fx[1]) / det];
        let len = dx[0].hypot(dx[1]);
        // roundoff in fⁿ grows with |Dfⁿ|, so a stalled tiny step also counts
        if len < 1e-13 && res < 1e-8 {
            return Some(p);
        }
        if len > 0.25 {
            dx = [dx[0] * 0.25 / len, dx[1] * 0.25 / len];
        }
        p = [p[0] + dx[0], p[1] + dx[1]];
    }
    None
}

/// All fixed points of `fⁿ` reached by damped Newton from a dense seed grid,
/// closed under `f` (the image of a periodic point is periodic, and some
/// basins are too thin for any grid). Seeds whose first `n` iterates leave
/// `[−r, r]²` cannot be near a periodic point and are skipped.
fn newton_sweep(a: f64, b: f64, n: usize, r: f64, grid: usize) -> Vec<[f64; 2]> {
    let mut roots: Vec<[f64; 2]> = Vec::new();
    let inside = |p: [f64; 2]| p[0].abs() <= r && p[1].abs() <= r;
    let push = |roots: &mut Vec<[f64; 2]>, p: [f64; 2]| {
        if inside(p) && !roots.iter().any(|q| (q[0] - p[0]).abs().max((q[1] - p[1]).abs()) < 1e-7) {
            roots.push(p);
        }
    };
    for i in 0..grid {
        for j in 0..grid {
            let p = [-r + 2.0 * r * (i as f64 + 0.5) / grid as f64, -r + 2.0 * r * (j as f64 + 0.5) / grid as f64];
            let mut q = p;
            let mut bounded = true;
            for _ in 0..n {
                q = fwd(a, b, q);
                bounded &= inside(q);
            }
            if bounded {
                if let Some(root) = newton_periodic(a, b, n, p) {
                    push(&mut roots, root);
                }
            }
        }
    }
    let mut k = 0;
    while k < roots.len() {
        if let Some(img) = newton_periodic(a, b, n, fwd(a, b, roots[k])) {
            push(&mut roots, img);
        }
        k += 1;
    }
    roots
}

/// `G⁺` by forward iteration of a complex point: `y` grows like `y²`.
fn green_plus_c(a: f64, b: f64, x: Complex64, y: Complex64) -> f64 {
    let (mut x, mut y) = (x, y);
    let mut scale = 1.0;
    for _ in 0..2000 {
        if y.norm() > 1e40 {
            return y.norm().ln() * scale;
        }
        let ny = y * y - a - b * x;
        x = y;
        y = ny;
        scale *= 0.5;
    }
    0.0
}

/// `G⁻` by backward iteration: `x ↦ (x² − a − y)/b`, so `ln|x| − ln|b|` doubles.
fn green_minus_c(a: f64, b: f64, x: Complex64, y: Complex64) -> f64 {
    let (mut x, mut y) = (x, y);
    let mut scale = 1.0;
    for _ in 0..2000 {
        if x.norm() > 1e40 {
            return (x.norm().ln() - b.abs().ln()) * scale;
        }
        let nx = (x * x - a - y) / b;
        y = x;
        x = nx;
        scale *= 0.5;
    }
    0.0
}

fn circle_max(g: impl Fn(f64) -> f64) -> f64 {
    let n = 8192;
    let vals: Vec<f64> = (0..n).map(|k| g(2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut best = vals[idx[0]];
    for &k in idx.iter().take(4) {
        let (mut lo, mut hi) = (k as f64 * h - h, k as f64 * h + h);
        for _ in 0..80 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if g(m1) < g(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        best = best.max(g(0.5 * (lo + hi)));
    }
    best
}

/// Connected components of a boolean bitmap, 8-neighbourhood, by iterative
/// flood fill. Returns the largest centre-to-centre diameter in cells.
fn flood_fill_max_diameter(mask: &[bool], nx: usize, ny: usize) -> (usize, f64) {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    let mut best: f64 = 0.0;
    for s in 0..mask.len() {
        if !mask[s] || seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        let mut cells = Vec::new();
        while let Some(c) = stack.pop() {
            cells.push(((c % nx) as f64, (c / nx) as f64));
            let (i, j) = ((c % nx) as i64, (c / nx) as i64);
            for (di, dj) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
                let (a, b) = (i + di, j + dj);
                if a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < ny {
                    let k = b as usize * nx + a as usize;
                    if mask[k] && !seen[k] {
                        seen[k] = true;
                        stack.push(k);
                    }
                }
            }
        }
        for x in 0..cells.len() {
            for y in x + 1..cells.len() {
                best = best.max((cells[x].0 - cells[y].0).hypot(cells[x].1 - cells[y].1));
            }
        }
    }
    (count, best)
}

// ---------------------------------------------------------------- criteria

fn ac1() -> Result<String, String> {
    let check = ulam_oracle(8);
    if check.status != Status::Pass {
        return Err(format!("oracle check failed: {:?}", check.witness));
    }
    for row in &check.rows {
        let n = row.n;
        // sign changes of fⁿ(x) − x on a fine grid over a slightly enlarged
        // [−2, 2]; roots next to x = 2 are about 4⁻ⁿ·0.16 apart
        let g = |x: f64| {
            let mut y = x;
            for _ in 0..n {
                y = 2.0 - y * y;
            }
            y - x
        };
        let m = 1usize << (2 * n + 6);
        let (lo, hi) = (-2.0 - 1e-9, 2.0 + 1e-9);
        let mut changes = 0;
        let mut prev = g(lo);
        for k in 1..=m {
            let v = g(lo + (hi - lo) * k as f64 / m as f64);
            if v == 0.0 || (v > 0.0) != (prev > 0.0) {
                changes += 1;
            }
            prev = v;
        }
        if changes != 1 << n || row.count != 1 << n {
            return Err(format!("n = {n}: {} roots, {changes} sign changes, expected {}", row.count, 1 << n));
        }
        for (&x, &dv) in row.roots.iter().zip(&row.derivatives) {
            let mut y = x;
            let mut d = 1.0f64;
            for _ in 0..n {
                d *= -2.0 * y;
                y = 2.0 - y * y;
            }
            let expected = if (x + 2.0).abs() < 1e-9 { 4f64.powi(n as i32) } else { 2f64.powi(n as i32) };
            if (d.abs() - expected).abs() > 1e-9 * expected || (dv - expected).abs() > 1e-9 * expected {
                return Err(format!("n = {n}, x = {x}: |Df^n| = {}", d.abs()));
            }
        }
    }
    let one = &check.rows[0];
    if !((one.roots[0] + 2.0).abs() < 1e-12 && (one.derivatives[0] - 4.0).abs() < 1e-12 && (one.derivatives[1] - 2.0).abs() < 1e-12) {
        return Err(format!("n = 1: {:?} {:?}", one.roots, one.derivatives));
    }
    Ok("2^n roots and |Df^n| = 2^n for n <= 8; |Df(-2)| = 4".into())
}

fn ac2() -> Result<String, String> {
    let f = henon(A, B).unwrap();
    let opts = SolverOptions::default();
    let r = filtration_radius(&f).unwrap().radius;
    let mut worst: f64 = 0.0;
    for n in 1..=10 {
        let pts = find_fixed_points(&f, n, &opts).map_err(|e| format!("n = {n}: {e}"))?;
        if pts.len() != 1 << n {
            return Err(format!("n = {n}: {} points", pts.len()));
        }
        for p in &pts {
            // one-step closure along the orbit, recomputed here
            let mut q = [p.point.x, p.point.y];
            let mut m = [[1.0, 0.0], [0.0, 1.0]];
            let mut closure: f64 = 0.0;
            for k in 0..n {
                m = mul(jac(B, q), m);
                let next = fwd(A, B, q);
                let o = &p.orbit[(k + 1) % p.least_period];
                closure = closure.max((next[0] - o.x).abs().max((next[1] - o.y).abs()));
                q = [o.x, o.y];
            }
            worst = worst.max(closure);
            if closure >= 1e-10 {
                return Err(format!("n = {n}, {}: residual {closure:e}", p.code));
            }
            let (lu, ls) = eig2(m).ok_or_else(|| format!("n = {n}, {}: complex multipliers", p.code))?;
            if !(lu.abs() > 1.0 && ls.abs() < 1.0) {
                return Err(format!("n = {n}, {}: not a saddle ({lu}, {ls})", p.code));
            }
        }
        if n <= 6 {
            let roots = newton_sweep(A, B, n, r, 1500);
            for p in &pts {
                if !roots.iter().any(|q| (q[0] - p.point.x).abs().max((q[1] - p.point.y).abs()) < 1e-8) {
                    return Err(format!("n = {n}: {} at ({}, {}) not found by the sweep", p.code, p.point.x, p.point.y));
                }
            }
            if roots.len() != 1 << n {
                return Err(format!("n = {n}: dense Newton sweep found {} roots", roots.len()));
            }
        }
    }
    Ok(format!("2^n real saddle points for n <= 10, max residual {worst:.1e}; sweep agrees for n <= 6"))
}

fn ac3() -> Result<String, String> {
    let f = henon(A, B).unwrap();
    let mut pts = Vec::new();
    for n in 1..=10 {
        pts.extend(find_fixed_points(&f, n, &SolverOptions::default()).map_err(|e| e.to_string())?);
    }
    let report = check_bounds(&pts, 2);
    for e in &report.entries {
        let dn = 2f64.powi(e.least_period as i32);
        if !(e.lambda_s.abs() < 1.0 / dn && e.lambda_u.abs() > dn) {
            return Err(format!("orbit {}: λu = {}, λs = {}", e.code, e.lambda_u, e.lambda_s));
        }
    }
    let fixed = henon_fixed_points(A, B);
    let analytic: Vec<(f64, f64)> = fixed.iter().map(|p| eig2(jac(B, *p)).unwrap()).collect();
    let reference = [(6.90331, 0.11589), (-3.16657, -0.25263)];
    for ((lu, ls), (ru, rs)) in analytic.iter().zip(reference) {
        if (lu - ru).abs() > 1e-4 || (ls - rs).abs() > 1e-4 {
            return Err(format!("analytic ({lu}, {ls}) vs ({ru}, {rs})"));
        }
        let p = pts.iter().find(|p| p.period_n == 1 && (p.lambda_u - lu).abs() < 1e-4).ok_or("fixed point missing")?;
        if (p.lambda_s - ls).abs() > 1e-4 {
            return Err(format!("{}: λs = {} vs {ls}", p.code, p.lambda_s));
        }
    }
    Ok(format!("{} orbits within bounds, min margin {:.4}; fixed-point multipliers match the quadratic formula", report.entries.len(), report.min_margin()))
}

fn ac4() -> Result<String, String> {
    let f = henon(A, B).unwrap();
    let solver = GreenSolver::new(&f).unwrap().with_n_max(300);
    let eta = zero_tolerance(&f, &solver, 1e-9);
    let mut doubly = Vec::new();
    for plus in [true, false] {
        let p = select_fixed_point(&f, plus).map_err(|e| e.to_string())?;
        let mut verdicts = Vec::new();
        for kind in [ManifoldKind::Unstable, ManifoldKind::Stable] {
            let c = local_chart(&f, &p, kind, DEFAULT_ORDER).map_err(|e| e.to_string())?;
            verdicts.push(one_sided_test(&c, &solver, 0.0, eta).map_err(|e| e.to_string())?.verdict);
        }
        let both = verdicts.iter().all(|v| v.is_one_sided());
        let strong = p.lambda_s.abs() < 0.25 && p.lambda_u.abs() > 4.0;
        if plus != both || verdicts.iter().any(|v| !plus && *v != Sidedness::TwoSided) {
            return Err(format!("{} ({}): {:?}", p.code, if plus { "non-flipping" } else { "flipping" }, verdicts));
        }
        if strong != both {
            return Err(format!("{}: refined bound {strong} but doubly one-sided {both}", p.code));
        }
        if both {
            doubly.push(p.code.to_string());
        }
    }
    Ok(format!("doubly one-sided: [{}]; flipping point two-sided in both kinds (eta = {eta:.1e})", doubly.join(", ")))
}

fn ac5() -> Result<String, String> {
    let f = henon(A, B).unwrap();
    let solver = GreenSolver::new(&f).unwrap().with_n_max(300);
    let p = select_fixed_point(&f, true).map_err(|e| e.to_string())?;
    let window = filtration_radius(&f).unwrap().rect();
    let ctl = StepControl {
        window: Some(window),
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    let mut norms = Vec::new();
    for kind in [ManifoldKind::Unstable, ManifoldKind::Stable] {
        let raw = local_chart(&f, &p, kind, DEFAULT_ORDER).map_err(|e| e.to_string())?;
        let chart: Arc<ManifoldChart> = Arc::new(normalize(&raw, &solver).map_err(|e| e.to_string())?);
        let z0 = chart.radius_for_distance(1.0, SADDLE_EXCLUSION).map_err(|e| e.to_string())?;
        let extent = z0 * chart.mu.abs().powi(7);
        let arcs = trace(&chart, extent, f64::INFINITY, &ctl).map_err(|e| e.to_string())?;
        let params: Vec<f64> = arcs
            .iter()
            .flat_map(|a| a.params.iter().zip(&a.points))
            .filter(|(z, q)| **z != 0.0 && window.contains(q))
            .map(|(z, _)| *z)
            .collect();
        let lambda = if kind == ManifoldKind::Unstable { p.lambda_u } else { p.lambda_s };
        for k in 0..1000 {
            let z = params[k * params.len() / 1000];
            let res = if kind == ManifoldKind::Unstable {
                let q = chart.eval(z / lambda).map_err(|e| e.to_string())?;
                let lhs = fwd(A, B, [q.x, q.y]);
                let rhs = chart.eval(z).map_err(|e| e.to_string())?;
                (lhs[0] - rhs.x).hypot(lhs[1] - rhs.y)
            } else {
                let q = chart.eval(z).map_err(|e| e.to_string())?;
                let lhs = fwd(A, B, [q.x, q.y]);
                let rhs = chart.eval(lambda * z).map_err(|e| e.to_string())?;
                (lhs[0] - rhs.x).hypot(lhs[1] - rhs.y)
            };
            worst = worst.max(res);
        }
        let g = |theta: f64| -> f64 {
            let q = chart.eval_complex(Complex64::from_polar(1.0, theta)).expect("chart on the unit circle");
            if kind == ManifoldKind::Unstable {
                green_plus_c(A, B, q.x, q.y)
            } else {
                green_minus_c(A, B, q.x, q.y)
            }
        };
        norms.push(circle_max(g));
    }
    if worst >= 1e-10 {
        return Err(format!("functional residual {worst:e}"));
    }
    if (norms[0] - 1.0).abs() > 1e-6 || (norms[1] - 1.0).abs() > 1e-6 {
        return Err(format!("normalization maxima {:?}", norms));
    }
    Ok(format!("max residual {worst:.1e} over 2x1000 samples; max G+ o psi_u = {:.9}, max G- o psi_s = {:.9}", norms[0], norms[1]))
}

fn ac6() -> Result<String, String> {
    let r = hunt_boundary(B, 4.0, 6.0, &SaddleSelector::Plus, &HuntOptions::default()).map_err(|e| e.to_string())?;
    let dk = (r.event.curvature_u - r.event.curvature_s).abs();
    if (r.a_star - A_REF).abs() > 1e-3 {
        return Err(format!("a* = {}", r.a_star));
    }
    if dk <= 1e-3 {
        return Err(format!("curvature gap {dk}"));
    }
    // the contact must be a tangential intersection of the two charts at a*
    let f = henon(r.a_star, B).unwrap();
    let p = select_fixed_point(&f, true).map_err(|e| e.to_string())?;
    let cu = local_chart(&f, &p, ManifoldKind::Unstable, DEFAULT_ORDER).map_err(|e| e.to_string())?;
    let cs = local_chart(&f, &p, ManifoldKind::Stable, DEFAULT_ORDER).map_err(|e| e.to_string())?;
    let (zu, zs) = r.raw_zeta;
    let h = 1e-4 * zu.abs().max(1.0);
    let hs = 1e-4 * zs.abs().max(1.0);
    let (u, s) = (cu.eval(zu).unwrap(), cs.eval(zs).unwrap());
    let du = {
        let (a, b) = (cu.eval(zu + h).unwrap(), cu.eval(zu - h).unwrap());
        [(a.x - b.x) / (2.0 * h), (a.y - b.y) / (2.0 * h)]
    };
    let ds = {
        let (a, b) = (cs.eval(zs + hs).unwrap(), cs.eval(zs - hs).unwrap());
        [(a.x - b.x) / (2.0 * hs), (a.y - b.y) / (2.0 * hs)]
    };
    let gap = u.dist(&s);
    let sin = (du[0] * ds[1] - du[1] * ds[0]) / (du[0].hypot(du[1]) * ds[0].hypot(ds[1]));
    if gap > 1e-8 || sin.abs() > 1e-5 {
        return Err(format!("contact check: gap {gap:e}, sin angle {sin:e}"));
    }
    let at6 = tangency_check(&henon(A, B).unwrap());
    if at6.status != Status::Pass || !at6.tangencies.is_empty() {
        return Err(format!("at a = 6: {} tangencies ({:?})", at6.tangencies.len(), at6.witness));
    }
    Ok(format!("a* = {:.8} (|a* - ref| = {:.1e}), |dk| = {dk:.4}; {} transverse and no tangential contacts at a = 6", r.a_star, (r.a_star - A_REF).abs(), at6.transverse))
}

fn ac7() -> Result<String, String> {
    let r = hunt_boundary(B, 4.0, 6.0, &SaddleSelector::Plus, &HuntOptions::default()).map_err(|e| e.to_string())?;
    for a in [r.a_star, A_REF] {
        let (c, _) = maxent_check(&henon(a, B).unwrap(), 8);
        if c.status != Status::Pass {
            return Err(format!("a = {a}: {:?}", c.witness));
        }
    }
    Ok(format!("2^n real fixed points of f^n for n <= 8 at a* = {:.8} and at {A_REF}", r.a_star))
}

fn ac8() -> Result<String, String> {
    let f = henon(A, B).unwrap();
    let check = cantor_check(&f, &[64, 128, 256, 512]);
    // recompute the component diameters from the classification bitmaps
    let rect = filtration_radius(&f).unwrap().rect();
    let mut oracle = Vec::new();
    for res in [64, 128, 256, 512] {
        let g = saddlescope::greens::classify_grid(
            &f,
            rect,
            &saddlescope::greens::GridOptions {
                resolution: res,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let mask: Vec<bool> = g.classes.iter().map(|c| *c == CellClass::K).collect();
        oracle.push(flood_fill_max_diameter(&mask, g.nx, g.ny));
    }
    for (lvl, (count, d)) in check.levels.iter().zip(&oracle) {
        if lvl.components != *count || (lvl.max_diameter_cells - d).abs() > 1e-9 {
            return Err(format!("resolution {}: {} components / {} cells vs flood fill {count} / {d}", lvl.resolution, lvl.components, lvl.max_diameter_cells));
        }
    }
    let ds: Vec<f64> = oracle.iter().map(|(_, d)| *d).collect();
    let widths: Vec<f64> = check.levels.iter().map(|l| l.max_diameter).collect();
    if check.status != Status::Pass || !widths.windows(2).all(|w| w[1] < w[0]) || ds[3] >= 10.0 {
        return Err(format!("diameters (cells) {:?}: {:?}", ds, check.witness));
    }
    if check.fixed_points_separated != Some(true) {
        return Err("fixed points share a component".into());
    }
    Ok(format!("max diameters (cells) {:.2?}, strictly decreasing in world units", ds))
}

fn ac9() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = henon(A, B).unwrap();
    let solver = GreenSolver::new(&f).unwrap();
    let r = solver.filtration().radius;
    let mut tested = 0;
    let mut worst_g: f64 = 0.0;
    while tested < 1000 {
        let p = Point2::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
        let g = solver.green_plus(&p).map_err(|e| e.to_string())?;
        if g == 0.0 {
            continue;
        }
        let g1 = solver.green_plus(&f.eval(&p)).map_err(|e| e.to_string())?;
        worst_g = worst_g.max((g1 - 2.0 * g).abs());
        tested += 1;
    }
    if worst_g > 1e-9 {
        return Err(format!("G+ o f - 2 G+ = {worst_g:e}"));
    }
    let mut worst_rt: f64 = 0.0;
    let mut worst_det: f64 = 0.0;
    for _ in 0..1000 {
        let p = Point2::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
        let q = f.eval_inverse(&f.eval(&p));
        let q2 = f.eval(&f.eval_inverse(&p));
        worst_rt = worst_rt.max(q.dist(&p)).max(q2.dist(&p));
        let o = inv(A, B, fwd(A, B, [p.x, p.y]));
        worst_rt = worst_rt.max((o[0] - p.x).hypot(o[1] - p.y));
        let j = f.jacobian(&p);
        worst_det = worst_det.max((j[0][0] * j[1][1] - j[0][1] * j[1][0] - B).abs());
        let j3 = f.power(3).jacobian(&p);
        worst_det = worst_det.max(((j3[0][0] * j3[1][1] - j3[0][1] * j3[1][0]) - B * B * B).abs() / (1.0 + j3[0][0].abs() * j3[1][1].abs()));
    }
    if worst_rt > 1e-12 || worst_det > 1e-12 {
        return Err(format!("round trip {worst_rt:e}, determinant {worst_det:e}"));
    }
    // byte-identical artifacts across two runs
    let map = "[map]\nfamily = henon\na = 6\nb = 0.8\n";
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut files = Vec::new();
        for (cmd, kv) in [
            (Command::Orbits, vec![("period_max", "6")]),
            (Command::Manifolds, vec![("budget", "40")]),
            (Command::Render, vec![("resolution", "64"), ("out", "fig.svg")]),
        ] {
            let mut kv: Vec<(String, String)> = kv.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
            kv.push(("out_dir".into(), dir.path().display().to_string()));
            let cfg = RunConfig::from_text(cmd, map, &kv).map_err(|e| e.to_string())?;
            let out = run(&cfg).map_err(|e| e.to_string())?;
            for p in out.artifacts {
                let bytes = std::fs::read_to_string(&p).map_err(|e| e.to_string())?;
                let name = p.file_name().unwrap().to_string_lossy().to_string();
                let body = if name.ends_with(".svg") {
                    bytes.lines().filter(|l| !l.starts_with("<!-- saddlescope ")).collect::<Vec<_>>().join("\n")
                } else {
                    bytes
                };
                files.push((name, body));
            }
        }
        outputs.push(files);
    }
    if outputs[0] != outputs[1] {
        let diff: Vec<&String> = outputs[0].iter().zip(&outputs[1]).filter(|(a, b)| a != b).map(|(a, _)| &a.0).collect();
        return Err(format!("artifacts differ: {diff:?}"));
    }
    Ok(format!(
        "G+ o f = 2 G+ to {worst_g:.1e} on 1000 points; round trip {worst_rt:.1e}; det {worst_det:.1e}; {} artifacts byte-identical",
        outputs[0].len()
    ))
}

fn main() {
    let criteria: [(&str, &str, Option<Duration>, fn() -> Result<String, String>); 9] = [
        ("AC1", "Ulam-von Neumann oracle", Some(Duration::from_secs(1)), ac1),
        ("AC2", "fixed-point census at (6, 0.8)", Some(Duration::from_secs(30)), ac2),
        ("AC3", "multiplier bounds", None, ac3),
        ("AC4", "one-sided structure", Some(Duration::from_secs(10)), ac4),
        ("AC5", "parametrization fidelity", None, ac5),
        ("AC6", "tangency hunt", Some(Duration::from_secs(300)), ac6),
        ("AC7", "boundary map keeps maximal entropy", None, ac7),
        ("AC8", "Cantor diagnostic", None, ac8),
        ("AC9", "property suites and determinism", None, ac9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(msg), Some(l)) if elapsed > l => Err(format!("{msg}; took {elapsed:.2?}, limit {l:?}")),
            (r, _) => r,
        };
        match result {
            Ok(msg) => println!("{id} PASS {name} [{elapsed:.2?}]: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("{id} FAIL {name} [{elapsed:.2?}]: {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
