//! SVG scenes of manifold traces, saddles, tangencies and `K`-grids.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::greens::{CellClass, GreenField, Rect};
use crate::manifold::{ArcSample, ManifoldKind};
use crate::map::Point2;
use crate::tangency::TangencyEvent;

/// Clip segment `ab` to `w` (Liang–Barsky). Returns the visible part.
pub fn clip_segment(w: &Rect, a: &Point2, b: &Point2) -> Option<(Point2, Point2)> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (p, q) in [(-dx, a.x - w.x0), (dx, w.x1 - a.x), (-dy, a.y - w.y0), (dy, w.y1 - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
            if t0 > t1 {
                return None;
            }
        }
    }
    let at = |t: f64| Point2::new(a.x + t * dx, a.y + t * dy);
    Some((if t0 == 0.0 { *a } else { at(t0) }, if t1 == 1.0 { *b } else { at(t1) }))
}

/// Stroke role of a polyline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Unstable,
    Stable,
}

impl Role {
    fn class(self) -> &'static str {
        match self {
            Role::Unstable => "unstable",
            Role::Stable => "stable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkerKind {
    /// Drawn as a filled disk.
    Saddle,
    /// Drawn as a cross.
    Tangency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub kind: MarkerKind,
    pub at: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub role: Role,
    /// World coordinates, inside the viewbox.
    pub points: Vec<Point2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SceneWarning {
    /// No polyline, marker or grid cell falls inside the viewbox.
    EmptyScene,
}

/// A figure in world coordinates, clipped to `viewbox`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgScene {
    pub viewbox: Rect,
    /// Output width in SVG user units; the height keeps the aspect ratio.
    pub width: f64,
    pub grid: Option<GreenField>,
    pub polylines: Vec<Polyline>,
    pub markers: Vec<Marker>,
}

impl SvgScene {
    pub fn new(viewbox: Rect, width: f64) -> Self {
        SvgScene {
            viewbox,
            width,
            grid: None,
            polylines: Vec::new(),
            markers: Vec::new(),
        }
    }

    pub fn height(&self) -> f64 {
        self.width * self.viewbox.height() / self.viewbox.width()
    }

    fn scale(&self) -> f64 {
        self.width / self.viewbox.width()
    }

    /// World `(x, y)` to SVG `(u, v)`: `u = s·(x − x₀)`, `v = s·(y₁ − y)`.
    pub fn to_screen(&self, p: &Point2) -> (f64, f64) {
        let s = self.scale();
        (s * (p.x - self.viewbox.x0), s * (self.viewbox.y1 - p.y))
    }

    /// Add a polyline, split into the pieces that lie inside the viewbox.
    /// Vertices inside are kept; crossing segments are cut at the boundary.
    pub fn add_polyline(&mut self, role: Role, points: &[Point2]) {
        let w = self.viewbox;
        let mut current: Vec<Point2> = Vec::new();
        let flush = |current: &mut Vec<Point2>, out: &mut Vec<Polyline>| {
            if current.len() >= 2 {
                out.push(Polyline {
                    role,
                    points: std::mem::take(current),
                });
            } else {
                current.clear();
            }
        };
        for seg in points.windows(2) {
            match clip_segment(&w, &seg[0], &seg[1]) {
                Some((p, q)) => {
                    if current.last() != Some(&p) {
                        flush(&mut current, &mut self.polylines);
                        current.push(p);
                    }
                    current.push(q);
                    if q != seg[1] {
                        flush(&mut current, &mut self.polylines);
                    }
                }
                None => flush(&mut current, &mut self.polylines),
            }
        }
        flush(&mut current, &mut self.polylines);
    }

    pub fn add_arc(&mut self, arc: &ArcSample) {
        let role = match arc.kind() {
            ManifoldKind::Unstable => Role::Unstable,
            ManifoldKind::Stable => Role::Stable,
        };
        self.add_polyline(role, &arc.points);
    }

    pub fn add_marker(&mut self, kind: MarkerKind, at: Point2) {
        if self.viewbox.contains(&at) {
            self.markers.push(Marker { kind, at });
        }
    }

    pub fn set_grid(&mut self, grid: GreenField) {
        self.grid = Some(grid);
    }

    fn grid_visible(&self) -> bool {
        self.grid.as_ref().is_some_and(|g| {
            let w = &self.viewbox;
            let r = &g.rect;
            if !(r.x1 > w.x0 && r.x0 < w.x1 && r.y1 > w.y0 && r.y0 < w.y1) {
                return false;
            }
            let (hx, hy) = g.cell_size();
            let span = |lo: f64, hi: f64, origin: f64, h: f64, n: usize| {
                let a = ((lo - origin) / h).floor().max(0.0) as usize;
                let b = (((hi - origin) / h).ceil().max(0.0) as usize).min(n);
                a..b
            };
            let cols = span(w.x0, w.x1, r.x0, hx, g.nx);
            span(w.y0, w.y1, r.y0, hy, g.ny).any(|j| cols.clone().any(|i| g.class_at(i, j) != CellClass::EscapesBoth))
        })
    }

    pub fn warnings(&self) -> Vec<SceneWarning> {
        if self.polylines.is_empty() && self.markers.is_empty() && !self.grid_visible() {
            vec![SceneWarning::EmptyScene]
        } else {
            Vec::new()
        }
    }

    pub fn to_svg(&self) -> String {
        let mut s = String::new();
        let (wd, ht) = (self.width, self.height());
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(s, "<!-- saddlescope {} -->", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(
            s,
            "<!-- world window [{}, {}] x [{}, {}]; screen u = {} * (x - {}), v = {} * ({} - y) -->",
            self.viewbox.x0,
            self.viewbox.x1,
            self.viewbox.y0,
            self.viewbox.y1,
            self.scale(),
            self.viewbox.x0,
            self.scale(),
            self.viewbox.y1
        );
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{wd:.3}" height="{ht:.3}" viewBox="0 0 {wd:.3} {ht:.3}">"#);
        let _ = writeln!(s, r#"<rect class="background" x="0" y="0" width="{wd:.3}" height="{ht:.3}" fill="white"/>"#);
        if let Some(g) = &self.grid {
            self.write_grid(&mut s, g);
        }
        for (role, color) in [(Role::Stable, "#1f4fbf"), (Role::Unstable, "#c0392b")] {
            let lines: Vec<&Polyline> = self.polylines.iter().filter(|p| p.role == role).collect();
            if lines.is_empty() {
                continue;
            }
            let _ = writeln!(s, r#"<g class="{}" fill="none" stroke="{color}" stroke-width="1">"#, role.class());
            for pl in lines {
                s.push_str("<polyline points=\"");
                for (k, p) in pl.points.iter().enumerate() {
                    let (u, v) = self.to_screen(p);
                    if k > 0 {
                        s.push(' ');
                    }
                    let _ = write!(s, "{u:.3},{v:.3}");
                }
                s.push_str("\"/>\n");
            }
            s.push_str("</g>\n");
        }
        let saddles: Vec<&Marker> = self.markers.iter().filter(|m| m.kind == MarkerKind::Saddle).collect();
        if !saddles.is_empty() {
            s.push_str("<g class=\"saddles\" fill=\"black\">\n");
            for m in saddles {
                let (u, v) = self.to_screen(&m.at);
                let _ = writeln!(s, r#"<circle cx="{u:.3}" cy="{v:.3}" r="4"/>"#);
            }
            s.push_str("</g>\n");
        }
        let tangencies: Vec<&Marker> = self.markers.iter().filter(|m| m.kind == MarkerKind::Tangency).collect();
        if !tangencies.is_empty() {
            s.push_str("<g class=\"tangencies\" stroke=\"#2e8b57\" stroke-width=\"2\">\n");
            for m in tangencies {
                let (u, v) = self.to_screen(&m.at);
                let r = 6.0;
                let _ = writeln!(s, r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#, u - r, v - r, u + r, v + r);
                let _ = writeln!(s, r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#, u - r, v + r, u + r, v - r);
            }
            s.push_str("</g>\n");
        }
        s.push_str("</svg>\n");
        s
    }

    /// One rectangle per horizontal run of equal, non-escaping cells.
    fn write_grid(&self, s: &mut String, g: &GreenField) {
        let fill = |c: CellClass| match c {
            CellClass::K => Some("#000000"),
            CellClass::KPlus => Some("#9ec5e8"),
            CellClass::KMinus => Some("#f2b8b0"),
            CellClass::Undecided => Some("#bbbbbb"),
            CellClass::EscapesBoth => None,
        };
        let (hx, hy) = g.cell_size();
        s.push_str("<g class=\"grid\" stroke=\"none\">\n");
        for j in 0..g.ny {
            let mut i = 0;
            while i < g.nx {
                let c = g.class_at(i, j);
                let mut k = i + 1;
                while k < g.nx && g.class_at(k, j) == c {
                    k += 1;
                }
                if let Some(color) = fill(c) {
                    let lo = Point2::new(g.rect.x0 + i as f64 * hx, g.rect.y0 + j as f64 * hy);
                    let hi = Point2::new(g.rect.x0 + k as f64 * hx, g.rect.y0 + (j + 1) as f64 * hy);
                    let cell = Rect::new(lo.x.max(self.viewbox.x0), lo.y.max(self.viewbox.y0), hi.x.min(self.viewbox.x1), hi.y.min(self.viewbox.y1));
                    if cell.x1 > cell.x0 && cell.y1 > cell.y0 {
                        let (u0, v1) = self.to_screen(&Point2::new(cell.x0, cell.y0));
                        let (u1, v0) = self.to_screen(&Point2::new(cell.x1, cell.y1));
                        let _ = writeln!(s, r#"<rect x="{u0:.3}" y="{v0:.3}" width="{:.3}" height="{:.3}" fill="{color}"/>"#, u1 - u0, v1 - v0);
                    }
                }
                i = k;
            }
        }
        s.push_str("</g>\n");
    }
}

/// Assemble a scene from traces, tangency events, saddles and an optional grid.
pub fn render_scene(arcs: &[ArcSample], tangencies: &[TangencyEvent], saddles: &[Point2], grid: Option<GreenField>, window: Rect) -> SvgScene {
    let mut scene = SvgScene::new(window, 800.0);
    if let Some(g) = grid {
        scene.set_grid(g);
    }
    for a in arcs {
        scene.add_arc(a);
    }
    for p in saddles {
        scene.add_marker(MarkerKind::Saddle, *p);
    }
    for t in tangencies {
        scene.add_marker(MarkerKind::Tangency, t.intersection.point);
    }
    scene
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(svg: &str) -> roxmltree::Document<'_> {
        roxmltree::Document::parse(svg).expect("well-formed SVG")
    }

    #[test]
    fn empty_scene_is_valid_and_warns() {
        let scene = SvgScene::new(Rect::new(-1.0, -1.0, 1.0, 1.0), 200.0);
        assert_eq!(scene.warnings(), vec![SceneWarning::EmptyScene]);
        let svg = scene.to_svg();
        let doc = parse(&svg);
        let names: Vec<&str> = doc.root_element().children().filter(|n| n.is_element()).map(|n| n.tag_name().name()).collect();
        assert_eq!(names, vec!["rect"]);
    }

    #[test]
    fn grid_outside_the_window_does_not_count() {
        // 4x4 grid on [0, 4]^2 with a single K cell at (0, 0)
        let mut classes = vec![CellClass::EscapesBoth; 16];
        classes[0] = CellClass::K;
        let grid = GreenField {
            rect: Rect::new(0.0, 0.0, 4.0, 4.0),
            nx: 4,
            ny: 4,
            classes,
            g_plus: None,
            g_minus: None,
        };
        let mut far = SvgScene::new(Rect::new(2.5, 2.5, 3.5, 3.5), 100.0);
        far.set_grid(grid.clone());
        assert_eq!(far.warnings(), vec![SceneWarning::EmptyScene]);
        let mut near = SvgScene::new(Rect::new(0.5, 0.5, 1.5, 1.5), 100.0);
        near.set_grid(grid);
        assert!(near.warnings().is_empty());
    }

    #[test]
    fn horizontal_segment_across_window() {
        let mut scene = SvgScene::new(Rect::new(0.0, 0.0, 1.0, 1.0), 100.0);
        scene.add_polyline(Role::Unstable, &[Point2::new(-1.0, 0.5), Point2::new(2.0, 0.5)]);
        let svg = scene.to_svg();
        let doc = parse(&svg);
        let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].attribute("points"), Some("0.000,50.000 100.000,50.000"));
    }

    #[test]
    fn clipping_keeps_interior_vertices_and_splits() {
        let mut scene = SvgScene::new(Rect::new(0.0, 0.0, 1.0, 1.0), 100.0);
        let pts = [Point2::new(0.2, 0.2), Point2::new(0.5, 0.8), Point2::new(1.5, 0.5), Point2::new(0.7, 0.3), Point2::new(0.6, 0.1)];
        scene.add_polyline(Role::Stable, &pts);
        assert_eq!(scene.polylines.len(), 2);
        assert_eq!(&scene.polylines[0].points[..2], &pts[..2]);
        assert!(scene.polylines[1].points.ends_with(&pts[3..]));
        for pl in &scene.polylines {
            for p in &pl.points {
                assert!(scene.viewbox.contains(p));
            }
        }
    }

    #[test]
    fn markers_outside_are_dropped() {
        let mut scene = SvgScene::new(Rect::new(0.0, 0.0, 1.0, 1.0), 100.0);
        scene.add_marker(MarkerKind::Saddle, Point2::new(0.5, 0.5));
        scene.add_marker(MarkerKind::Tangency, Point2::new(5.0, 0.5));
        let svg = scene.to_svg();
        let doc = parse(&svg);
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("circle")).count(), 1);
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("line")).count(), 0);
    }
}
