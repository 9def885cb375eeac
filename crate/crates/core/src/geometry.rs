//! Jordan domains: the catalog (disk, ellipse, polygon, cusp domain) and
//! custom polylines, boundary sampling, membership, and the empirical
//! three-point (quasiconformality) constant.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::{adaptive_gk, golden_section};

/// Points closer than this multiple of the diameter to the boundary are
/// treated as lying on it by [`Domain::point_in_domain`].
pub const BOUNDARY_EPS: f64 = 1e-12;

/// Tolerance (relative to the diameter) for recognizing singular points of
/// a weight as boundary points.
pub const MEMBERSHIP_EPS: f64 = 1e-9;

/// Parameter share of each curved branch of the cusp boundary. Chosen so
/// the parameter speed at x = 1 matches the speed on the vertical side.
const CUSP_BRANCH: f64 = 1.0 / (2.0 + std::f64::consts::E.recip());
const CUSP_SIDE: f64 = 1.0 - 2.0 * CUSP_BRANCH;

/// Number of cached samples used for nearest-point searches.
const DENSE_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    Disk {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    Polygon {
        vertices: Vec<Complex64>,
    },
    /// G* = {x + iy : 0 < x < 1, |y| < exp(-1/x)}.
    Cusp,
    Custom {
        vertices: Vec<Complex64>,
    },
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::Disk { .. } => "disk",
            DomainKind::Ellipse { .. } => "ellipse",
            DomainKind::Polygon { .. } => "polygon",
            DomainKind::Cusp => "cusp",
            DomainKind::Custom { .. } => "custom",
        }
    }

    pub fn square(side: f64) -> Self {
        let h = 0.5 * side;
        DomainKind::Polygon {
            vertices: vec![
                Complex64::new(-h, -h),
                Complex64::new(h, -h),
                Complex64::new(h, h),
                Complex64::new(-h, h),
            ],
        }
    }
}

/// Closed-form or piecewise-linear parameterization over t in [0, 1).
#[derive(Debug, Clone)]
pub enum Parameterization {
    Circle {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    Cusp,
    Polyline {
        vertices: Vec<Complex64>,
        cumulative: Vec<f64>,
    },
}

impl Parameterization {
    fn polyline(vertices: Vec<Complex64>) -> Self {
        let n = vertices.len();
        let mut cumulative = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 0..n {
            acc += (vertices[(i + 1) % n] - vertices[i]).norm();
            cumulative.push(acc);
        }
        Parameterization::Polyline {
            vertices,
            cumulative,
        }
    }

    /// gamma(t), 1-periodic.
    pub fn point(&self, t: f64) -> Complex64 {
        let t = t - t.floor();
        match self {
            Parameterization::Circle { radius } => {
                Complex64::from_polar(*radius, std::f64::consts::TAU * t)
            }
            Parameterization::Ellipse { a, b } => {
                let th = std::f64::consts::TAU * t;
                Complex64::new(a * th.cos(), b * th.sin())
            }
            Parameterization::Cusp => cusp_point(t),
            Parameterization::Polyline {
                vertices,
                cumulative,
            } => {
                let total = *cumulative.last().expect("non-empty");
                let s = t * total;
                let i = match cumulative.binary_search_by(|c| c.total_cmp(&s)) {
                    Ok(i) => i.min(vertices.len() - 1),
                    Err(i) => i - 1,
                };
                let len = cumulative[i + 1] - cumulative[i];
                let frac = if len > 0.0 {
                    (s - cumulative[i]) / len
                } else {
                    0.0
                };
                let a = vertices[i];
                let b = vertices[(i + 1) % vertices.len()];
                a + (b - a) * frac
            }
        }
    }

    /// Unit tangent direction at t (central difference for the cusp).
    pub fn tangent(&self, t: f64) -> Complex64 {
        let d = match self {
            Parameterization::Circle { .. } => Complex64::i() * self.point(t),
            Parameterization::Ellipse { a, b } => {
                let th = std::f64::consts::TAU * t;
                Complex64::new(-a * th.sin(), b * th.cos())
            }
            _ => {
                let h = 1e-7;
                self.point(t + h) - self.point(t - h)
            }
        };
        d / d.norm()
    }

    /// Parameter values of the corners (polyline vertices).
    pub fn corner_parameters(&self) -> Vec<f64> {
        match self {
            Parameterization::Polyline { cumulative, .. } => {
                let total = *cumulative.last().expect("non-empty");
                cumulative[..cumulative.len() - 1]
                    .iter()
                    .map(|c| c / total)
                    .collect()
            }
            Parameterization::Cusp => vec![0.0, CUSP_BRANCH, CUSP_BRANCH + CUSP_SIDE],
            _ => Vec::new(),
        }
    }
}

fn cusp_point(t: f64) -> Complex64 {
    let e1 = (-1.0f64).exp();
    if t < CUSP_BRANCH {
        // lower branch, x from 0 to 1
        let s = t / CUSP_BRANCH;
        let x = s * s;
        Complex64::new(x, -cusp_height(x))
    } else if t < CUSP_BRANCH + CUSP_SIDE {
        let u = (t - CUSP_BRANCH) / CUSP_SIDE;
        Complex64::new(1.0, -e1 + 2.0 * e1 * u)
    } else {
        let s = 1.0 - (t - CUSP_BRANCH - CUSP_SIDE) / CUSP_BRANCH;
        let x = s * s;
        Complex64::new(x, cusp_height(x))
    }
}

/// exp(-1/x) for x > 0, zero at the tip.
pub fn cusp_height(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Closed boundary curve with cached ordered samples.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    pub param: Parameterization,
    /// Ordered samples; the last sample repeats the first.
    pub samples: Vec<Complex64>,
    pub positively_oriented: bool,
}

impl BoundaryCurve {
    fn new(param: Parameterization) -> Self {
        let samples: Vec<Complex64> = (0..=DENSE_SAMPLES)
            .map(|k| param.point(k as f64 / DENSE_SAMPLES as f64))
            .collect();
        let positively_oriented = shoelace_area(&samples[..DENSE_SAMPLES]) > 0.0;
        Self {
            param,
            samples,
            positively_oriented,
        }
    }

    /// True when no two non-adjacent sample segments intersect.
    pub fn is_simple_at(points: &[Complex64]) -> bool {
        let n = points.len();
        for i in 0..n {
            let a1 = points[i];
            let a2 = points[(i + 1) % n];
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let b1 = points[j];
                let b2 = points[(j + 1) % n];
                if segments_intersect(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }
}

/// Signed (shoelace) area of a closed point sequence.
pub fn shoelace_area(points: &[Complex64]) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        acc += a.re * b.im - b.re * a.im;
    }
    0.5 * acc
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_intersect(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = cross(q2 - q1, p1 - q1);
    let d2 = cross(q2 - q1, p2 - q1);
    let d3 = cross(p2 - p1, q1 - p1);
    let d4 = cross(p2 - p1, q2 - p1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_seg = |a: Complex64, b: Complex64, p: Complex64| {
        p.re >= a.re.min(b.re)
            && p.re <= a.re.max(b.re)
            && p.im >= a.im.min(b.im)
            && p.im <= a.im.max(b.im)
    };
    (d1 == 0.0 && on_seg(q1, q2, p1))
        || (d2 == 0.0 && on_seg(q1, q2, p2))
        || (d3 == 0.0 && on_seg(p1, p2, q1))
        || (d4 == 0.0 && on_seg(p1, p2, q2))
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// A bounded Jordan domain together with its derived geometric data.
#[derive(Debug, Clone)]
pub struct Domain {
    pub kind: DomainKind,
    pub boundary: BoundaryCurve,
    pub centroid: Complex64,
    pub diameter: f64,
    pub area: f64,
    /// (lower-left, upper-right) corners of the bounding box.
    pub bbox: (Complex64, Complex64),
}

/// Builds a catalog (or custom polyline) domain, validating its parameters.
pub fn make_catalog_domain(kind: DomainKind) -> Result<Domain> {
    match kind {
        DomainKind::Disk { radius } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::InvalidDomain(format!(
                    "disk radius must be positive, got {radius}"
                )));
            }
            let r = radius;
            Ok(Domain::assemble(
                DomainKind::Disk { radius },
                Parameterization::Circle { radius },
                Complex64::new(0.0, 0.0),
                2.0 * r,
                std::f64::consts::PI * r * r,
                (Complex64::new(-r, -r), Complex64::new(r, r)),
            ))
        }
        DomainKind::Ellipse { a, b } => {
            if !(b > 0.0 && a >= b && a.is_finite()) {
                return Err(Error::InvalidDomain(format!(
                    "ellipse needs semi-axes a >= b > 0, got a = {a}, b = {b}"
                )));
            }
            Ok(Domain::assemble(
                DomainKind::Ellipse { a, b },
                Parameterization::Ellipse { a, b },
                Complex64::new(0.0, 0.0),
                2.0 * a,
                std::f64::consts::PI * a * b,
                (Complex64::new(-a, -b), Complex64::new(a, b)),
            ))
        }
        DomainKind::Cusp => {
            let area = 2.0 * adaptive_gk(cusp_height, 0.0, 1.0, 1e-14, 4000);
            let moment = 2.0 * adaptive_gk(|x| x * cusp_height(x), 0.0, 1.0, 1e-14, 4000);
            let e1 = (-1.0f64).exp();
            Ok(Domain::assemble(
                DomainKind::Cusp,
                Parameterization::Cusp,
                Complex64::new(moment / area, 0.0),
                (1.0 + e1 * e1).sqrt(),
                area,
                (Complex64::new(0.0, -e1), Complex64::new(1.0, e1)),
            ))
        }
        DomainKind::Polygon { vertices } => polygon_domain(vertices, false),
        DomainKind::Custom { vertices } => polygon_domain(vertices, true),
    }
}

fn polygon_domain(mut vertices: Vec<Complex64>, custom: bool) -> Result<Domain> {
    if vertices.len() >= 2 && (vertices[0] - vertices[vertices.len() - 1]).norm() == 0.0 {
        vertices.pop();
    }
    if vertices.len() < 3 {
        return Err(Error::InvalidDomain(format!(
            "polygon needs at least 3 vertices, got {}",
            vertices.len()
        )));
    }
    if vertices
        .iter()
        .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::InvalidDomain(
            "polygon vertices must be finite".into(),
        ));
    }
    for i in 0..vertices.len() {
        if (vertices[i] - vertices[(i + 1) % vertices.len()]).norm() == 0.0 {
            return Err(Error::InvalidDomain(format!(
                "repeated vertex at index {i}"
            )));
        }
    }
    if !BoundaryCurve::is_simple_at(&vertices) {
        return Err(Error::InvalidDomain(
            "polygon is not simple (edges intersect)".into(),
        ));
    }
    let mut area = shoelace_area(&vertices);
    if area == 0.0 {
        return Err(Error::InvalidDomain("polygon has zero area".into()));
    }
    if area < 0.0 {
        // accept clockwise input, store counterclockwise
        vertices.reverse();
        area = -area;
    }
    let n = vertices.len();
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = a.re * b.im - b.re * a.im;
        cx += (a.re + b.re) * c;
        cy += (a.im + b.im) * c;
    }
    let centroid = Complex64::new(cx / (6.0 * area), cy / (6.0 * area));
    let mut diameter: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            diameter = diameter.max((vertices[i] - vertices[j]).norm());
        }
    }
    let lo = Complex64::new(
        vertices.iter().map(|v| v.re).fold(f64::INFINITY, f64::min),
        vertices.iter().map(|v| v.im).fold(f64::INFINITY, f64::min),
    );
    let hi = Complex64::new(
        vertices
            .iter()
            .map(|v| v.re)
            .fold(f64::NEG_INFINITY, f64::max),
        vertices
            .iter()
            .map(|v| v.im)
            .fold(f64::NEG_INFINITY, f64::max),
    );
    let kind = if custom {
        DomainKind::Custom {
            vertices: vertices.clone(),
        }
    } else {
        DomainKind::Polygon {
            vertices: vertices.clone(),
        }
    };
    let domain = Domain::assemble(
        kind,
        Parameterization::polyline(vertices),
        centroid,
        diameter,
        area,
        (lo, hi),
    );
    if !domain.point_in_domain(domain.centroid) {
        return Err(Error::InvalidDomain(
            "centroid is not interior; non-convex domains of this shape are not supported".into(),
        ));
    }
    Ok(domain)
}

impl Domain {
    fn assemble(
        kind: DomainKind,
        param: Parameterization,
        centroid: Complex64,
        diameter: f64,
        area: f64,
        bbox: (Complex64, Complex64),
    ) -> Self {
        Self {
            kind,
            boundary: BoundaryCurve::new(param),
            centroid,
            diameter,
            area,
            bbox,
        }
    }

    pub fn disk(radius: f64) -> Result<Self> {
        make_catalog_domain(DomainKind::Disk { radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        make_catalog_domain(DomainKind::Ellipse { a, b })
    }

    pub fn polygon(vertices: Vec<Complex64>) -> Result<Self> {
        make_catalog_domain(DomainKind::Polygon { vertices })
    }

    pub fn square(side: f64) -> Result<Self> {
        make_catalog_domain(DomainKind::square(side))
    }

    pub fn cusp() -> Result<Self> {
        make_catalog_domain(DomainKind::Cusp)
    }

    /// Reads a custom domain from a plain-text vertex file: one "x y" pair
    /// per line, counterclockwise, `#` comments and blank lines ignored.
    pub fn from_vertex_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_vertex_text(&text)
    }

    pub fn from_vertex_text(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Parse(format!("line {}: expected \"x y\"", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let x = parse(parts.next())?;
            let y = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse(format!(
                    "line {}: trailing fields",
                    lineno + 1
                )));
            }
            vertices.push(Complex64::new(x, y));
        }
        make_catalog_domain(DomainKind::Custom { vertices })
    }

    pub fn is_polygonal(&self) -> bool {
        matches!(
            self.kind,
            DomainKind::Polygon { .. } | DomainKind::Custom { .. }
        )
    }

    pub fn boundary_point(&self, t: f64) -> Complex64 {
        self.boundary.param.point(t)
    }

    /// Inward unit normal at parameter t.
    pub fn inward_normal(&self, t: f64) -> Complex64 {
        Complex64::i() * self.boundary.param.tangent(t)
    }

    /// Polygon vertices (empty for smooth kinds).
    pub fn vertices(&self) -> &[Complex64] {
        match &self.boundary.param {
            Parameterization::Polyline { vertices, .. } => vertices,
            _ => &[],
        }
    }

    /// M points on the boundary ordered by parameter. Catalog kinds use
    /// equal parameter steps, which are arc-length balanced for polygons
    /// and graded toward the tip (x = s^2) for the cusp domain.
    pub fn sample_boundary(&self, m: usize) -> Result<Vec<Complex64>> {
        if m < 16 {
            return Err(Error::InvalidArgument(format!(
                "need at least 16 boundary samples, got {m}"
            )));
        }
        Ok((0..m)
            .map(|k| self.boundary_point(k as f64 / m as f64))
            .collect())
    }

    /// Nearest boundary parameter and the distance to it.
    pub fn nearest_parameter(&self, z: Complex64) -> (f64, f64) {
        match &self.boundary.param {
            Parameterization::Circle { radius } => {
                let t = z.arg() / std::f64::consts::TAU;
                (t - t.floor(), (z.norm() - radius).abs())
            }
            Parameterization::Polyline {
                vertices,
                cumulative,
            } => {
                let total = *cumulative.last().expect("non-empty");
                let n = vertices.len();
                let mut best = (0.0, f64::INFINITY);
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let ab = b - a;
                    let s = (((z - a) * ab.conj()).re / ab.norm_sqr()).clamp(0.0, 1.0);
                    let d = (z - (a + ab * s)).norm();
                    if d < best.1 {
                        best = ((cumulative[i] + s * ab.norm()) / total, d);
                    }
                }
                best
            }
            _ => {
                let samples = &self.boundary.samples;
                let m = samples.len() - 1;
                let (k, _) = samples[..m]
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (k, (p - z).norm_sqr()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("non-empty");
                let dt = 1.0 / m as f64;
                let t0 = k as f64 * dt;
                let (t, d) = golden_section(
                    |t| (self.boundary_point(t) - z).norm(),
                    t0 - dt,
                    t0 + dt,
                    1e-15,
                );
                let exact = (self.boundary_point(t0) - z).norm();
                if exact < d {
                    (t0, exact)
                } else {
                    (t - t.floor(), d)
                }
            }
        }
    }

    /// Euclidean distance from z to the boundary curve.
    pub fn distance_to_boundary(&self, z: Complex64) -> f64 {
        match &self.boundary.param {
            Parameterization::Circle { radius } => (z.norm() - radius).abs(),
            Parameterization::Polyline { vertices, .. } => {
                let n = vertices.len();
                (0..n)
                    .map(|i| segment_distance(z, vertices[i], vertices[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
            _ => self.nearest_parameter(z).1,
        }
    }

    /// Cheap lower-accuracy distance estimate, exact near the boundary to
    /// first order. Used to avoid the full nearest-point search.
    fn boundary_distance_estimate(&self, z: Complex64) -> f64 {
        match &self.kind {
            DomainKind::Ellipse { a, b } => {
                let f = (z.re / a).powi(2) + (z.im / b).powi(2) - 1.0;
                let g = Complex64::new(2.0 * z.re / (a * a), 2.0 * z.im / (b * b)).norm();
                if g == 0.0 {
                    f64::INFINITY
                } else {
                    f.abs() / g
                }
            }
            DomainKind::Cusp => {
                let x = z.re;
                let h = cusp_height(x);
                let slope = if x > 0.0 { h / (x * x) } else { 0.0 };
                let to_branch = (h - z.im.abs()).abs() / (1.0 + slope * slope).sqrt();
                to_branch.min((1.0 - x).abs()).min(z.norm())
            }
            _ => self.distance_to_boundary(z),
        }
    }

    /// Membership from the defining inequalities (open set, no boundary band).
    pub fn analytic_inside(&self, z: Complex64) -> bool {
        match &self.kind {
            DomainKind::Disk { radius } => z.norm() < *radius,
            DomainKind::Ellipse { a, b } => (z.re / a).powi(2) + (z.im / b).powi(2) < 1.0,
            DomainKind::Cusp => z.re > 0.0 && z.re < 1.0 && z.im.abs() < cusp_height(z.re),
            DomainKind::Polygon { .. } | DomainKind::Custom { .. } => {
                winding_number(self.vertices(), z) == 1
            }
        }
    }

    /// Winding number of the boundary around z.
    pub fn winding_number(&self, z: Complex64) -> i32 {
        match &self.boundary.param {
            Parameterization::Polyline { vertices, .. } => winding_number(vertices, z),
            _ => i32::from(self.analytic_inside(z)),
        }
    }

    /// Strict interior membership; points within `BOUNDARY_EPS * diameter`
    /// of the boundary count as boundary points and return false.
    pub fn point_in_domain(&self, z: Complex64) -> bool {
        if !self.analytic_inside(z) {
            return false;
        }
        let tol = BOUNDARY_EPS * self.diameter;
        let est = self.boundary_distance_estimate(z);
        if est > 1e-6 * self.diameter {
            return true;
        }
        self.distance_to_boundary(z) > tol
    }

    /// True when z is within `MEMBERSHIP_EPS * diameter` of the boundary.
    pub fn on_boundary(&self, z: Complex64) -> bool {
        self.distance_to_boundary(z) <= MEMBERSHIP_EPS * self.diameter
    }

    /// Empirical three-point constant: the maximum over sampled pairs of
    /// min(diam L', diam L'') / |z1 - z2|, with subarc diameters taken over
    /// the samples they contain.
    pub fn estimate_qc_constant(&self, m: usize) -> Result<f64> {
        if m < 64 {
            return Err(Error::InvalidArgument(format!(
                "quasiconformality estimate needs at least 64 samples, got {m}"
            )));
        }
        let pts = self.sample_boundary(m)?;
        Ok(qc_constant_of_samples(&pts))
    }
}

/// Three-point ratio over all pairs of a closed sample sequence.
///
/// Arc (s, l) holds samples s, s+1, ..., s+l (cyclic). Its diameter obeys
/// D(s, l) = max(D(s, l-1), D(s+1, l-1), |b_s - b_{s+l}|), so all arc
/// diameters follow from one pass over increasing lengths. Rows with
/// l <= m/2 are kept for pairing with the complementary arcs.
pub fn qc_constant_of_samples(pts: &[Complex64]) -> f64 {
    let m = pts.len();
    let half = m / 2;
    let mut stored: Vec<Vec<f64>> = Vec::with_capacity(half + 1);
    let mut prev = vec![0.0f64; m];
    stored.push(vec![0.0f64; m]);
    let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1.0);
    let tiny = 1e-15 * scale;
    let mut best: f64 = 1.0;
    for len in 1..m {
        let mut cur = vec![0.0f64; m];
        for s in 0..m {
            let chord = (pts[s] - pts[(s + len) % m]).norm();
            cur[s] = prev[s].max(prev[(s + 1) % m]).max(chord);
        }
        if len <= half {
            stored.push(cur.clone());
        } else {
            let other = &stored[m - len];
            for s in 0..m {
                let j = (s + len) % m;
                let chord = (pts[s] - pts[j]).norm();
                if chord <= tiny {
                    continue;
                }
                let d = cur[s].min(other[j]);
                best = best.max(d / chord);
            }
        }
        prev = cur;
    }
    if m.is_multiple_of(2) {
        // arcs of exactly half length pair with themselves
        let row = &stored[half];
        for s in 0..m {
            let j = (s + half) % m;
            let chord = (pts[s] - pts[j]).norm();
            if chord > tiny {
                best = best.max(row[s].min(row[j]) / chord);
            }
        }
    }
    best
}

fn winding_number(vertices: &[Complex64], z: Complex64) -> i32 {
    let n = vertices.len();
    let mut wn = 0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = cross(b - a, z - a);
        if a.im <= z.im {
            if b.im > z.im && c > 0.0 {
                wn += 1;
            }
        } else if b.im <= z.im && c < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Boundary singularity of a generalized Jacobi weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity {
    pub point: Complex64,
    pub exponent: f64,
}

type BoundedFactor = Arc<dyn Fn(Complex64) -> f64 + Send + Sync>;

/// h(z) = h0(z) * prod |z - z_j|^{alpha_j} on the domain.
#[derive(Clone)]
pub struct WeightSpec {
    h0: BoundedFactor,
    /// Declared bound C_h with 1/C_h <= h0 <= C_h.
    pub c_h: f64,
    pub singularities: Vec<Singularity>,
    constant: Option<f64>,
}

impl fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSpec")
            .field("c_h", &self.c_h)
            .field("h0_constant", &self.constant)
            .field("singularities", &self.singularities)
            .finish()
    }
}

impl WeightSpec {
    /// h == 1.
    pub fn unit() -> Self {
        Self::constant(1.0, Vec::new())
    }

    pub fn constant(value: f64, singularities: Vec<Singularity>) -> Self {
        Self {
            h0: Arc::new(move |_| value),
            c_h: value.max(value.recip()),
            singularities,
            constant: Some(value),
        }
    }

    pub fn new<F>(h0: F, c_h: f64, singularities: Vec<Singularity>) -> Self
    where
        F: Fn(Complex64) -> f64 + Send + Sync + 'static,
    {
        Self {
            h0: Arc::new(h0),
            c_h,
            singularities,
            constant: None,
        }
    }

    /// Multiplies h0 (and its bound) by a positive factor.
    pub fn scaled(&self, factor: f64) -> Self {
        let inner = self.h0.clone();
        Self {
            h0: Arc::new(move |z| factor * inner(z)),
            c_h: self.c_h * factor.max(factor.recip()),
            singularities: self.singularities.clone(),
            constant: self.constant.map(|c| c * factor),
        }
    }

    pub fn h0(&self, z: Complex64) -> f64 {
        (self.h0)(z)
    }

    /// prod_j |z - z_j|^{alpha_j}
    pub fn singular_factor(&self, z: Complex64) -> f64 {
        self.singularities
            .iter()
            .map(|s| (z - s.point).norm().powf(s.exponent))
            .product()
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        self.h0(z) * self.singular_factor(z)
    }

    /// prod_j (|z - z_j| + rho)^{alpha_j}
    pub fn boundary_product(&self, z: Complex64, rho: f64) -> f64 {
        self.singularities
            .iter()
            .map(|s| ((z - s.point).norm() + rho).powf(s.exponent))
            .product()
    }

    pub fn is_unit(&self) -> bool {
        self.constant == Some(1.0) && self.singularities.is_empty()
    }

    /// Checks the weight invariants against a domain: alpha_j > -2,
    /// singular points on the boundary and pairwise distinct, and h0
    /// within its declared bounds on a grid of interior probes.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let tol = MEMBERSHIP_EPS * domain.diameter;
        if !(self.c_h >= 1.0) {
            return Err(Error::InvalidWeight(format!(
                "C_h must be >= 1, got {}",
                self.c_h
            )));
        }
        for (j, s) in self.singularities.iter().enumerate() {
            if !(s.exponent > -2.0) || !s.exponent.is_finite() {
                return Err(Error::InvalidWeight(format!(
                    "exponent alpha_{} = {} must exceed -2",
                    j + 1,
                    s.exponent
                )));
            }
            let d = domain.distance_to_boundary(s.point);
            if d > tol {
                return Err(Error::InvalidWeight(format!(
                    "singular point z_{} = {} is {d:e} away from the boundary",
                    j + 1,
                    s.point
                )));
            }
            for (k, other) in self.singularities.iter().enumerate().skip(j + 1) {
                if (s.point - other.point).norm() <= tol {
                    return Err(Error::InvalidWeight(format!(
                        "singular points z_{} and z_{} coincide",
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
        let (lo, hi) = domain.bbox;
        let probes = 24;
        for i in 0..probes {
            for k in 0..probes {
                let z = Complex64::new(
                    lo.re + (hi.re - lo.re) * (i as f64 + 0.5) / probes as f64,
                    lo.im + (hi.im - lo.im) * (k as f64 + 0.5) / probes as f64,
                );
                if !domain.point_in_domain(z) {
                    continue;
                }
                let v = self.h0(z);
                if !(v >= 1.0 / self.c_h * (1.0 - 1e-12) && v <= self.c_h * (1.0 + 1e-12)) {
                    return Err(Error::InvalidWeight(format!(
                        "h0({z}) = {v} outside [1/C_h, C_h] with C_h = {}",
                        self.c_h
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn disk_and_ellipse_catalog_values() {
        let d = Domain::disk(1.0).unwrap();
        assert_eq!(d.diameter, 2.0);
        assert_eq!(d.centroid, c(0.0, 0.0));
        let e = Domain::ellipse(2.0, 1.0).unwrap();
        assert_eq!(e.diameter, 4.0);
        assert_eq!(e.centroid, c(0.0, 0.0));
    }

    #[test]
    fn invalid_catalog_parameters_are_rejected() {
        assert!(Domain::disk(0.0).is_err());
        assert!(Domain::disk(-1.0).is_err());
        assert!(Domain::ellipse(1.0, 2.0).is_err());
        let bowtie = vec![c(0.0, 0.0), c(1.0, 1.0), c(1.0, 0.0), c(0.0, 1.0)];
        let err = Domain::polygon(bowtie).unwrap_err();
        assert!(err.to_string().contains("not simple"));
        assert!(Domain::polygon(vec![c(0.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn clockwise_polygon_is_reoriented() {
        let cw = vec![c(0.0, 0.0), c(0.0, 1.0), c(1.0, 1.0), c(1.0, 0.0)];
        let d = Domain::polygon(cw).unwrap();
        assert!(d.boundary.positively_oriented);
        assert!((d.area - 1.0).abs() < 1e-15);
        assert!((d.centroid - c(0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn unit_disk_four_samples() {
        let d = Domain::disk(1.0).unwrap();
        let s = d.boundary.param.point(0.0);
        assert_eq!(s, c(1.0, 0.0));
        let pts: Vec<_> = (0..4).map(|k| d.boundary_point(k as f64 / 4.0)).collect();
        for (p, q) in pts
            .iter()
            .zip([c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)])
        {
            assert!((p - q).norm() < 1e-15);
        }
        assert!(d.sample_boundary(4).is_err());
    }

    #[test]
    fn cusp_boundary_is_closed_and_positive() {
        let d = Domain::cusp().unwrap();
        let b = &d.boundary;
        assert!(b.positively_oriented);
        let first = b.samples[0];
        let last = *b.samples.last().unwrap();
        assert!((first - last).norm() <= 1e-12 * d.diameter);
        assert!(d.point_in_domain(d.centroid));
    }

    #[test]
    fn membership_examples() {
        let d = Domain::disk(1.0).unwrap();
        assert!(d.point_in_domain(c(0.0, 0.0)));
        assert!(!d.point_in_domain(c(2.0, 0.0)));
        assert!(!d.point_in_domain(c(1.0, 0.0)));
        let g = Domain::cusp().unwrap();
        assert!(g.point_in_domain(c(0.5, 0.0)));
        assert!(!g.point_in_domain(c(0.5, 0.5)));
        assert!(!g.point_in_domain(c(0.0, 0.0)));
    }

    #[test]
    fn vertex_file_parsing() {
        let text = "# unit square\n0 0\n1 0\n\n1 1\n0 1\n";
        let d = Domain::from_vertex_text(text).unwrap();
        assert_eq!(d.kind.name(), "custom");
        assert!((d.area - 1.0).abs() < 1e-15);
        assert!(Domain::from_vertex_text("0 0\n1 x\n").is_err());
        assert!(Domain::from_vertex_text("0 0 0\n1 0\n1 1\n").is_err());
    }

    #[test]
    fn nearest_parameter_on_ellipse() {
        let e = Domain::ellipse(2.0, 1.0).unwrap();
        let z = e.boundary_point(0.1234);
        let (t, d) = e.nearest_parameter(z);
        assert!(d < 1e-12);
        assert!((t - 0.1234).abs() < 1e-9);
        assert!((e.distance_to_boundary(c(0.0, 0.0)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn weight_validation() {
        let d = Domain::ellipse(2.0, 1.0).unwrap();
        let ok = WeightSpec::constant(
            1.0,
            vec![
                Singularity {
                    point: c(2.0, 0.0),
                    exponent: 1.0,
                },
                Singularity {
                    point: c(-2.0, 0.0),
                    exponent: -0.5,
                },
            ],
        );
        ok.validate(&d).unwrap();
        let bad_alpha = WeightSpec::constant(
            1.0,
            vec![Singularity {
                point: c(2.0, 0.0),
                exponent: -2.0,
            }],
        );
        assert!(bad_alpha.validate(&d).is_err());
        let off = WeightSpec::constant(
            1.0,
            vec![Singularity {
                point: c(1.9, 0.0),
                exponent: 1.0,
            }],
        );
        assert!(off.validate(&d).is_err());
        let dup = WeightSpec::constant(
            1.0,
            vec![
                Singularity {
                    point: c(2.0, 0.0),
                    exponent: 1.0,
                },
                Singularity {
                    point: c(2.0, 0.0),
                    exponent: 0.5,
                },
            ],
        );
        assert!(dup.validate(&d).is_err());
        let unbounded = WeightSpec::new(|z: Complex64| 1.0 + z.re * z.re, 2.0, vec![]);
        assert!(unbounded.validate(&d).is_err());
        let bounded = WeightSpec::new(|z: Complex64| 1.0 + 0.1 * z.re, 2.0, vec![]);
        bounded.validate(&d).unwrap();
    }
}
