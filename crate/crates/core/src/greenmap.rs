//! Exterior Green function by charge simulation, its level curves
//! {g = log(1 + delta)} and the distance rho_delta(z) from a boundary point
//! to such a curve.

use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainKind};
use crate::numeric::{golden_section, CompensatedSum};

/// Charge offset as a fraction of the local inscribed-ball radius.
pub const CHARGE_OFFSET: f64 = 0.5;
/// Polygons place charges deeper: near corners the inscribed radius is
/// proportional to the distance from the corner.
pub const POLYGON_CHARGE_OFFSET: f64 = 0.8;
/// Share of level-curve samples that may be dropped.
const MAX_DROP_FRACTION: f64 = 0.05;
const RHO_START: usize = 256;
const RHO_MAX: usize = 4096;
const RHO_REL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GreenModel {
    pub charges: Vec<Complex64>,
    pub strengths: Vec<f64>,
    /// Robin offset: g(z) = sum q_k log|z - y_k| + c0.
    pub c0: f64,
    /// Max |g| over the collocation points and a twice denser boundary sample.
    pub residual: f64,
    pub tol: f64,
    pub centroid: Complex64,
    pub diameter: f64,
}

impl GreenModel {
    /// e^{-c0}.
    pub fn capacity(&self) -> f64 {
        (-self.c0).exp()
    }

    /// g without the exterior check.
    pub fn g_unchecked(&self, z: Complex64) -> f64 {
        let mut acc = CompensatedSum::default();
        for (y, q) in self.charges.iter().zip(&self.strengths) {
            acc.add(q * (z - y).norm().ln());
        }
        acc.add(self.c0);
        acc.value()
    }

    /// Gradient of g as a complex number (d/dx + i d/dy).
    pub fn gradient(&self, z: Complex64) -> Complex64 {
        let mut gx = CompensatedSum::default();
        let mut gy = CompensatedSum::default();
        for (y, q) in self.charges.iter().zip(&self.strengths) {
            let d = z - y;
            let s = q / d.norm_sqr();
            gx.add(s * d.re);
            gy.add(s * d.im);
        }
        Complex64::new(gx.value(), gy.value())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "# c0={:?} capacity={:?} residual={:e}",
            self.c0,
            self.capacity(),
            self.residual
        )?;
        writeln!(out, "x,y,q")?;
        for (y, q) in self.charges.iter().zip(&self.strengths) {
            writeln!(out, "{:?},{:?},{:?}", y.re, y.im, q)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LevelCurve {
    pub delta: f64,
    /// Boundary parameter of the ray (or gradient path) each point came from.
    pub params: Vec<f64>,
    pub points: Vec<Complex64>,
    pub dropped: usize,
}

impl LevelCurve {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,y")?;
        for p in &self.points {
            writeln!(out, "{:?},{:?}", p.re, p.im)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Boundary samples with inward normals; `corner` marks polygon vertices,
/// which take part in collocation but carry no charge.
struct Samples {
    points: Vec<Complex64>,
    normals: Vec<Complex64>,
    corner: Vec<bool>,
}

fn boundary_samples(domain: &Domain, m: usize) -> Samples {
    let verts = domain.vertices();
    if verts.is_empty() {
        let points: Vec<Complex64> = (0..m)
            .map(|k| domain.boundary_point(k as f64 / m as f64))
            .collect();
        let normals = (0..m)
            .map(|k| domain.inward_normal(k as f64 / m as f64))
            .collect();
        return Samples {
            corner: vec![false; m],
            points,
            normals,
        };
    }
    // per edge: the start vertex plus points clustered toward both ends at
    // distances (L/2) exp(-sigma (sqrt(nh) - sqrt(j)))
    let sigma = 4.0;
    let v = verts.len();
    let nh = (m / (2 * v)).max(4);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut corner = Vec::new();
    for i in 0..v {
        let a = verts[i];
        let b = verts[(i + 1) % v];
        let len = (b - a).norm();
        let e = (b - a) / len;
        let normal = Complex64::i() * e;
        let d: Vec<f64> = (1..=nh)
            .map(|j| 0.5 * len * (-sigma * ((nh as f64).sqrt() - (j as f64).sqrt())).exp())
            .collect();
        points.push(a);
        normals.push(normal);
        corner.push(true);
        for dj in &d {
            points.push(a + e * *dj);
            normals.push(normal);
            corner.push(false);
        }
        for dj in d.iter().rev().skip(1) {
            points.push(b - e * *dj);
            normals.push(normal);
            corner.push(false);
        }
    }
    Samples {
        points,
        normals,
        corner,
    }
}

/// Radius of the largest disk tangent at `b` (inward normal `n`) that
/// contains none of `others` in its interior.
fn inscribed_radius(b: Complex64, n: Complex64, others: &[Complex64], cap: f64) -> f64 {
    let mut r = cap;
    for o in others {
        let d = o - b;
        let dot = d.re * n.re + d.im * n.im;
        if dot > 1e-15 * cap {
            r = r.min(d.norm_sqr() / (2.0 * dot));
        }
    }
    r
}

fn solve_charges(domain: &Domain, n_charges: usize, n_colloc: usize) -> Result<GreenModel> {
    let src = boundary_samples(domain, n_charges);
    let col = boundary_samples(domain, n_colloc);
    let cap = 0.5 * domain.diameter;
    let tau = if domain.is_polygonal() {
        POLYGON_CHARGE_OFFSET
    } else {
        CHARGE_OFFSET
    };
    let mut charges = Vec::new();
    for ((b, n), is_corner) in src.points.iter().zip(&src.normals).zip(&src.corner) {
        if *is_corner {
            continue;
        }
        let r = inscribed_radius(*b, *n, &col.points, cap);
        let mut y = b + n * (tau * r);
        let mut shrink = 0;
        while !domain.point_in_domain(y) && shrink < 20 {
            y = b + (y - b) * 0.5;
            shrink += 1;
        }
        if domain.point_in_domain(y) {
            charges.push(y);
        }
    }
    let k = charges.len();
    if k < 2 {
        return Err(Error::InvalidArgument("too few charges".into()));
    }
    let rows = col.points.len();
    // unknowns: q_0..q_{k-2}, c0; q_{k-1} = 1 - sum
    let last = charges[k - 1];
    let mut a = DMatrix::<f64>::zeros(rows, k);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (i, x) in col.points.iter().enumerate() {
        let ll = (x - last).norm().ln();
        for j in 0..k - 1 {
            a[(i, j)] = (x - charges[j]).norm().ln() - ll;
        }
        a[(i, k - 1)] = 1.0;
        rhs[i] = -ll;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let sol = svd
        .solve(&rhs, 1e-14 * smax)
        .map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
    let mut strengths: Vec<f64> = sol.iter().take(k - 1).copied().collect();
    let mut rest = CompensatedSum::default();
    rest.add(1.0);
    for q in &strengths {
        rest.add(-q);
    }
    strengths.push(rest.value());
    let c0 = sol[k - 1];
    let mut model = GreenModel {
        charges,
        strengths,
        c0,
        residual: 0.0,
        tol: 0.0,
        centroid: domain.centroid,
        diameter: domain.diameter,
    };
    let check = boundary_samples(domain, 2 * n_colloc);
    let residual = col
        .points
        .iter()
        .chain(&check.points)
        .map(|p| model.g_unchecked(*p).abs())
        .fold(0.0, f64::max);
    model.residual = residual;
    Ok(model)
}

/// Fits the exterior Green function with `n_charges` charges and
/// `n_colloc` collocation points, doubling both (up to 4x) until the
/// residual is below `tol`.
pub fn fit_green(
    domain: &Domain,
    n_charges: usize,
    n_colloc: usize,
    tol: f64,
) -> Result<GreenModel> {
    if matches!(domain.kind, DomainKind::Cusp) {
        return Err(Error::InvalidDomain(
            "the cusp domain is not supported by the Green function solver".into(),
        ));
    }
    if n_charges < 8 || n_colloc < 2 * n_charges {
        return Err(Error::InvalidArgument(format!(
            "need n_charges >= 8 and n_colloc >= 2 n_charges, got {n_charges} and {n_colloc}"
        )));
    }
    let mut last = None;
    for level in 0..3 {
        let f = 1 << level;
        let mut model = solve_charges(domain, f * n_charges, f * n_colloc)?;
        model.tol = tol;
        if model.residual <= tol {
            return Ok(model);
        }
        last = Some(model);
    }
    let model = last.expect("at least one attempt");
    Err(Error::GreenResidual {
        residual: model.residual,
        tol,
        charges: model.charges.len(),
    })
}

/// g(z) for z outside the closed domain.
pub fn eval_green(model: &GreenModel, domain: &Domain, z: Complex64) -> Result<f64> {
    if domain.point_in_domain(z) {
        return Err(Error::NotExterior(z));
    }
    Ok(model.g_unchecked(z))
}

/// Solves g(c + s (b - c)) = level for s > 1; None when the ray does not
/// bracket a crossing.
fn ray_hit(model: &GreenModel, c: Complex64, b: Complex64, level: f64) -> Option<Complex64> {
    let dir = b - c;
    let f = |s: f64| model.g_unchecked(c + dir * s) - level;
    let mut lo = 1.0;
    let mut flo = f(lo);
    if flo > 0.0 {
        return None;
    }
    let mut step = (level.exp() - 1.0).max(1e-3);
    let mut hi = lo + step;
    let mut fhi = f(hi);
    let mut expand = 0;
    while fhi <= 0.0 {
        lo = hi;
        flo = fhi;
        step *= 2.0;
        hi = lo + step;
        fhi = f(hi);
        expand += 1;
        if expand > 60 {
            return None;
        }
    }
    // bisection to a small bracket, then Illinois regula falsi
    for _ in 0..8 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm > 0.0 {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    let mut side = 0;
    for _ in 0..100 {
        if (hi - lo) * dir.norm() < 1e-13 * model.diameter.max(1.0) {
            break;
        }
        let s = (lo * fhi - hi * flo) / (fhi - flo);
        let fs = f(s);
        if fs == 0.0 {
            return Some(c + dir * s);
        }
        if fs > 0.0 {
            hi = s;
            fhi = fs;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            lo = s;
            flo = fs;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        }
    }
    let s = if flo.abs() < fhi.abs() { lo } else { hi };
    Some(c + dir * s)
}

/// Follows the gradient of g from just outside `b` to the level set.
fn gradient_hit(
    model: &GreenModel,
    b: Complex64,
    outward: Complex64,
    level: f64,
) -> Option<Complex64> {
    let mut x = b + outward * (1e-6 * model.diameter);
    for _ in 0..500 {
        let g = model.g_unchecked(x);
        let diff = level - g;
        if diff.abs() < 1e-13 {
            return Some(x);
        }
        let grad = model.gradient(x);
        let gn = grad.norm_sqr();
        if !(gn > 0.0) {
            return None;
        }
        let mut step = grad * (diff / gn);
        let cap = 0.1 * model.diameter;
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        x += step;
    }
    None
}

fn level_point(model: &GreenModel, domain: &Domain, t: f64, level: f64) -> Option<Complex64> {
    let b = domain.boundary_point(t);
    ray_hit(model, domain.centroid, b, level)
        .filter(|p| !domain.point_in_domain(*p))
        .or_else(|| gradient_hit(model, b, -domain.inward_normal(t), level))
}

/// M points of {g = log(1 + delta)}, one per boundary parameter k / M.
pub fn level_curve(
    model: &GreenModel,
    domain: &Domain,
    delta: f64,
    m: usize,
) -> Result<LevelCurve> {
    if !(delta > 0.0 && delta <= 10.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 10], got {delta}"
        )));
    }
    if m < 64 {
        return Err(Error::InvalidArgument(format!(
            "level curve needs M >= 64, got {m}"
        )));
    }
    let level = delta.ln_1p();
    let hits: Vec<(f64, Option<Complex64>)> = (0..m)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 / m as f64;
            (t, level_point(model, domain, t, level))
        })
        .collect();
    let mut params = Vec::with_capacity(m);
    let mut points = Vec::with_capacity(m);
    let mut dropped = 0;
    for (t, h) in hits {
        match h {
            Some(p) => {
                params.push(t);
                points.push(p);
            }
            None => dropped += 1,
        }
    }
    if dropped as f64 > MAX_DROP_FRACTION * m as f64 {
        return Err(Error::LevelCurve { dropped, total: m });
    }
    Ok(LevelCurve {
        delta,
        params,
        points,
        dropped,
    })
}

/// rho_delta(z) = dist(z, L_delta) for a boundary point z.
pub fn rho(model: &GreenModel, domain: &Domain, z: Complex64, delta: f64) -> Result<f64> {
    Ok(rho_batch(model, domain, &[z], delta)?[0])
}

/// rho_delta at several boundary points, sharing the level curves.
pub fn rho_batch(
    model: &GreenModel,
    domain: &Domain,
    zs: &[Complex64],
    delta: f64,
) -> Result<Vec<f64>> {
    for z in zs {
        if !domain.on_boundary(*z) {
            return Err(Error::InvalidArgument(format!(
                "{z} is not on the boundary"
            )));
        }
    }
    let level = delta.ln_1p();
    let mut m = RHO_START;
    let mut prev: Option<Vec<f64>> = None;
    loop {
        let curve = level_curve(model, domain, delta, m)?;
        let cur: Vec<f64> = zs
            .par_iter()
            .map(|z| refine_distance(model, domain, &curve, *z, level))
            .collect();
        if let Some(p) = &prev {
            let settled = p
                .iter()
                .zip(&cur)
                .all(|(a, b)| (a - b).abs() <= RHO_REL * b);
            if settled || m >= RHO_MAX {
                return Ok(cur);
            }
        }
        if m >= RHO_MAX {
            return Ok(cur);
        }
        prev = Some(cur);
        m *= 2;
    }
}

fn refine_distance(
    model: &GreenModel,
    domain: &Domain,
    curve: &LevelCurve,
    z: Complex64,
    level: f64,
) -> f64 {
    let (k, best) = curve
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| (k, (p - z).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty curve");
    let n = curve.params.len();
    let t = curve.params[k];
    let dt = 1.0 / n as f64;
    let (_, refined) = golden_section(
        |s| match level_point(model, domain, s, level) {
            Some(p) => (p - z).norm(),
            None => f64::INFINITY,
        },
        t - dt,
        t + dt,
        1e-10,
    );
    best.min(refined)
}
