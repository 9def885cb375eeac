//! Area quadrature over a domain: tensor Gauss-Legendre rules on mapped
//! cells (polar for disks and ellipses, Duffy triangles for polygons,
//! vertical strips for the cusp domain), refined adaptively toward the
//! singular points of the weight.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::{PI, TAU};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{cusp_height, Domain, DomainKind, WeightSpec};
use crate::numeric::{adaptive_gk, CompensatedComplex, GaussLegendre, REDUCE_CHUNK};

pub const DEFAULT_NODE_BUDGET: usize = 2_000_000;
pub const DEFAULT_DEGREE: usize = 80;
/// Mass below which the cusp tip is cut off.
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-40;

const MIN_ORDER: usize = 10;
const MAX_DEPTH: usize = 60;
const THETA_ORDER: usize = 16;
const STRIP_ORDER: usize = 20;

#[derive(Debug, Clone)]
pub struct RuleOptions {
    /// Relative accuracy for the test integrands.
    pub target: f64,
    /// Polynomial degree (in z and conj z combined) resolved by the base grid.
    pub degree: usize,
    pub node_budget: usize,
    /// Cusp domain only: strips whose total mass is below this are dropped.
    pub density_floor: f64,
}

impl RuleOptions {
    pub fn new(target: f64) -> Self {
        Self {
            target,
            degree: DEFAULT_DEGREE,
            node_budget: DEFAULT_NODE_BUDGET,
            density_floor: DEFAULT_DENSITY_FLOOR,
        }
    }

    pub fn degree(mut self, degree: usize) -> Self {
        self.degree = degree;
        self
    }

    pub fn node_budget(mut self, budget: usize) -> Self {
        self.node_budget = budget;
        self
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub target: f64,
    /// Estimated relative error over the test integrands.
    pub estimated_error: f64,
    /// Deepest refinement level reached.
    pub levels: usize,
    /// Per-cell error estimates (relative, max over test integrands).
    pub cell_errors: Vec<f64>,
    /// Analytic bound on the mass left out of the rule.
    pub dropped_mass: f64,
}

impl QuadratureRule {
    /// Wraps explicit nodes and weights, e.g. read back from CSV.
    pub fn from_parts(nodes: Vec<Complex64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::InvalidArgument(
                "nodes and weights must be non-empty and equal length".into(),
            ));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight {i} is not positive"
            )));
        }
        Ok(Self {
            nodes,
            weights,
            target: f64::NAN,
            estimated_error: f64::NAN,
            levels: 0,
            cell_errors: Vec::new(),
            dropped_mass: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        crate::numeric::sum(&self.weights)
    }

    /// Node weights multiplied by h at the nodes: the discrete measure nu.
    pub fn weighted_masses(&self, weight: &WeightSpec) -> Result<Vec<f64>> {
        let masses: Vec<f64> = self
            .nodes
            .par_iter()
            .zip(&self.weights)
            .map(|(z, w)| w * weight.eval(*z))
            .collect();
        if let Some(i) = masses.iter().position(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::NonFiniteIntegrand {
                index: i,
                node: self.nodes[i],
            });
        }
        Ok(masses)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,y,w")?;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            writeln!(out, "{:?},{:?},{:?}", z.re, z.im, w)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "x,y,w" {
            return Err(Error::Parse(format!(
                "expected header \"x,y,w\", got \"{header}\""
            )));
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("row {}: expected 3 fields", i + 2)));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))
            };
            nodes.push(Complex64::new(num(fields[0])?, num(fields[1])?));
            weights.push(num(fields[2])?);
        }
        Self::from_parts(nodes, weights)
    }
}

/// Builds a rule with default options for the given target accuracy.
pub fn build_rule(domain: &Domain, weight: &WeightSpec, target: f64) -> Result<QuadratureRule> {
    build_rule_with(domain, weight, &RuleOptions::new(target))
}

/// sum_q w_q f(zeta_q), failing on the first non-finite value.
pub fn integrate<F>(rule: &QuadratureRule, f: F) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let partials: Vec<std::result::Result<CompensatedComplex, usize>> = rule
        .nodes
        .par_chunks(REDUCE_CHUNK)
        .zip(rule.weights.par_chunks(REDUCE_CHUNK))
        .enumerate()
        .map(|(c, (zs, ws))| {
            let mut acc = CompensatedComplex::default();
            for (i, (z, w)) in zs.iter().zip(ws).enumerate() {
                let v = f(*z);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(c * REDUCE_CHUNK + i);
                }
                acc.add(v * *w);
            }
            Ok(acc)
        })
        .collect();
    let mut total = CompensatedComplex::default();
    for p in partials {
        match p {
            Ok(acc) => total.merge(&acc),
            Err(index) => {
                return Err(Error::NonFiniteIntegrand {
                    index,
                    node: rule.nodes[index],
                });
            }
        }
    }
    Ok(total.value())
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(rule: &QuadratureRule, f: F) -> Result<f64>
where
    F: Fn(Complex64) -> f64 + Sync,
{
    integrate(rule, |z| Complex64::new(f(z), 0.0)).map(|v| v.re)
}

#[derive(Debug, Clone, Copy)]
enum Chart {
    /// z = r (a cos t + i b sin t), jacobian a b r.
    Polar { a: f64, b: f64 },
    /// z = x + i v exp(-1/x), jacobian exp(-1/x).
    Strip,
    /// Duffy-collapsed triangle with the collapsed vertex at `p`.
    Tri {
        p: Complex64,
        e1: Complex64,
        e2: Complex64,
        area2: f64,
    },
}

impl Chart {
    #[inline]
    fn map(&self, u: f64, v: f64) -> (Complex64, f64) {
        match *self {
            Chart::Polar { a, b } => {
                let (s, c) = v.sin_cos();
                (Complex64::new(u * a * c, u * b * s), a * b * u)
            }
            Chart::Strip => {
                let h = cusp_height(u);
                (Complex64::new(u, v * h), h)
            }
            Chart::Tri { p, e1, e2, area2 } => (p + (e1 + e2 * v) * u, u * area2),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    chart: Chart,
    u0: f64,
    u1: f64,
    v0: f64,
    v1: f64,
    qu: usize,
    qv: usize,
    depth: usize,
}

impl Cell {
    fn children(&self) -> [Cell; 4] {
        let um = 0.5 * (self.u0 + self.u1);
        let vm = 0.5 * (self.v0 + self.v1);
        let shrink = |q: usize| MIN_ORDER.max((3 * q).div_ceil(4)).min(q);
        let base = Cell {
            qu: shrink(self.qu),
            qv: shrink(self.qv),
            depth: self.depth + 1,
            ..*self
        };
        [
            Cell {
                u1: um,
                v1: vm,
                ..base
            },
            Cell {
                u0: um,
                v1: vm,
                ..base
            },
            Cell {
                u1: um,
                v0: vm,
                ..base
            },
            Cell {
                u0: um,
                v0: vm,
                ..base
            },
        ]
    }

    fn node_count(&self) -> usize {
        self.qu * self.qv
    }
}

struct Tables(HashMap<usize, GaussLegendre>);

impl Tables {
    fn get(&self, q: usize) -> &GaussLegendre {
        &self.0[&q]
    }

    fn ensure(&mut self, q: usize) {
        self.0.entry(q).or_insert_with(|| GaussLegendre::new(q));
    }

    fn ensure_cell(&mut self, cell: &Cell) {
        let mut q = cell.qu.max(cell.qv);
        // every order a descendant can reach
        self.ensure(cell.qu);
        self.ensure(cell.qv);
        while q > MIN_ORDER {
            q = MIN_ORDER.max((3 * q).div_ceil(4));
            self.ensure(q);
        }
        let mut q = cell.qu.min(cell.qv);
        while q > MIN_ORDER {
            q = MIN_ORDER.max((3 * q).div_ceil(4));
            self.ensure(q);
        }
    }
}

fn for_each_node<F: FnMut(Complex64, f64)>(cell: &Cell, tables: &Tables, mut f: F) {
    let gu = tables.get(cell.qu);
    let gv = tables.get(cell.qv);
    let du = cell.u1 - cell.u0;
    let dv = cell.v1 - cell.v0;
    for (xu, wu) in gu.nodes.iter().zip(&gu.weights) {
        let u = cell.u0 + du * xu;
        for (xv, wv) in gv.nodes.iter().zip(&gv.weights) {
            let v = cell.v0 + dv * xv;
            let (z, jac) = cell.chart.map(u, v);
            f(z, wu * wv * du * dv * jac);
        }
    }
}

const N_TEST: usize = 3;

/// Test integrands: 1, |z|^2 and the singular factor of the weight.
fn test_moments(cell: &Cell, tables: &Tables, weight: &WeightSpec) -> [f64; N_TEST] {
    let mut m = [0.0; N_TEST];
    for_each_node(cell, tables, |z, w| {
        m[0] += w;
        m[1] += w * z.norm_sqr();
        m[2] += w * weight.singular_factor(z);
    });
    m
}

struct Leaf {
    cell: Cell,
    children: [[f64; N_TEST]; 4],
    err: [f64; N_TEST],
}

impl Leaf {
    fn new(cell: Cell, own: [f64; N_TEST], tables: &Tables, weight: &WeightSpec) -> Self {
        let kids = cell.children();
        let mut children = [[0.0; N_TEST]; 4];
        for (slot, kid) in children.iter_mut().zip(&kids) {
            *slot = test_moments(kid, tables, weight);
        }
        let mut err = [0.0; N_TEST];
        for k in 0..N_TEST {
            let fine: f64 = children.iter().map(|c| c[k]).sum();
            err[k] = (own[k] - fine).abs();
        }
        Self {
            cell,
            children,
            err,
        }
    }
}

#[derive(PartialEq)]
struct Ranked(f64, usize);

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Adaptive rule construction. The base grid integrates polynomials of
/// total degree `opts.degree` (times the chart jacobian) essentially
/// exactly; refinement then splits the cell with the largest estimated
/// error |Q(cell) - sum Q(children)| until the summed relative error of
/// the test integrands drops below `opts.target`.
pub fn build_rule_with(
    domain: &Domain,
    weight: &WeightSpec,
    opts: &RuleOptions,
) -> Result<QuadratureRule> {
    if !(1e-12..=1e-3).contains(&opts.target) {
        return Err(Error::InvalidArgument(format!(
            "target accuracy {} outside [1e-12, 1e-3]",
            opts.target
        )));
    }
    weight.validate(domain)?;
    let (cells, dropped_mass) = base_cells(domain, weight, opts)?;
    let mut tables = Tables(HashMap::new());
    for c in &cells {
        tables.ensure_cell(c);
    }
    let tables = tables;

    let mut leaves: Vec<Option<Leaf>> = cells
        .par_iter()
        .map(|c| {
            let own = test_moments(c, &tables, weight);
            Some(Leaf::new(*c, own, &tables, weight))
        })
        .collect();

    let mut scale = [0.0; N_TEST];
    for leaf in leaves.iter().flatten() {
        for (k, s) in scale.iter_mut().enumerate() {
            *s += leaf.children.iter().map(|c| c[k]).sum::<f64>();
        }
    }
    for s in scale.iter_mut() {
        *s = s.abs().max(f64::MIN_POSITIVE);
    }
    let rel = |err: &[f64; N_TEST]| (0..N_TEST).map(|k| err[k] / scale[k]).fold(0.0, f64::max);

    let mut heap = BinaryHeap::new();
    let mut totals = [0.0; N_TEST];
    let mut nodes: usize = 0;
    for (i, leaf) in leaves.iter().enumerate() {
        let leaf = leaf.as_ref().expect("fresh");
        heap.push(Ranked(rel(&leaf.err), i));
        for k in 0..N_TEST {
            totals[k] += leaf.err[k];
        }
        nodes += leaf.cell.node_count();
    }
    let total_rel = |t: &[f64; N_TEST]| (0..N_TEST).map(|k| t[k] / scale[k]).fold(0.0, f64::max);

    let mut splits = 0usize;
    while total_rel(&totals) > opts.target {
        let Some(Ranked(_, idx)) = heap.pop() else {
            break;
        };
        let leaf = leaves[idx].take().expect("live leaf");
        if leaf.cell.depth >= MAX_DEPTH {
            leaves[idx] = Some(leaf);
            return Err(Error::QuadratureBudget {
                target: opts.target,
                achieved: total_rel(&totals),
                budget: opts.node_budget,
            });
        }
        let kids = leaf.cell.children();
        let added: usize =
            kids.iter().map(Cell::node_count).sum::<usize>() - leaf.cell.node_count();
        if nodes + added > opts.node_budget {
            leaves[idx] = Some(leaf);
            return Err(Error::QuadratureBudget {
                target: opts.target,
                achieved: total_rel(&totals),
                budget: opts.node_budget,
            });
        }
        nodes += added;
        let mut new_leaves: Vec<Leaf> = kids
            .iter()
            .zip(&leaf.children)
            .map(|(c, own)| Leaf::new(*c, *own, &tables, weight))
            .collect();
        // children never report more error than the cell they replace
        for k in 0..N_TEST {
            let sum: f64 = new_leaves.iter().map(|l| l.err[k]).sum();
            if sum > leaf.err[k] && sum > 0.0 {
                let f = leaf.err[k] / sum;
                for l in new_leaves.iter_mut() {
                    l.err[k] *= f;
                }
            }
            totals[k] -= leaf.err[k];
        }
        for l in new_leaves {
            for k in 0..N_TEST {
                totals[k] += l.err[k];
            }
            heap.push(Ranked(rel(&l.err), leaves.len()));
            leaves.push(Some(l));
        }
        splits += 1;
        if splits.is_multiple_of(256) {
            totals = [0.0; N_TEST];
            for l in leaves.iter().flatten() {
                for k in 0..N_TEST {
                    totals[k] += l.err[k];
                }
            }
        }
    }
    let mut final_totals = [0.0; N_TEST];
    for l in leaves.iter().flatten() {
        for k in 0..N_TEST {
            final_totals[k] += l.err[k];
        }
    }
    let estimated_error = total_rel(&final_totals);

    let live: Vec<&Leaf> = leaves.iter().flatten().collect();
    let per_cell: Vec<(Vec<Complex64>, Vec<f64>, f64)> = live
        .par_iter()
        .map(|leaf| {
            let mut zs = Vec::with_capacity(leaf.cell.node_count());
            let mut ws = Vec::with_capacity(leaf.cell.node_count());
            let mut lost = 0.0;
            for_each_node(&leaf.cell, &tables, |z, w| {
                let inside = match domain.kind {
                    // tip nodes sit closer to the boundary than any fixed band
                    DomainKind::Cusp => domain.analytic_inside(z),
                    _ => domain.point_in_domain(z),
                };
                if inside && w > 0.0 {
                    zs.push(z);
                    ws.push(w);
                } else {
                    lost += w.abs();
                }
            });
            (zs, ws, lost)
        })
        .collect();
    let mut nodes_out = Vec::with_capacity(nodes);
    let mut weights_out = Vec::with_capacity(nodes);
    let mut lost_total = dropped_mass;
    for (zs, ws, lost) in per_cell {
        nodes_out.extend(zs);
        weights_out.extend(ws);
        lost_total += lost;
    }
    let levels = live.iter().map(|l| l.cell.depth).max().unwrap_or(0);
    let cell_errors = live.iter().map(|l| rel(&l.err)).collect();
    Ok(QuadratureRule {
        nodes: nodes_out,
        weights: weights_out,
        target: opts.target,
        estimated_error,
        levels,
        cell_errors,
        dropped_mass: lost_total,
    })
}

fn base_cells(
    domain: &Domain,
    weight: &WeightSpec,
    opts: &RuleOptions,
) -> Result<(Vec<Cell>, f64)> {
    let d = opts.degree.max(2);
    match &domain.kind {
        DomainKind::Disk { radius } => Ok((polar_cells(*radius, *radius, weight, d), 0.0)),
        DomainKind::Ellipse { a, b } => Ok((polar_cells(*a, *b, weight, d), 0.0)),
        DomainKind::Cusp => Ok(strip_cells(d, opts.density_floor)),
        DomainKind::Polygon { .. } | DomainKind::Custom { .. } => {
            Ok((triangle_cells(domain, weight, d)?, 0.0))
        }
    }
}

fn polar_cells(a: f64, b: f64, weight: &WeightSpec, degree: usize) -> Vec<Cell> {
    let qr = degree / 2 + 2;
    let panels = ((TAU * degree as f64) / (0.8 * THETA_ORDER as f64))
        .ceil()
        .max(4.0) as usize;
    let mut cuts: Vec<f64> = (0..=panels)
        .map(|k| TAU * k as f64 / panels as f64)
        .collect();
    for s in &weight.singularities {
        let t = (s.point.im / b).atan2(s.point.re / a).rem_euclid(TAU);
        cuts.push(t);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    let chart = Chart::Polar { a, b };
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| Cell {
            chart,
            u0: 0.0,
            u1: 1.0,
            v0: w[0],
            v1: w[1],
            qu: qr,
            qv: THETA_ORDER,
            depth: 0,
        })
        .collect()
}

/// x below which the cusp holds less than `floor` mass.
pub fn cusp_floor(floor: f64) -> f64 {
    // mass of (0, x) is about 2 x^2 exp(-1/x); solve by bisection on log
    let mass = |x: f64| 2.0 * x * x * (-1.0 / x).exp();
    let (mut lo, mut hi) = (1e-4, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > floor {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

fn strip_cells(degree: usize, floor: f64) -> (Vec<Cell>, f64) {
    let x_floor = cusp_floor(floor);
    let dropped = 2.0 * adaptive_gk(cusp_height, 0.0, x_floor, 1e-10, 200);
    let mut cuts = vec![x_floor, 1.0];
    let s_max = (1.0 / x_floor).floor() as usize;
    for s in 1..=s_max {
        let x = 1.0 / s as f64;
        if x > x_floor {
            cuts.push(x);
        }
    }
    let width = 0.05;
    let mut x = width;
    while x < 1.0 {
        if x > x_floor {
            cuts.push(x);
        }
        x += width;
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let cells = cuts
        .windows(2)
        .map(|w| {
            let half = cusp_height(w[1]);
            let qv = (degree / 2 + 1).min(8 + (degree as f64 * 2.0 * half).ceil() as usize);
            Cell {
                chart: Chart::Strip,
                u0: w[0],
                u1: w[1],
                v0: -1.0,
                v1: 1.0,
                qu: STRIP_ORDER,
                qv: qv.max(MIN_ORDER),
                depth: 0,
            }
        })
        .collect();
    (cells, dropped)
}

fn triangle_cells(domain: &Domain, weight: &WeightSpec, degree: usize) -> Result<Vec<Cell>> {
    let tol = crate::geometry::MEMBERSHIP_EPS * domain.diameter;
    let mut verts: Vec<Complex64> = domain.vertices().to_vec();
    let mut singular = vec![false; verts.len()];
    for s in &weight.singularities {
        if let Some(i) = verts.iter().position(|v| (v - s.point).norm() <= tol) {
            singular[i] = true;
            continue;
        }
        let n = verts.len();
        let edge = (0..n)
            .min_by(|&i, &j| {
                let di = seg_dist(s.point, verts[i], verts[(i + 1) % n]);
                let dj = seg_dist(s.point, verts[j], verts[(j + 1) % n]);
                di.total_cmp(&dj)
            })
            .expect("polygon has edges");
        verts.insert(edge + 1, s.point);
        singular.insert(edge + 1, true);
    }
    let tris = ear_clip(&verts)?;
    let q = degree / 2 + 2;
    let mut cells = Vec::new();
    let mut queue: Vec<[usize; 3]> = tris;
    let mut pts = verts.clone();
    let mut sing = singular.clone();
    while let Some(t) = queue.pop() {
        let count = t.iter().filter(|&&i| sing[i]).count();
        if count >= 2 {
            // split the edge between two singular vertices
            let (i, j, k) = if sing[t[0]] && sing[t[1]] {
                (t[0], t[1], t[2])
            } else if sing[t[1]] && sing[t[2]] {
                (t[1], t[2], t[0])
            } else {
                (t[2], t[0], t[1])
            };
            let m = 0.5 * (pts[i] + pts[j]);
            pts.push(m);
            sing.push(false);
            let mi = pts.len() - 1;
            queue.push([i, mi, k]);
            queue.push([mi, j, k]);
            continue;
        }
        let rot = t.iter().position(|&i| sing[i]).unwrap_or(0);
        let (p, b, c) = (pts[t[rot]], pts[t[(rot + 1) % 3]], pts[t[(rot + 2) % 3]]);
        let area2 = ((b - p).re * (c - p).im - (b - p).im * (c - p).re).abs();
        cells.push(Cell {
            chart: Chart::Tri {
                p,
                e1: b - p,
                e2: c - b,
                area2,
            },
            u0: 0.0,
            u1: 1.0,
            v0: 0.0,
            v1: 1.0,
            qu: q,
            qv: q,
            depth: 0,
        });
    }
    Ok(cells)
}

fn seg_dist(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let t = (((p - a) * ab.conj()).re / ab.norm_sqr()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Ear clipping for a counterclockwise simple polygon; collinear vertices
/// are allowed.
fn ear_clip(verts: &[Complex64]) -> Result<Vec<[usize; 3]>> {
    let cross = |a: Complex64, b: Complex64, c: Complex64| {
        (b - a).re * (c - a).im - (b - a).im * (c - a).re
    };
    let mut idx: Vec<usize> = (0..verts.len()).collect();
    let mut out = Vec::with_capacity(verts.len() - 2);
    let scale = verts.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let eps = 1e-14 * scale * scale;
    while idx.len() > 3 {
        let n = idx.len();
        let mut clipped = false;
        for k in 0..n {
            let (ia, ib, ic) = (idx[(k + n - 1) % n], idx[k], idx[(k + 1) % n]);
            let (a, b, c) = (verts[ia], verts[ib], verts[ic]);
            if cross(a, b, c) <= eps {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = verts[j];
                cross(a, b, p) >= -eps && cross(b, c, p) >= -eps && cross(c, a, p) >= -eps
            });
            if blocked {
                continue;
            }
            out.push([ia, ib, ic]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            return Err(Error::InvalidDomain("polygon triangulation failed".into()));
        }
    }
    out.push([idx[0], idx[1], idx[2]]);
    Ok(out)
}

/// One row of a Lemma 2.1 scaling run.
#[derive(Debug, Clone, Copy)]
pub struct ScalingRow {
    pub delta: f64,
    pub integral: f64,
    /// I(delta) delta^(beta-2) (|z'-z''| + delta)^(-alpha)
    pub normalized: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub alpha: f64,
    pub beta: f64,
    pub rows: Vec<ScalingRow>,
    pub max_normalized: f64,
    pub min_normalized: f64,
    /// max / min of the normalized quantity over the grid.
    pub spread: f64,
    pub pass: bool,
}

/// Threshold on the spread of the normalized integral.
pub const SCALING_SPREAD_MAX: f64 = 20.0;

/// Integrates I(delta) = int_C (|zeta - z''| + delta)^(-beta) |zeta - z'|^alpha dm
/// over the whole plane for each delta and reports the spread of the
/// normalized quantity. Uses polar coordinates about z', so the |zeta - z'|^alpha
/// factor becomes r^(alpha+1) and is handled by 1-D adaptive rules.
pub fn check_lemma21_scaling(
    alpha: f64,
    beta: f64,
    z1: Complex64,
    z2: Complex64,
    deltas: &[f64],
) -> Result<ScalingReport> {
    if !(alpha > -2.0) || !(beta > 2.0 + alpha.abs()) {
        return Err(Error::InvalidArgument(format!(
            "need alpha > -2 and beta > 2 + |alpha|, got alpha = {alpha}, beta = {beta}"
        )));
    }
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidArgument(
            "deltas must be positive and non-empty".into(),
        ));
    }
    let dist = (z2 - z1).norm();
    let rows: Vec<ScalingRow> = deltas
        .iter()
        .map(|&delta| {
            let integral = plane_integral(alpha, beta, dist, delta);
            let normalized = integral * delta.powf(beta - 2.0) * (dist + delta).powf(-alpha);
            ScalingRow {
                delta,
                integral,
                normalized,
            }
        })
        .collect();
    let max_normalized = rows
        .iter()
        .map(|r| r.normalized)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_normalized = rows
        .iter()
        .map(|r| r.normalized)
        .fold(f64::INFINITY, f64::min);
    let spread = max_normalized / min_normalized;
    Ok(ScalingReport {
        alpha,
        beta,
        rows,
        max_normalized,
        min_normalized,
        spread,
        pass: spread.is_finite() && spread <= SCALING_SPREAD_MAX,
    })
}

fn plane_integral(alpha: f64, beta: f64, dist: f64, delta: f64) -> f64 {
    // z' at the origin, z'' at `dist` on the positive real axis.
    let angular = |r: f64| -> f64 {
        if dist == 0.0 {
            return TAU * (r + delta).powf(-beta);
        }
        let f = |t: f64| {
            let d = (r * r + dist * dist - 2.0 * r * dist * t.cos())
                .max(0.0)
                .sqrt();
            (d + delta).powf(-beta)
        };
        // symmetric in t; the peak at t = 0 has width about (r - dist + delta) / r
        let w = ((r - dist).abs() + delta) / r.max(delta);
        let split = w.min(PI);
        let mut acc = adaptive_gk(f, 0.0, split, 1e-12, 400);
        if split < PI {
            acc += adaptive_gk(f, split, PI, 1e-12, 400);
        }
        2.0 * acc
    };
    let radial = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        r.powf(alpha + 1.0) * angular(r)
    };
    let mut breaks = vec![0.0, delta];
    if dist > 0.0 {
        for f in [0.5, 1.0 - 1e-3, 1.0, 1.0 + 1e-3, 2.0] {
            breaks.push(dist * f);
        }
        breaks.push((dist - delta).max(0.0));
        breaks.push(dist + delta);
    }
    let r_far = 4.0 * (dist + delta);
    breaks.push(r_far);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            total += adaptive_gk(radial, w[0], w[1], 1e-10, 2000);
        }
    }
    // tail: r = r_far / s, dr = r_far / s^2 ds
    total += adaptive_gk(
        |s: f64| {
            if s <= 0.0 {
                0.0
            } else {
                let r = r_far / s;
                radial(r) * r_far / (s * s)
            }
        },
        0.0,
        1.0,
        1e-10,
        2000,
    );
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Singularity;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn unit_disk_area_and_second_moment() {
        let d = Domain::disk(1.0).unwrap();
        let rule = build_rule(&d, &WeightSpec::unit(), 1e-10).unwrap();
        assert!((rule.total_weight() - PI).abs() < 1e-10 * PI);
        let m2 = integrate_real(&rule, |z| z.norm_sqr()).unwrap();
        assert!((m2 - PI / 2.0).abs() < 1e-9 * PI / 2.0);
        let m1 = integrate(&rule, |z| z).unwrap();
        assert!(m1.norm() < 1e-9);
        let m4 = integrate_real(&rule, |z| z.norm_sqr().powi(2)).unwrap();
        assert!((m4 - PI / 3.0).abs() < 1e-8 * PI / 3.0);
    }

    #[test]
    fn disk_moment_drift() {
        let d = Domain::disk(1.0).unwrap();
        let rule = build_rule(&d, &WeightSpec::unit(), 1e-10).unwrap();
        for j in 0..=12i32 {
            for k in 0..=12i32 {
                let m = integrate(&rule, |z| z.powi(j) * z.conj().powi(k)).unwrap();
                if j == k {
                    let exact = PI / (j as f64 + 1.0);
                    assert!((m.re - exact).abs() < 1e-8 * exact, "j = {j}");
                } else {
                    assert!(m.norm() < 1e-9 * PI, "j = {j}, k = {k}");
                }
            }
        }
    }

    #[test]
    fn singular_weight_matches_polar_oracle() {
        // polar coordinates about 1: int_{pi/2}^{3pi/2} int_0^{-2 cos t} dr dt = 4
        let d = Domain::disk(1.0).unwrap();
        let w = WeightSpec::constant(
            1.0,
            vec![Singularity {
                point: c(1.0, 0.0),
                exponent: -1.0,
            }],
        );
        let rule = build_rule(&d, &w, 1e-8).unwrap();
        let v = integrate_real(&rule, |z| 1.0 / (z - 1.0).norm()).unwrap();
        assert!((v - 4.0).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn nodes_interior_and_weights_positive() {
        for d in [
            Domain::ellipse(2.0, 1.0).unwrap(),
            Domain::square(2.0).unwrap(),
            Domain::cusp().unwrap(),
        ] {
            let rule =
                build_rule_with(&d, &WeightSpec::unit(), &RuleOptions::new(1e-10).degree(20))
                    .unwrap();
            assert!(rule.weights.iter().all(|w| *w > 0.0));
            assert!(rule.nodes.iter().all(|z| d.analytic_inside(*z)));
            let rel = (rule.total_weight() - d.area).abs() / d.area;
            assert!(rel < 1e-10, "{}: {rel}", d.kind.name());
        }
    }

    #[test]
    fn polygon_with_corner_singularity() {
        let d = Domain::square(2.0).unwrap();
        let w = WeightSpec::constant(
            1.0,
            vec![
                Singularity {
                    point: c(1.0, 1.0),
                    exponent: -1.0,
                },
                Singularity {
                    point: c(0.0, -1.0),
                    exponent: 0.5,
                },
            ],
        );
        let rule = build_rule_with(&d, &w, &RuleOptions::new(1e-8).degree(10)).unwrap();
        assert!(rule.nodes.iter().all(|z| d.point_in_domain(*z)));
        // int over the square of |z - (1+i)|^-1 via polar coordinates at the corner
        let oracle = 2.0 * adaptive_gk(|t: f64| 2.0 / t.cos(), 0.0, PI / 4.0, 1e-14, 100);
        let v = integrate_real(&rule, |z| 1.0 / (z - c(1.0, 1.0)).norm()).unwrap();
        assert!((v - oracle).abs() < 1e-6 * oracle, "{v} vs {oracle}");
    }

    #[test]
    fn budget_failure_reports_accuracy() {
        let d = Domain::disk(1.0).unwrap();
        let w = WeightSpec::constant(
            1.0,
            vec![Singularity {
                point: c(1.0, 0.0),
                exponent: -1.5,
            }],
        );
        let err =
            build_rule_with(&d, &w, &RuleOptions::new(1e-12).node_budget(20_000)).unwrap_err();
        match err {
            Error::QuadratureBudget {
                achieved, budget, ..
            } => {
                assert!(achieved > 1e-12 && achieved.is_finite());
                assert_eq!(budget, 20_000);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn integrate_names_bad_node() {
        let rule =
            QuadratureRule::from_parts(vec![c(0.0, 0.0), c(0.5, 0.0)], vec![1.0, 1.0]).unwrap();
        let err = integrate_real(&rule, |z| 1.0 / z.re).unwrap_err();
        assert!(matches!(err, Error::NonFiniteIntegrand { index: 0, .. }));
    }

    #[test]
    fn csv_round_trip() {
        let d = Domain::ellipse(2.0, 1.0).unwrap();
        let rule =
            build_rule_with(&d, &WeightSpec::unit(), &RuleOptions::new(1e-8).degree(10)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rule.csv");
        rule.write_csv(&path).unwrap();
        let back = QuadratureRule::read_csv(&path).unwrap();
        assert_eq!(back.nodes, rule.nodes);
        assert_eq!(back.weights, rule.weights);
        let (a, b) = (rule.total_weight(), back.total_weight());
        assert!((a - b).abs() <= 1e-15 * a);
    }

    #[test]
    fn singular_integral_closed_form_case() {
        let deltas = [0.1, 0.05, 0.025, 0.0125];
        let rep = check_lemma21_scaling(0.0, 4.0, c(0.0, 0.0), c(0.0, 0.0), &deltas).unwrap();
        for row in &rep.rows {
            let exact = PI / (3.0 * row.delta * row.delta);
            assert!((row.integral - exact).abs() < 1e-8 * exact);
        }
        assert!(rep.spread < 1.0 + 1e-8);
        assert!(check_lemma21_scaling(1.0, 3.0, c(0.0, 0.0), c(0.0, 0.0), &deltas).is_err());
    }

    #[test]
    fn rejects_out_of_range_target() {
        let d = Domain::disk(1.0).unwrap();
        assert!(build_rule(&d, &WeightSpec::unit(), 1e-2).is_err());
        assert!(build_rule(&d, &WeightSpec::unit(), 1e-13).is_err());
    }
}
