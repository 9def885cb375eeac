//! Experiment drivers: the two-sided ratio on quasidisks, the orthonormal
//! polynomial bounds, the decay on the cusp domain, plus the
//! quasiconformality and Green-function checks. Every driver returns a
//! report that can be written out as CSV and SVG.

pub mod config;
pub mod plot;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::christoffel::christoffel_lp;
use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainKind, WeightSpec};
use crate::greenmap::{fit_green, level_curve, rho_batch, GreenModel};
use crate::numeric::fit_slope;
use crate::orthopoly::{compute_basis, kernel_diag, OrthonormalBasis};
use crate::quadrature::{build_rule_with, RuleOptions};

pub use config::{ExperimentConfig, PointSpec};
pub use plot::{Plot, Series};

/// Common output interface of the experiment reports.
pub trait Report {
    /// File stem for the emitted CSV and SVG.
    fn name(&self) -> &str;
    fn is_empty(&self) -> bool;
    fn csv(&self) -> String;
    fn plot(&self) -> Plot;
    /// Human-readable summary lines, ending with an overall PASS/FAIL line.
    fn summary(&self) -> Vec<String>;
    fn passed(&self) -> bool;
}

/// Writes `<name>.csv` and `<name>.svg` into `dir`.
pub fn emit_plots(report: &dyn Report, dir: &Path) -> Result<Vec<PathBuf>> {
    if report.is_empty() {
        return Err(Error::InvalidArgument("report has no rows".into()));
    }
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{}.csv", report.name()));
    let svg = dir.join(format!("{}.svg", report.name()));
    std::fs::write(&csv, report.csv())?;
    std::fs::write(&svg, report.plot().to_svg())?;
    Ok(vec![csv, svg])
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

struct Setup {
    domain: Domain,
    weight: WeightSpec,
    basis: OrthonormalBasis,
}

fn setup(cfg: &ExperimentConfig, degree: usize) -> Result<Setup> {
    let domain = cfg.build_domain()?;
    let weight = cfg.weight();
    weight.validate(&domain)?;
    let opts = RuleOptions {
        degree: cfg.quad_degree.unwrap_or(2 * degree + 8),
        ..RuleOptions::new(cfg.quad_tol)
    };
    let rule = Arc::new(build_rule_with(&domain, &weight, &opts)?);
    let basis = compute_basis(&rule, &weight, degree)?;
    Ok(Setup {
        domain,
        weight,
        basis,
    })
}

fn green_for(cfg: &ExperimentConfig, domain: &Domain) -> Result<GreenModel> {
    let tol = if domain.is_polygonal() {
        cfg.green_tol.max(1e-6)
    } else {
        cfg.green_tol
    };
    fit_green(domain, cfg.green_charges, 2 * cfg.green_charges, tol)
}

fn wrap(n: usize, z: Complex64) -> impl Fn(Error) -> Error {
    move |e| Error::Experiment {
        n,
        z,
        source: Box::new(e),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RatioRow {
    pub n: usize,
    pub z: Complex64,
    pub lambda: f64,
    pub rho: f64,
    /// prod_j (|z - z_j| + rho)^{alpha_j}
    pub weight_product: f64,
    /// lambda rho^-2 / weight_product
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct RatioReport {
    pub p: f64,
    pub rows: Vec<RatioRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub spread: f64,
    /// Least-squares slope of log max_z R against log n.
    pub slope: f64,
    pub spread_max: f64,
    pub slope_max: f64,
    pub defect: f64,
    pub green_residual: f64,
}

impl RatioReport {
    fn from_rows(
        rows: Vec<RatioRow>,
        cfg: &ExperimentConfig,
        defect: f64,
        green_residual: f64,
    ) -> Self {
        let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let max_ratio = rows
            .iter()
            .map(|r| r.ratio)
            .fold(f64::NEG_INFINITY, f64::max);
        let (ns, maxes) = Self::max_by_n(&rows);
        let xs: Vec<f64> = ns.iter().map(|n| (*n as f64).ln()).collect();
        let ys: Vec<f64> = maxes.iter().map(|m| m.ln()).collect();
        let slope = if xs.len() >= 2 {
            fit_slope(&xs, &ys)
        } else {
            0.0
        };
        Self {
            p: cfg.p,
            rows,
            min_ratio,
            max_ratio,
            spread: max_ratio / min_ratio,
            slope,
            spread_max: cfg.spread_max,
            slope_max: cfg.slope_max,
            defect,
            green_residual,
        }
    }

    fn extreme_by_n(
        rows: &[RatioRow],
        pick: fn(f64, f64) -> f64,
        init: f64,
    ) -> (Vec<usize>, Vec<f64>) {
        let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
        ns.dedup();
        let vals = ns
            .iter()
            .map(|n| {
                rows.iter()
                    .filter(|r| r.n == *n)
                    .map(|r| r.ratio)
                    .fold(init, pick)
            })
            .collect();
        (ns, vals)
    }

    pub fn max_by_n(rows: &[RatioRow]) -> (Vec<usize>, Vec<f64>) {
        Self::extreme_by_n(rows, f64::max, f64::NEG_INFINITY)
    }

    pub fn min_by_n(rows: &[RatioRow]) -> (Vec<usize>, Vec<f64>) {
        Self::extreme_by_n(rows, f64::min, f64::INFINITY)
    }

    /// Every row's ratio recomputed from its own fields.
    pub fn recomputable(&self, rel: f64) -> bool {
        self.rows.iter().all(|r| {
            let again = r.lambda * r.rho.powi(-2) / r.weight_product;
            (again - r.ratio).abs() <= rel * r.ratio.abs()
        })
    }

    pub fn all_finite_positive(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.ratio.is_finite() && r.ratio > 0.0)
    }
}

impl Report for RatioReport {
    fn name(&self) -> &str {
        "theorem1"
    }

    fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn csv(&self) -> String {
        let mut s = String::from("n,x,y,lambda,rho,weight_product,ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.n,
                fmt(r.z.re),
                fmt(r.z.im),
                fmt(r.lambda),
                fmt(r.rho),
                fmt(r.weight_product),
                fmt(r.ratio)
            );
        }
        s
    }

    fn plot(&self) -> Plot {
        let (ns, maxes) = Self::max_by_n(&self.rows);
        let (_, mins) = Self::min_by_n(&self.rows);
        Plot {
            title: format!("Two-sided ratio, p = {}", self.p),
            x_label: "n".into(),
            y_label: "R_n(z)".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series {
                    name: "max over z".into(),
                    points: ns
                        .iter()
                        .zip(&maxes)
                        .map(|(n, v)| (*n as f64, *v))
                        .collect(),
                },
                Series {
                    name: "min over z".into(),
                    points: ns.iter().zip(&mins).map(|(n, v)| (*n as f64, *v)).collect(),
                },
            ],
        }
    }

    fn summary(&self) -> Vec<String> {
        vec![
            format!("rows = {}", self.rows.len()),
            format!(
                "min R = {:.6e}, max R = {:.6e}",
                self.min_ratio, self.max_ratio
            ),
            format!("spread = {:.4} (limit {})", self.spread, self.spread_max),
            format!(
                "slope of log max R vs log n = {:.4} (limit +-{})",
                self.slope, self.slope_max
            ),
            format!("orthonormality defect = {:.3e}", self.defect),
            format!("green residual = {:.3e}", self.green_residual),
            format!("theorem1: {}", verdict(self.passed())),
        ]
    }

    fn passed(&self) -> bool {
        self.all_finite_positive()
            && self.spread <= self.spread_max
            && self.slope.abs() <= self.slope_max
    }
}

/// Ratio R_n(z) = lambda_n(nu, p, z) rho_{1/n}(z)^-2 prod_j (|z - z_j| + rho)^-alpha_j
/// over the configured degrees and boundary points.
pub fn run_theorem1(cfg: &ExperimentConfig) -> Result<RatioReport> {
    cfg.validate()?;
    let probe = cfg.build_domain()?;
    if matches!(probe.kind, DomainKind::Cusp) {
        return Err(Error::InvalidDomain(
            "the two-sided ratio needs a quasidisk; the cusp domain is not one".into(),
        ));
    }
    let zs = cfg.evaluation_points(&probe)?;
    if zs.is_empty() {
        return Err(Error::Config(
            "no evaluation points left after corner exclusion".into(),
        ));
    }
    let Setup {
        domain,
        weight,
        basis,
    } = setup(cfg, cfg.n_max)?;
    let green = green_for(cfg, &domain)?;
    let mut rows = Vec::new();
    for n in cfg.n_min..=cfg.n_max {
        let rhos = rho_batch(&green, &domain, &zs, 1.0 / n as f64).map_err(wrap(n, zs[0]))?;
        let cells: Vec<Result<RatioRow>> = zs
            .par_iter()
            .zip(&rhos)
            .map(|(z, rho)| {
                let lambda = christoffel_lp(&basis, *z, n, cfg.p, &cfg.irls)
                    .map_err(wrap(n, *z))?
                    .value;
                let weight_product = weight.boundary_product(*z, *rho);
                let ratio = lambda * rho.powi(-2) / weight_product;
                Ok(RatioRow {
                    n,
                    z: *z,
                    lambda,
                    rho: *rho,
                    weight_product,
                    ratio,
                })
            })
            .collect();
        for c in cells {
            rows.push(c?);
        }
    }
    Ok(RatioReport::from_rows(
        rows,
        cfg,
        basis.defect,
        green.residual,
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct OpolyRow {
    pub n: usize,
    pub z: Complex64,
    pub pi_abs: f64,
    /// K_n(z, z)
    pub kernel: f64,
    pub rho: f64,
    /// rho^-1 prod_j (|z - z_j| + rho)^{-alpha_j / 2}
    pub envelope: f64,
    pub envelope_ratio: f64,
    /// max_{n < j <= k n} sqrt(j) rho_{1/j}(z) |pi_j(z)|
    pub s_stat: f64,
}

#[derive(Debug, Clone)]
pub struct OpolyReport {
    pub k_factor: usize,
    pub rows: Vec<OpolyRow>,
    pub max_envelope_ratio: f64,
    pub min_s_stat: f64,
    pub s_floor: f64,
    /// |pi_n|^2 <= K_n at every row.
    pub kernel_bound_holds: bool,
    /// K_n(z, z) non-decreasing in n at every z.
    pub lambda_monotone: bool,
    pub defect: f64,
}

impl OpolyReport {
    pub fn kernel_bound_rows(&self, slack: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.pi_abs * r.pi_abs <= r.kernel * (1.0 + slack))
    }
}

impl Report for OpolyReport {
    fn name(&self) -> &str {
        "opoly"
    }

    fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn csv(&self) -> String {
        let mut s = String::from("n,x,y,pi_abs,kernel,rho,envelope,envelope_ratio,s_stat\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                fmt(r.z.re),
                fmt(r.z.im),
                fmt(r.pi_abs),
                fmt(r.kernel),
                fmt(r.rho),
                fmt(r.envelope),
                fmt(r.envelope_ratio),
                fmt(r.s_stat)
            );
        }
        s
    }

    fn plot(&self) -> Plot {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.dedup();
        let agg =
            |f: fn(&OpolyRow) -> f64, pick: fn(f64, f64) -> f64, init: f64| -> Vec<(f64, f64)> {
                ns.iter()
                    .map(|n| {
                        let v = self
                            .rows
                            .iter()
                            .filter(|r| r.n == *n)
                            .map(f)
                            .fold(init, pick);
                        (*n as f64, v)
                    })
                    .collect()
            };
        Plot {
            title: format!("Orthonormal polynomial bounds, k = {}", self.k_factor),
            x_label: "n".into(),
            y_label: "statistic".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series {
                    name: "max |pi_n| / envelope".into(),
                    points: agg(|r| r.envelope_ratio, f64::max, f64::NEG_INFINITY),
                },
                Series {
                    name: "min S_n".into(),
                    points: agg(|r| r.s_stat, f64::min, f64::INFINITY),
                },
            ],
        }
    }

    fn summary(&self) -> Vec<String> {
        vec![
            format!("rows = {}", self.rows.len()),
            format!("max |pi_n| / envelope = {:.6}", self.max_envelope_ratio),
            format!("min S_n = {:.6} (floor {})", self.min_s_stat, self.s_floor),
            format!("|pi_n|^2 <= K_n everywhere: {}", self.kernel_bound_holds),
            format!("lambda_n non-increasing in n: {}", self.lambda_monotone),
            format!("orthonormality defect = {:.3e}", self.defect),
            format!("opoly: {}", verdict(self.passed())),
        ]
    }

    fn passed(&self) -> bool {
        self.kernel_bound_holds
            && self.lambda_monotone
            && self.max_envelope_ratio.is_finite()
            && self.min_s_stat >= self.s_floor
    }
}

/// Upper envelope and blockwise lower statistic for |pi_n(z)|.
pub fn run_opoly_bounds(cfg: &ExperimentConfig, k_factor: usize) -> Result<OpolyReport> {
    cfg.validate()?;
    if k_factor < 2 {
        return Err(Error::InvalidArgument("k_factor must be at least 2".into()));
    }
    let probe = cfg.build_domain()?;
    if matches!(probe.kind, DomainKind::Cusp) {
        return Err(Error::InvalidDomain(
            "the orthonormal polynomial bounds need a quasidisk".into(),
        ));
    }
    let zs = cfg.evaluation_points(&probe)?;
    if zs.is_empty() {
        return Err(Error::Config(
            "no evaluation points left after corner exclusion".into(),
        ));
    }
    let top = k_factor * cfg.n_max;
    let Setup {
        domain,
        weight,
        basis,
    } = setup(cfg, top)?;
    let green = green_for(cfg, &domain)?;
    // rho_{1/j}(z) for every j in [n_min, k n_max]
    let mut rho = vec![Vec::new(); top + 1];
    for (j, slot) in rho.iter_mut().enumerate().skip(cfg.n_min) {
        *slot = rho_batch(&green, &domain, &zs, 1.0 / j as f64).map_err(wrap(j, zs[0]))?;
    }
    let values: Vec<Vec<Complex64>> = zs.par_iter().map(|z| basis.values_at(*z, top)).collect();
    let mut rows = Vec::new();
    let mut lambda_monotone = true;
    for n in cfg.n_min..=cfg.n_max {
        for (i, z) in zs.iter().enumerate() {
            let pi_abs = values[i][n].norm();
            let kernel = kernel_diag(&basis, *z, n).map_err(wrap(n, *z))?;
            if n > cfg.n_min {
                let prev = kernel_diag(&basis, *z, n - 1).map_err(wrap(n, *z))?;
                lambda_monotone &= kernel >= prev;
            }
            let r = rho[n][i];
            let envelope = r.recip() / weight.boundary_product(*z, r).sqrt();
            let s_stat = ((n + 1)..=(k_factor * n))
                .map(|j| (j as f64).sqrt() * rho[j][i] * values[i][j].norm())
                .fold(0.0, f64::max);
            rows.push(OpolyRow {
                n,
                z: *z,
                pi_abs,
                kernel,
                rho: r,
                envelope,
                envelope_ratio: pi_abs / envelope,
                s_stat,
            });
        }
    }
    let max_envelope_ratio = rows.iter().map(|r| r.envelope_ratio).fold(0.0, f64::max);
    let min_s_stat = rows.iter().map(|r| r.s_stat).fold(f64::INFINITY, f64::min);
    let mut report = OpolyReport {
        k_factor,
        rows,
        max_envelope_ratio,
        min_s_stat,
        s_floor: cfg.s_floor,
        kernel_bound_holds: false,
        lambda_monotone,
        defect: basis.defect,
    };
    report.kernel_bound_holds = report.kernel_bound_rows(1e-12);
    Ok(report)
}

#[derive(Debug, Clone, Copy)]
pub struct DecayRow {
    pub n: usize,
    pub lambda: f64,
    /// lambda (8 n^2 / diam)
    pub p1: f64,
    /// lambda (8 n^2 / diam)^2
    pub p2: f64,
    /// lambda n^4
    pub n4: f64,
    /// lambda n^8 (8 / diam)^2
    pub n8: f64,
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub p: f64,
    pub diameter: f64,
    /// lambda_0 = nu(G*)
    pub lambda0: f64,
    pub rows: Vec<DecayRow>,
    /// Slope of log lambda against log n over the whole range.
    pub slope: f64,
    /// Same over the top half of the range (n >= n_max / 2).
    pub slope_top: f64,
    pub threshold: f64,
    pub proxies_decreasing: bool,
    pub lambda_monotone: bool,
    pub defect: f64,
}

impl Report for DecayReport {
    fn name(&self) -> &str {
        "theorem2"
    }

    fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn csv(&self) -> String {
        let mut s = String::from("n,lambda,p1,p2,lambda_n4,lambda_n8\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.n,
                fmt(r.lambda),
                fmt(r.p1),
                fmt(r.p2),
                fmt(r.n4),
                fmt(r.n8)
            );
        }
        s
    }

    fn plot(&self) -> Plot {
        let series = |name: &str, f: fn(&DecayRow) -> f64| Series {
            name: name.into(),
            points: self.rows.iter().map(|r| (r.n as f64, f(r))).collect(),
        };
        Plot {
            title: format!("Cusp domain decay at 0, p = {}", self.p),
            x_label: "n".into(),
            y_label: "value".into(),
            log_x: true,
            log_y: true,
            series: vec![
                series("lambda_n", |r| r.lambda),
                series("P_1", |r| r.p1),
                series("P_2", |r| r.p2),
            ],
        }
    }

    fn summary(&self) -> Vec<String> {
        vec![
            format!("lambda_0 = {:.10} (area of the domain)", self.lambda0),
            format!(
                "slope of log lambda vs log n = {:.4} (threshold {})",
                self.slope, self.threshold
            ),
            format!("slope over top half = {:.4}", self.slope_top),
            format!(
                "proxies strictly decreasing over top half: {}",
                self.proxies_decreasing
            ),
            format!("lambda_n non-increasing: {}", self.lambda_monotone),
            format!("orthonormality defect = {:.3e}", self.defect),
            format!("theorem2: {}", verdict(self.passed())),
        ]
    }

    fn passed(&self) -> bool {
        self.proxies_decreasing && self.lambda_monotone && self.slope <= self.threshold
    }
}

/// lambda_n(m*, p, 0) on the cusp domain with the Lowner proxies
/// P_k = lambda_n (8 n^2 / diam)^k.
pub fn run_theorem2(cfg: &ExperimentConfig) -> Result<DecayReport> {
    cfg.validate()?;
    let probe = cfg.build_domain()?;
    if !matches!(probe.kind, DomainKind::Cusp) {
        return Err(Error::InvalidDomain(
            "the decay experiment runs on the cusp domain".into(),
        ));
    }
    if !cfg.singularities.is_empty() || cfg.h0 != 1.0 {
        return Err(Error::Config("the decay experiment uses h = 1".into()));
    }
    let Setup { domain, basis, .. } = setup(cfg, cfg.n_max)?;
    let z = Complex64::new(0.0, 0.0);
    let diam = domain.diameter;
    let lambda0 = christoffel_lp(&basis, z, 0, cfg.p, &cfg.irls)
        .map_err(wrap(0, z))?
        .value;
    let ns: Vec<usize> = (cfg.n_min..=cfg.n_max).collect();
    let lambdas: Vec<Result<f64>> = ns
        .par_iter()
        .map(|n| {
            christoffel_lp(&basis, z, *n, cfg.p, &cfg.irls)
                .map(|r| r.value)
                .map_err(wrap(*n, z))
        })
        .collect();
    let mut rows = Vec::new();
    for (n, lam) in ns.iter().zip(lambdas) {
        let lambda = lam?;
        let nf = *n as f64;
        let q = 8.0 * nf * nf / diam;
        rows.push(DecayRow {
            n: *n,
            lambda,
            p1: lambda * q,
            p2: lambda * q * q,
            n4: lambda * nf.powi(4),
            n8: lambda * nf.powi(8) * (8.0 / diam).powi(2),
        });
    }
    let slope_of = |rs: &[&DecayRow]| {
        let x: Vec<f64> = rs.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rs.iter().map(|r| r.lambda.ln()).collect();
        if x.len() >= 2 {
            fit_slope(&x, &y)
        } else {
            f64::NAN
        }
    };
    let all: Vec<&DecayRow> = rows.iter().collect();
    let top: Vec<&DecayRow> = rows.iter().filter(|r| 2 * r.n >= cfg.n_max).collect();
    let strictly_down = |f: fn(&DecayRow) -> f64| top.windows(2).all(|w| f(w[1]) < f(w[0]));
    let proxies_decreasing = strictly_down(|r| r.p1)
        && strictly_down(|r| r.p2)
        && strictly_down(|r| r.n4)
        && strictly_down(|r| r.n8);
    let lambda_monotone =
        lambda0 >= rows[0].lambda && rows.windows(2).all(|w| w[1].lambda <= w[0].lambda);
    Ok(DecayReport {
        p: cfg.p,
        diameter: diam,
        lambda0,
        slope: slope_of(&all),
        slope_top: slope_of(&top),
        threshold: cfg.decay_slope,
        proxies_decreasing,
        lambda_monotone,
        defect: basis.defect,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct QcReport {
    pub domain: String,
    /// (M, estimate)
    pub rows: Vec<(usize, f64)>,
    pub monotone: bool,
}

impl Report for QcReport {
    fn name(&self) -> &str {
        "qc_constant"
    }

    fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn csv(&self) -> String {
        let mut s = String::from("m,estimate\n");
        for (m, v) in &self.rows {
            let _ = writeln!(s, "{m},{}", fmt(*v));
        }
        s
    }

    fn plot(&self) -> Plot {
        Plot {
            title: format!("Three-point constant estimate, {}", self.domain),
            x_label: "M".into(),
            y_label: "estimate".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                name: "estimate".into(),
                points: self.rows.iter().map(|(m, v)| (*m as f64, *v)).collect(),
            }],
        }
    }

    fn summary(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .rows
            .iter()
            .map(|(m, v)| format!("M = {m}: {v:.6}"))
            .collect();
        out.push(format!("monotone in M: {}", self.monotone));
        out.push(format!("qc-constant: {}", verdict(self.passed())));
        out
    }

    fn passed(&self) -> bool {
        self.monotone && self.rows.iter().all(|(_, v)| v.is_finite() && *v >= 1.0)
    }
}

/// Three-point constant for M doubling from `qc_min` to `qc_max`.
pub fn run_qc_constant(cfg: &ExperimentConfig) -> Result<QcReport> {
    let domain = cfg.build_domain()?;
    let mut rows = Vec::new();
    let mut m = cfg.qc_min;
    while m <= cfg.qc_max {
        rows.push((m, domain.estimate_qc_constant(m)?));
        m *= 2;
    }
    let monotone = rows.windows(2).all(|w| w[1].1 >= w[0].1);
    Ok(QcReport {
        domain: domain.kind.name().into(),
        rows,
        monotone,
    })
}

#[derive(Debug, Clone)]
pub struct LevelRow {
    pub delta: f64,
    pub points: usize,
    pub dropped: usize,
    /// max |g - log(1 + delta)| over the curve
    pub level_error: f64,
    pub min_distance_to_boundary: f64,
}

#[derive(Debug, Clone)]
pub struct GreenReport {
    pub domain: String,
    pub charges: usize,
    pub residual: f64,
    pub capacity: f64,
    /// Capacity after doubling charges and collocation points.
    pub capacity_doubled: f64,
    pub probes: usize,
    pub min_probe_value: f64,
    pub levels: Vec<LevelRow>,
    /// rho strictly increasing in delta at every evaluation point.
    pub rho_monotone: bool,
    /// Slope range of log rho against log delta over the evaluation points.
    pub rho_slopes: (f64, f64),
    pub level_curves: Vec<crate::greenmap::LevelCurve>,
}

impl Report for GreenReport {
    fn name(&self) -> &str {
        "green_check"
    }

    fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    fn csv(&self) -> String {
        let mut s = String::from("delta,points,dropped,level_error,min_distance_to_boundary\n");
        for r in &self.levels {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                fmt(r.delta),
                r.points,
                r.dropped,
                fmt(r.level_error),
                fmt(r.min_distance_to_boundary)
            );
        }
        s
    }

    fn plot(&self) -> Plot {
        Plot {
            title: format!("Level curves, {}", self.domain),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: false,
            log_y: false,
            series: self
                .level_curves
                .iter()
                .map(|c| {
                    let mut pts: Vec<(f64, f64)> = c.points.iter().map(|p| (p.re, p.im)).collect();
                    if let Some(first) = pts.first().copied() {
                        pts.push(first);
                    }
                    Series {
                        name: format!("delta = {}", c.delta),
                        points: pts,
                    }
                })
                .collect(),
        }
    }

    fn summary(&self) -> Vec<String> {
        let mut out = vec![
            format!(
                "charges = {}, residual = {:.3e}",
                self.charges, self.residual
            ),
            format!(
                "capacity = {:.12} (doubled: {:.12}, change {:.2e})",
                self.capacity,
                self.capacity_doubled,
                (self.capacity - self.capacity_doubled).abs()
            ),
            format!(
                "min g over {} exterior probes = {:.3e}",
                self.probes, self.min_probe_value
            ),
        ];
        for l in &self.levels {
            out.push(format!(
                "delta = {}: {} points, {} dropped, level error {:.2e}",
                l.delta, l.points, l.dropped, l.level_error
            ));
        }
        out.push(format!(
            "rho increasing in delta: {}; log-log slope range [{:.3}, {:.3}]",
            self.rho_monotone, self.rho_slopes.0, self.rho_slopes.1
        ));
        out.push(format!("green-check: {}", verdict(self.passed())));
        out
    }

    fn passed(&self) -> bool {
        self.min_probe_value > 0.0
            && self.rho_monotone
            && self
                .levels
                .iter()
                .all(|l| l.level_error < 1e-8 && l.min_distance_to_boundary > 0.0)
            && (self.capacity - self.capacity_doubled).abs() <= 1e-4 * self.capacity
    }
}

/// Residual, capacity stability, positivity at random exterior probes,
/// level-curve accuracy and nesting of rho in delta.
pub fn run_green_check(cfg: &ExperimentConfig) -> Result<GreenReport> {
    let domain = cfg.build_domain()?;
    let model = green_for(cfg, &domain)?;
    let tol = model.tol;
    let doubled = fit_green(&domain, 2 * cfg.green_charges, 4 * cfg.green_charges, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut min_probe_value = f64::INFINITY;
    let mut probes = 0;
    while probes < cfg.green_probes {
        let z = if rng.gen_bool(0.5) {
            let t: f64 = rng.gen();
            let b = domain.boundary_point(t);
            let out = -domain.inward_normal(t);
            b + out * (domain.diameter * 10f64.powf(rng.gen_range(-3.0..0.0)))
        } else {
            let r = domain.diameter * rng.gen_range(1.0..10.0);
            domain.centroid + Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
        };
        if domain.point_in_domain(z) || domain.on_boundary(z) {
            continue;
        }
        min_probe_value = min_probe_value.min(model.g_unchecked(z));
        probes += 1;
    }
    let mut levels = Vec::new();
    let mut curves = Vec::new();
    for &delta in &cfg.green_deltas {
        let curve = level_curve(&model, &domain, delta, 256)?;
        let target = delta.ln_1p();
        let level_error = curve
            .points
            .iter()
            .map(|p| (model.g_unchecked(*p) - target).abs())
            .fold(0.0, f64::max);
        let min_distance_to_boundary = curve
            .points
            .iter()
            .map(|p| domain.distance_to_boundary(*p))
            .fold(f64::INFINITY, f64::min);
        levels.push(LevelRow {
            delta,
            points: curve.points.len(),
            dropped: curve.dropped,
            level_error,
            min_distance_to_boundary,
        });
        curves.push(curve);
    }
    let zs = cfg.evaluation_points(&domain)?;
    let mut deltas = cfg.green_deltas.clone();
    deltas.sort_by(f64::total_cmp);
    let mut per_delta = Vec::new();
    for d in &deltas {
        per_delta.push(rho_batch(&model, &domain, &zs, *d)?);
    }
    let mut rho_monotone = true;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..zs.len() {
        for w in per_delta.windows(2) {
            rho_monotone &= w[1][i] > w[0][i];
        }
        if deltas.len() >= 2 {
            let x: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
            let y: Vec<f64> = per_delta.iter().map(|r| r[i].ln()).collect();
            let s = fit_slope(&x, &y);
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    Ok(GreenReport {
        domain: domain.kind.name().into(),
        charges: model.charges.len(),
        residual: model.residual,
        capacity: model.capacity(),
        capacity_doubled: doubled.capacity(),
        probes,
        min_probe_value,
        levels,
        rho_monotone,
        rho_slopes: (lo, hi),
        level_curves: curves,
    })
}
