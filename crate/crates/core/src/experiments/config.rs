//! Plain-text `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::christoffel::IrlsOptions;
use crate::error::{Error, Result};
use crate::geometry::{make_catalog_domain, Domain, DomainKind, Singularity, WeightSpec};
use crate::orthopoly::MAX_DEGREE;

#[derive(Debug, Clone, PartialEq)]
pub enum PointSpec {
    /// Evenly spaced boundary parameters, offset by half a step.
    Count(usize),
    List(Vec<Complex64>),
}

#[derive(Debug, Clone)]
pub enum DomainSource {
    Catalog(DomainKind),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub domain: DomainSource,
    pub h0: f64,
    pub singularities: Vec<Singularity>,
    pub p: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub points: PointSpec,
    pub quad_tol: f64,
    /// Polynomial degree resolved by the quadrature base grid; defaults
    /// to twice the largest degree used plus a margin.
    pub quad_degree: Option<usize>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub spread_max: f64,
    pub slope_max: f64,
    /// Threshold on the log-log slope of lambda_n at the cusp tip.
    pub decay_slope: f64,
    pub k_factor: usize,
    /// Evaluation points closer than this multiple of the diameter to a
    /// polygon corner are skipped.
    pub corner_exclusion: f64,
    pub green_charges: usize,
    pub green_tol: f64,
    pub green_deltas: Vec<f64>,
    pub green_probes: usize,
    pub qc_min: usize,
    pub qc_max: usize,
    pub s_floor: f64,
    pub irls: IrlsOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: DomainSource::Catalog(DomainKind::Disk { radius: 1.0 }),
            h0: 1.0,
            singularities: Vec::new(),
            p: 2.0,
            n_min: 4,
            n_max: 40,
            points: PointSpec::Count(24),
            quad_tol: 1e-10,
            quad_degree: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            spread_max: 50.0,
            slope_max: 0.25,
            decay_slope: -5.0,
            k_factor: 2,
            corner_exclusion: 1e-3,
            green_charges: 128,
            green_tol: 1e-10,
            green_deltas: vec![0.05, 0.1, 0.5],
            green_probes: 1000,
            qc_min: 256,
            qc_max: 4096,
            s_floor: 0.3,
            irls: IrlsOptions::default(),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse \"{v}\" as a number: {e}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse \"{v}\" as a count: {e}")))
}

/// "x,y" (or "x y").
pub fn parse_complex(v: &str) -> Result<Complex64> {
    let parts: Vec<&str> = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!(
            "expected a point \"x,y\", got \"{v}\""
        )));
    }
    Ok(Complex64::new(
        parse_f64("x", parts[0])?,
        parse_f64("y", parts[1])?,
    ))
}

/// "x,y; x,y; ..."
pub fn parse_point_list(v: &str) -> Result<Vec<Complex64>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_complex)
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        if let DomainSource::File(f) = &cfg.domain {
            if f.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.domain = DomainSource::File(dir.join(f));
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim().to_string();
            if kv.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k}", i + 1)));
            }
        }
        let mut cfg = Self::default();
        let mut alphas: BTreeMap<usize, f64> = BTreeMap::new();
        let mut zs: BTreeMap<usize, Complex64> = BTreeMap::new();
        let kind = kv
            .get("domain.kind")
            .cloned()
            .unwrap_or_else(|| "disk".into());
        let get = |k: &str| kv.get(k).map(String::as_str);
        let num_or = |k: &str, d: f64| {
            get(k)
                .map(|v| parse_f64(k, v))
                .transpose()
                .map(|o| o.unwrap_or(d))
        };
        cfg.domain = match kind.as_str() {
            "disk" => DomainSource::Catalog(DomainKind::Disk {
                radius: num_or("domain.r", 1.0)?,
            }),
            "ellipse" => DomainSource::Catalog(DomainKind::Ellipse {
                a: num_or("domain.a", 2.0)?,
                b: num_or("domain.b", 1.0)?,
            }),
            "square" => DomainSource::Catalog(DomainKind::square(num_or("domain.side", 2.0)?)),
            "polygon" => {
                let v = get("domain.vertices")
                    .ok_or_else(|| Error::Config("polygon needs domain.vertices".into()))?;
                DomainSource::Catalog(DomainKind::Polygon {
                    vertices: parse_point_list(v)?,
                })
            }
            "cusp" => DomainSource::Catalog(DomainKind::Cusp),
            "custom" => {
                let f = get("domain.file")
                    .ok_or_else(|| Error::Config("custom needs domain.file".into()))?;
                DomainSource::File(PathBuf::from(f))
            }
            other => return Err(Error::Config(format!("unknown domain.kind \"{other}\""))),
        };
        for (k, v) in &kv {
            let v = v.as_str();
            match k.as_str() {
                "domain.kind" | "domain.r" | "domain.a" | "domain.b" | "domain.side"
                | "domain.vertices" | "domain.file" => {}
                "weight.h0" => cfg.h0 = parse_f64(k, v)?,
                "p" => cfg.p = parse_f64(k, v)?,
                "n_min" => cfg.n_min = parse_usize(k, v)?,
                "n_max" => cfg.n_max = parse_usize(k, v)?,
                "points" => {
                    cfg.points = match v.parse::<usize>() {
                        Ok(n) => PointSpec::Count(n),
                        Err(_) => PointSpec::List(parse_point_list(v)?),
                    }
                }
                "quad_tol" => cfg.quad_tol = parse_f64(k, v)?,
                "quad_degree" => cfg.quad_degree = Some(parse_usize(k, v)?),
                "out" => cfg.out_dir = PathBuf::from(v),
                "seed" => {
                    cfg.seed = v
                        .parse()
                        .map_err(|e| Error::Config(format!("seed: cannot parse \"{v}\": {e}")))?
                }
                "spread_max" => cfg.spread_max = parse_f64(k, v)?,
                "slope_max" => cfg.slope_max = parse_f64(k, v)?,
                "decay_slope" => cfg.decay_slope = parse_f64(k, v)?,
                "k_factor" => cfg.k_factor = parse_usize(k, v)?,
                "corner_exclusion" => cfg.corner_exclusion = parse_f64(k, v)?,
                "s_floor" => cfg.s_floor = parse_f64(k, v)?,
                "green.charges" => cfg.green_charges = parse_usize(k, v)?,
                "green.tol" => cfg.green_tol = parse_f64(k, v)?,
                "green.probes" => cfg.green_probes = parse_usize(k, v)?,
                "green.deltas" => {
                    cfg.green_deltas = v
                        .split(',')
                        .map(|s| parse_f64(k, s.trim()))
                        .collect::<Result<Vec<_>>>()?
                }
                "qc.m_min" => cfg.qc_min = parse_usize(k, v)?,
                "qc.m_max" => cfg.qc_max = parse_usize(k, v)?,
                "irls.tol" => cfg.irls.tol = parse_f64(k, v)?,
                "irls.max_iter" => cfg.irls.max_iter = parse_usize(k, v)?,
                "irls.damping" => cfg.irls.damping = Some(parse_f64(k, v)?),
                "irls.eps_floor" => cfg.irls.eps_floor = parse_f64(k, v)?,
                other => {
                    if let Some(idx) = other.strip_prefix("weight.alpha.") {
                        alphas.insert(parse_usize(other, idx)?, parse_f64(other, v)?);
                    } else if let Some(idx) = other.strip_prefix("weight.z.") {
                        zs.insert(parse_usize(other, idx)?, parse_complex(v)?);
                    } else {
                        return Err(Error::Config(format!("unknown key \"{other}\"")));
                    }
                }
            }
        }
        if alphas.keys().ne(zs.keys()) {
            return Err(Error::Config(
                "every weight.alpha.N needs a matching weight.z.N".into(),
            ));
        }
        cfg.singularities = alphas
            .iter()
            .map(|(i, a)| Singularity {
                point: zs[i],
                exponent: *a,
            })
            .collect();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_min < 1 {
            return Err(Error::Config("n_min must be at least 1".into()));
        }
        if self.n_max < self.n_min || self.n_max > MAX_DEGREE {
            return Err(Error::Config(format!(
                "need 1 <= n_min <= n_max <= {MAX_DEGREE}, got [{}, {}]",
                self.n_min, self.n_max
            )));
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(Error::Config(format!(
                "p must satisfy 1 <= p < infinity, got {}",
                self.p
            )));
        }
        if !(self.h0 > 0.0) {
            return Err(Error::Config("weight.h0 must be positive".into()));
        }
        if self.k_factor < 2 {
            return Err(Error::Config("k_factor must be an integer >= 2".into()));
        }
        if let PointSpec::Count(0) = self.points {
            return Err(Error::Config("points must be positive".into()));
        }
        Ok(())
    }

    pub fn build_domain(&self) -> Result<Domain> {
        match &self.domain {
            DomainSource::Catalog(kind) => make_catalog_domain(kind.clone()),
            DomainSource::File(path) => Domain::from_vertex_file(path),
        }
    }

    pub fn weight(&self) -> WeightSpec {
        WeightSpec::constant(self.h0, self.singularities.clone())
    }

    /// Boundary evaluation points; explicit lists must lie on the boundary.
    pub fn evaluation_points(&self, domain: &Domain) -> Result<Vec<Complex64>> {
        match &self.points {
            PointSpec::List(list) => {
                for z in list {
                    if !domain.on_boundary(*z) {
                        return Err(Error::Config(format!(
                            "evaluation point {z} is not on the boundary"
                        )));
                    }
                }
                Ok(list.clone())
            }
            PointSpec::Count(n) => {
                let corners: Vec<Complex64> = domain.vertices().to_vec();
                let keep = self.corner_exclusion * domain.diameter;
                Ok((0..*n)
                    .map(|k| domain.boundary_point((k as f64 + 0.5) / *n as f64))
                    .filter(|z| corners.iter().all(|c| (z - c).norm() > keep))
                    .collect())
            }
        }
    }
}
