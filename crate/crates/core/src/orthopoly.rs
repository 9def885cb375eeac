//! Weighted Bergman orthonormal polynomials over a quadrature rule.
//!
//! The basis is built by Arnoldi iteration on node vectors: each new
//! vector is xi * pi_k (xi the scaled variable) orthogonalized against all
//! previous ones, twice. The Hessenberg entries give a recurrence that
//! evaluates pi_j anywhere in O(n^2) without forming monomial sums.

use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::WeightSpec;
use crate::numeric::{weighted_dot, weighted_norm_sqr, CompensatedComplex, CompensatedSum};
use crate::quadrature::QuadratureRule;

pub const MAX_DEGREE: usize = 200;
pub const DEFECT_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    pub degree: usize,
    /// Center of the scaled frame xi = (z - center) / scale.
    pub center: Complex64,
    pub scale: f64,
    /// hess[k][j] = <xi pi_k, pi_j> for j <= k + 1; hess[k][k + 1] is real
    /// and positive.
    pub hess: Vec<Vec<Complex64>>,
    /// coeffs[j][i]: coefficient of xi^i in pi_j.
    pub coeffs: Vec<Vec<Complex64>>,
    /// values[j][q] = pi_j(zeta_q).
    pub values: Vec<Vec<Complex64>>,
    /// w_q h(zeta_q).
    pub masses: Vec<f64>,
    pub total_mass: f64,
    /// max |Gram - I| over all pairs.
    pub defect: f64,
    pub rule: Arc<QuadratureRule>,
    pub weight: WeightSpec,
}

/// Orthonormalizes 1, xi, xi^2, ... against the discrete measure
/// w_q h(zeta_q) up to degree `n`.
pub fn compute_basis(
    rule: &Arc<QuadratureRule>,
    weight: &WeightSpec,
    n: usize,
) -> Result<OrthonormalBasis> {
    if n > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "degree {n} exceeds cap {MAX_DEGREE}"
        )));
    }
    let needed = (n + 1) * (n + 2) / 2;
    if rule.len() < needed {
        return Err(Error::InvalidArgument(format!(
            "rule has {} nodes, degree {n} needs at least {needed}",
            rule.len()
        )));
    }
    let masses = rule.weighted_masses(weight)?;
    let total_mass = crate::numeric::sum(&masses);
    if !(total_mass > 0.0) {
        return Err(Error::InvalidWeight("weighted mass is not positive".into()));
    }

    let mut cw = CompensatedComplex::default();
    for (z, w) in rule.nodes.iter().zip(&rule.weights) {
        cw.add(z * *w);
    }
    let center = cw.value() / rule.total_weight();
    let scale = 2.0
        * rule
            .nodes
            .iter()
            .map(|z| (z - center).norm())
            .fold(0.0, f64::max);
    let xi: Vec<Complex64> = rule.nodes.iter().map(|z| (z - center) / scale).collect();

    let c0 = total_mass.sqrt().recip();
    let mut values = vec![vec![Complex64::new(c0, 0.0); rule.len()]];
    let mut hess: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<Complex64> = values[k].par_iter().zip(&xi).map(|(p, x)| p * x).collect();
        let mut h = vec![Complex64::new(0.0, 0.0); k + 2];
        for _pass in 0..2 {
            let proj: Vec<Complex64> = (0..=k)
                .map(|j| weighted_dot(&masses, &v, &values[j]))
                .collect();
            v.par_iter_mut().enumerate().for_each(|(q, vq)| {
                let mut acc = CompensatedComplex::default();
                for (j, c) in proj.iter().enumerate() {
                    acc.add_mul(*c, values[j][q]);
                }
                *vq -= acc.value();
            });
            for (hj, c) in h.iter_mut().zip(&proj) {
                *hj += c;
            }
        }
        let norm = weighted_norm_sqr(&masses, &v).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Orthogonalization {
                degree: k + 1,
                defect: f64::INFINITY,
            });
        }
        h[k + 1] = Complex64::new(norm, 0.0);
        v.par_iter_mut().for_each(|x| *x /= norm);
        values.push(v);
        hess.push(h);
    }

    // Gram check, degree by degree
    let mut defect: f64 = 0.0;
    for k in 0..=n {
        let row: Vec<f64> = (0..=k)
            .into_par_iter()
            .map(|j| {
                let g = weighted_dot(&masses, &values[k], &values[j]);
                let target = if j == k { 1.0 } else { 0.0 };
                (g - target).norm()
            })
            .collect();
        let worst = row.into_iter().fold(0.0, f64::max);
        if worst > DEFECT_TOL {
            return Err(Error::Orthogonalization {
                degree: k,
                defect: worst,
            });
        }
        defect = defect.max(worst);
    }

    let coeffs = monomial_coefficients(c0, &hess);
    Ok(OrthonormalBasis {
        degree: n,
        center,
        scale,
        hess,
        coeffs,
        values,
        masses,
        total_mass,
        defect,
        rule: Arc::clone(rule),
        weight: weight.clone(),
    })
}

fn monomial_coefficients(c0: f64, hess: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut coeffs = vec![vec![Complex64::new(c0, 0.0)]];
    for (k, h) in hess.iter().enumerate() {
        let mut next = vec![Complex64::new(0.0, 0.0); k + 2];
        for (i, c) in coeffs[k].iter().enumerate() {
            next[i + 1] += c;
        }
        for (j, hj) in h.iter().take(k + 1).enumerate() {
            for (i, c) in coeffs[j].iter().enumerate() {
                next[i] -= hj * c;
            }
        }
        let d = h[k + 1].re;
        for c in next.iter_mut() {
            *c /= d;
        }
        coeffs.push(next);
    }
    coeffs
}

impl OrthonormalBasis {
    pub fn xi(&self, z: Complex64) -> Complex64 {
        (z - self.center) / self.scale
    }

    fn check_degree(&self, n: usize) -> Result<()> {
        if n > self.degree {
            return Err(Error::InvalidArgument(format!(
                "degree {n} exceeds basis degree {}",
                self.degree
            )));
        }
        Ok(())
    }

    /// (pi_0(z), ..., pi_n(z)) through the stored recurrence.
    pub fn values_at(&self, z: Complex64, n: usize) -> Vec<Complex64> {
        let n = n.min(self.degree);
        let x = self.xi(z);
        let mut out = Vec::with_capacity(n + 1);
        out.push(Complex64::new(self.total_mass.sqrt().recip(), 0.0));
        for k in 0..n {
            let h = &self.hess[k];
            let mut acc = CompensatedComplex::default();
            acc.add_mul(x, out[k]);
            for (j, hj) in h.iter().take(k + 1).enumerate() {
                acc.add_mul(-hj, out[j]);
            }
            out.push(acc.value() / h[k + 1].re);
        }
        out
    }

    pub fn leading_coefficient(&self, j: usize) -> Complex64 {
        *self.coeffs[j].last().expect("non-empty")
    }

    /// CSV of coefficients in the scaled monomial basis with a header
    /// recording the frame and the orthonormality defect.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "# center={:?},{:?} scale={:?} degree={} defect={:e}",
            self.center.re, self.center.im, self.scale, self.degree, self.defect
        )?;
        writeln!(out, "degree,k,re,im")?;
        for (j, row) in self.coeffs.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                writeln!(out, "{j},{k},{:?},{:?}", c.re, c.im)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// (pi_0(z), ..., pi_n(z)).
pub fn orthonormal_values(
    basis: &OrthonormalBasis,
    z: Complex64,
    n: usize,
) -> Result<Vec<Complex64>> {
    basis.check_degree(n)?;
    Ok(basis.values_at(z, n))
}

/// K_n(z, z) = sum_{j <= n} |pi_j(z)|^2.
pub fn kernel_diag(basis: &OrthonormalBasis, z: Complex64, n: usize) -> Result<f64> {
    basis.check_degree(n)?;
    let vals = basis.values_at(z, n);
    let mut acc = CompensatedSum::default();
    for v in &vals {
        acc.add_prod(v.re, v.re);
        acc.add_prod(v.im, v.im);
    }
    let k = acc.value();
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::KernelUnderflow { z });
    }
    Ok(k)
}

/// lambda_n(nu, 2, z) = 1 / K_n(z, z).
pub fn christoffel_p2(basis: &OrthonormalBasis, z: Complex64, n: usize) -> Result<f64> {
    let k = kernel_diag(basis, z, n)?;
    let lam = k.recip();
    if !(lam > 0.0) {
        return Err(Error::KernelUnderflow { z });
    }
    Ok(lam)
}
