//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use christoffel_lab::christoffel::{christoffel_lp, IrlsOptions};
use christoffel_lab::experiments::{
    run_opoly_bounds, run_theorem1, run_theorem2, DecayReport, ExperimentConfig, RatioReport,
    Report,
};
use christoffel_lab::greenmap::{eval_green, fit_green, level_curve, rho_batch};
use christoffel_lab::orthopoly::compute_basis;
use christoffel_lab::quadrature::{build_rule, check_lemma21_scaling};
use christoffel_lab::{Complex64, Domain, WeightSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped(name: &str) -> Result<ExperimentConfig, String> {
    ExperimentConfig::from_file(&configs_dir().join(name)).map_err(err)
}

fn unit_circle(count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|k| Complex64::from_polar(1.0, TAU * (k as f64 + 0.5) / count as f64))
        .collect()
}

fn disk_closed_forms() -> Outcome {
    let start = Instant::now();
    let domain = Domain::disk(1.0).map_err(err)?;
    let weight = WeightSpec::unit();
    let rule = Arc::new(build_rule(&domain, &weight, 1e-10).map_err(err)?);
    let basis = compute_basis(&rule, &weight, 30).map_err(err)?;
    let green = fit_green(&domain, 128, 256, 1e-10).map_err(err)?;
    let zs = unit_circle(16);
    let opts = IrlsOptions::default();
    let (mut worst_lambda, mut worst_rho) = (0.0f64, 0.0f64);
    for n in 0..=30usize {
        let exact = TAU / ((n + 1) * (n + 2)) as f64;
        for z in &zs {
            let lam = christoffel_lp(&basis, *z, n, 2.0, &opts)
                .map_err(err)?
                .value;
            worst_lambda = worst_lambda.max(rel(lam, exact));
        }
        if n >= 1 {
            for r in rho_batch(&green, &domain, &zs, 1.0 / n as f64).map_err(err)? {
                worst_rho = worst_rho.max(rel(r, 1.0 / n as f64));
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst_lambda <= 1e-6 && worst_rho <= 1e-6 && elapsed < Duration::from_secs(60);
    Ok((
        ok,
        format!(
            "max rel err lambda {worst_lambda:.2e}, rho {worst_rho:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn interior_invariance() -> Outcome {
    let domain = Domain::disk(1.0).map_err(err)?;
    let weight = WeightSpec::unit();
    let rule = Arc::new(build_rule(&domain, &weight, 1e-10).map_err(err)?);
    let basis = compute_basis(&rule, &weight, 10).map_err(err)?;
    let opts = IrlsOptions::default();
    let mut worst = 0.0f64;
    for p in [1.0, 1.5, 2.0, 3.0] {
        for n in [0, 5, 10] {
            let lam = christoffel_lp(&basis, Complex64::new(0.0, 0.0), n, p, &opts)
                .map_err(err)?
                .value;
            worst = worst.max(rel(lam, PI));
        }
    }
    Ok((worst <= 1e-4, format!("max rel err vs pi {worst:.2e}")))
}

/// Bergman kernel of the unit disk: sum_k (k+1) |z|^{2k} / pi.
fn disk_kernel(z: Complex64, n: usize) -> f64 {
    let r2 = z.norm_sqr();
    (0..=n)
        .map(|k| (k + 1) as f64 * r2.powi(k as i32))
        .sum::<f64>()
        / PI
}

/// Area-orthogonal Chebyshev U_k on the ellipse with semi-axes a > b:
/// int |U_k(z/c)|^2 dm = c^2 pi / (4(k+1)) (R^{2k+2} - R^{-2k-2}), R = (a+b)/c.
fn ellipse_kernel(a: f64, b: f64, z: Complex64, n: usize) -> f64 {
    let c = (a * a - b * b).sqrt();
    let big = (a + b) / c;
    let x = z / c;
    let (mut prev, mut cur) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    let mut k_sum = 0.0;
    for k in 0..=n {
        let e = 2.0 * (k + 1) as f64;
        let norm = c * c * PI / (4.0 * (k + 1) as f64) * (big.powf(e) - big.powf(-e));
        k_sum += cur.norm_sqr() / norm;
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    k_sum
}

fn p2_oracle() -> Outcome {
    let weight = WeightSpec::unit();
    let opts = IrlsOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    let disk = Domain::disk(1.0).map_err(err)?;
    let ellipse = Domain::ellipse(2.0, 1.0).map_err(err)?;
    for (domain, half) in [(&disk, (1.2, 1.2)), (&ellipse, (2.2, 1.2))] {
        let rule = Arc::new(build_rule(domain, &weight, 1e-10).map_err(err)?);
        let basis = compute_basis(&rule, &weight, 30).map_err(err)?;
        for _ in 0..25 {
            let z = Complex64::new(
                rng.gen_range(-half.0..half.0),
                rng.gen_range(-half.1..half.1),
            );
            let n = rng.gen_range(0..=30usize);
            let k = if domain.area < 4.0 {
                disk_kernel(z, n)
            } else {
                ellipse_kernel(2.0, 1.0, z, n)
            };
            let lam = christoffel_lp(&basis, z, n, 2.0, &opts).map_err(err)?.value;
            worst = worst.max(rel(lam, 1.0 / k));
        }
    }
    Ok((
        worst <= 1e-8,
        format!("max rel err vs 1/K_n over 50 pairs {worst:.2e}"),
    ))
}

fn two_sided_ratio(report: &RatioReport, elapsed: Duration) -> Outcome {
    let finite = report.all_finite_positive();
    let ok = finite
        && report.spread <= 50.0
        && report.slope.abs() <= 0.25
        && report.recomputable(1e-12)
        && elapsed < Duration::from_secs(15 * 60);
    Ok((
        ok,
        format!(
            "{} ratios, spread {:.3}, slope {:.4}, {:.1}s",
            report.rows.len(),
            report.spread,
            report.slope,
            elapsed.as_secs_f64()
        ),
    ))
}

fn cusp_decay(report: &DecayReport, elapsed: Duration) -> Outcome {
    let top: Vec<_> = report
        .rows
        .iter()
        .filter(|r| (20..=40).contains(&r.n))
        .collect();
    let n4 = top.windows(2).all(|w| w[1].n4 < w[0].n4);
    let n8 = top.windows(2).all(|w| w[1].n8 < w[0].n8);
    let covers =
        report.rows.first().map(|r| r.n) == Some(8) && report.rows.last().map(|r| r.n) == Some(40);
    let ok = covers && n4 && n8 && report.slope <= -5.0 && elapsed < Duration::from_secs(20 * 60);
    Ok((
        ok,
        format!(
            "slope {:.3}, lambda n^4 decreasing {n4}, lambda n^8 (8/diam)^2 decreasing {n8}, {:.1}s",
            report.slope,
            elapsed.as_secs_f64()
        ),
    ))
}

fn green_accuracy() -> Outcome {
    let disk = Domain::disk(2.0).map_err(err)?;
    let model = fit_green(&disk, 128, 256, 1e-10).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut disk_err = 0.0f64;
    for _ in 0..1000 {
        let r = 2.0 * 10f64.powf(rng.gen_range(1e-4..1.0));
        let z = Complex64::from_polar(r, rng.gen_range(0.0..TAU));
        let g = eval_green(&model, &disk, z).map_err(err)?;
        disk_err = disk_err.max((g - (r / 2.0).ln()).abs());
    }
    let ellipse = Domain::ellipse(2.0, 1.0).map_err(err)?;
    let model = fit_green(&ellipse, 128, 256, 1e-10).map_err(err)?;
    let cap_err = (model.capacity() - 1.5).abs();
    // exterior map psi(w) = 1.5 w + 0.5 / w
    let mut level_err = 0.0f64;
    for delta in [0.05, 0.1, 0.5] {
        let curve = level_curve(&model, &ellipse, delta, 256).map_err(err)?;
        for z in &curve.points {
            let s = (z * z - 3.0).sqrt();
            let w = [(z + s) / 3.0, (z - s) / 3.0].into_iter().fold(
                Complex64::new(0.0, 0.0),
                |a, b| {
                    if b.norm() > a.norm() {
                        b
                    } else {
                        a
                    }
                },
            );
            let r = 1.0 + delta;
            let image = 1.5 * w / w.norm() * r + 0.5 / (w / w.norm() * r);
            level_err = level_err.max((image - z).norm());
        }
    }
    let ok = disk_err <= 1e-8 && cap_err <= 1e-6 && level_err <= 1e-6;
    Ok((
        ok,
        format!("disk |g - log(|z|/2)| {disk_err:.2e}, capacity err {cap_err:.2e}, level points {level_err:.2e}"),
    ))
}

fn qc_estimator() -> Outcome {
    let disk = Domain::disk(1.0)
        .map_err(err)?
        .estimate_qc_constant(1024)
        .map_err(err)?;
    let square = Domain::square(2.0).map_err(err)?;
    let s1 = square.estimate_qc_constant(2048).map_err(err)?;
    let s2 = square.estimate_qc_constant(4096).map_err(err)?;
    let cusp = Domain::cusp()
        .map_err(err)?
        .estimate_qc_constant(4096)
        .map_err(err)?;
    let ok = (disk - 1.0).abs() <= 0.01 && rel(s2, s1) <= 0.05 && cusp >= 10.0;
    Ok((
        ok,
        format!("disk {disk:.5}, square {s1:.5} -> {s2:.5}, cusp at M=4096 {cusp:.2}"),
    ))
}

fn inequality_suite(t1: &RatioReport, t2: &DecayReport) -> Outcome {
    let mut defect = 0.0f64;
    let mut kernel_rows = true;
    let mut monotone = t2.lambda_monotone;
    let t1_disk = run_theorem1(&shipped("theorem1_disk.cfg")?).map_err(err)?;
    let opoly = run_opoly_bounds(&shipped("opoly_disk.cfg")?, 2).map_err(err)?;
    let mut weighted = shipped("theorem1_ellipse.cfg")?;
    weighted.n_max = 20;
    let opoly_weighted = run_opoly_bounds(&weighted, 2).map_err(err)?;
    for r in [t1, &t1_disk] {
        defect = defect.max(r.defect);
    }
    for o in [&opoly, &opoly_weighted] {
        defect = defect.max(o.defect);
        kernel_rows &= o.kernel_bound_rows(1e-12);
        monotone &= o.lambda_monotone;
    }
    defect = defect.max(t2.defect);

    // IRLS histories on the weighted ellipse measure
    let domain = weighted.build_domain().map_err(err)?;
    let weight = weighted.weight();
    let rule = Arc::new(build_rule(&domain, &weight, 1e-10).map_err(err)?);
    let basis = compute_basis(&rule, &weight, 12).map_err(err)?;
    let opts = IrlsOptions::default();
    let mut irls_ok = true;
    let mut accepted = 0;
    for p in [1.0, 1.5, 3.0] {
        let mut prev_lambda = f64::INFINITY;
        for n in [0, 4, 8, 12] {
            for z in [
                Complex64::new(0.0, 1.0),
                Complex64::new(0.3, -0.2),
                Complex64::new(-2.0, 0.0),
            ] {
                let r = christoffel_lp(&basis, z, n, p, &opts).map_err(err)?;
                irls_ok &= r.history.windows(2).all(|w| w[1] <= w[0]);
                accepted += r.history.len().saturating_sub(1);
                if z == Complex64::new(0.0, 1.0) {
                    monotone &= r.value <= prev_lambda * (1.0 + 1e-6);
                    prev_lambda = r.value;
                }
            }
        }
    }
    let ok = defect < 1e-8 && kernel_rows && monotone && irls_ok;
    Ok((
        ok,
        format!(
            "|pi_n|^2 <= K_n {kernel_rows}, lambda monotone {monotone}, IRLS non-increasing {irls_ok} ({accepted} steps), max defect {defect:.2e}"
        ),
    ))
}

fn singular_integral_scaling() -> Outcome {
    let deltas = [0.1, 0.05, 0.025, 0.0125];
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut spreads = Vec::new();
    for (alpha, beta, z2) in [(0.0, 4.0, o), (1.0, 5.0, one), (-1.0, 4.0, o)] {
        let r = check_lemma21_scaling(alpha, beta, o, z2, &deltas).map_err(err)?;
        spreads.push((r.spread, r.pass));
    }
    let ok = spreads.iter().all(|(s, p)| *p && *s <= 20.0);
    let text: Vec<String> = spreads.iter().map(|(s, _)| format!("{s:.3}")).collect();
    Ok((ok, format!("spreads {}", text.join(", "))))
}

fn report(index: usize, title: &str, outcome: Outcome) -> bool {
    let (ok, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} criterion {index}: {title}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn main() {
    let mut all = true;
    all &= report(1, "disk closed forms", disk_closed_forms());
    all &= report(2, "interior point invariance", interior_invariance());
    all &= report(3, "p = 2 oracle equivalence", p2_oracle());

    let start = Instant::now();
    let t1 = shipped("theorem1_ellipse.cfg").and_then(|c| run_theorem1(&c).map_err(err));
    let t1_time = start.elapsed();
    all &= report(
        4,
        "two-sided ratio on the weighted ellipse",
        t1.as_ref()
            .map_err(Clone::clone)
            .and_then(|r| two_sided_ratio(r, t1_time)),
    );

    let start = Instant::now();
    let t2 = shipped("theorem2_cusp.cfg").and_then(|c| run_theorem2(&c).map_err(err));
    let t2_time = start.elapsed();
    all &= report(
        5,
        "decay at the cusp tip",
        t2.as_ref()
            .map_err(Clone::clone)
            .and_then(|r| cusp_decay(r, t2_time)),
    );

    all &= report(6, "green function accuracy", green_accuracy());
    all &= report(7, "quasiconformality estimator", qc_estimator());
    let suite = match (&t1, &t2) {
        (Ok(a), Ok(b)) => inequality_suite(a, b),
        _ => Err("depends on criteria 4 and 5".into()),
    };
    all &= report(8, "inequality suite", suite);
    all &= report(9, "singular integral scaling", singular_integral_scaling());

    if let (Ok(a), Ok(b)) = (&t1, &t2) {
        println!(
            "report verdicts: ratio {}, decay {}",
            a.passed(),
            b.passed()
        );
    }
    if !all {
        std::process::exit(1);
    }
}
