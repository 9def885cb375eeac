use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use christoffel_lab::christoffel::{christoffel_lp, lp_mass, IrlsOptions};
use christoffel_lab::geometry::DomainKind;
use christoffel_lab::orthopoly::{compute_basis, kernel_diag, OrthonormalBasis};
use christoffel_lab::quadrature::build_rule;
use christoffel_lab::{make_catalog_domain, Complex64, Domain, Singularity, WeightSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

fn basis_for(domain: &Domain, weight: &WeightSpec, n: usize) -> OrthonormalBasis {
    let rule = Arc::new(build_rule(domain, weight, 1e-10).unwrap());
    compute_basis(&rule, weight, n).unwrap()
}

fn ellipse_basis() -> &'static OrthonormalBasis {
    static B: OnceLock<OrthonormalBasis> = OnceLock::new();
    B.get_or_init(|| {
        let domain = Domain::ellipse(2.0, 1.0).unwrap();
        let weight = WeightSpec::constant(
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
        basis_for(&domain, &weight, 10)
    })
}

#[test]
fn membership_matches_defining_inequalities() {
    let l_shape = vec![
        c(0.0, 0.0),
        c(2.0, 0.0),
        c(2.0, 1.0),
        c(1.0, 1.0),
        c(1.0, 2.0),
        c(0.0, 2.0),
    ];
    type Oracle = fn(Complex64) -> f64;
    // signed margin: positive inside, negative outside
    let cases: Vec<(Domain, Oracle)> = vec![
        (Domain::disk(1.0).unwrap(), |z| 1.0 - z.norm()),
        (Domain::ellipse(2.0, 1.0).unwrap(), |z| {
            1.0 - (z.re / 2.0).powi(2) - z.im.powi(2)
        }),
        (Domain::square(2.0).unwrap(), |z| {
            1.0 - z.re.abs().max(z.im.abs())
        }),
        (Domain::cusp().unwrap(), |z| {
            let h = if z.re > 0.0 { (-1.0 / z.re).exp() } else { 0.0 };
            z.re.min(1.0 - z.re).min(h - z.im.abs())
        }),
        (
            make_catalog_domain(DomainKind::Polygon { vertices: l_shape }).unwrap(),
            |z| {
                let lower = (z.im).min(1.0 - z.im).min(z.re).min(2.0 - z.re);
                let left = (z.re).min(1.0 - z.re).min(z.im).min(2.0 - z.im);
                lower.max(left)
            },
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (domain, oracle) in &cases {
        let (lo, hi) = domain.bbox;
        let mut checked = 0;
        for _ in 0..10_000 {
            let z = c(
                rng.gen_range(lo.re - 0.1..hi.re + 0.1),
                rng.gen_range(lo.im - 0.1..hi.im + 0.1),
            );
            let m = oracle(z);
            if m.abs() < 1e-9 {
                continue;
            }
            assert_eq!(
                domain.point_in_domain(z),
                m > 0.0,
                "{} at {z}",
                domain.kind.name()
            );
            checked += 1;
        }
        assert!(checked > 9_900);
    }
}

#[test]
fn qc_estimate_never_decreases_under_doubling() {
    for domain in [
        Domain::ellipse(2.0, 1.0).unwrap(),
        Domain::square(1.0).unwrap(),
        Domain::cusp().unwrap(),
    ] {
        let mut prev = 0.0;
        for m in [128, 256, 512, 1024] {
            let v = domain.estimate_qc_constant(m).unwrap();
            assert!(v >= prev, "{}: {v} < {prev}", domain.kind.name());
            prev = v;
        }
    }
}

#[test]
fn christoffel_scales_with_the_weight() {
    let domain = Domain::disk(1.0).unwrap();
    let base = WeightSpec::constant(
        1.0,
        vec![Singularity {
            point: c(1.0, 0.0),
            exponent: 0.5,
        }],
    );
    let b1 = basis_for(&domain, &base, 6);
    let b3 = basis_for(&domain, &base.scaled(3.0), 6);
    let opts = IrlsOptions::default();
    for p in [1.5, 2.0, 3.0] {
        for z in [c(0.2, 0.1), c(0.0, 1.0)] {
            let l1 = christoffel_lp(&b1, z, 6, p, &opts).unwrap().value;
            let l3 = christoffel_lp(&b3, z, 6, p, &opts).unwrap().value;
            assert!((l3 / l1 - 3.0).abs() < 1e-5, "p={p} z={z}: {}", l3 / l1);
        }
    }
}

#[test]
fn ratio_on_disk_matches_closed_form_at_one() {
    let domain = Domain::disk(1.0).unwrap();
    let basis = basis_for(&domain, &WeightSpec::unit(), 30);
    for n in 1..=30usize {
        let lam = christoffel_lp(&basis, c(1.0, 0.0), n, 2.0, &IrlsOptions::default())
            .unwrap()
            .value;
        let nf = n as f64;
        let ratio = lam * nf * nf;
        let exact = 2.0 * PI * nf * nf / ((nf + 1.0) * (nf + 2.0));
        assert!((ratio - exact).abs() < 1e-9 * exact);
        let pi_abs = basis.values_at(c(1.0, 0.0), n)[n].norm();
        assert!((pi_abs - ((nf + 1.0) / PI).sqrt()).abs() < 1e-9 * pi_abs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn p2_minimizer_beats_any_admissible_polynomial(
        zr in -2.5f64..2.5, zi in -1.5f64..1.5, n in 1usize..10,
        coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 10)
    ) {
        let basis = ellipse_basis();
        let z = c(zr, zi);
        let lam = christoffel_lp(basis, z, n, 2.0, &IrlsOptions::default()).unwrap().value;
        // q(w) = 1 + (w - z) r(w) with deg r = n - 1
        let r: Vec<Complex64> = coeffs[..n].iter().map(|(a, b)| c(*a, *b)).collect();
        let q = move |w: Complex64| {
            let mut acc = c(0.0, 0.0);
            for a in r.iter().rev() {
                acc = acc * w + a;
            }
            1.0 + (w - z) * acc
        };
        let mass = lp_mass(basis, 2.0, q);
        prop_assert!(mass >= lam * (1.0 - 1e-10));
    }

    #[test]
    fn lambda_is_non_increasing_in_n(zr in -2.5f64..2.5, zi in -1.5f64..1.5, p in prop_oneof![Just(1.5f64), Just(2.0), Just(3.0)]) {
        let basis = ellipse_basis();
        let z = c(zr, zi);
        let opts = IrlsOptions::default();
        let mut prev = f64::INFINITY;
        for n in 0..=6 {
            let lam = christoffel_lp(basis, z, n, p, &opts).unwrap().value;
            prop_assert!(lam <= prev * (1.0 + 1e-6), "n={} {} > {}", n, lam, prev);
            prev = lam;
        }
    }

    #[test]
    fn kernel_bound_holds_pointwise(zr in -3.0f64..3.0, zi in -2.0f64..2.0, n in 0usize..=10) {
        let basis = ellipse_basis();
        let z = c(zr, zi);
        let pi = basis.values_at(z, n)[n].norm_sqr();
        let k = kernel_diag(basis, z, n).unwrap();
        prop_assert!(pi <= k * (1.0 + 1e-12));
    }
}
