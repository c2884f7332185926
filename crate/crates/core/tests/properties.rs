mod common;

use cvf::conformal::{conformal_factor, conformal_residual, rescale_metric};
use cvf::essential::{classify_zero, find_zeros, Tolerances};
use cvf::expr::{parse, Expr};
use cvf::geometry::{metric_at, Chart, FieldSpec, LocalField, ScalarField};
use cvf::models::{euclidean, hyperbolic_ball, make_field, sphere_stereographic, FieldParams, FIELD_NAMES};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn charts(n: usize) -> Vec<Chart> {
    vec![
        euclidean(n, 2.0).unwrap(),
        sphere_stereographic(n, 3.0).unwrap(),
        hyperbolic_ball(n, 0.9).unwrap(),
        // not conformally flat in a simple way: exercises all curvature terms
        Chart::from_strings(
            "warped",
            cvf::geometry::Domain::cube(n, 1.0),
            &(0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| match (i, j) {
                            (0, 0) => "2 + sin(x2)".to_string(),
                            (0, 1) | (1, 0) => "0.3*x1*x2".to_string(),
                            (1, 1) => "exp(0.4*x1)".to_string(),
                            _ if i == j => format!("1 + 0.2*x{}^2", i),
                            _ => "0".to_string(),
                        })
                        .collect()
                })
                .collect::<Vec<_>>(),
        )
        .unwrap(),
    ]
}

fn point_in(chart: &Chart, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    chart.sample_interior(&mut rng, 1).remove(0)
}

fn fields(n: usize) -> Vec<FieldSpec> {
    FIELD_NAMES
        .iter()
        .map(|name| make_field(name, n, &FieldParams::default()).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jet_arrays_are_exactly_symmetric(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = common::random_expr(&mut rng, n, 4);
        let p: Vec<f64> = (0..n).map(|k| 0.3 * k as f64 - 0.4).collect();
        let jet = e.jet(&p, 3).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(jet.d2(i, j).to_bits(), jet.d2(j, i).to_bits());
                for k in 0..n {
                    let v = jet.d3(i, j, k).to_bits();
                    prop_assert_eq!(v, jet.d3(j, i, k).to_bits());
                    prop_assert_eq!(v, jet.d3(k, j, i).to_bits());
                    prop_assert_eq!(v, jet.d3(i, k, j).to_bits());
                }
            }
        }
    }

    #[test]
    fn printed_expressions_reparse_to_the_same_function(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = common::random_expr(&mut rng, n, 4);
        let back = parse(&e.to_string(), n).unwrap();
        let p: Vec<f64> = (0..n).map(|k| 0.7 - 0.45 * k as f64).collect();
        prop_assert_eq!(e.eval(&p).unwrap().to_bits(), back.eval(&p).unwrap().to_bits());
    }

    #[test]
    fn metric_is_parallel(seed in any::<u64>(), n in 2usize..5) {
        for chart in charts(n) {
            let p = point_in(&chart, seed);
            let m = chart.metric_jet(&p, 1).unwrap();
            let gamma = m.christoffel();
            let idx = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut r = m.dg(k, i, j);
                        for l in 0..n {
                            r -= gamma[idx(l, k, i)] * m.g[(l, j)] + gamma[idx(l, k, j)] * m.g[(i, l)];
                        }
                        prop_assert!(r.abs() < 1e-9, "{} {r}", chart.name());
                    }
                }
            }
        }
    }

    #[test]
    fn curvature_symmetries_and_bianchi(seed in any::<u64>(), n in 2usize..5) {
        for chart in charts(n) {
            let p = point_in(&chart, seed);
            let m = chart.metric_jet(&p, 2).unwrap();
            let gamma = m.christoffel();
            let r = m.lower_riemann(&m.riemann(&gamma, &m.christoffel_derivative(&gamma)));
            let at = |a: usize, b: usize, c: usize, d: usize| r[((a * n + b) * n + c) * n + d];
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            let v = at(a, b, c, d);
                            prop_assert!((v + at(b, a, c, d)).abs() < 1e-8);
                            prop_assert!((v + at(a, b, d, c)).abs() < 1e-8);
                            prop_assert!((v - at(c, d, a, b)).abs() < 1e-8);
                            prop_assert!((v + at(a, c, d, b) + at(a, d, b, c)).abs() < 1e-8);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn christoffel_derivative_matches_differences(seed in any::<u64>()) {
        let n = 3;
        for chart in charts(n) {
            let p = point_in(&chart, seed);
            let m = chart.metric_jet(&p, 2).unwrap();
            let dgamma = m.christoffel_derivative(&m.christoffel());
            for c in 0..n * n * n {
                let f = |q: &[f64]| chart.metric_jet(q, 1).unwrap().christoffel()[c];
                for mm in 0..n {
                    let fd = common::fd_first(&f, &p, mm, 1e-3);
                    prop_assert!((dgamma[mm * n * n * n + c] - fd).abs() < 1e-7 * (1.0 + fd.abs()));
                }
            }
        }
    }

    #[test]
    fn exterior_derivative_is_twice_the_skew_part(seed in any::<u64>(), n in 2usize..5) {
        for chart in charts(n) {
            let p = point_in(&chart, seed);
            for xi in fields(n) {
                let local = LocalField::at(&chart, &xi, &p).unwrap();
                let dxi = local.exterior_derivative();
                prop_assert_eq!(&dxi, &(-dxi.transpose()));
                // L_ab = g(∇_a ξ, ∂_b)
                let lowered: DMatrix<f64> = (local.g() * local.covariant_derivative()).transpose();
                let skew = &lowered - lowered.transpose();
                prop_assert!((dxi - skew).amax() < 1e-9 * (1.0 + lowered.amax()));
            }
        }
    }

    #[test]
    fn rescaling_is_functorial(seed in any::<u64>(), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let n = 3;
        let f = ScalarField::new(a * Expr::var(0).sin());
        let h = ScalarField::new(b * Expr::var(1) * Expr::var(2));
        let both = ScalarField::new(f.expr.clone() + h.expr.clone());
        for chart in charts(n) {
            let p = point_in(&chart, seed);
            let twice = rescale_metric(&rescale_metric(&chart, &f), &h);
            let once = rescale_metric(&chart, &both);
            let x = metric_at(&twice, &p).unwrap().to_matrix();
            let y = metric_at(&once, &p).unwrap().to_matrix();
            prop_assert!((x - &y).amax() < 1e-12 * (1.0 + y.amax()));
        }
    }

    #[test]
    fn conformality_survives_rescaling(seed in any::<u64>(), a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let n = 3;
        let f = ScalarField::new(a * Expr::var(0).sin() + b * Expr::var(1));
        for chart in charts(n).into_iter().take(3) {
            let rescaled = rescale_metric(&chart, &f);
            let p = point_in(&chart, seed);
            let df = f.expr.jet(&p, 1).unwrap();
            for xi in fields(n) {
                prop_assert!(conformal_residual(&rescaled, &xi, &p).unwrap() < 1e-7);
                // φ̃ = φ + df(ξ)
                let v = xi.eval(&p).unwrap();
                let expected = conformal_factor(&chart, &xi, &p).unwrap()
                    + (0..n).map(|k| df.d1(k) * v[k]).sum::<f64>();
                let got = conformal_factor(&rescaled, &xi, &p).unwrap();
                prop_assert!((got - expected).abs() < 1e-9 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn phi_matches_the_lie_derivative_diagonal(seed in any::<u64>()) {
        let n = 3;
        for chart in charts(n).into_iter().take(3) {
            let p = point_in(&chart, seed);
            for xi in fields(n) {
                let local = LocalField::at(&chart, &xi, &p).unwrap();
                let lie = local.lie_derivative_metric();
                for i in 0..n {
                    let ratio = lie[(i, i)] / (2.0 * local.g()[(i, i)]);
                    prop_assert!((local.conformal_factor() - ratio).abs() < 1e-9 * (1.0 + ratio.abs()));
                }
            }
        }
    }
}

#[test]
fn verdicts_and_rank_parity_are_conformally_invariant() {
    let n = 3;
    let f = ScalarField::parse("0.3*sin(x1)", n).unwrap();
    let tol = Tolerances::default();
    for chart in charts(n).into_iter().take(3) {
        let rescaled = rescale_metric(&chart, &f);
        for xi in fields(n) {
            for z in find_zeros(&chart, &xi, 9, tol.zero).unwrap() {
                let a = classify_zero(&chart, &xi, &z, &tol).unwrap();
                let b = classify_zero(&rescaled, &xi, &z, &tol).unwrap();
                assert_eq!(a.verdict, b.verdict, "{} {} at {z:?}", chart.name(), xi.name());
                assert_eq!(a.rank_dxi % 2, 0);
                assert_eq!(b.rank_dxi % 2, 0);
            }
        }
    }
}
