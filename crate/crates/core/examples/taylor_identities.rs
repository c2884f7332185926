//! Taylor coefficients of ξ along geodesics through a zero, compared with
//! the closed forms in terms of φ, dφ and dξ.
use cvf::geodesic::{lemma_dxi_residual, taylor_scalar_check, taylor_vector_check, GeodesicOptions};
use cvf::models::{euclidean, special_conformal, sphere_killing, sphere_stereographic};

fn main() -> cvf::Result<()> {
    let opts = GeodesicOptions::default();
    let chart = euclidean(3, 2.0)?;
    let xi = special_conformal(&[1.0, 0.0, 0.0]);
    let x = [0.0; 3];

    for v in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.6, 0.8, 0.0]] {
        let s = taylor_scalar_check(&chart, &xi, &x, &v, &opts)?;
        let t = taylor_vector_check(&chart, &xi, &x, &v, &opts)?;
        println!("v = {v:?}");
        println!("  f'(0) = {:+.3e}  φ(x) = {:+.3e}", s.f_prime, s.phi);
        println!("  f''(0) = {:+.6}  dφ(v) = {:+.6}  remainder order {:?}", s.f_second, s.dphi_v, s.remainder_order);
        println!("  ξ''(0) = {:?}", t.xi_second.iter().map(|c| format!("{c:+.6}")).collect::<Vec<_>>());
        println!("  expect = {:?}", t.expected_second.iter().map(|c| format!("{c:+.6}")).collect::<Vec<_>>());
    }

    let sphere = sphere_stereographic(3, 3.0)?;
    let field = sphere_killing(3, 1, 2)?;
    let r = lemma_dxi_residual(&sphere, &field, &[0.3, -0.2, 0.5], &[1.0, 0.5, -0.25])?;
    println!("∇_X dξ − 2R(X, ξ) − 2 dφ∧X♭ on the sphere: {r:.3e}");
    Ok(())
}
