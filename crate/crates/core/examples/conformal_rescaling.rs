//! Rescale a metric by e^{2f} and compare connection, conformal factor and
//! zero classification before and after.
use cvf::conformal::{conformal_factor, connection_change_residual, rescale_metric};
use cvf::essential::{classify_zero, Tolerances};
use cvf::geometry::ScalarField;
use cvf::models::{euclidean, special_conformal};

fn main() -> cvf::Result<()> {
    let chart = euclidean(3, 2.0)?;
    let f = ScalarField::parse("0.3*sin(x1)", 3)?;
    let rescaled = rescale_metric(&chart, &f);
    let xi = special_conformal(&[0.0, 1.0, 0.0]);

    let p = [0.4, -0.3, 0.9];
    println!("connection change residual {:.3e}", connection_change_residual(&chart, &f, &p)?);
    println!("φ  = {:+.9}", conformal_factor(&chart, &xi, &p)?);
    println!("φ~ = {:+.9}", conformal_factor(&rescaled, &xi, &p)?);

    let tol = Tolerances::default();
    let before = classify_zero(&chart, &xi, &[0.0; 3], &tol)?;
    let after = classify_zero(&rescaled, &xi, &[0.0; 3], &tol)?;
    println!("verdict at the origin: {:?} -> {:?}", before.verdict, after.verdict);
    Ok(())
}
