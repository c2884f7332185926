//! Christoffel symbols and sectional curvature of the three model charts.
use cvf::geometry::{christoffel, sectional_curvature};
use cvf::models::{euclidean, hyperbolic_ball, sphere_stereographic};

fn main() -> cvf::Result<()> {
    let p = [0.2, -0.1, 0.4];
    let x = [1.0, 0.0, 0.0];
    let y = [0.0, 1.0, 0.3];
    for chart in [euclidean(3, 2.0)?, sphere_stereographic(3, 3.0)?, hyperbolic_ball(3, 0.9)?] {
        let k = sectional_curvature(&chart, &p, &x, &y)?;
        let gamma = christoffel(&chart, &p)?;
        println!("{:<24} K(x, y) = {k:+.12}   |Γ| = {:.6}", chart.name(), gamma.component_norm());
    }
    Ok(())
}
