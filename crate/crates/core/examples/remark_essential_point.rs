//! A translation of R^n seen on the round sphere through the chart centred
//! at the pole P. The field vanishes at P together with its exterior
//! derivative and conformal factor, while dφ does not: P is essential.
use cvf::essential::{classify_zero, find_zeros, Tolerances};
use cvf::models::{remark_example, sphere_stereographic};

fn main() -> cvf::Result<()> {
    let chart = sphere_stereographic(3, 3.0)?;
    let xi = remark_example(3);
    println!("ξ = {:?}", xi.components().iter().map(|c| c.to_string()).collect::<Vec<_>>());

    let tol = Tolerances::default();
    for z in find_zeros(&chart, &xi, 17, tol.zero)? {
        let c = classify_zero(&chart, &xi, &z, &tol)?;
        println!("zero at {:?}", c.point);
        println!("  |ξ|   = {:.3e}", c.field_norm);
        println!("  |dξ|  = {:.3e}", c.dxi_norm);
        println!("  φ     = {:.3e}", c.phi);
        println!("  |dφ|  = {:.6}", c.dphi_norm);
        println!("  grad φ in image of ∇ξ: residual {:.3e}", c.image_residual);
        println!("  verdict: {:?}", c.verdict);
    }
    Ok(())
}
