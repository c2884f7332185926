//! Locate zeros, classify them and check that essential zeros are isolated.
use cvf::essential::{find_zeros_with, limit_point_audit, Tolerances, ZeroSearch};
use cvf::models::{euclidean, rotation, special_conformal, sphere_killing, sphere_stereographic};

fn main() -> cvf::Result<()> {
    let scenarios = vec![
        ("R3 rotation about an axis", euclidean(3, 2.0)?, rotation(3, 1, 2)?),
        ("S3 rotation fixing a great circle", sphere_stereographic(3, 3.0)?, sphere_killing(3, 3, 4)?),
        ("R3 special conformal", euclidean(3, 2.0)?, special_conformal(&[0.0, 0.0, 1.0])),
    ];
    let tol = Tolerances::default();
    for (name, chart, xi) in scenarios {
        let zeros = find_zeros_with(&chart, &xi, &ZeroSearch::default())?;
        let audit = limit_point_audit(&chart, &xi, &zeros, 0.05, &tol)?;
        let isolated = audit.entries.iter().filter(|e| e.isolated).count();
        println!("{name}: {} zeros, {isolated} isolated, audit passed: {}", zeros.len(), audit.passed);
        if let Some(e) = audit.entries.first() {
            println!("  first: {:?} rank dξ = {} -> {:?}", e.classification.point, e.classification.rank_dxi, e.classification.verdict);
        }
        for a in audit.assertions.iter().filter(|a| !a.passed) {
            println!("  violated: {} ({})", a.name, a.detail);
        }
    }
    Ok(())
}
