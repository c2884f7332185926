//! Check conformality of every builtin field on every builtin chart, and of
//! a hand-written field that is not conformal.
use cvf::conformal::is_conformal;
use cvf::geometry::FieldSpec;
use cvf::models::{euclidean, ModelCatalog};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cvf::Result<()> {
    for s in ModelCatalog::pairs(3)? {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = s.chart.sample_interior(&mut rng, 50);
        let report = is_conformal(&s.chart, &s.field, &samples, 1e-7)?;
        println!("{:<40} {:?}  max residual {:.2e}", s.name, report.verdict, report.max_residual);
    }

    let chart = euclidean(2, 2.0)?;
    let shear = FieldSpec::from_strings("shear", &["x2", "0"])?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let report = is_conformal(&chart, &shear, &chart.sample_interior(&mut rng, 50), 1e-7)?;
    println!("{:<40} {:?}  max residual {:.2e}", "euclidean(2)/shear", report.verdict, report.max_residual);
    Ok(())
}
