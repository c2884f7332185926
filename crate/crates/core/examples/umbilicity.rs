//! Trace the zero set of a Killing field through one of its zeros and
//! measure how far it is from being totally umbilical.
use cvf::models::{sphere_killing, sphere_stereographic};
use cvf::zeroset::{second_fundamental_form, trace_component, umbilicity_report, TraceOptions};

fn main() -> cvf::Result<()> {
    // fixes the great 2-sphere y4 = y5 = 0
    let chart = sphere_stereographic(4, 3.0)?;
    let xi = sphere_killing(4, 4, 5)?;
    let patch = trace_component(&chart, &xi, &[1.0, 0.0, 0.0, 0.0], &TraceOptions::default())?;
    println!(
        "patch of dimension {} and codimension {}, {} samples, max |ξ| on samples {:.2e}",
        patch.k(),
        patch.codimension(),
        patch.points.len(),
        patch.max_sample_norm().unwrap_or(0.0)
    );

    let centre = patch.interior_samples()[patch.interior_samples().len() / 2];
    let b = second_fundamental_form(&chart, &patch, centre)?;
    println!("B at {:?}: symmetry defect {:.2e}", b.point, b.symmetry_defect);

    let report = umbilicity_report(&chart, &patch, 1e-4)?;
    println!("max umbilicity residual {:.3e}: {:?}", report.max_residual, report.verdict);
    Ok(())
}
