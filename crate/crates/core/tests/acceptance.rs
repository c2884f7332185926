mod common;

use std::path::Path;
use std::process::{Command, ExitCode};

use cvf::conformal::{connection_change_residual, is_conformal, rescale_metric};
use cvf::essential::{
    classify_zero, distance, find_zeros, find_zeros_with, limit_point_audit, Tolerances, Verdict, ZeroSearch,
    DEFAULT_GRID_RESOLUTION, DEFAULT_ISOLATION_RADIUS,
};
use cvf::geodesic::{lemma_dxi_residual, taylor_scalar_check, taylor_vector_check, GeodesicOptions};
use cvf::geometry::{Chart, FieldSpec, ScalarField};
use cvf::models::{
    euclidean, rotation, special_conformal, sphere_killing, sphere_stereographic, ModelCatalog, remark_example,
};
use cvf::zeroset::{trace_component, umbilicity_report, SubmanifoldPatch, TraceOptions, DEFAULT_UMBILICITY_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240601;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

fn axis_rotation() -> (Chart, FieldSpec) {
    (euclidean(3, 2.0).unwrap(), rotation(3, 1, 2).unwrap())
}

fn great_circle() -> (Chart, FieldSpec) {
    (sphere_stereographic(3, 3.0).unwrap(), sphere_killing(3, 3, 4).unwrap())
}

fn zeros(chart: &Chart, xi: &FieldSpec) -> Result<Vec<Vec<f64>>, String> {
    let n = chart.dim();
    let grid = if n >= 4 { 9 } else { DEFAULT_GRID_RESOLUTION };
    find_zeros_with(chart, xi, &ZeroSearch { grid_resolution: grid, ..ZeroSearch::default() }).map_err(err)
}

fn traced_patches() -> Result<Vec<(String, Chart, FieldSpec, SubmanifoldPatch)>, String> {
    let cases = vec![
        ("R3 axis rotation", axis_rotation().0, axis_rotation().1, vec![0.0, 0.0, 0.3]),
        ("S3 great circle", great_circle().0, great_circle().1, vec![1.0, 0.0, 0.0]),
        ("R4 plane rotation", euclidean(4, 2.0).unwrap(), rotation(4, 1, 2).unwrap(), vec![0.0, 0.0, 0.2, -0.1]),
        (
            "S4 great 2-sphere",
            sphere_stereographic(4, 3.0).unwrap(),
            sphere_killing(4, 4, 5).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0],
        ),
    ];
    cases
        .into_iter()
        .map(|(name, chart, xi, base)| {
            let patch = trace_component(&chart, &xi, &base, &TraceOptions::default()).map_err(err)?;
            Ok((name.to_string(), chart, xi, patch))
        })
        .collect()
}

fn remark_reproduction() -> Outcome {
    let chart = sphere_stereographic(3, 3.0).map_err(err)?;
    let xi = remark_example(3);
    let found = zeros(&chart, &xi)?;
    let p = found
        .iter()
        .min_by(|a, b| distance(a, &[0.0; 3]).total_cmp(&distance(b, &[0.0; 3])))
        .ok_or("no zero found")?;
    let c = classify_zero(&chart, &xi, p, &Tolerances::default()).map_err(err)?;
    check(
        c.field_norm < 1e-10
            && c.dxi_norm < 1e-8
            && c.phi.abs() < 1e-8
            && c.dphi_norm >= 0.1
            && c.verdict == Verdict::Essential,
        format!(
            "P = {:?}, |xi| = {:.2e}, |dxi| = {:.2e}, |phi| = {:.2e}, |dphi| = {:.3}, verdict {:?}",
            p, c.field_norm, c.dxi_norm, c.phi.abs(), c.dphi_norm, c.verdict
        ),
    )
}

fn conformality_suite() -> Outcome {
    let pairs = ModelCatalog::pairs(3).map_err(err)?;
    let mut worst = (0.0f64, String::new());
    let mut failed = Vec::new();
    for s in &pairs {
        let mut r = rng(1);
        let samples = s.chart.sample_interior(&mut r, 100);
        let report = is_conformal(&s.chart, &s.field, &samples, 1e-7).map_err(err)?;
        if report.max_residual >= 1e-7 {
            failed.push(s.name.clone());
        }
        if report.max_residual >= worst.0 {
            worst = (report.max_residual, s.name.clone());
        }
    }
    check(
        failed.is_empty() && pairs.len() == 18,
        format!("{} pairs, worst {:.2e} on {}, failing {:?}", pairs.len(), worst.0, worst.1, failed),
    )
}

fn dxi_identity_suite() -> Outcome {
    let pairs = ModelCatalog::pairs(3).map_err(err)?;
    let mut worst = 0.0f64;
    for s in &pairs {
        let mut r = rng(2);
        let points = s.chart.sample_interior(&mut r, 50);
        for p in &points {
            let x: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
            worst = worst.max(lemma_dxi_residual(&s.chart, &s.field, p, &x).map_err(err)?);
        }
    }
    check(worst < 1e-7, format!("{} fields x 50 pairs, max residual {:.2e}", pairs.len(), worst))
}

fn killing_components() -> Outcome {
    let tol = Tolerances::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, (chart, xi)) in [("R3 axis rotation", axis_rotation()), ("S3 great circle", great_circle())] {
        let found = zeros(&chart, &xi)?;
        let audit = limit_point_audit(&chart, &xi, &found, DEFAULT_ISOLATION_RADIUS, &tol).map_err(err)?;
        let non_isolated = audit.entries.iter().filter(|e| !e.isolated).count();
        let mut max_phi = 0.0f64;
        let mut max_image = 0.0f64;
        for e in &audit.entries {
            let c = &e.classification;
            max_phi = max_phi.max(c.phi.abs());
            max_image = max_image.max(c.image_residual);
            ok &= c.verdict == Verdict::KillingInessential;
        }
        ok &= non_isolated > 0 && max_phi < 1e-6 && max_image < 1e-6;
        lines.push(format!(
            "{name}: {} zeros, {non_isolated} non-isolated, max |phi| {max_phi:.2e}, max image residual {max_image:.2e}",
            found.len()
        ));
    }
    check(ok, lines.join("; "))
}

fn essential_points_are_isolated() -> Outcome {
    let tol = Tolerances::default();
    let mut scenarios: Vec<(String, Chart, FieldSpec)> =
        ModelCatalog::pairs(3).map_err(err)?.into_iter().map(|s| (s.name, s.chart, s.field)).collect();
    scenarios.push(("R3 axis rotation".into(), axis_rotation().0, axis_rotation().1));
    scenarios.push(("S3 great circle".into(), great_circle().0, great_circle().1));
    let mut essential = 0;
    let mut ok = true;
    let mut bad = Vec::new();
    for (name, chart, xi) in &scenarios {
        let found = zeros(chart, xi)?;
        let audit = limit_point_audit(chart, xi, &found, DEFAULT_ISOLATION_RADIUS, &tol).map_err(err)?;
        for e in &audit.entries {
            if e.classification.verdict != Verdict::Essential {
                continue;
            }
            essential += 1;
            if !e.isolated {
                ok = false;
                bad.push(format!("{name} non-isolated at {:?}", e.classification.point));
            }
            let model = name.ends_with("special_conformal") || name.ends_with("remark_example");
            let companion = found
                .iter()
                .filter(|z| *z != &e.classification.point)
                .map(|z| distance(z, &e.classification.point))
                .fold(f64::INFINITY, f64::min);
            if model && companion < 0.5 {
                ok = false;
                bad.push(format!("{name} companion at distance {companion:.3}"));
            }
        }
        if name.ends_with("special_conformal") || name.ends_with("remark_example") {
            ok &= audit.entries.iter().any(|e| e.classification.verdict == Verdict::Essential);
        }
    }
    check(ok, format!("{} scenarios, {essential} essential zeros, violations {:?}", scenarios.len(), bad))
}

fn umbilicity_suite() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, chart, _, patch) in traced_patches()? {
        let report = umbilicity_report(&chart, &patch, DEFAULT_UMBILICITY_TOL).map_err(err)?;
        let sample = patch.max_sample_norm().unwrap_or(f64::INFINITY);
        let even = patch.k() == 0 || patch.codimension() % 2 == 0;
        ok &= report.max_residual < 1e-4 && even && sample < 1e-5;
        lines.push(format!(
            "{name}: k {}, codim {}, umbilicity {:.2e}, max sample |xi| {:.2e}",
            patch.k(),
            patch.codimension(),
            report.max_residual,
            sample
        ));
    }
    check(ok, lines.join("; "))
}

fn taylor_suite() -> Outcome {
    let opts = GeodesicOptions::default();
    let e = [1.0, 0.0, 0.0];
    let ke = (euclidean(3, 2.0).map_err(err)?, special_conformal(&e));
    let rot = axis_rotation();
    let mut ok = true;
    let mut worst_first = 0.0f64;
    let mut worst_second = 0.0f64;
    let mut cases = 0;
    for ((chart, xi), bases) in [
        (&ke, vec![vec![0.0, 0.0, 0.0]]),
        (&rot, vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.5], vec![0.0, 0.0, -1.0]]),
    ] {
        for x in &bases {
            for v in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.6, -0.8, 0.0], [0.3, 0.4, -0.5]] {
                let sc = taylor_scalar_check(chart, xi, x, &v, &opts).map_err(err)?;
                let vc = taylor_vector_check(chart, xi, x, &v, &opts).map_err(err)?;
                worst_first = worst_first.max((sc.f_prime - sc.phi).abs());
                worst_second = worst_second.max(vc.second_residual);
                cases += 1;
            }
        }
    }
    ok &= worst_first < 1e-6 && worst_second < 1e-4;
    // K_e along v = e: ξ''(0) = −2e
    let vc = taylor_vector_check(&ke.0, &ke.1, &[0.0; 3], &e, &opts).map_err(err)?;
    let hand: f64 = vc.xi_second.iter().zip([-2.0, 0.0, 0.0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    ok &= hand < 1e-4;
    check(
        ok,
        format!(
            "{cases} cases, max |f'-phi| {worst_first:.2e}, max second residual {worst_second:.2e}, xi''(0) = {:?} for v = e",
            vc.xi_second.iter().map(|c| format!("{c:.6}")).collect::<Vec<_>>()
        ),
    )
}

fn conformal_change_suite() -> Outcome {
    let f = ScalarField::parse("0.3*sin(x1)", 3).map_err(err)?;
    let g = ScalarField::parse("0.2*x1*x2 - 0.1*x3^2", 3).map_err(err)?;
    let mut worst = 0.0f64;
    for (chart, h) in [(euclidean(3, 2.0).map_err(err)?, &f), (sphere_stereographic(3, 3.0).map_err(err)?, &g)] {
        let mut r = rng(3);
        for p in chart.sample_interior(&mut r, 20) {
            worst = worst.max(connection_change_residual(&chart, h, &p).map_err(err)?);
        }
    }
    let tol = Tolerances::default();
    let mut compared = 0;
    let mut changed = Vec::new();
    for s in ModelCatalog::pairs(3).map_err(err)? {
        let rescaled = rescale_metric(&s.chart, &f);
        for z in find_zeros(&s.chart, &s.field, 9, tol.zero).map_err(err)? {
            let a = classify_zero(&s.chart, &s.field, &z, &tol).map_err(err)?;
            let b = classify_zero(&rescaled, &s.field, &z, &tol).map_err(err)?;
            compared += 1;
            if a.verdict != b.verdict {
                changed.push(format!("{} at {z:?}", s.name));
            }
        }
    }
    let mut umbilic = 0;
    for (name, chart, _, patch) in traced_patches()? {
        let h = ScalarField::parse("0.3*sin(x1)", chart.dim()).map_err(err)?;
        let a = umbilicity_report(&chart, &patch, DEFAULT_UMBILICITY_TOL).map_err(err)?;
        let b = umbilicity_report(&rescale_metric(&chart, &h), &patch, DEFAULT_UMBILICITY_TOL).map_err(err)?;
        umbilic += 1;
        if a.verdict != b.verdict {
            changed.push(format!("umbilicity of {name}"));
        }
    }
    check(
        worst < 1e-8 && changed.is_empty() && compared > 0,
        format!(
            "connection change max {worst:.2e}, {compared} zero verdicts and {umbilic} umbilicity verdicts compared, changed {changed:?}"
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let n = 3;
    let mut r = rng(4);
    let mut accepted = 0;
    let mut rejected = 0;
    let mut worst1 = 0.0f64;
    let mut worst2 = 0.0f64;
    while accepted < 200 {
        let e = common::random_expr(&mut r, n, 4);
        let p: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let jet = match e.jet(&p, 2) {
            Ok(j) if j.value().abs() <= 10.0 => j,
            _ => {
                rejected += 1;
                continue;
            }
        };
        let f = |q: &[f64]| e.eval(q).unwrap_or(f64::NAN);
        for i in 0..n {
            worst1 = worst1.max((jet.d1(i) - common::fd_first(&f, &p, i, 1e-5)).abs());
            for j in 0..n {
                worst2 = worst2.max((jet.d2(i, j) - common::fd_second(&f, &p, i, j, 1e-3)).abs());
            }
        }
        accepted += 1;
    }
    check(
        worst1 < 1e-7 && worst2 < 1e-5,
        format!("{accepted} samples ({rejected} rejected), first order {worst1:.2e}, second order {worst2:.2e}"),
    )
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_cvf");
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("manifests");
    let expected = [
        ("great_circle.json", 0),
        ("inline_hyperbolic_rotation.json", 0),
        ("not_conformal.json", 1),
        ("plane_rotation.json", 0),
        ("sphere_essential_point.json", 0),
    ];
    let run = |args: &[&str]| Command::new(bin).args(args).output().map_err(err);
    let mut ok = true;
    let mut lines = Vec::new();
    for (file, code) in expected {
        let path = dir.join(file);
        let p = path.to_str().ok_or("path")?;
        let a = run(&["run", p, "--seed", "3"])?;
        let b = run(&["run", p, "--seed", "3"])?;
        let same = a.stdout == b.stdout && !a.stdout.is_empty();
        ok &= same && a.status.code() == Some(code) && b.status.code() == Some(code);
        lines.push(format!("{file}: exit {:?}, identical {same}", a.status.code()));
    }
    let tmp = std::env::temp_dir().join(format!("cvf-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&tmp).map_err(err)?;
    let broken = tmp.join("broken.json");
    std::fs::write(&broken, "{\"chart\": [").map_err(err)?;
    let malformed = run(&["run", broken.to_str().ok_or("path")?])?.status.code();
    let missing = run(&["run", tmp.join("absent.json").to_str().ok_or("path")?])?.status.code();
    let _ = std::fs::remove_dir_all(&tmp);
    ok &= malformed == Some(2) && missing == Some(2);
    lines.push(format!("malformed exit {malformed:?}, missing exit {missing:?}"));
    check(ok, lines.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("remark reproduction", remark_reproduction),
        ("conformality suite", conformality_suite),
        ("dxi identity suite", dxi_identity_suite),
        ("killing components", killing_components),
        ("essential points are isolated", essential_points_are_isolated),
        ("umbilical zero sets", umbilicity_suite),
        ("taylor identities", taylor_suite),
        ("conformal change", conformal_change_suite),
        ("oracle equivalence", oracle_equivalence),
        ("determinism and exit codes", determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
