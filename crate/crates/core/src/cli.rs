//! Manifest-driven runs: JSON manifest in, JSON report out.

use std::fmt;
use std::io::{self, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use crate::conformal::{is_conformal, ConformalVerdict, DEFAULT_CONFORMAL_TOL};
use crate::essential::{
    distance, find_zeros_with, limit_point_audit, Tolerances, Verdict, ZeroClassification, ZeroSearch,
    DEFAULT_CLASS_TOL, DEFAULT_GRID_RESOLUTION, DEFAULT_ISOLATION_RADIUS, DEFAULT_PROBE_RADIUS, DEFAULT_ZERO_TOL,
};
use crate::geodesic::{
    lemma_dxi_residual, taylor_scalar_check, taylor_vector_check, GeodesicOptions, DEFAULT_FD_STEP, DEFAULT_GEO_STEPS,
};
use crate::geometry::{Chart, Domain, FieldSpec};
use crate::models::{make_chart, make_field, ChartParams, FieldParams, ModelCatalog};
use crate::zeroset::{
    trace_component, umbilicity_report, SubmanifoldPatch, TraceOptions, UmbilicityVerdict, DEFAULT_TRACE_GRID,
    DEFAULT_TRACE_RADIUS, DEFAULT_UMBILICITY_TOL, SAMPLE_ZERO_TOL,
};
use crate::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_MANIFEST: i32 = 2;

pub const RNG_DESCRIPTION: &str = "rand_chacha ChaCha8Rng::seed_from_u64(seed); stream 1 draws the conformality \
     sample points, stream 2 draws the identity sample points followed by one direction X per point with components \
     uniform in [-1, 1); points are uniform in the chart domain shrunk by a margin of 0.05";

pub const DEFAULT_CONFORMAL_SAMPLES: usize = 100;
pub const DEFAULT_IDENTITY_SAMPLES: usize = 50;
pub const DEFAULT_DXI_IDENTITY_TOL: f64 = 1e-7;
pub const DEFAULT_TAYLOR_FIRST_TOL: f64 = 1e-6;
pub const DEFAULT_TAYLOR_SECOND_TOL: f64 = 1e-4;
/// Smallest accepted log-log slope of the second-order Taylor remainder.
pub const MIN_REMAINDER_ORDER: f64 = 2.7;
/// Zeros at which the Taylor identities are checked, in report order.
pub const MAX_TAYLOR_ZEROS: usize = 8;
/// Zero-search grid in dimension ≥ 4, where 17^n seeds are too many.
pub const HIGH_DIM_GRID_RESOLUTION: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    CheckConformal,
    Zeros,
    Classify,
    VerifyIdentities,
    Trace,
    Umbilicity,
    All,
}

impl Analysis {
    const ORDERED: [Analysis; 6] = [
        Analysis::CheckConformal,
        Analysis::Zeros,
        Analysis::Classify,
        Analysis::VerifyIdentities,
        Analysis::Trace,
        Analysis::Umbilicity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::CheckConformal => "check-conformal",
            Analysis::Zeros => "zeros",
            Analysis::Classify => "classify",
            Analysis::VerifyIdentities => "verify-identities",
            Analysis::Trace => "trace",
            Analysis::Umbilicity => "umbilicity",
            Analysis::All => "all",
        }
    }
}

/// Either `builtin` (+ `dim`, `params`) or an inline `metric` + `domain`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ChartParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

/// Either `builtin` (+ `params`) or inline `components`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<FieldParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dxi_identity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taylor_first: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taylor_second: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub umbilicity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_zero: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleCounts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identities: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_grid: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isolation_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geo_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub chart: ChartManifest,
    pub field: FieldManifest,
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    #[serde(default)]
    pub samples: SampleCounts,
    #[serde(default)]
    pub options: RunOptions,
    #[serde(default)]
    pub seed: u64,
}

/// Command-line overrides; `None` keeps the manifest value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub zero_tol: Option<f64>,
    pub class_tol: Option<f64>,
    pub conformal_tol: Option<f64>,
    pub isolation_radius: Option<f64>,
    pub geo_steps: Option<usize>,
    pub fd_step: Option<f64>,
    pub seed: Option<u64>,
}

/// Invalid manifest or command line; maps to exit status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestError(pub String);

impl fmt::Display for ManifestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "manifest error: {}", self.0)
    }
}

impl std::error::Error for ManifestError {}

impl From<Error> for ManifestError {
    fn from(e: Error) -> Self {
        ManifestError(e.to_string())
    }
}

/// Fully resolved parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub zero_tol: f64,
    pub class_tol: f64,
    pub conformal_tol: f64,
    pub dxi_identity_tol: f64,
    pub taylor_first_tol: f64,
    pub taylor_second_tol: f64,
    pub umbilicity_tol: f64,
    pub sample_zero_tol: f64,
    pub isolation_radius: f64,
    pub geo_steps: usize,
    pub fd_step: f64,
    pub trace_radius: f64,
    pub conformal_samples: usize,
    pub identity_samples: usize,
    pub zero_grid: usize,
    pub trace_grid: usize,
    pub seed: u64,
    pub rng: String,
}

impl Settings {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            zero: self.zero_tol,
            class: self.class_tol,
            conformal: self.conformal_tol,
        }
    }

    fn geodesic_options(&self) -> GeodesicOptions {
        GeodesicOptions {
            steps: self.geo_steps,
            fd_step: self.fd_step,
            zero_tol: self.zero_tol,
        }
    }

    fn trace_options(&self) -> TraceOptions {
        TraceOptions {
            radius: self.trace_radius,
            grid: self.trace_grid,
            geo_steps: self.geo_steps,
            sample_tol: self.sample_zero_tol,
            tolerances: self.tolerances(),
        }
    }
}

pub fn parse_manifest(text: &str) -> Result<Manifest, ManifestError> {
    let m: Manifest = serde_json::from_str(text).map_err(|e| ManifestError(e.to_string()))?;
    if m.analyses.is_empty() {
        return Err(ManifestError("analyses must not be empty".into()));
    }
    Ok(m)
}

pub fn load_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|e| ManifestError(format!("{}: {e}", path.display())))?;
    parse_manifest(&text)
}

fn positive(name: &str, v: f64) -> Result<f64, ManifestError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ManifestError(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Manifest {
    pub fn build_chart(&self) -> Result<Chart, ManifestError> {
        let c = &self.chart;
        match (&c.builtin, &c.metric) {
            (Some(name), None) => {
                if c.domain.is_some() {
                    return Err(ManifestError("builtin charts take no domain".into()));
                }
                let dim = c.dim.ok_or_else(|| ManifestError("builtin chart needs `dim`".into()))?;
                Ok(make_chart(name, dim, &c.params.clone().unwrap_or_default())?)
            }
            (None, Some(rows)) => {
                let domain = c
                    .domain
                    .clone()
                    .ok_or_else(|| ManifestError("inline chart needs `domain`".into()))?;
                if c.params.is_some() {
                    return Err(ManifestError("inline charts take no params".into()));
                }
                if let Some(d) = c.dim {
                    if d != domain.dim() {
                        return Err(ManifestError(format!("dim {d} disagrees with the domain dimension {}", domain.dim())));
                    }
                }
                if rows.len() != domain.dim() || rows.iter().any(|r| r.len() != domain.dim()) {
                    return Err(ManifestError(format!("metric must be a {0}×{0} array", domain.dim())));
                }
                let name = c.name.clone().unwrap_or_else(|| "inline".into());
                Ok(Chart::from_strings(name, domain, rows)?)
            }
            _ => Err(ManifestError("chart needs exactly one of `builtin` or `metric`".into())),
        }
    }

    pub fn build_field(&self, chart: &Chart) -> Result<FieldSpec, ManifestError> {
        let f = &self.field;
        let field = match (&f.builtin, &f.components) {
            (Some(name), None) => make_field(name, chart.dim(), &f.params.clone().unwrap_or_default())?,
            (None, Some(components)) => {
                if f.params.is_some() {
                    return Err(ManifestError("inline fields take no params".into()));
                }
                let name = f.name.clone().unwrap_or_else(|| "inline".into());
                FieldSpec::from_strings(name, components)?
            }
            _ => return Err(ManifestError("field needs exactly one of `builtin` or `components`".into())),
        };
        field.check_chart(chart)?;
        Ok(field)
    }

    pub fn settings(&self, dim: usize, o: &Overrides) -> Result<Settings, ManifestError> {
        let t = &self.tolerances;
        let s = &self.samples;
        let opt = &self.options;
        let default_grid = if dim >= 4 { HIGH_DIM_GRID_RESOLUTION } else { DEFAULT_GRID_RESOLUTION };
        let settings = Settings {
            zero_tol: positive("zero tolerance", o.zero_tol.or(t.zero).unwrap_or(DEFAULT_ZERO_TOL))?,
            class_tol: positive("class tolerance", o.class_tol.or(t.class).unwrap_or(DEFAULT_CLASS_TOL))?,
            conformal_tol: positive("conformal tolerance", o.conformal_tol.or(t.conformal).unwrap_or(DEFAULT_CONFORMAL_TOL))?,
            dxi_identity_tol: positive("dxi identity tolerance", t.dxi_identity.unwrap_or(DEFAULT_DXI_IDENTITY_TOL))?,
            taylor_first_tol: positive("taylor_first tolerance", t.taylor_first.unwrap_or(DEFAULT_TAYLOR_FIRST_TOL))?,
            taylor_second_tol: positive("taylor_second tolerance", t.taylor_second.unwrap_or(DEFAULT_TAYLOR_SECOND_TOL))?,
            umbilicity_tol: positive("umbilicity tolerance", t.umbilicity.unwrap_or(DEFAULT_UMBILICITY_TOL))?,
            sample_zero_tol: positive("sample_zero tolerance", t.sample_zero.unwrap_or(SAMPLE_ZERO_TOL))?,
            isolation_radius: positive(
                "isolation radius",
                o.isolation_radius.or(opt.isolation_radius).unwrap_or(DEFAULT_ISOLATION_RADIUS),
            )?,
            geo_steps: o.geo_steps.or(opt.geo_steps).unwrap_or(DEFAULT_GEO_STEPS),
            fd_step: positive("fd step", o.fd_step.or(opt.fd_step).unwrap_or(DEFAULT_FD_STEP))?,
            trace_radius: positive("trace radius", opt.trace_radius.unwrap_or(DEFAULT_TRACE_RADIUS))?,
            conformal_samples: s.conformal.unwrap_or(DEFAULT_CONFORMAL_SAMPLES),
            identity_samples: s.identities.unwrap_or(DEFAULT_IDENTITY_SAMPLES),
            zero_grid: s.zero_grid.unwrap_or(default_grid),
            trace_grid: s.trace_grid.unwrap_or(DEFAULT_TRACE_GRID),
            seed: o.seed.unwrap_or(self.seed),
            rng: RNG_DESCRIPTION.to_string(),
        };
        if settings.geo_steps == 0 {
            return Err(ManifestError("geo_steps must be at least 1".into()));
        }
        if settings.conformal_samples == 0 || settings.identity_samples == 0 {
            return Err(ManifestError("sample counts must be at least 1".into()));
        }
        if settings.zero_grid < 2 {
            return Err(ManifestError("zero_grid must be at least 2".into()));
        }
        if settings.trace_grid < 3 || settings.trace_grid % 2 == 0 {
            return Err(ManifestError("trace_grid must be odd and at least 3".into()));
        }
        Ok(settings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub analysis: Analysis,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSummary {
    pub name: String,
    pub dim: usize,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub name: String,
    pub components: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub manifest: Manifest,
    pub settings: Settings,
    pub chart: ChartSummary,
    pub field: FieldSummary,
    pub analyses: Vec<AnalysisReport>,
    pub status: Status,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    pub fn analysis(&self, a: Analysis) -> Option<&AnalysisReport> {
        self.analyses.iter().find(|r| r.analysis == a)
    }

    /// Pretty JSON with every float written to 17 significant digits.
    pub fn to_json(&self) -> String {
        to_precise_json(self)
    }
}

/// Pretty-printing formatter that writes floats as `{:.16e}`.
struct PreciseFormatter(PrettyFormatter<'static>);

impl Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            write!(w, "{v:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn to_precise_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize infallibly")
}

/// Expands `all`, keeps the declared order and drops repeats.
fn expand(analyses: &[Analysis]) -> Vec<Analysis> {
    let mut out = Vec::new();
    for a in analyses {
        let items: &[Analysis] = if *a == Analysis::All { &Analysis::ORDERED } else { std::slice::from_ref(a) };
        for item in items {
            if !out.contains(item) {
                out.push(*item);
            }
        }
    }
    out
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Run<'a> {
    chart: &'a Chart,
    field: &'a FieldSpec,
    settings: &'a Settings,
    zeros: Option<Vec<Vec<f64>>>,
    classifications: Option<Vec<ZeroClassification>>,
    patches: Option<Vec<SubmanifoldPatch>>,
}

type Outcome = crate::Result<(bool, Value)>;

impl<'a> Run<'a> {
    fn zeros(&mut self) -> crate::Result<Vec<Vec<f64>>> {
        if self.zeros.is_none() {
            let search = ZeroSearch {
                grid_resolution: self.settings.zero_grid,
                tol: self.settings.zero_tol,
                probe_radius: DEFAULT_PROBE_RADIUS,
            };
            self.zeros = Some(find_zeros_with(self.chart, self.field, &search)?);
        }
        Ok(self.zeros.clone().expect("just computed"))
    }

    fn classifications(&mut self) -> crate::Result<Vec<ZeroClassification>> {
        if self.classifications.is_none() {
            self.classify()?;
        }
        Ok(self.classifications.clone().expect("just computed"))
    }

    fn check_conformal(&mut self) -> Outcome {
        let mut rng = rng_for(self.settings.seed, 1);
        let samples = self.chart.sample_interior(&mut rng, self.settings.conformal_samples);
        let rep = is_conformal(self.chart, self.field, &samples, self.settings.conformal_tol)?;
        Ok((rep.verdict == ConformalVerdict::Conformal, to_value(&rep)))
    }

    fn find(&mut self) -> Outcome {
        let zeros = self.zeros()?;
        let entries = zeros
            .iter()
            .map(|z| {
                let g = self.chart.metric_matrix(z)?;
                let norm = crate::linalg::g_norm(&g, &self.field.eval(z)?);
                Ok(json!({ "point": z, "field_norm": norm }))
            })
            .collect::<crate::Result<Vec<_>>>()?;
        Ok((
            true,
            json!({
                "grid_resolution": self.settings.zero_grid,
                "probe_radius": DEFAULT_PROBE_RADIUS,
                "tol": self.settings.zero_tol,
                "count": zeros.len(),
                "zeros": entries,
            }),
        ))
    }

    fn classify(&mut self) -> Outcome {
        let zeros = self.zeros()?;
        let audit = limit_point_audit(
            self.chart,
            self.field,
            &zeros,
            self.settings.isolation_radius,
            &self.settings.tolerances(),
        )?;
        let valid = audit
            .entries
            .iter()
            .all(|e| e.classification.verdict != Verdict::InvalidNotConformal);
        self.classifications = Some(audit.entries.iter().map(|e| e.classification.clone()).collect());
        Ok((audit.passed && valid, to_value(&audit)))
    }

    fn verify_identities(&mut self) -> Outcome {
        let s = self.settings;
        let n = self.chart.dim();
        let mut rng = rng_for(s.seed, 2);
        let points = self.chart.sample_interior(&mut rng, s.identity_samples);
        let directions: Vec<Vec<f64>> = points
            .iter()
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut identity = Vec::with_capacity(points.len());
        let mut identity_max = 0.0f64;
        for (p, x) in points.iter().zip(&directions) {
            let r = lemma_dxi_residual(self.chart, self.field, p, x)?;
            identity_max = identity_max.max(r);
            identity.push(json!({ "point": p, "direction": x, "residual": r }));
        }
        let identity_ok = identity_max < s.dxi_identity_tol;

        let zeros = self.zeros()?;
        let opts = s.geodesic_options();
        let mut taylor = Vec::new();
        let mut taylor_ok = true;
        for z in zeros.iter().take(MAX_TAYLOR_ZEROS) {
            for axis in 0..n {
                let mut v = vec![0.0; n];
                v[axis] = 1.0;
                let checks = taylor_scalar_check(self.chart, self.field, z, &v, &opts)
                    .and_then(|sc| Ok((sc, taylor_vector_check(self.chart, self.field, z, &v, &opts)?)));
                match checks {
                    Ok((sc, vc)) => {
                        let order_ok = sc.remainder_order.map_or(true, |o| o >= MIN_REMAINDER_ORDER);
                        let ok = sc.derivative_residual < s.taylor_first_tol
                            && order_ok
                            && vc.first_residual < s.taylor_first_tol
                            && vc.second_residual < s.taylor_second_tol;
                        taylor_ok &= ok;
                        taylor.push(json!({ "passed": ok, "scalar": sc, "vector": vc }));
                    }
                    Err(Error::DomainExit { t }) => {
                        taylor.push(json!({
                            "point": z,
                            "direction": v,
                            "skipped": format!("geodesic leaves the chart at t = {t}"),
                        }));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok((
            identity_ok && taylor_ok,
            json!({
                "dxi_identity": {
                    "tol": s.dxi_identity_tol,
                    "max_residual": identity_max,
                    "passed": identity_ok,
                    "samples": identity,
                },
                "taylor": {
                    "first_tol": s.taylor_first_tol,
                    "second_tol": s.taylor_second_tol,
                    "min_remainder_order": MIN_REMAINDER_ORDER,
                    "zeros_total": zeros.len(),
                    "zeros_checked": zeros.len().min(MAX_TAYLOR_ZEROS),
                    "passed": taylor_ok,
                    "checks": taylor,
                },
            }),
        ))
    }

    fn trace(&mut self) -> Outcome {
        let classes = self.classifications()?;
        let opts = self.settings.trace_options();
        let mut patches: Vec<SubmanifoldPatch> = Vec::new();
        let mut entries = Vec::new();
        let mut ok = true;
        for c in &classes {
            if c.verdict != Verdict::KillingInessential {
                entries.push(json!({ "point": c.point, "refused": c.verdict }));
                continue;
            }
            if let Some(i) = patches
                .iter()
                .position(|p| p.k() > 0 && distance(&p.base, &c.point) < opts.radius)
            {
                entries.push(json!({ "point": c.point, "covered_by": i }));
                continue;
            }
            let patch = trace_component(self.chart, self.field, &c.point, &opts)?;
            let max_norm = patch.max_sample_norm().unwrap_or(0.0);
            let parity = patch.k() == 0 || patch.codimension() % 2 == 0;
            let passed = max_norm < opts.sample_tol && parity;
            ok &= passed;
            entries.push(json!({
                "patch": patches.len(),
                "base": patch.base,
                "k": patch.k(),
                "codimension": patch.codimension(),
                "even_codimension": patch.codimension() % 2 == 0,
                "radius": patch.radius,
                "grid": patch.grid,
                "max_sample_norm": max_norm,
                "sample_tol": opts.sample_tol,
                "points": patch.points,
                "passed": passed,
            }));
            patches.push(patch);
        }
        self.patches = Some(patches);
        Ok((ok, json!({ "components": entries })))
    }

    fn umbilicity(&mut self) -> Outcome {
        if self.patches.is_none() {
            self.trace()?;
        }
        let patches = self.patches.clone().expect("just traced");
        let mut ok = true;
        let mut reports = Vec::new();
        for (i, p) in patches.iter().enumerate() {
            let rep = umbilicity_report(self.chart, p, self.settings.umbilicity_tol)?;
            let passed = rep.verdict != UmbilicityVerdict::NotUmbilical && (rep.k == 0 || rep.even_codimension);
            ok &= passed;
            reports.push(json!({ "patch": i, "base": p.base, "passed": passed, "report": rep }));
        }
        Ok((ok, json!({ "patches": reports })))
    }
}

/// Builds the chart and field and runs every requested analysis in order.
/// Manifest problems are returned as errors; analysis failures and runtime
/// errors are recorded in the report.
pub fn run(manifest: &Manifest, overrides: &Overrides) -> Result<Report, ManifestError> {
    if manifest.analyses.is_empty() {
        return Err(ManifestError("analyses must not be empty".into()));
    }
    let chart = manifest.build_chart()?;
    let field = manifest.build_field(&chart)?;
    let settings = manifest.settings(chart.dim(), overrides)?;
    let mut state = Run {
        chart: &chart,
        field: &field,
        settings: &settings,
        zeros: None,
        classifications: None,
        patches: None,
    };
    let mut analyses = Vec::new();
    for a in expand(&manifest.analyses) {
        let outcome = match a {
            Analysis::CheckConformal => state.check_conformal(),
            Analysis::Zeros => state.find(),
            Analysis::Classify => state.classify(),
            Analysis::VerifyIdentities => state.verify_identities(),
            Analysis::Trace => state.trace(),
            Analysis::Umbilicity => state.umbilicity(),
            Analysis::All => unreachable!("expanded"),
        };
        analyses.push(match outcome {
            Ok((passed, result)) => AnalysisReport {
                analysis: a,
                status: if passed { Status::Pass } else { Status::Fail },
                error: None,
                result: Some(result),
            },
            Err(e) => AnalysisReport {
                analysis: a,
                status: Status::Error,
                error: Some(format!("{}: {e}", a.name())),
                result: None,
            },
        });
    }
    let status = if analyses.iter().all(|r| r.status == Status::Pass) {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(Report {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        manifest: manifest.clone(),
        settings,
        chart: ChartSummary {
            name: chart.name().to_string(),
            dim: chart.dim(),
            domain: chart.domain().clone(),
        },
        field: FieldSummary {
            name: field.name().to_string(),
            components: field.components().iter().map(|c| c.to_string()).collect(),
        },
        analyses,
        status,
    })
}

/// Loads, runs and writes the report to `out` (or standard output). Returns
/// the process exit status; manifest errors go to standard error.
pub fn execute(path: &Path, overrides: &Overrides, out: Option<&Path>) -> i32 {
    let report = match load_manifest(path).and_then(|m| run(&m, overrides)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_MANIFEST;
        }
    };
    for a in report.analyses.iter().filter(|a| a.status == Status::Error) {
        eprintln!("analysis error: {}", a.error.as_deref().unwrap_or(""));
    }
    let text = report.to_json();
    let written = match out {
        Some(p) => std::fs::write(p, text.as_bytes()),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("cannot write report: {e}");
        return EXIT_FAIL;
    }
    report.exit_code()
}

pub fn catalog() -> String {
    ModelCatalog::describe()
}

fn number() -> Value {
    json!({ "type": ["number", "null"] })
}

fn vector() -> Value {
    json!({ "type": "array", "items": { "type": "number" } })
}

pub fn manifest_schema() -> Value {
    let opt_number = json!({ "type": "number", "exclusiveMinimum": 0 });
    let opt_count = json!({ "type": "integer", "minimum": 1 });
    json!({
        "$schema": "http://json-schema.org/draft-07/schema#",
        "title": "cvf manifest",
        "type": "object",
        "additionalProperties": false,
        "required": ["chart", "field", "analyses"],
        "properties": {
            "chart": {
                "description": "Either {builtin, dim, params?} or {name?, metric, domain}. Metric entries are expressions in x1..xn.",
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "builtin": { "enum": ModelCatalog::chart_names() },
                    "dim": { "type": "integer", "minimum": 2 },
                    "params": {
                        "type": "object",
                        "additionalProperties": false,
                        "properties": { "half_width": opt_number, "radius": opt_number }
                    },
                    "name": { "type": "string" },
                    "metric": { "type": "array", "items": { "type": "array", "items": { "type": "string" } } },
                    "domain": {
                        "oneOf": [
                            {
                                "type": "object", "additionalProperties": false, "required": ["box"],
                                "properties": { "box": {
                                    "type": "object", "additionalProperties": false, "required": ["lower", "upper"],
                                    "properties": { "lower": vector(), "upper": vector() }
                                } }
                            },
                            {
                                "type": "object", "additionalProperties": false, "required": ["ball"],
                                "properties": { "ball": {
                                    "type": "object", "additionalProperties": false, "required": ["center", "radius"],
                                    "properties": { "center": vector(), "radius": opt_number }
                                } }
                            }
                        ]
                    }
                },
                "oneOf": [
                    { "required": ["builtin", "dim"], "not": { "anyOf": [{ "required": ["metric"] }, { "required": ["domain"] }] } },
                    { "required": ["metric", "domain"], "not": { "anyOf": [{ "required": ["builtin"] }, { "required": ["params"] }] } }
                ]
            },
            "field": {
                "description": "Either {builtin, params?} or {name?, components}. Components are expressions in x1..xn.",
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "builtin": { "enum": ModelCatalog::field_names() },
                    "params": {
                        "type": "object",
                        "additionalProperties": false,
                        "properties": {
                            "i": { "type": "integer", "minimum": 1 },
                            "j": { "type": "integer", "minimum": 1 },
                            "axis": { "type": "integer", "minimum": 1 },
                            "vector": vector()
                        }
                    },
                    "name": { "type": "string" },
                    "components": { "type": "array", "items": { "type": "string" } }
                },
                "oneOf": [
                    { "required": ["builtin"], "not": { "required": ["components"] } },
                    { "required": ["components"], "not": { "anyOf": [{ "required": ["builtin"] }, { "required": ["params"] }] } }
                ]
            },
            "analyses": {
                "type": "array",
                "minItems": 1,
                "items": { "enum": ["check-conformal", "zeros", "classify", "verify-identities", "trace", "umbilicity", "all"] }
            },
            "tolerances": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "zero": opt_number, "class": opt_number, "conformal": opt_number, "dxi_identity": opt_number,
                    "taylor_first": opt_number, "taylor_second": opt_number, "umbilicity": opt_number,
                    "sample_zero": opt_number
                }
            },
            "samples": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "conformal": opt_count,
                    "identities": opt_count,
                    "zero_grid": { "type": "integer", "minimum": 2 },
                    "trace_grid": { "type": "integer", "minimum": 3 }
                }
            },
            "options": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "isolation_radius": opt_number,
                    "geo_steps": opt_count,
                    "fd_step": opt_number,
                    "trace_radius": opt_number
                }
            },
            "seed": {
                "description": RNG_DESCRIPTION,
                "type": "integer",
                "minimum": 0,
                "default": 0
            }
        }
    })
}

pub fn report_schema() -> Value {
    let status = json!({ "enum": ["pass", "fail", "error"] });
    json!({
        "$schema": "http://json-schema.org/draft-07/schema#",
        "title": "cvf report",
        "description": "Floats are written with 17 significant digits; non-finite values are null.",
        "type": "object",
        "required": ["tool", "version", "manifest", "settings", "chart", "field", "analyses", "status"],
        "properties": {
            "tool": { "type": "string" },
            "version": { "type": "string" },
            "manifest": manifest_schema(),
            "settings": {
                "type": "object",
                "required": [
                    "zero_tol", "class_tol", "conformal_tol", "dxi_identity_tol", "taylor_first_tol", "taylor_second_tol",
                    "umbilicity_tol", "sample_zero_tol", "isolation_radius", "geo_steps", "fd_step", "trace_radius",
                    "conformal_samples", "identity_samples", "zero_grid", "trace_grid", "seed", "rng"
                ],
                "properties": {
                    "zero_tol": number(), "class_tol": number(), "conformal_tol": number(),
                    "geo_steps": { "type": "integer" }, "seed": { "type": "integer" }, "rng": { "type": "string" }
                }
            },
            "chart": {
                "type": "object",
                "required": ["name", "dim", "domain"],
                "properties": { "name": { "type": "string" }, "dim": { "type": "integer" }, "domain": { "type": "object" } }
            },
            "field": {
                "type": "object",
                "required": ["name", "components"],
                "properties": { "name": { "type": "string" }, "components": { "type": "array", "items": { "type": "string" } } }
            },
            "analyses": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["analysis", "status"],
                    "additionalProperties": false,
                    "properties": {
                        "analysis": { "enum": ["check-conformal", "zeros", "classify", "verify-identities", "trace", "umbilicity"] },
                        "status": status,
                        "error": { "type": "string" },
                        "result": { "type": "object" }
                    }
                }
            },
            "status": { "enum": ["pass", "fail"] }
        }
    })
}

/// Both schemas as one JSON document: `{"manifest": …, "report": …}`.
pub fn emit_schema() -> String {
    to_precise_json(&json!({ "manifest": manifest_schema(), "report": report_schema() }))
}
