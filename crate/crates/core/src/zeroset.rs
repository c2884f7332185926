//! Components of the zero set of a Killing-type field, traced as geodesic
//! patches `exp_x(ker dξ_x)`, and their extrinsic geometry.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::rescale_metric;
use crate::error::{Error, Result};
use crate::essential::{classify_zero, Tolerances, Verdict};
use crate::geodesic::{exp_map, DEFAULT_GEO_STEPS};
use crate::geometry::{idx3, Chart, FieldSpec, LocalField, ScalarField};
use crate::linalg::{g_norm, g_orthonormalize, inner, kernel_basis, RANK_ATOL, RANK_RTOL};

pub const DEFAULT_TRACE_RADIUS: f64 = 0.2;
/// Samples per parameter axis; odd so that the base point is a sample.
pub const DEFAULT_TRACE_GRID: usize = 5;
/// Bound on `‖ξ‖_g` at the samples of a traced patch.
pub const SAMPLE_ZERO_TOL: f64 = 1e-5;
pub const DEFAULT_UMBILICITY_TOL: f64 = 1e-4;

type PatchMap = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub radius: f64,
    pub grid: usize,
    pub geo_steps: usize,
    pub sample_tol: f64,
    pub tolerances: Tolerances,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            radius: DEFAULT_TRACE_RADIUS,
            grid: DEFAULT_TRACE_GRID,
            geo_steps: DEFAULT_GEO_STEPS,
            sample_tol: SAMPLE_ZERO_TOL,
            tolerances: Tolerances::default(),
        }
    }
}

/// A k-dimensional patch `t ↦ P(t)`, `t ∈ [−radius, radius]^k`, sampled on a
/// uniform grid.
#[derive(Clone, Serialize)]
pub struct SubmanifoldPatch {
    pub base: Vec<f64>,
    /// g-orthonormal basis of the tangent space at the base point.
    pub tangent: Vec<Vec<f64>>,
    pub radius: f64,
    pub grid: usize,
    pub parameters: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
    /// `h_ij = g(∂_i P, ∂_j P)` at every sample.
    pub induced_metrics: Vec<Vec<Vec<f64>>>,
    /// `‖ξ‖_g` at every sample for traced patches; empty for synthetic ones.
    pub sample_field_norms: Vec<f64>,
    #[serde(skip)]
    map: PatchMap,
}

impl fmt::Debug for SubmanifoldPatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubmanifoldPatch")
            .field("base", &self.base)
            .field("k", &self.k())
            .field("radius", &self.radius)
            .field("grid", &self.grid)
            .field("samples", &self.points.len())
            .finish()
    }
}

impl SubmanifoldPatch {
    /// Patch of dimension `k` given by an explicit parametrization with
    /// `map(0)` as base point.
    pub fn from_map<F>(chart: &Chart, k: usize, radius: f64, grid: usize, map: F) -> Result<SubmanifoldPatch>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Self::build(chart, k, radius, grid, Arc::new(map))
    }

    fn build(chart: &Chart, k: usize, radius: f64, grid: usize, map: PatchMap) -> Result<SubmanifoldPatch> {
        let n = chart.dim();
        if k > n {
            return Err(Error::InvalidArgument(format!("patch dimension {k} exceeds {n}")));
        }
        if k > 0 && (grid < 3 || grid % 2 == 0) {
            return Err(Error::InvalidArgument("grid must be odd and at least 3".into()));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument("radius must be positive".into()));
        }
        let base = map(&vec![0.0; k])?;
        if base.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: base.len() });
        }
        let mut patch = SubmanifoldPatch {
            base,
            tangent: Vec::new(),
            radius,
            grid,
            parameters: Vec::new(),
            points: Vec::new(),
            induced_metrics: Vec::new(),
            sample_field_norms: Vec::new(),
            map,
        };
        let count = if k == 0 { 1 } else { grid.pow(k as u32) };
        patch.parameters = (0..count).map(|s| patch.parameter_of(s, k)).collect();
        patch.points = patch
            .parameters
            .par_iter()
            .map(|t| {
                let p = (patch.map)(t)?;
                if !chart.contains(&p) {
                    return Err(Error::OutsideDomain { point: p });
                }
                Ok(p)
            })
            .collect::<Result<_>>()?;
        let derivatives = (0..count)
            .into_par_iter()
            .map(|s| patch.first_derivatives(&patch.parameters[s]))
            .collect::<Result<Vec<_>>>()?;
        for (s, d) in derivatives.iter().enumerate() {
            let g = chart.metric_matrix(&patch.points[s])?;
            let h = DMatrix::from_fn(k, k, |i, j| inner(&g, &d[i], &d[j]));
            patch.induced_metrics.push(rows(&h));
        }
        if k > 0 {
            let g = chart.metric_matrix(&patch.base)?;
            let frame = g_orthonormalize(&g, &derivatives[count / 2], 1e-8);
            if frame.len() < k {
                return Err(Error::DegeneratePatch { index: count / 2 });
            }
            patch.tangent = frame.iter().map(|v| v.iter().cloned().collect()).collect();
        }
        Ok(patch)
    }

    pub fn k(&self) -> usize {
        self.parameters.first().map_or(0, |t| t.len())
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn codimension(&self) -> usize {
        self.dim() - self.k()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.grid - 1) as f64
    }

    /// Evaluates the parametrization at `t`.
    pub fn point_at(&self, t: &[f64]) -> Result<Vec<f64>> {
        (self.map)(t)
    }

    fn digits(&self, s: usize, k: usize) -> Vec<usize> {
        let mut rest = s;
        (0..k)
            .map(|_| {
                let d = rest % self.grid;
                rest /= self.grid;
                d
            })
            .collect()
    }

    fn parameter_of(&self, s: usize, k: usize) -> Vec<f64> {
        let h = if self.grid > 1 { 2.0 * self.radius / (self.grid - 1) as f64 } else { 0.0 };
        self.digits(s, k).iter().map(|d| -self.radius + h * *d as f64).collect()
    }

    /// Whether sample `s` has grid neighbours on both sides in every axis.
    pub fn is_interior(&self, s: usize) -> bool {
        let k = self.k();
        k > 0 && s < self.points.len() && self.digits(s, k).iter().all(|d| *d > 0 && *d + 1 < self.grid)
    }

    pub fn interior_samples(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|s| self.is_interior(*s)).collect()
    }

    pub fn max_sample_norm(&self) -> Option<f64> {
        self.sample_field_norms.iter().cloned().reduce(f64::max)
    }

    fn eval_offset(&self, t: &[f64], offsets: &[(usize, f64)]) -> Result<DVector<f64>> {
        let mut u = t.to_vec();
        for (i, d) in offsets {
            u[*i] += d;
        }
        Ok(DVector::from_vec((self.map)(&u)?))
    }

    /// `∂_i P(t)` by Richardson-extrapolated central differences with base
    /// step equal to the grid spacing.
    fn first_derivatives(&self, t: &[f64]) -> Result<Vec<DVector<f64>>> {
        let h = self.spacing();
        (0..t.len())
            .map(|i| {
                let central = |d: f64| -> Result<DVector<f64>> {
                    Ok((self.eval_offset(t, &[(i, d)])? - self.eval_offset(t, &[(i, -d)])?) / (2.0 * d))
                };
                Ok((central(0.5 * h)? * 4.0 - central(h)?) / 3.0)
            })
            .collect()
    }

    /// `∂_i ∂_j P(t)` as `[i][j]`, same stencil family as
    /// [`Self::first_derivatives`].
    fn second_derivatives(&self, t: &[f64], center: &DVector<f64>) -> Result<Vec<Vec<DVector<f64>>>> {
        let k = t.len();
        let h = self.spacing();
        let second = |i: usize, j: usize, d: f64| -> Result<DVector<f64>> {
            if i == j {
                Ok((self.eval_offset(t, &[(i, d)])? - center * 2.0 + self.eval_offset(t, &[(i, -d)])?) / (d * d))
            } else {
                Ok((self.eval_offset(t, &[(i, d), (j, d)])? - self.eval_offset(t, &[(i, d), (j, -d)])?
                    - self.eval_offset(t, &[(i, -d), (j, d)])?
                    + self.eval_offset(t, &[(i, -d), (j, -d)])?)
                    / (4.0 * d * d))
            }
        };
        let mut out = vec![vec![DVector::zeros(center.len()); k]; k];
        for i in 0..k {
            for j in i..k {
                let v = (second(i, j, 0.5 * h)? * 4.0 - second(i, j, h)?) / 3.0;
                out[j][i] = v.clone();
                out[i][j] = v;
            }
        }
        Ok(out)
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

/// Traces the component of the zero set through `x` as
/// `t ↦ exp_x(Σ t_i v_i)` over an orthonormal basis `v_i` of `ker dξ_x`.
/// Refuses zeros that are not `killing_inessential`.
pub fn trace_component(chart: &Chart, xi: &FieldSpec, x: &[f64], opts: &TraceOptions) -> Result<SubmanifoldPatch> {
    let class = classify_zero(chart, xi, x, &opts.tolerances)?;
    if class.verdict != Verdict::KillingInessential {
        return Err(Error::Refused(format!(
            "zero at {x:?} is {:?}; only killing_inessential zeros can be traced",
            class.verdict
        )));
    }
    let local = LocalField::at(chart, xi, x)?;
    let g = local.g().clone();
    let kernel = kernel_basis(&local.exterior_derivative(), RANK_RTOL, RANK_ATOL);
    let basis: Vec<Vec<f64>> = g_orthonormalize(&g, &kernel, 1e-8)
        .iter()
        .map(|v| v.iter().cloned().collect())
        .collect();
    let k = basis.len();
    let base = x.to_vec();
    let owned = chart.clone();
    let steps = opts.geo_steps;
    let map: PatchMap = Arc::new(move |t: &[f64]| {
        let mut v = vec![0.0; base.len()];
        for (ti, b) in t.iter().zip(&basis) {
            for (vc, bc) in v.iter_mut().zip(b) {
                *vc += ti * bc;
            }
        }
        exp_map(&owned, &base, &v, steps)
    });
    let mut patch = SubmanifoldPatch::build(chart, k, opts.radius, opts.grid, map)?;
    patch.sample_field_norms = patch
        .points
        .par_iter()
        .map(|p| Ok(g_norm(&chart.metric_matrix(p)?, &xi.eval(p)?)))
        .collect::<Result<_>>()?;
    Ok(patch)
}

/// Second fundamental form at one interior sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondFundamentalForm {
    pub index: usize,
    pub point: Vec<f64>,
    /// Coordinate vectors `∂_i P`.
    pub tangent_vectors: Vec<Vec<f64>>,
    pub induced_metric: Vec<Vec<f64>>,
    /// `B(∂_i P, ∂_j P)` as `[i][j]`, coordinate components of a normal vector.
    pub values: Vec<Vec<Vec<f64>>>,
    /// `max ‖B_ij − B_ji‖_g`
    pub symmetry_defect: f64,
}

struct Extrinsic {
    g: DMatrix<f64>,
    h: DMatrix<f64>,
    frame: Vec<DVector<f64>>,
    b: Vec<Vec<DVector<f64>>>,
    form: SecondFundamentalForm,
}

fn extrinsic(chart: &Chart, patch: &SubmanifoldPatch, index: usize) -> Result<Extrinsic> {
    if !patch.is_interior(index) {
        return Err(Error::InvalidArgument(format!("sample {index} is not interior to the patch grid")));
    }
    let n = patch.dim();
    let k = patch.k();
    let t = &patch.parameters[index];
    let center = DVector::from_vec(patch.points[index].clone());
    let d1 = patch.first_derivatives(t)?;
    let d2 = patch.second_derivatives(t, &center)?;
    let jet = chart.metric_jet(&patch.points[index], 1)?;
    let gamma = jet.christoffel();
    let g = jet.g.clone();
    let h = DMatrix::from_fn(k, k, |i, j| inner(&g, &d1[i], &d1[j]));
    let eig = h.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(*e), hi.max(e.abs())));
    if !(lo > 1e-12 * hi.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegeneratePatch { index });
    }
    let frame = g_orthonormalize(&g, &d1, 1e-10);
    if frame.len() < k {
        return Err(Error::DegeneratePatch { index });
    }
    let normal = |w: DVector<f64>| -> DVector<f64> {
        let mut out = w.clone();
        for e in &frame {
            out -= e * inner(&g, e, &w);
        }
        out
    };
    let mut b = vec![vec![DVector::zeros(n); k]; k];
    for i in 0..k {
        for j in 0..k {
            let mut acc = d2[i][j].clone();
            for c in 0..n {
                let mut s = 0.0;
                for a in 0..n {
                    for bb in 0..n {
                        s += gamma[idx3(n, c, a, bb)] * d1[i][a] * d1[j][bb];
                    }
                }
                acc[c] += s;
            }
            b[i][j] = normal(acc);
        }
    }
    let mut symmetry_defect = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            symmetry_defect = symmetry_defect.max(g_norm(&g, &(&b[i][j] - &b[j][i])));
        }
    }
    let form = SecondFundamentalForm {
        index,
        point: patch.points[index].clone(),
        tangent_vectors: d1.iter().map(|v| v.iter().cloned().collect()).collect(),
        induced_metric: rows(&h),
        values: b.iter().map(|row| row.iter().map(|v| v.iter().cloned().collect()).collect()).collect(),
        symmetry_defect,
    };
    Ok(Extrinsic { g, h, frame, b, form })
}

/// `B(X,Y)`: normal part of `∇_X Y` for the coordinate fields of the patch
/// parametrization, at an interior sample.
pub fn second_fundamental_form(chart: &Chart, patch: &SubmanifoldPatch, index: usize) -> Result<SecondFundamentalForm> {
    Ok(extrinsic(chart, patch, index)?.form)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UmbilicityVerdict {
    TotallyUmbilical,
    NotUmbilical,
    /// Zero-dimensional component.
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UmbilicitySample {
    pub index: usize,
    pub point: Vec<f64>,
    pub second_fundamental_form: SecondFundamentalForm,
    /// `H = (1/k) tr_h B`
    pub mean_curvature: Vec<f64>,
    pub mean_curvature_norm: f64,
    /// `max_a |g(H, e_a)|` over an orthonormal tangent frame.
    pub normal_defect: f64,
    /// `‖B − H ⊗ h‖`
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UmbilicityReport {
    pub k: usize,
    pub codimension: usize,
    pub even_codimension: bool,
    pub tol: f64,
    pub samples: Vec<UmbilicitySample>,
    pub max_residual: f64,
    pub verdict: UmbilicityVerdict,
}

fn umbilicity_sample(chart: &Chart, patch: &SubmanifoldPatch, index: usize) -> Result<UmbilicitySample> {
    let ex = extrinsic(chart, patch, index)?;
    let k = patch.k();
    let h_inv = ex.h.clone().try_inverse().ok_or(Error::DegeneratePatch { index })?;
    let mut mean = DVector::zeros(patch.dim());
    for i in 0..k {
        for j in 0..k {
            mean += &ex.b[i][j] * h_inv[(i, j)];
        }
    }
    mean /= k as f64;
    let d: Vec<Vec<DVector<f64>>> = (0..k)
        .map(|i| (0..k).map(|j| &ex.b[i][j] - &mean * ex.h[(i, j)]).collect())
        .collect();
    let mut sq = 0.0;
    for i in 0..k {
        for j in 0..k {
            for a in 0..k {
                for b in 0..k {
                    sq += h_inv[(i, a)] * h_inv[(j, b)] * inner(&ex.g, &d[i][j], &d[a][b]);
                }
            }
        }
    }
    let normal_defect = ex.frame.iter().map(|e| inner(&ex.g, &mean, e).abs()).fold(0.0, f64::max);
    Ok(UmbilicitySample {
        index,
        point: patch.points[index].clone(),
        mean_curvature_norm: g_norm(&ex.g, &mean),
        mean_curvature: mean.iter().cloned().collect(),
        normal_defect,
        residual: sq.max(0.0).sqrt(),
        second_fundamental_form: ex.form,
    })
}

/// Umbilicity of the patch over its interior samples.
pub fn umbilicity_report(chart: &Chart, patch: &SubmanifoldPatch, tol: f64) -> Result<UmbilicityReport> {
    let k = patch.k();
    let codimension = patch.codimension();
    if k == 0 {
        return Ok(UmbilicityReport {
            k,
            codimension,
            even_codimension: codimension % 2 == 0,
            tol,
            samples: Vec::new(),
            max_residual: 0.0,
            verdict: UmbilicityVerdict::Point,
        });
    }
    let samples = patch
        .interior_samples()
        .into_par_iter()
        .map(|s| umbilicity_sample(chart, patch, s))
        .collect::<Result<Vec<_>>>()?;
    let max_residual = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    Ok(UmbilicityReport {
        k,
        codimension,
        even_codimension: codimension % 2 == 0,
        tol,
        samples,
        max_residual,
        verdict: if max_residual < tol {
            UmbilicityVerdict::TotallyUmbilical
        } else {
            UmbilicityVerdict::NotUmbilical
        },
    })
}

/// Largest umbilicity residual of the same patch for the metric `e^{2f} g`.
pub fn umbilicity_conformal_invariance_check(chart: &Chart, patch: &SubmanifoldPatch, f: &ScalarField) -> Result<f64> {
    let rescaled = rescale_metric(chart, f);
    Ok(umbilicity_report(&rescaled, patch, f64::INFINITY)?.max_residual)
}
