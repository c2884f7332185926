//! Zeros of conformal vector fields and their essential/inessential
//! classification.
//!
//! At a zero `x` the field is homothetic for a local conformal metric iff
//! `grad φ ∈ Im ∇ξ_x`, and Killing for it iff additionally `φ(x) = 0`. Zeros
//! failing the image test admit no invariant metric and are essential.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{conformal_residual, DEFAULT_CONFORMAL_TOL};
use crate::error::{Error, Result};
use crate::geometry::{Chart, FieldSpec, LocalField};
use crate::linalg::{g_norm, least_squares, numerical_rank, RANK_ATOL, RANK_RTOL};

pub const DEFAULT_ZERO_TOL: f64 = 1e-9;
pub const DEFAULT_CLASS_TOL: f64 = 1e-6;
pub const DEFAULT_ISOLATION_RADIUS: f64 = 0.05;
pub const DEFAULT_GRID_RESOLUTION: usize = 17;
pub const DEFAULT_PROBE_RADIUS: f64 = 0.02;

/// Zeros closer than this (coordinate distance) are merged.
pub const MERGE_DISTANCE: f64 = 1e-6;
/// Zeros closer than this to the domain boundary are discarded.
pub const BOUNDARY_MARGIN: f64 = 1e-3;
pub const NEWTON_MAX_ITER: usize = 50;
const MAX_HALVINGS: usize = 40;
/// Offset of the neighbourhood points used to confirm conformality.
const NEIGHBORHOOD_RADIUS: f64 = 1e-3;

/// Tolerances shared by classification and auditing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `‖ξ(x)‖_g` below which `x` counts as a zero.
    pub zero: f64,
    /// Threshold for `|φ(x)|` and the image-membership residual.
    pub class: f64,
    /// Conformality threshold on the neighbourhood sample.
    pub conformal: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            zero: DEFAULT_ZERO_TOL,
            class: DEFAULT_CLASS_TOL,
            conformal: DEFAULT_CONFORMAL_TOL,
        }
    }
}

/// Parameters of the multistart zero search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroSearch {
    /// Grid nodes per axis over the bounding box of the domain.
    pub grid_resolution: usize,
    pub tol: f64,
    /// After the grid pass, Newton is restarted from `z ± probe_radius·e_i`
    /// around every zero `z`, which discovers neighbouring zeros on
    /// non-isolated components. Zero disables probing.
    pub probe_radius: f64,
}

impl Default for ZeroSearch {
    fn default() -> Self {
        ZeroSearch {
            grid_resolution: DEFAULT_GRID_RESOLUTION,
            tol: DEFAULT_ZERO_TOL,
            probe_radius: DEFAULT_PROBE_RADIUS,
        }
    }
}

fn coord_norm(v: &DVector<f64>) -> f64 {
    v.norm()
}

/// Damped Newton with the exact Jacobian; the step is the minimum-norm
/// least-squares solution so that degenerate and non-isolated zeros are
/// handled. Returns `None` if the iteration leaves the domain immediately.
fn newton(chart: &Chart, xi: &FieldSpec, start: &[f64]) -> Option<Vec<f64>> {
    let mut x = start.to_vec();
    if !chart.contains(&x) {
        return None;
    }
    let mut fx = xi.eval(&x).ok()?;
    for _ in 0..NEWTON_MAX_ITER {
        let r = coord_norm(&fx);
        if r == 0.0 {
            break;
        }
        let jet = xi.jet(&x, 1).ok()?;
        let step = least_squares(&jet.d1, &(-&fx), 1e-12, 0.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if chart.contains(&trial) {
                if let Ok(ft) = xi.eval(&trial) {
                    if coord_norm(&ft) < r {
                        accepted = Some((trial, ft));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((nx, nf)) => {
                x = nx;
                fx = nf;
            }
            None => break,
        }
    }
    Some(x)
}

fn field_g_norm(chart: &Chart, xi: &FieldSpec, p: &[f64]) -> Result<f64> {
    let g = chart.metric_matrix(p)?;
    Ok(g_norm(&g, &xi.eval(p)?))
}

fn accept_zero(chart: &Chart, xi: &FieldSpec, p: &[f64], tol: f64) -> bool {
    chart.domain().boundary_distance(p) > BOUNDARY_MARGIN
        && field_g_norm(chart, xi, p).map_or(false, |r| r < tol)
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn dedup(mut points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    points.sort_by(|a, b| lexicographic(a, b));
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !kept.iter().any(|q| distance(q, &p) < MERGE_DISTANCE) {
            kept.push(p);
        }
    }
    kept
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Grid nodes where `‖ξ‖_g` is no larger than at any neighbour.
fn grid_seeds(chart: &Chart, xi: &FieldSpec, resolution: usize) -> Vec<Vec<f64>> {
    let n = chart.dim();
    let (lower, upper) = chart.domain().bounds();
    let total = resolution.pow(n as u32);
    let node = |flat: usize| -> Vec<usize> {
        let mut idx = vec![0; n];
        let mut rest = flat;
        for d in (0..n).rev() {
            idx[d] = rest % resolution;
            rest /= resolution;
        }
        idx
    };
    let coords = |idx: &[usize]| -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(d, k)| lower[d] + (upper[d] - lower[d]) * (*k as f64) / (resolution - 1) as f64)
            .collect()
    };
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let p = coords(&node(flat));
            if !chart.contains(&p) {
                return f64::INFINITY;
            }
            field_g_norm(chart, xi, &p).unwrap_or(f64::INFINITY)
        })
        .collect();
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let o = (k % 3) as i64 - 1;
                    k /= 3;
                    o
                })
                .collect()
        })
        .filter(|o: &Vec<i64>| o.iter().any(|v| *v != 0))
        .collect();
    (0..total)
        .filter(|flat| {
            let v = values[*flat];
            if !v.is_finite() {
                return false;
            }
            let idx = node(*flat);
            offsets.iter().all(|off| {
                let mut nb = 0usize;
                for d in 0..n {
                    let k = idx[d] as i64 + off[d];
                    if k < 0 || k >= resolution as i64 {
                        return true;
                    }
                    nb = nb * resolution + k as usize;
                }
                v <= values[nb]
            })
        })
        .map(|flat| coords(&node(flat)))
        .collect()
}

/// Multistart Newton search for zeros of `xi`, sorted lexicographically.
pub fn find_zeros_with(chart: &Chart, xi: &FieldSpec, search: &ZeroSearch) -> Result<Vec<Vec<f64>>> {
    xi.check_chart(chart)?;
    if search.grid_resolution < 2 {
        return Err(Error::InvalidArgument("grid resolution must be at least 2".into()));
    }
    if !(search.tol > 0.0) {
        return Err(Error::InvalidArgument("zero tolerance must be positive".into()));
    }
    let run = |seeds: &[Vec<f64>]| -> Vec<Vec<f64>> {
        seeds
            .par_iter()
            .filter_map(|s| newton(chart, xi, s))
            .filter(|z| accept_zero(chart, xi, z, search.tol))
            .collect()
    };
    let seeds = grid_seeds(chart, xi, search.grid_resolution);
    let mut zeros = dedup(run(&seeds));
    if search.probe_radius > 0.0 {
        let n = chart.dim();
        let probes: Vec<Vec<f64>> = zeros
            .iter()
            .flat_map(|z| {
                (0..2 * n).map(move |k| {
                    let mut p = z.clone();
                    p[k / 2] += if k % 2 == 0 { search.probe_radius } else { -search.probe_radius };
                    p
                })
            })
            .collect();
        zeros.extend(run(&probes));
        zeros = dedup(zeros);
    }
    Ok(zeros)
}

/// [`find_zeros_with`] with the default probe radius.
pub fn find_zeros(chart: &Chart, xi: &FieldSpec, grid_resolution: usize, tol: f64) -> Result<Vec<Vec<f64>>> {
    find_zeros_with(
        chart,
        xi,
        &ZeroSearch {
            grid_resolution,
            tol,
            probe_radius: DEFAULT_PROBE_RADIUS,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `φ(x) = 0` and `grad φ ∈ Im ∇ξ_x`: Killing for a local conformal metric.
    KillingInessential,
    /// `grad φ ∈ Im ∇ξ_x` but `φ(x) ≠ 0`: homothetic, not Killing.
    HomotheticNonkilling,
    /// `grad φ ∉ Im ∇ξ_x`.
    Essential,
    /// The field is not conformal near `x`.
    InvalidNotConformal,
}

/// A zero together with the quantities entering the classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroClassification {
    pub point: Vec<f64>,
    /// `‖ξ(x)‖_g`
    pub field_norm: f64,
    pub phi: f64,
    /// Coordinate components of `dφ_x`.
    pub dphi: Vec<f64>,
    pub grad_phi: Vec<f64>,
    /// `‖dφ_x‖_g`
    pub dphi_norm: f64,
    /// Rows of the antisymmetric matrix `dξ_x`.
    pub dxi: Vec<Vec<f64>>,
    /// `‖dξ_x‖_g`
    pub dxi_norm: f64,
    /// Rows of `(∇ξ_x)^i_j`.
    pub nabla_xi: Vec<Vec<f64>>,
    /// `min_W ‖∇ξ_x W − grad φ‖_g`
    pub image_residual: f64,
    /// Effective threshold `class_tol · (1 + ‖grad φ‖_g)` for the image test.
    pub image_threshold: f64,
    pub rank_dxi: usize,
    pub kernel_dim: usize,
    /// Largest conformal residual on the neighbourhood sample.
    pub conformal_residual: f64,
    /// The image criterion holds in dimension ≥ 3 only. In dimension 2 the
    /// verdict is still computed but carries this flag.
    pub criterion_applies: bool,
    pub verdict: Verdict,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

/// Classifies the zero `x` of `xi`.
pub fn classify_zero(chart: &Chart, xi: &FieldSpec, x: &[f64], tol: &Tolerances) -> Result<ZeroClassification> {
    let local = LocalField::at(chart, xi, x)?;
    let n = local.dim();
    let field_norm = local.norm();
    if !(field_norm < tol.zero) {
        return Err(Error::NotAZero {
            point: x.to_vec(),
            norm: field_norm,
        });
    }

    let mut conformal = conformal_residual(chart, xi, x)?;
    for k in 0..2 * n {
        let mut p = x.to_vec();
        p[k / 2] += if k % 2 == 0 { NEIGHBORHOOD_RADIUS } else { -NEIGHBORHOOD_RADIUS };
        if chart.contains(&p) {
            conformal = conformal.max(conformal_residual(chart, xi, &p)?);
        }
    }

    let phi = local.conformal_factor();
    let dphi = local.conformal_factor_differential();
    let grad_phi = local.g_inv() * &dphi;
    let grad_norm = g_norm(local.g(), &grad_phi);
    let nabla = local.covariant_derivative();
    let dxi = local.exterior_derivative();

    // least squares in the g-norm: weight both sides by the Cholesky factor
    let chol_t = local.g().clone().cholesky().expect("validated metric").l().transpose();
    let a = &chol_t * &nabla;
    let b = &chol_t * &grad_phi;
    let w = least_squares(&a, &b, RANK_RTOL, RANK_ATOL);
    let image_residual = (&a * w - b).norm();
    let image_threshold = tol.class * (1.0 + grad_norm);

    let rank_dxi = numerical_rank(&dxi, RANK_RTOL, RANK_ATOL);
    let verdict = if !(conformal < tol.conformal) {
        Verdict::InvalidNotConformal
    } else if image_residual >= image_threshold {
        Verdict::Essential
    } else if phi.abs() < tol.class {
        Verdict::KillingInessential
    } else {
        Verdict::HomotheticNonkilling
    };

    Ok(ZeroClassification {
        point: x.to_vec(),
        field_norm,
        phi,
        dphi: dphi.iter().cloned().collect(),
        grad_phi: grad_phi.iter().cloned().collect(),
        dphi_norm: grad_norm,
        dxi_norm: crate::linalg::covariant2_norm(local.g_inv(), &dxi),
        dxi: rows(&dxi),
        nabla_xi: rows(&nabla),
        image_residual,
        image_threshold,
        rank_dxi,
        kernel_dim: n - rank_dxi,
        conformal_residual: conformal,
        criterion_applies: n >= 3,
        verdict,
    })
}

/// Outcome of one audit check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub point: Option<Vec<f64>>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub classification: ZeroClassification,
    pub isolated: bool,
    /// Distance to the nearest other zero, if any.
    pub nearest: Option<f64>,
}

/// Isolation structure of a zero set checked against the classification:
/// non-isolated zeros must be Killing-inessential, essential zeros must be
/// isolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPointAudit {
    pub radius: f64,
    pub entries: Vec<AuditEntry>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

pub fn limit_point_audit(
    chart: &Chart,
    xi: &FieldSpec,
    zeros: &[Vec<f64>],
    radius: f64,
    tol: &Tolerances,
) -> Result<LimitPointAudit> {
    let classifications = zeros
        .par_iter()
        .map(|z| classify_zero(chart, xi, z, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::with_capacity(zeros.len());
    let mut assertions = Vec::new();
    for (i, c) in classifications.into_iter().enumerate() {
        let nearest = zeros
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, z)| distance(z, &zeros[i]))
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))));
        let isolated = nearest.map_or(true, |d| d > radius);
        if !isolated {
            let ok = c.phi.abs() < tol.class
                && c.image_residual < tol.class
                && c.verdict == Verdict::KillingInessential;
            assertions.push(Assertion {
                name: "non_isolated_zero_is_killing_inessential".into(),
                point: Some(c.point.clone()),
                passed: ok,
                detail: format!(
                    "|phi| = {:e}, image residual = {:e}, verdict = {:?}",
                    c.phi.abs(),
                    c.image_residual,
                    c.verdict
                ),
            });
        }
        if c.verdict == Verdict::Essential {
            assertions.push(Assertion {
                name: "essential_zero_is_isolated".into(),
                point: Some(c.point.clone()),
                passed: isolated,
                detail: match nearest {
                    Some(d) => format!("nearest other zero at distance {d:e}"),
                    None => "no other zero".into(),
                },
            });
        }
        if c.verdict != Verdict::InvalidNotConformal {
            assertions.push(Assertion {
                name: "rank_of_dxi_is_even".into(),
                point: Some(c.point.clone()),
                passed: c.rank_dxi % 2 == 0,
                detail: format!("rank = {}", c.rank_dxi),
            });
        }
        entries.push(AuditEntry {
            classification: c,
            isolated,
            nearest,
        });
    }
    let passed = assertions.iter().all(|a| a.passed);
    Ok(LimitPointAudit {
        radius,
        entries,
        assertions,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{euclidean, euler, remark_example, rotation, special_conformal, sphere_stereographic};

    #[test]
    fn rotation_in_the_plane_has_one_zero() {
        let e = euclidean(2, 1.0).unwrap();
        let z = find_zeros(&e, &rotation(2, 1, 2).unwrap(), 11, 1e-9).unwrap();
        assert_eq!(z.len(), 1);
        assert!(z[0].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn special_conformal_has_only_the_origin() {
        let e = euclidean(3, 1.0).unwrap();
        // even resolution: the origin is not a grid node
        let z = find_zeros(&e, &special_conformal(&[1.0, 0.0, 0.0]), 10, 1e-9).unwrap();
        assert_eq!(z.len(), 1);
        assert!(z[0].iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn classification_examples() {
        let tol = Tolerances::default();
        let e3 = euclidean(3, 1.0).unwrap();
        let c = classify_zero(&e3, &rotation(3, 1, 2).unwrap(), &[0.0; 3], &tol).unwrap();
        assert_eq!(c.verdict, Verdict::KillingInessential);
        assert_eq!((c.phi, c.image_residual, c.rank_dxi, c.kernel_dim), (0.0, 0.0, 2, 1));

        let c = classify_zero(&e3, &euler(3), &[0.0; 3], &tol).unwrap();
        assert_eq!(c.verdict, Verdict::HomotheticNonkilling);
        assert_eq!(c.phi, 1.0);

        let s = sphere_stereographic(3, 3.0).unwrap();
        let c = classify_zero(&s, &remark_example(3), &[0.0; 3], &tol).unwrap();
        assert_eq!(c.verdict, Verdict::Essential);
        assert!(c.dxi_norm < 1e-8 && c.phi.abs() < 1e-8 && c.dphi_norm > 0.1);

        assert!(matches!(
            classify_zero(&e3, &euler(3), &[0.1, 0.0, 0.0], &tol),
            Err(Error::NotAZero { .. })
        ));
        let bad = FieldSpec::from_strings("bad", &["x1^2 + x2^2 - x3", "x2", "x3"]).unwrap();
        let c = classify_zero(&e3, &bad, &[0.0; 3], &tol).unwrap();
        assert_eq!(c.verdict, Verdict::InvalidNotConformal);
    }

    #[test]
    fn plane_rotation_is_classified_with_flag() {
        let e = euclidean(2, 1.0).unwrap();
        let c = classify_zero(&e, &rotation(2, 1, 2).unwrap(), &[0.0, 0.0], &Tolerances::default()).unwrap();
        assert_eq!(c.verdict, Verdict::KillingInessential);
        assert!(!c.criterion_applies);
    }
}
