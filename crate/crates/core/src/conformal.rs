//! Conformal Killing operator, conformal factor, and conformal rescaling.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{idx3, Chart, FieldSpec, ScalarField};
use crate::linalg::covariant2_norm;

/// Default tolerance for the conformality verdict.
pub const DEFAULT_CONFORMAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformalVerdict {
    Conformal,
    NotConformal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalReport {
    pub chart: String,
    pub field: String,
    pub tol: f64,
    pub samples: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
    pub verdict: ConformalVerdict,
}

/// `L_ξ g` and `φ` from first-order jets.
fn lie_and_factor(chart: &Chart, xi: &FieldSpec, p: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64)> {
    xi.check_chart(chart)?;
    let m = chart.metric_jet(p, 1)?;
    let gamma = m.christoffel();
    let f = xi.jet(p, 1)?;
    let n = chart.dim();
    let mut lie = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in 0..n {
                s += f.value[k] * m.dg(k, i, j) + m.g[(k, j)] * f.d1[(k, i)] + m.g[(i, k)] * f.d1[(k, j)];
            }
            lie[(i, j)] = s;
            lie[(j, i)] = s;
        }
    }
    let trace: f64 = (0..n)
        .map(|i| f.d1[(i, i)] + (0..n).map(|k| gamma[idx3(n, i, i, k)] * f.value[k]).sum::<f64>())
        .sum();
    Ok((lie, m.g, m.g_inv, trace / n as f64))
}

/// `φ(p) = tr(∇ξ)/n`.
pub fn conformal_factor(chart: &Chart, xi: &FieldSpec, p: &[f64]) -> Result<f64> {
    Ok(lie_and_factor(chart, xi, p)?.3)
}

/// `‖L_ξ g − 2φ g‖_g` at `p`.
pub fn conformal_residual(chart: &Chart, xi: &FieldSpec, p: &[f64]) -> Result<f64> {
    let (lie, g, g_inv, phi) = lie_and_factor(chart, xi, p)?;
    Ok(covariant2_norm(&g_inv, &(lie - g * (2.0 * phi))))
}

/// Conformality verdict over `samples`: conformal iff the largest residual is
/// below `tol`.
pub fn is_conformal(chart: &Chart, xi: &FieldSpec, samples: &[Vec<f64>], tol: f64) -> Result<ConformalReport> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let residuals = samples
        .par_iter()
        .map(|p| conformal_residual(chart, xi, p))
        .collect::<Result<Vec<f64>>>()?;
    let (worst, max_residual) = residuals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
    Ok(ConformalReport {
        chart: chart.name().to_string(),
        field: xi.name().to_string(),
        tol,
        samples: samples.to_vec(),
        residuals,
        max_residual,
        worst_point: samples[worst].clone(),
        verdict: if max_residual < tol {
            ConformalVerdict::Conformal
        } else {
            ConformalVerdict::NotConformal
        },
    })
}

/// The chart with metric `e^{2f} g`, built as expressions so that jets stay
/// exact.
pub fn rescale_metric(chart: &Chart, f: &ScalarField) -> Chart {
    if f.expr.is_zero() {
        return chart.clone();
    }
    let factor = (2.0 * f.expr.clone()).exp();
    let n = chart.dim();
    let metric = (0..n * n)
        .map(|k| {
            let g = chart.metric_expr(k / n, k % n);
            if g.is_zero() {
                Expr::Const(0.0)
            } else {
                factor.clone() * g.clone()
            }
        })
        .collect();
    chart.with_metric(format!("exp(2*({}))*{}", f.expr, chart.name()), metric)
}

/// Componentwise norm of `Γ' − (Γ + δ^k_i ∂_j f + δ^k_j ∂_i f − g_ij grad^k f)`
/// where `Γ'` belongs to the rescaled metric `e^{2f} g`.
pub fn connection_change_residual(chart: &Chart, f: &ScalarField, p: &[f64]) -> Result<f64> {
    let n = chart.dim();
    let base = chart.metric_jet(p, 1)?;
    let gamma = base.christoffel();
    let rescaled = rescale_metric(chart, f).metric_jet(p, 1)?.christoffel();
    let df = f.expr.jet(p, 1)?;
    let grad = &base.g_inv * nalgebra::DVector::from_column_slice(df.gradient());
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut sum = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let predicted = gamma[idx3(n, k, i, j)] + delta(k, i) * df.d1(j) + delta(k, j) * df.d1(i)
                    - base.g[(i, j)] * grad[k];
                let d = rescaled[idx3(n, k, i, j)] - predicted;
                sum += d * d;
            }
        }
    }
    Ok(sum.sqrt())
}
