//! Geodesics, parallel frames, the exponential map, and pointwise checks of
//! the identities satisfied by a conformal field along geodesics through a
//! zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::essential::DEFAULT_ZERO_TOL;
use crate::geometry::{idx3, idx4, Chart, FieldSpec, LocalField};
use crate::linalg::{covariant2_norm, g_norm, g_orthonormalize, inner};

pub const DEFAULT_GEO_STEPS: usize = 200;
pub const DEFAULT_FD_STEP: f64 = 1e-3;
/// Parameters at which the second-order remainder of `f` is sampled.
pub const REMAINDER_TIMES: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
/// Remainders below this are treated as exact (order undefined).
pub const REMAINDER_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicOptions {
    /// RK4 steps per integration.
    pub steps: usize,
    /// Base step of the central finite-difference stencils.
    pub fd_step: f64,
    /// `‖ξ(x)‖_g` below which the base point counts as a zero.
    pub zero_tol: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            steps: DEFAULT_GEO_STEPS,
            fd_step: DEFAULT_FD_STEP,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }
}

/// One sample of a geodesic with its parallel frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub t: f64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// `frame[a]` is the a-th frame vector (coordinate components).
    pub frame: Vec<Vec<f64>>,
}

/// State layout: position (n), velocity (n), frame vectors (n·n).
fn rhs(chart: &Chart, y: &[f64]) -> Result<Vec<f64>> {
    let n = chart.dim();
    let gamma = chart.metric_jet(&y[..n], 1)?.christoffel();
    let v = &y[n..2 * n];
    let mut out = vec![0.0; y.len()];
    out[..n].copy_from_slice(v);
    for k in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += gamma[idx3(n, k, i, j)] * v[i] * v[j];
            }
        }
        out[n + k] = -acc;
    }
    for a in 0..n {
        let e = &y[2 * n + a * n..2 * n + (a + 1) * n];
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += gamma[idx3(n, k, i, j)] * v[i] * e[j];
                }
            }
            out[2 * n + a * n + k] = -acc;
        }
    }
    Ok(out)
}

fn rk4_step(chart: &Chart, y: &[f64], dt: f64) -> Result<Vec<f64>> {
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    let k1 = rhs(chart, y)?;
    let k2 = rhs(chart, &axpy(y, 0.5 * dt, &k1))?;
    let k3 = rhs(chart, &axpy(y, 0.5 * dt, &k2))?;
    let k4 = rhs(chart, &axpy(y, dt, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn unpack(n: usize, t: f64, y: &[f64]) -> GeodesicState {
    GeodesicState {
        t,
        position: y[..n].to_vec(),
        velocity: y[n..2 * n].to_vec(),
        frame: (0..n).map(|a| y[2 * n + a * n..2 * n + (a + 1) * n].to_vec()).collect(),
    }
}

/// Integrates the unit-speed geodesic from `x` in direction `v` (normalized
/// internally) up to time `t_end` (which may be negative) with `steps` RK4
/// steps, transporting a g-orthonormal frame along it. The trajectory is
/// truncated where it leaves the domain.
pub fn integrate_geodesic(chart: &Chart, x: &[f64], v: &[f64], t_end: f64, steps: usize) -> Result<Vec<GeodesicState>> {
    let n = chart.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one integration step is required".into()));
    }
    let g = chart.metric_matrix(x)?;
    let vv = DVector::from_column_slice(v);
    let speed = g_norm(&g, &vv);
    if !(speed > 0.0) {
        return Err(Error::InvalidArgument("initial velocity must be non-zero".into()));
    }
    let coordinate_basis: Vec<DVector<f64>> = (0..n).map(|i| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })).collect();
    let frame = g_orthonormalize(&g, &coordinate_basis, 1e-12);
    let mut y = Vec::with_capacity(2 * n + n * n);
    y.extend_from_slice(x);
    y.extend(vv.iter().map(|c| c / speed));
    for e in &frame {
        y.extend(e.iter());
    }
    let dt = t_end / steps as f64;
    let mut out = vec![unpack(n, 0.0, &y)];
    for s in 0..steps {
        match rk4_step(chart, &y, dt) {
            Ok(next) if chart.contains(&next[..n]) => y = next,
            _ => {
                if s == 0 {
                    return Err(Error::DomainExit { t: 0.0 });
                }
                break;
            }
        }
        out.push(unpack(n, dt * (s + 1) as f64, &y));
    }
    Ok(out)
}

/// `exp_x(v)`.
pub fn exp_map(chart: &Chart, x: &[f64], v: &[f64], steps: usize) -> Result<Vec<f64>> {
    let g = chart.metric_matrix(x)?;
    let len = g_norm(&g, &DVector::from_column_slice(v));
    if len == 0.0 {
        return Ok(x.to_vec());
    }
    let traj = integrate_geodesic(chart, x, v, len, steps)?;
    let last = traj.last().expect("non-empty trajectory");
    if traj.len() < steps + 1 {
        return Err(Error::DomainExit { t: last.t });
    }
    Ok(last.position.clone())
}

/// State of the geodesic from `(x, v)` at time `t` (any sign).
fn state_at(chart: &Chart, x: &[f64], v: &[f64], t: f64, steps: usize) -> Result<GeodesicState> {
    let traj = integrate_geodesic(chart, x, v, t, steps)?;
    if traj.len() < steps + 1 {
        return Err(Error::DomainExit { t: traj.last().map_or(0.0, |s| s.t) });
    }
    Ok(traj.into_iter().last().expect("non-empty"))
}

fn require_zero(chart: &Chart, xi: &FieldSpec, x: &[f64], tol: f64) -> Result<()> {
    xi.check_chart(chart)?;
    let g = chart.metric_matrix(x)?;
    let norm = g_norm(&g, &xi.eval(x)?);
    if !(norm < tol) {
        return Err(Error::NotAZero { point: x.to_vec(), norm });
    }
    Ok(())
}

/// Richardson-extrapolated central first and second derivatives at 0 from
/// samples at `±h`, `±h/2` and `0`.
fn richardson(f: impl Fn(f64) -> Result<Vec<f64>>, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let f0 = f(0.0)?;
    let (fp, fm) = (f(h)?, f(-h)?);
    let (hp, hm) = (f(0.5 * h)?, f(-0.5 * h)?);
    let m = f0.len();
    let mut d1 = vec![0.0; m];
    let mut d2 = vec![0.0; m];
    for i in 0..m {
        let coarse1 = (fp[i] - fm[i]) / (2.0 * h);
        let fine1 = (hp[i] - hm[i]) / h;
        d1[i] = (4.0 * fine1 - coarse1) / 3.0;
        let coarse2 = (fp[i] - 2.0 * f0[i] + fm[i]) / (h * h);
        let fine2 = (hp[i] - 2.0 * f0[i] + hm[i]) / (0.25 * h * h);
        d2[i] = (4.0 * fine2 - coarse2) / 3.0;
    }
    Ok((d1, d2))
}

/// Scalar Taylor check of `f(t) = g(ξ(c(t)), ċ(t))` at a zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorScalarCheck {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    pub phi: f64,
    /// `dφ_x(ċ(0))`, the exact value of `f''(0)` since `f'(t) = φ(c(t))`.
    pub dphi_v: f64,
    /// Finite-difference derivatives of `f` at 0.
    pub f_prime: f64,
    pub f_second: f64,
    /// `|f'(0) − φ(x)|`
    pub derivative_residual: f64,
    /// `|f''(0) − dφ_x(ċ)|`
    pub second_derivative_residual: f64,
    /// `(t, f(t) − t φ(x) − t²/2 dφ_x(ċ))`
    pub remainders: Vec<[f64; 2]>,
    /// Log-log slope of the remainder; `None` when every remainder is below
    /// [`REMAINDER_FLOOR`].
    pub remainder_order: Option<f64>,
}

fn scalar_along(chart: &Chart, xi: &FieldSpec, x: &[f64], v: &[f64], t: f64, steps: usize) -> Result<f64> {
    if t == 0.0 {
        let g = chart.metric_matrix(x)?;
        let vv = DVector::from_column_slice(v);
        let unit = &vv / g_norm(&g, &vv);
        return Ok(inner(&g, &xi.eval(x)?, &unit));
    }
    let s = state_at(chart, x, v, t, steps)?;
    let g = chart.metric_matrix(&s.position)?;
    Ok(inner(&g, &xi.eval(&s.position)?, &DVector::from_vec(s.velocity)))
}

fn loglog_slope(points: &[[f64; 2]]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p[0].ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p[1].abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn taylor_scalar_check(chart: &Chart, xi: &FieldSpec, x: &[f64], v: &[f64], opts: &GeodesicOptions) -> Result<TaylorScalarCheck> {
    require_zero(chart, xi, x, opts.zero_tol)?;
    let f = |t: f64| scalar_along(chart, xi, x, v, t, opts.steps).map(|s| vec![s]);
    let (d1, d2) = richardson(f, opts.fd_step)?;
    let (f_prime, f_second) = (d1[0], d2[0]);
    let local = LocalField::at(chart, xi, x)?;
    let phi = local.conformal_factor();
    let vv = DVector::from_column_slice(v);
    let unit = &vv / g_norm(local.g(), &vv);
    let dphi_v = local.conformal_factor_differential().dot(&unit);
    let remainders = REMAINDER_TIMES
        .iter()
        .map(|t| {
            let ft = scalar_along(chart, xi, x, v, *t, opts.steps)?;
            Ok([*t, ft - t * phi - 0.5 * t * t * dphi_v])
        })
        .collect::<Result<Vec<_>>>()?;
    let remainder_order = if remainders.iter().all(|r| r[1].abs() < REMAINDER_FLOOR) {
        None
    } else {
        Some(loglog_slope(&remainders))
    };
    Ok(TaylorScalarCheck {
        point: x.to_vec(),
        direction: v.to_vec(),
        phi,
        dphi_v,
        f_prime,
        f_second,
        derivative_residual: (f_prime - phi).abs(),
        second_derivative_residual: (f_second - dphi_v).abs(),
        remainders,
        remainder_order,
    })
}

/// Vector Taylor check of `ξ` along a geodesic through a zero, in a parallel
/// orthonormal frame. Expected values: `ξ'(0) = ½ dξ(ċ) + φ ċ` and
/// `ξ''(0) = 2 dφ(ċ) ċ − grad φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorVectorCheck {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    /// Frame components.
    pub xi_prime: Vec<f64>,
    pub xi_second: Vec<f64>,
    pub expected_prime: Vec<f64>,
    pub expected_second: Vec<f64>,
    pub first_residual: f64,
    pub second_residual: f64,
}

fn frame_components(chart: &Chart, xi: &FieldSpec, s: &GeodesicState) -> Result<Vec<f64>> {
    let g = chart.metric_matrix(&s.position)?;
    let value = xi.eval(&s.position)?;
    Ok(s.frame.iter().map(|e| inner(&g, &value, &DVector::from_column_slice(e))).collect())
}

pub fn taylor_vector_check(chart: &Chart, xi: &FieldSpec, x: &[f64], v: &[f64], opts: &GeodesicOptions) -> Result<TaylorVectorCheck> {
    require_zero(chart, xi, x, opts.zero_tol)?;
    let start = integrate_geodesic(chart, x, v, 0.0, 1)?.swap_remove(0);
    let along = |t: f64| -> Result<Vec<f64>> {
        if t == 0.0 {
            return frame_components(chart, xi, &start);
        }
        frame_components(chart, xi, &state_at(chart, x, v, t, opts.steps)?)
    };
    let (xi_prime, xi_second) = richardson(along, opts.fd_step)?;

    let local = LocalField::at(chart, xi, x)?;
    let n = local.dim();
    let g = local.g().clone();
    let unit = DVector::from_column_slice(&start.velocity);
    let dxi = local.exterior_derivative();
    let phi = local.conformal_factor();
    let dphi = local.conformal_factor_differential();
    let grad_phi = local.g_inv() * &dphi;
    // (ċ ⌟ dξ)♯ = g^{-1} dξᵀ ċ
    let contraction = local.g_inv() * dxi.transpose() * &unit;
    let prime = contraction * 0.5 + &unit * phi;
    let second = &unit * (2.0 * dphi.dot(&unit)) - grad_phi;
    let to_frame = |w: &DVector<f64>| -> Vec<f64> {
        start
            .frame
            .iter()
            .map(|e| inner(&g, w, &DVector::from_column_slice(e)))
            .collect()
    };
    let expected_prime = to_frame(&prime);
    let expected_second = to_frame(&second);
    let diff = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() };
    debug_assert_eq!(expected_prime.len(), n);
    Ok(TaylorVectorCheck {
        point: x.to_vec(),
        direction: v.to_vec(),
        first_residual: diff(&xi_prime, &expected_prime),
        second_residual: diff(&xi_second, &expected_second),
        xi_prime,
        xi_second,
        expected_prime,
        expected_second,
    })
}

/// `‖∇_X dξ − 2 R_{X,ξ} − 2 dφ∧X♭‖_g` at `p`, with
/// `R_{X,ξ}(Y,Z) = g(R(X,ξ)Y, Z)` and
/// `(dφ∧X♭)(Y,Z) = dφ(Y) g(X,Z) − dφ(Z) g(X,Y)`.
pub fn lemma_dxi_residual(chart: &Chart, xi: &FieldSpec, p: &[f64], x: &[f64]) -> Result<f64> {
    let local = LocalField::at(chart, xi, p)?;
    let n = local.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let nabla_dxi = local.covariant_derivative_of_exterior();
    let lowered = local.metric.lower_riemann(&local.riemann());
    let xi_val = &local.field.value;
    let dphi = local.conformal_factor_differential();
    let x_flat = local.g() * DVector::from_column_slice(x);
    let mut residual = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let lhs: f64 = (0..n).map(|k| x[k] * nabla_dxi[idx3(n, k, a, b)]).sum();
            let mut curvature = 0.0;
            for k in 0..n {
                for l in 0..n {
                    curvature += lowered[idx4(n, b, a, k, l)] * x[k] * xi_val[l];
                }
            }
            let wedge = dphi[a] * x_flat[b] - dphi[b] * x_flat[a];
            residual[(a, b)] = lhs - 2.0 * curvature - 2.0 * wedge;
        }
    }
    Ok(covariant2_norm(local.g_inv(), &residual))
}
