//! Riemannian primitives on a single coordinate chart.
//!
//! Conventions used throughout the crate:
//!
//! * `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`, stored `[k][i][j]`.
//! * `R(X,Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]`, with `R(∂_k,∂_l)∂_j = R^i_{jkl} ∂_i`
//!   and `R_{ijkl} = g_{im} R^m_{jkl} = g(R(∂_k,∂_l)∂_j, ∂_i)`. The sectional
//!   curvature of the plane spanned by `X, Y` is `R_{abcd}X^aY^bX^cY^d / |X∧Y|²`.
//! * `(∇ξ)^i_j = ∂_j ξ^i + Γ^i_{jk} ξ^k`, so the matrix maps `Y` to `∇_Y ξ`.
//! * `dξ_{ij} = ∂_i ξ♭_j − ∂_j ξ♭_i` for the 1-form `ξ♭ = g(ξ, ·)`.
//! * The conformal factor is `φ = tr(∇ξ)/n`, i.e. `L_ξ g = 2φ g` for
//!   conformal fields. The codifferential is `δξ = −tr(∇ξ)`, so `φ = −δξ/n`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr, Jet};

/// Largest accepted condition number of the metric matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[inline]
pub(crate) fn idx3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

#[inline]
pub(crate) fn idx4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

/// Coordinate domain of a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn cube(dim: usize, half_width: f64) -> Domain {
        Domain::Box {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
        }
    }

    pub fn ball(dim: usize, radius: f64) -> Domain {
        Domain::Ball {
            center: vec![0.0; dim],
            radius,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lower.len(),
                        got: upper.len(),
                    });
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                    return Err(Error::InvalidArgument("box domain must have positive volume".into()));
                }
            }
            Domain::Ball { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidArgument("ball domain must have positive radius".into()));
                }
            }
        }
        Ok(())
    }

    /// Signed distance to the boundary, positive inside.
    pub fn boundary_distance(&self, p: &[f64]) -> f64 {
        match self {
            Domain::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| (x - l).min(u - x))
                .fold(f64::INFINITY, f64::min),
            Domain::Ball { center, radius } => {
                let r2: f64 = p.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
                radius - r2.sqrt()
            }
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().all(|x| x.is_finite()) && self.boundary_distance(p) > 0.0
    }

    /// Axis-aligned bounding box.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lower, upper } => (lower.clone(), upper.clone()),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Uniform sample from the domain shrunk about its center by
    /// `1 - margin`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64) -> Vec<f64> {
        let shrink = 1.0 - margin;
        match self {
            Domain::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| {
                    let mid = 0.5 * (l + u);
                    let half = 0.5 * (u - l) * shrink;
                    rng.gen_range(mid - half..mid + half)
                })
                .collect(),
            Domain::Ball { center, radius } => {
                let r = radius * shrink;
                loop {
                    let offset: Vec<f64> = center.iter().map(|_| rng.gen_range(-r..r)).collect();
                    if offset.iter().map(|x| x * x).sum::<f64>() < r * r {
                        return offset.iter().zip(center).map(|(o, c)| o + c).collect();
                    }
                }
            }
        }
    }
}

/// A coordinate chart carrying a Riemannian metric given by expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    name: String,
    dim: usize,
    domain: Domain,
    metric: Vec<Expr>,
}

impl Chart {
    /// `metric` is the full `n × n` matrix of component expressions; it must
    /// be structurally symmetric.
    pub fn new(name: impl Into<String>, domain: Domain, metric: Vec<Vec<Expr>>) -> Result<Chart> {
        let dim = domain.dim();
        if dim < 2 {
            return Err(Error::InvalidArgument(format!("chart dimension must be at least 2, got {dim}")));
        }
        domain.validate()?;
        if metric.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: metric.len(),
            });
        }
        for row in &metric {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
        }
        for i in 0..dim {
            for j in 0..i {
                if metric[i][j] != metric[j][i] {
                    return Err(Error::InvalidArgument(format!(
                        "metric components g{}{} and g{}{} differ",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        let flat: Vec<Expr> = metric.into_iter().flatten().collect();
        if let Some(bad) = flat.iter().find(|e| e.arity() > dim) {
            return Err(Error::InvalidArgument(format!("metric component `{bad}` uses too many variables")));
        }
        Ok(Chart {
            name: name.into(),
            dim,
            domain,
            metric: flat,
        })
    }

    /// Metric `factor · δ_ij`.
    pub fn conformally_flat(name: impl Into<String>, domain: Domain, factor: Expr) -> Result<Chart> {
        let n = domain.dim();
        let metric = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { factor.clone() } else { Expr::Const(0.0) })
                    .collect()
            })
            .collect();
        Chart::new(name, domain, metric)
    }

    /// Parses each metric component with the expression grammar.
    pub fn from_strings<S: AsRef<str>>(name: impl Into<String>, domain: Domain, rows: &[Vec<S>]) -> Result<Chart> {
        let dim = domain.dim();
        let metric = rows
            .iter()
            .map(|row| row.iter().map(|s| parse(s.as_ref(), dim)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Chart::new(name, domain, metric)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn metric_expr(&self, i: usize, j: usize) -> &Expr {
        &self.metric[i * self.dim + j]
    }

    /// Same domain, new metric components (row-major).
    pub fn with_metric(&self, name: impl Into<String>, metric: Vec<Expr>) -> Chart {
        assert_eq!(metric.len(), self.dim * self.dim);
        Chart {
            name: name.into(),
            dim: self.dim,
            domain: self.domain.clone(),
            metric,
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.domain.contains(p)
    }

    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.domain.sample(rng, 0.05)).collect()
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        if !self.domain.contains(p) {
            return Err(Error::OutsideDomain { point: p.to_vec() });
        }
        Ok(())
    }

    /// Validated metric matrix at `p`.
    pub fn metric_matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        let n = self.dim;
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.metric_expr(i, j).eval(p)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        check_spd(&g, p)?;
        Ok(g)
    }

    /// Metric values and derivatives up to `order` at `p`.
    pub fn metric_jet(&self, p: &[f64], order: usize) -> Result<MetricJet> {
        self.check_point(p)?;
        let n = self.dim;
        let mut g = DMatrix::zeros(n, n);
        let mut dg = vec![0.0; if order >= 1 { n * n * n } else { 0 }];
        let mut ddg = vec![0.0; if order >= 2 { n * n * n * n } else { 0 }];
        for i in 0..n {
            for j in i..n {
                let e = self.metric_expr(i, j);
                if e.is_zero() {
                    continue;
                }
                let jet: Jet = e.jet(p, order)?;
                g[(i, j)] = jet.value();
                g[(j, i)] = jet.value();
                for k in 0..n.min(dg.len()) {
                    let d = jet.d1(k);
                    dg[idx3(n, k, i, j)] = d;
                    dg[idx3(n, k, j, i)] = d;
                    if order >= 2 {
                        for l in 0..n {
                            let dd = jet.d2(k, l);
                            ddg[idx4(n, k, l, i, j)] = dd;
                            ddg[idx4(n, k, l, j, i)] = dd;
                        }
                    }
                }
            }
        }
        check_spd(&g, p)?;
        let g_inv = g.clone().cholesky().expect("checked positive definite").inverse();
        Ok(MetricJet {
            n,
            point: p.to_vec(),
            order,
            g,
            g_inv,
            dg,
            ddg,
        })
    }
}

fn check_spd(g: &DMatrix<f64>, p: &[f64]) -> Result<()> {
    let eig = SymmetricEigen::new(g.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite {
            point: p.to_vec(),
            min_eigenvalue: min,
        });
    }
    if max / min > MAX_CONDITION {
        return Err(Error::IllConditioned {
            point: p.to_vec(),
            condition: max / min,
        });
    }
    Ok(())
}

/// Metric, inverse metric and coordinate derivatives of the metric at a point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub n: usize,
    pub point: Vec<f64>,
    pub order: usize,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    dg: Vec<f64>,
    ddg: Vec<f64>,
}

impl MetricJet {
    /// `∂_k g_ij`
    pub fn dg(&self, k: usize, i: usize, j: usize) -> f64 {
        self.dg[idx3(self.n, k, i, j)]
    }

    /// `∂_k ∂_l g_ij`
    pub fn ddg(&self, k: usize, l: usize, i: usize, j: usize) -> f64 {
        self.ddg[idx4(self.n, k, l, i, j)]
    }

    /// `Γ^k_ij` as a flat `[k][i][j]` array, exactly symmetric in `i, j`.
    pub fn christoffel(&self) -> Vec<f64> {
        assert!(self.order >= 1, "Christoffel symbols need a first-order metric jet");
        let n = self.n;
        let lowered = self.christoffel_first_kind();
        let mut out = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let s: f64 = (0..n).map(|l| self.g_inv[(k, l)] * lowered[idx3(n, l, i, j)]).sum();
                    out[idx3(n, k, i, j)] = s;
                    out[idx3(n, k, j, i)] = s;
                }
            }
        }
        out
    }

    /// `Γ_lij = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
    fn christoffel_first_kind(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let s = 0.5 * (self.dg(i, j, l) + self.dg(j, i, l) - self.dg(l, i, j));
                    out[idx3(n, l, i, j)] = s;
                    out[idx3(n, l, j, i)] = s;
                }
            }
        }
        out
    }

    /// `∂_m Γ^k_ij` as `[m][k][i][j]`, given `Γ` from [`Self::christoffel`].
    pub fn christoffel_derivative(&self, gamma: &[f64]) -> Vec<f64> {
        assert!(self.order >= 2, "curvature needs a second-order metric jet");
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for m in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            // ∂_m g^{kl} Γ_lij = −g^{ka} ∂_m g_al Γ^l_ij
                            let mut dginv_term = 0.0;
                            for a in 0..n {
                                dginv_term += self.g_inv[(k, a)] * self.dg(m, a, l);
                            }
                            s -= dginv_term * gamma[idx3(n, l, i, j)];
                            let d_lowered =
                                0.5 * (self.ddg(m, i, j, l) + self.ddg(m, j, i, l) - self.ddg(m, l, i, j));
                            s += self.g_inv[(k, l)] * d_lowered;
                        }
                        out[idx4(n, m, k, i, j)] = s;
                        out[idx4(n, m, k, j, i)] = s;
                    }
                }
            }
        }
        out
    }

    /// `R^i_{jkl}` as `[i][j][k][l]`.
    pub fn riemann(&self, gamma: &[f64], dgamma: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in (k + 1)..n {
                        let mut s = dgamma[idx4(n, k, i, l, j)] - dgamma[idx4(n, l, i, k, j)];
                        for m in 0..n {
                            s += gamma[idx3(n, i, k, m)] * gamma[idx3(n, m, l, j)]
                                - gamma[idx3(n, i, l, m)] * gamma[idx3(n, m, k, j)];
                        }
                        out[idx4(n, i, j, k, l)] = s;
                        out[idx4(n, i, j, l, k)] = -s;
                    }
                }
            }
        }
        out
    }

    /// `R_{ijkl} = g_{im} R^m_{jkl}`.
    pub fn lower_riemann(&self, riemann: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out[idx4(n, i, j, k, l)] =
                            (0..n).map(|m| self.g[(i, m)] * riemann[idx4(n, m, j, k, l)]).sum();
                    }
                }
            }
        }
        out
    }
}

/// A vector field given by one expression per coordinate component.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    name: String,
    components: Vec<Expr>,
}

impl FieldSpec {
    pub fn new(name: impl Into<String>, components: Vec<Expr>) -> FieldSpec {
        FieldSpec {
            name: name.into(),
            components,
        }
    }

    pub fn from_strings<S: AsRef<str>>(name: impl Into<String>, components: &[S]) -> Result<FieldSpec> {
        let dim = components.len();
        let components = components
            .iter()
            .map(|s| parse(s.as_ref(), dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldSpec::new(name, components))
    }

    pub fn zero(dim: usize) -> FieldSpec {
        FieldSpec::new("zero", vec![Expr::Const(0.0); dim])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn check_chart(&self, chart: &Chart) -> Result<()> {
        if self.dim() != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                got: self.dim(),
            });
        }
        Ok(())
    }

    /// Coordinate components at `p`.
    pub fn eval(&self, p: &[f64]) -> Result<DVector<f64>> {
        let v = self.components.iter().map(|c| c.eval(p)).collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(v))
    }

    pub fn jet(&self, p: &[f64], order: usize) -> Result<FieldJet> {
        let n = p.len();
        let mut out = FieldJet {
            n,
            value: DVector::zeros(n),
            d1: DMatrix::zeros(n, n),
            d2: vec![0.0; if order >= 2 { n * n * n } else { 0 }],
        };
        for (i, c) in self.components.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let jet = c.jet(p, order)?;
            out.value[i] = jet.value();
            if order >= 1 {
                for j in 0..n {
                    out.d1[(i, j)] = jet.d1(j);
                }
            }
            if order >= 2 {
                for j in 0..n {
                    for k in 0..n {
                        out.d2[idx3(n, i, j, k)] = jet.d2(j, k);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A scalar function on a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub expr: Expr,
}

impl ScalarField {
    pub fn new(expr: Expr) -> ScalarField {
        ScalarField { expr }
    }

    pub fn parse(src: &str, dim: usize) -> Result<ScalarField> {
        Ok(ScalarField { expr: parse(src, dim)? })
    }
}

/// Components and coordinate derivatives of a vector field at a point.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub n: usize,
    pub value: DVector<f64>,
    /// `d1[(i, j)] = ∂_j ξ^i`
    pub d1: DMatrix<f64>,
    d2: Vec<f64>,
}

impl FieldJet {
    /// `∂_j ∂_k ξ^i`
    pub fn d2(&self, i: usize, j: usize, k: usize) -> f64 {
        self.d2[idx3(self.n, i, j, k)]
    }
}

/// Index position of a tensor slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Up,
    Down,
}

/// Dense tensor components at a point. Components are row-major with the
/// first slot varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorValue {
    pub point: Vec<f64>,
    pub valence: Vec<Slot>,
    pub dim: usize,
    pub components: Vec<f64>,
}

impl TensorValue {
    pub fn new(point: &[f64], valence: Vec<Slot>, dim: usize, components: Vec<f64>) -> TensorValue {
        assert_eq!(components.len(), dim.pow(valence.len() as u32), "component count");
        TensorValue {
            point: point.to_vec(),
            valence,
            dim,
            components,
        }
    }

    pub fn from_matrix(point: &[f64], valence: [Slot; 2], m: &DMatrix<f64>) -> TensorValue {
        let n = m.nrows();
        let mut c = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                c.push(m[(i, j)]);
            }
        }
        TensorValue::new(point, valence.to_vec(), n, c)
    }

    pub fn from_vector(point: &[f64], slot: Slot, v: &DVector<f64>) -> TensorValue {
        TensorValue::new(point, vec![slot], v.len(), v.iter().cloned().collect())
    }

    pub fn rank(&self) -> usize {
        self.valence.len()
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.rank());
        let flat = index.iter().fold(0, |acc, i| acc * self.dim + i);
        self.components[flat]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.rank(), 2);
        DMatrix::from_row_slice(self.dim, self.dim, &self.components)
    }

    pub fn to_vector(&self) -> DVector<f64> {
        assert_eq!(self.rank(), 1);
        DVector::from_column_slice(&self.components)
    }

    /// Euclidean norm of the component array.
    pub fn component_norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Everything needed about a vector field and the metric at one point,
/// computed once from second-order jets.
#[derive(Debug, Clone)]
pub struct LocalField {
    pub metric: MetricJet,
    /// `Γ^k_ij` as `[k][i][j]`
    pub gamma: Vec<f64>,
    /// `∂_m Γ^k_ij` as `[m][k][i][j]`
    pub dgamma: Vec<f64>,
    pub field: FieldJet,
}

impl LocalField {
    pub fn at(chart: &Chart, xi: &FieldSpec, p: &[f64]) -> Result<LocalField> {
        xi.check_chart(chart)?;
        let metric = chart.metric_jet(p, 2)?;
        let gamma = metric.christoffel();
        let dgamma = metric.christoffel_derivative(&gamma);
        let field = xi.jet(p, 2)?;
        Ok(LocalField {
            metric,
            gamma,
            dgamma,
            field,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.n
    }

    pub fn point(&self) -> &[f64] {
        &self.metric.point
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.metric.g
    }

    pub fn g_inv(&self) -> &DMatrix<f64> {
        &self.metric.g_inv
    }

    fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[idx3(self.dim(), k, i, j)]
    }

    fn dgamma(&self, m: usize, k: usize, i: usize, j: usize) -> f64 {
        self.dgamma[idx4(self.dim(), m, k, i, j)]
    }

    /// `‖ξ‖_g`
    pub fn norm(&self) -> f64 {
        crate::linalg::g_norm(self.g(), &self.field.value)
    }

    /// `(∇ξ)^i_j = ∂_j ξ^i + Γ^i_{jk} ξ^k`
    pub fn covariant_derivative(&self) -> DMatrix<f64> {
        let n = self.dim();
        let xi = &self.field.value;
        DMatrix::from_fn(n, n, |i, j| {
            self.field.d1[(i, j)] + (0..n).map(|k| self.gamma(i, j, k) * xi[k]).sum::<f64>()
        })
    }

    pub fn divergence(&self) -> f64 {
        let n = self.dim();
        let xi = &self.field.value;
        (0..n)
            .map(|i| self.field.d1[(i, i)] + (0..n).map(|k| self.gamma(i, i, k) * xi[k]).sum::<f64>())
            .sum()
    }

    /// `φ = tr(∇ξ)/n`
    pub fn conformal_factor(&self) -> f64 {
        self.divergence() / self.dim() as f64
    }

    /// Coordinate components of `dφ`.
    pub fn conformal_factor_differential(&self) -> DVector<f64> {
        let n = self.dim();
        let xi = &self.field.value;
        DVector::from_fn(n, |m, _| {
            let mut s = 0.0;
            for i in 0..n {
                s += self.field.d2(i, m, i);
                for k in 0..n {
                    s += self.dgamma(m, i, i, k) * xi[k] + self.gamma(i, i, k) * self.field.d1[(k, m)];
                }
            }
            s / n as f64
        })
    }

    /// `grad_g φ`
    pub fn conformal_factor_gradient(&self) -> DVector<f64> {
        self.g_inv() * self.conformal_factor_differential()
    }

    /// `∂_i ξ♭_j` as a matrix `[i][j]`.
    fn d_flat(&self) -> DMatrix<f64> {
        let n = self.dim();
        let xi = &self.field.value;
        DMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|l| self.metric.dg(i, j, l) * xi[l] + self.metric.g[(j, l)] * self.field.d1[(l, i)])
                .sum()
        })
    }

    /// `dξ_{ij} = ∂_i ξ♭_j − ∂_j ξ♭_i`, exactly antisymmetric.
    pub fn exterior_derivative(&self) -> DMatrix<f64> {
        let n = self.dim();
        let d = self.d_flat();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = d[(i, j)] - d[(j, i)];
                out[(i, j)] = v;
                out[(j, i)] = -v;
            }
        }
        out
    }

    /// `(L_ξ g)_ij = ξ^k ∂_k g_ij + g_kj ∂_i ξ^k + g_ik ∂_j ξ^k`
    pub fn lie_derivative_metric(&self) -> DMatrix<f64> {
        let n = self.dim();
        let xi = &self.field.value;
        let g = &self.metric.g;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += xi[k] * self.metric.dg(k, i, j)
                        + g[(k, j)] * self.field.d1[(k, i)]
                        + g[(i, k)] * self.field.d1[(k, j)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    /// `(∇_k dξ)_{ij}` as `[k][i][j]`.
    pub fn covariant_derivative_of_exterior(&self) -> Vec<f64> {
        let n = self.dim();
        let xi = &self.field.value;
        let m = &self.metric;
        // ∂_k ∂_i ξ♭_j
        let dd_flat = |k: usize, i: usize, j: usize| -> f64 {
            (0..n)
                .map(|l| {
                    m.ddg(k, i, j, l) * xi[l]
                        + m.dg(i, j, l) * self.field.d1[(l, k)]
                        + m.dg(k, j, l) * self.field.d1[(l, i)]
                        + m.g[(j, l)] * self.field.d2(l, k, i)
                })
                .sum()
        };
        let omega = self.exterior_derivative();
        let mut out = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut s = dd_flat(k, i, j) - dd_flat(k, j, i);
                    for a in 0..n {
                        s -= self.gamma(a, k, i) * omega[(a, j)] + self.gamma(a, k, j) * omega[(i, a)];
                    }
                    out[idx3(n, k, i, j)] = s;
                    out[idx3(n, k, j, i)] = -s;
                }
            }
        }
        out
    }

    /// `R^i_{jkl}`
    pub fn riemann(&self) -> Vec<f64> {
        self.metric.riemann(&self.gamma, &self.dgamma)
    }
}

/// `g_ij(p)`; errors outside the domain or where the metric is not SPD.
pub fn metric_at(chart: &Chart, p: &[f64]) -> Result<TensorValue> {
    let g = chart.metric_matrix(p)?;
    Ok(TensorValue::from_matrix(p, [Slot::Down, Slot::Down], &g))
}

/// `Γ^k_ij(p)` with valence `(up, down, down)`.
pub fn christoffel(chart: &Chart, p: &[f64]) -> Result<TensorValue> {
    let m = chart.metric_jet(p, 1)?;
    Ok(TensorValue::new(p, vec![Slot::Up, Slot::Down, Slot::Down], chart.dim(), m.christoffel()))
}

/// `(∇ξ)^i_j(p)`.
pub fn covariant_derivative_field(chart: &Chart, xi: &FieldSpec, p: &[f64]) -> Result<TensorValue> {
    xi.check_chart(chart)?;
    let m = chart.metric_jet(p, 1)?;
    let gamma = m.christoffel();
    let f = xi.jet(p, 1)?;
    let n = chart.dim();
    let a = DMatrix::from_fn(n, n, |i, j| {
        f.d1[(i, j)] + (0..n).map(|k| gamma[idx3(n, i, j, k)] * f.value[k]).sum::<f64>()
    });
    Ok(TensorValue::from_matrix(p, [Slot::Up, Slot::Down], &a))
}

/// `R^i_{jkl}(p)`.
pub fn riemann(chart: &Chart, p: &[f64]) -> Result<TensorValue> {
    let m = chart.metric_jet(p, 2)?;
    let gamma = m.christoffel();
    let dgamma = m.christoffel_derivative(&gamma);
    Ok(TensorValue::new(
        p,
        vec![Slot::Up, Slot::Down, Slot::Down, Slot::Down],
        chart.dim(),
        m.riemann(&gamma, &dgamma),
    ))
}

/// Sectional curvature of the plane spanned by `x` and `y` at `p`.
pub fn sectional_curvature(chart: &Chart, p: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
    let m = chart.metric_jet(p, 2)?;
    let gamma = m.christoffel();
    let dgamma = m.christoffel_derivative(&gamma);
    let low = m.lower_riemann(&m.riemann(&gamma, &dgamma));
    let n = chart.dim();
    let mut num = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    num += low[idx4(n, a, b, c, d)] * x[a] * y[b] * x[c] * y[d];
                }
            }
        }
    }
    let xv = DVector::from_column_slice(x);
    let yv = DVector::from_column_slice(y);
    let gxx = crate::linalg::inner(&m.g, &xv, &xv);
    let gyy = crate::linalg::inner(&m.g, &yv, &yv);
    let gxy = crate::linalg::inner(&m.g, &xv, &yv);
    Ok(num / (gxx * gyy - gxy * gxy))
}

/// `dξ♭` at `p`.
pub fn exterior_derivative_dual(chart: &Chart, xi: &FieldSpec, p: &[f64]) -> Result<TensorValue> {
    xi.check_chart(chart)?;
    let m = chart.metric_jet(p, 1)?;
    let f = xi.jet(p, 1)?;
    let n = chart.dim();
    let d = DMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|l| m.dg(i, j, l) * f.value[l] + m.g[(j, l)] * f.d1[(l, i)])
            .sum::<f64>()
    });
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = d[(i, j)] - d[(j, i)];
            out[(i, j)] = v;
            out[(j, i)] = -v;
        }
    }
    Ok(TensorValue::from_matrix(p, [Slot::Down, Slot::Down], &out))
}

/// `(L_ξ g)_ij(p)`.
pub fn lie_derivative_metric(chart: &Chart, xi: &FieldSpec, p: &[f64]) -> Result<TensorValue> {
    xi.check_chart(chart)?;
    let m = chart.metric_jet(p, 1)?;
    let f = xi.jet(p, 1)?;
    let n = chart.dim();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in 0..n {
                s += f.value[k] * m.dg(k, i, j) + m.g[(k, j)] * f.d1[(k, i)] + m.g[(i, k)] * f.d1[(k, j)];
            }
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    Ok(TensorValue::from_matrix(p, [Slot::Down, Slot::Down], &out))
}

/// `tr(∇ξ)`, the Riemannian divergence.
pub fn divergence(chart: &Chart, xi: &FieldSpec, p: &[f64]) -> Result<f64> {
    let a = covariant_derivative_field(chart, xi, p)?.to_matrix();
    Ok(a.trace())
}

/// `δξ = −tr(∇ξ)`.
pub fn codifferential(chart: &Chart, xi: &FieldSpec, p: &[f64]) -> Result<f64> {
    Ok(-divergence(chart, xi, p)?)
}

/// `grad_g f = g^{ij} ∂_j f`.
pub fn gradient(chart: &Chart, f: &ScalarField, p: &[f64]) -> Result<TensorValue> {
    let g = chart.metric_matrix(p)?;
    let jet = f.expr.jet(p, 1)?;
    let df = DVector::from_column_slice(jet.gradient());
    let g_inv = g.cholesky().expect("validated").inverse();
    Ok(TensorValue::from_vector(p, Slot::Up, &(g_inv * df)))
}

/// Raise the index of a covector.
pub fn sharp(chart: &Chart, covector: &[f64], p: &[f64]) -> Result<TensorValue> {
    let g = chart.metric_matrix(p)?;
    let g_inv = g.cholesky().expect("validated").inverse();
    Ok(TensorValue::from_vector(p, Slot::Up, &(g_inv * DVector::from_column_slice(covector))))
}

/// Lower the index of a vector.
pub fn flat(chart: &Chart, vector: &[f64], p: &[f64]) -> Result<TensorValue> {
    let g = chart.metric_matrix(p)?;
    Ok(TensorValue::from_vector(p, Slot::Down, &(g * DVector::from_column_slice(vector))))
}
