//! Builtin charts and conformal vector fields.
//!
//! Charts: `euclidean`, `sphere_stereographic` (metric `4/(1+|x|²)² δ` on the
//! ball of radius 3) and `hyperbolic_ball` (metric `4/(1−|x|²)² δ` on the ball
//! of radius 0.9).
//!
//! Fields: `translation`, `rotation`, `euler`, `special_conformal`,
//! `sphere_killing` and `remark_example`. The flat conformal algebra is
//! conformal for every conformally flat metric, so every pair is conformal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{Chart, Domain, FieldSpec};

pub const SPHERE_CHART_RADIUS: f64 = 3.0;
pub const HYPERBOLIC_CHART_RADIUS: f64 = 0.9;
pub const EUCLIDEAN_HALF_WIDTH: f64 = 2.0;

pub const CHART_NAMES: [&str; 3] = ["euclidean", "sphere_stereographic", "hyperbolic_ball"];
pub const FIELD_NAMES: [&str; 6] = [
    "translation",
    "rotation",
    "euler",
    "special_conformal",
    "sphere_killing",
    "remark_example",
];

/// Optional chart parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartParams {
    /// Half-width of the Euclidean cube `[-h, h]^n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Radius of the ball domain for the sphere and hyperbolic charts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

/// Optional field parameters. Indices are 1-based.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    /// Basis vector `e_axis` for translation and special_conformal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    /// Arbitrary direction, overrides `axis`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("model dimension must be at least 2, got {n}")));
    }
    Ok(())
}

pub fn euclidean(n: usize, half_width: f64) -> Result<Chart> {
    check_dim(n)?;
    Chart::conformally_flat(format!("euclidean({n})"), Domain::cube(n, half_width), Expr::Const(1.0))
}

/// `g = 4/(1+|x|²)² δ` on the ball of radius `radius`.
pub fn sphere_stereographic(n: usize, radius: f64) -> Result<Chart> {
    check_dim(n)?;
    let factor = 4.0 / (1.0 + Expr::norm_squared(n)).powi(2);
    Chart::conformally_flat(format!("sphere_stereographic({n})"), Domain::ball(n, radius), factor)
}

/// `g = 4/(1−|x|²)² δ` on the ball of radius `radius < 1`.
pub fn hyperbolic_ball(n: usize, radius: f64) -> Result<Chart> {
    check_dim(n)?;
    if !(radius < 1.0) {
        return Err(Error::InvalidArgument("hyperbolic ball radius must be below 1".into()));
    }
    let factor = 4.0 / (1.0 - Expr::norm_squared(n)).powi(2);
    Chart::conformally_flat(format!("hyperbolic_ball({n})"), Domain::ball(n, radius), factor)
}

pub fn make_chart(name: &str, n: usize, params: &ChartParams) -> Result<Chart> {
    match name {
        "euclidean" => euclidean(n, params.half_width.unwrap_or(EUCLIDEAN_HALF_WIDTH)),
        "sphere_stereographic" => sphere_stereographic(n, params.radius.unwrap_or(SPHERE_CHART_RADIUS)),
        "hyperbolic_ball" => hyperbolic_ball(n, params.radius.unwrap_or(HYPERBOLIC_CHART_RADIUS)),
        _ => Err(Error::UnknownModel(name.to_string())),
    }
}

fn basis(n: usize, axis: usize) -> Result<Vec<f64>> {
    if axis == 0 || axis > n {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range 1..={n}")));
    }
    let mut e = vec![0.0; n];
    e[axis - 1] = 1.0;
    Ok(e)
}

fn direction(n: usize, params: &FieldParams) -> Result<Vec<f64>> {
    match &params.vector {
        Some(v) if v.len() != n => Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        }),
        Some(v) => Ok(v.clone()),
        None => basis(n, params.axis.unwrap_or(1)),
    }
}

/// `Σ c_k x_k`, skipping zero coefficients.
fn linear_form(c: &[f64]) -> Expr {
    c.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, v)| if *v == 1.0 { Expr::var(k) } else { *v * Expr::var(k) })
        .reduce(|a, b| a + b)
        .unwrap_or(Expr::Const(0.0))
}

/// Constant field `e`.
pub fn translation(e: &[f64]) -> FieldSpec {
    FieldSpec::new("translation", e.iter().map(|v| Expr::Const(*v)).collect())
}

/// `x_i ∂_j − x_j ∂_i` (1-based indices).
pub fn rotation(n: usize, i: usize, j: usize) -> Result<FieldSpec> {
    if i == 0 || j == 0 || i > n || j > n || i == j {
        return Err(Error::InvalidArgument(format!("rotation({i},{j}) needs distinct indices in 1..={n}")));
    }
    let mut c = vec![Expr::Const(0.0); n];
    c[j - 1] = Expr::var(i - 1);
    c[i - 1] = -Expr::var(j - 1);
    Ok(FieldSpec::new(format!("rotation({i},{j})"), c))
}

/// `Σ x_k ∂_k`.
pub fn euler(n: usize) -> FieldSpec {
    FieldSpec::new("euler", (0..n).map(Expr::var).collect())
}

/// `|x|² e − 2⟨x,e⟩ x`.
pub fn special_conformal(e: &[f64]) -> FieldSpec {
    let n = e.len();
    let dot = linear_form(e);
    let components = (0..n)
        .map(|i| {
            let quadratic = -2.0 * dot.clone() * Expr::var(i);
            if e[i] == 0.0 {
                quadratic
            } else {
                e[i] * Expr::norm_squared(n) + quadratic
            }
        })
        .collect();
    FieldSpec::new("special_conformal", components)
}

/// Rotation of the round sphere `S^n ⊂ R^{n+1}` in the `(y_i, y_j)` plane,
/// written in the stereographic chart (projection from `y_{n+1} = 1`).
/// Planes not involving the pole axis are ordinary chart rotations; the plane
/// `(y_i, y_{n+1})` gives `(1 − |x|²) e_i + 2 x_i x`.
pub fn sphere_killing(n: usize, i: usize, j: usize) -> Result<FieldSpec> {
    let (i, j) = (i.min(j), i.max(j));
    if i == 0 || j > n + 1 || i == j {
        return Err(Error::InvalidArgument(format!(
            "sphere_killing({i},{j}) needs distinct indices in 1..={}",
            n + 1
        )));
    }
    if j <= n {
        let mut f = rotation(n, i, j)?;
        f = FieldSpec::new(format!("sphere_killing({i},{j})"), f.components().to_vec());
        return Ok(f);
    }
    let components = (0..n)
        .map(|k| {
            let quadratic = 2.0 * Expr::var(i - 1) * Expr::var(k);
            if k == i - 1 {
                1.0 - Expr::norm_squared(n) + quadratic
            } else {
                quadratic
            }
        })
        .collect();
    Ok(FieldSpec::new(format!("sphere_killing({i},{j})"), components))
}

/// The stereographic image of a translation, seen in the chart containing
/// the pole `P` (the chart origin): `special_conformal(e1)`. Meant to be used
/// with [`sphere_stereographic`].
pub fn remark_example(n: usize) -> FieldSpec {
    let e = basis(n, 1).expect("n >= 1");
    FieldSpec::new("remark_example", special_conformal(&e).components().to_vec())
}

pub fn make_field(name: &str, n: usize, params: &FieldParams) -> Result<FieldSpec> {
    check_dim(n)?;
    match name {
        "translation" => Ok(translation(&direction(n, params)?)),
        "rotation" => rotation(n, params.i.unwrap_or(1), params.j.unwrap_or(2)),
        "euler" => Ok(euler(n)),
        "special_conformal" => Ok(special_conformal(&direction(n, params)?)),
        "sphere_killing" => sphere_killing(n, params.i.unwrap_or(n), params.j.unwrap_or(n + 1)),
        "remark_example" => Ok(remark_example(n)),
        _ => Err(Error::UnknownModel(name.to_string())),
    }
}

/// Transition between the two stereographic charts, `x ↦ x/|x|²`.
pub fn inversion_transition(p: &[f64]) -> Result<Vec<f64>> {
    let r2: f64 = p.iter().map(|x| x * x).sum();
    if r2 == 0.0 {
        return Err(Error::InvalidArgument("inversion is undefined at the origin".into()));
    }
    Ok(p.iter().map(|x| x / r2).collect())
}

/// Pushforward of `field` along the inversion:
/// `(F_*ξ)^i(y) = Σ_j (δ_ij |y|² − 2 y_i y_j) ξ^j(y/|y|²)`.
pub fn pushforward_under_inversion(field: &FieldSpec) -> FieldSpec {
    let n = field.dim();
    let r2 = Expr::norm_squared(n);
    let preimage: Vec<Expr> = (0..n).map(|k| Expr::var(k) / r2.clone()).collect();
    let pulled: Vec<Expr> = field.components().iter().map(|c| c.substitute(&preimage)).collect();
    let components = (0..n)
        .map(|i| {
            (0..n)
                .filter(|j| !pulled[*j].is_zero())
                .map(|j| {
                    let jac = if i == j {
                        r2.clone() - 2.0 * Expr::var(i) * Expr::var(j)
                    } else {
                        -2.0 * Expr::var(i) * Expr::var(j)
                    };
                    jac * pulled[j].clone()
                })
                .reduce(|a, b| a + b)
                .unwrap_or(Expr::Const(0.0))
        })
        .collect();
    FieldSpec::new(format!("inversion_pushforward({})", field.name()), components)
}

/// One builtin (chart, field) combination.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub chart: Chart,
    pub field: FieldSpec,
}

/// The builtin catalog.
pub struct ModelCatalog;

impl ModelCatalog {
    pub fn chart_names() -> &'static [&'static str] {
        &CHART_NAMES
    }

    pub fn field_names() -> &'static [&'static str] {
        &FIELD_NAMES
    }

    /// Every chart paired with every field in dimension `n`, default
    /// parameters.
    pub fn pairs(n: usize) -> Result<Vec<Scenario>> {
        let mut out = Vec::new();
        for chart_name in CHART_NAMES {
            let chart = make_chart(chart_name, n, &ChartParams::default())?;
            for field_name in FIELD_NAMES {
                let field = make_field(field_name, n, &FieldParams::default())?;
                out.push(Scenario {
                    name: format!("{chart_name}({n})/{field_name}"),
                    chart: chart.clone(),
                    field,
                });
            }
        }
        Ok(out)
    }

    /// Human-readable listing used by the `catalog` subcommand.
    pub fn describe() -> String {
        let mut s = String::from("charts:\n");
        s += "  euclidean             metric δ on [-h,h]^n (params: half_width, default 2)\n";
        s += "  sphere_stereographic  metric 4/(1+|x|²)² δ on the ball of radius 3 (params: radius)\n";
        s += "  hyperbolic_ball       metric 4/(1-|x|²)² δ on the ball of radius 0.9 (params: radius < 1)\n";
        s += "fields:\n";
        s += "  translation           ξ = e (params: axis | vector)\n";
        s += "  rotation              ξ = x_i ∂_j − x_j ∂_i (params: i, j; default 1, 2)\n";
        s += "  euler                 ξ = Σ x_k ∂_k\n";
        s += "  special_conformal     ξ = |x|² e − 2⟨x,e⟩ x (params: axis | vector)\n";
        s += "  sphere_killing        rotation of S^n in the (y_i, y_j) plane, j ≤ n+1 (default i = n, j = n+1)\n";
        s += "  remark_example        special_conformal(e1), for use on sphere_stereographic\n";
        s
    }
}
