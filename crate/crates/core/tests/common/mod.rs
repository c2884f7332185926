#![allow(dead_code)]

use cvf::expr::Expr;
use rand::Rng;

/// Random expression in `n` variables that stays inside the domains of
/// `sqrt`, `log` and division: their arguments are shifted squares.
pub fn random_expr<R: Rng>(rng: &mut R, n: usize, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.7) {
            Expr::var(rng.gen_range(0..n))
        } else {
            Expr::constant((rng.gen_range(-2.0..2.0f64) * 8.0).round() / 8.0)
        };
    }
    let a = random_expr(rng, n, depth - 1);
    let shift = rng.gen_range(0.5..2.0);
    match rng.gen_range(0..10) {
        0 => a + random_expr(rng, n, depth - 1),
        1 => a - random_expr(rng, n, depth - 1),
        2 | 3 => a * random_expr(rng, n, depth - 1),
        4 => random_expr(rng, n, depth - 1) / (a.clone() * a + shift),
        5 => a.powi(rng.gen_range(2..=3)),
        6 => a.sin(),
        7 => a.cos(),
        8 => (0.5 * a.sin()).exp(),
        _ => {
            if rng.gen_bool(0.5) {
                (a.clone() * a + shift).sqrt()
            } else {
                (a.clone() * a + shift).ln()
            }
        }
    }
}

pub fn offset(p: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut q = p.to_vec();
    for (i, d) in moves {
        q[*i] += d;
    }
    q
}

/// Richardson-extrapolated central difference of `f` in direction `i`.
pub fn fd_first(f: &dyn Fn(&[f64]) -> f64, p: &[f64], i: usize, h: f64) -> f64 {
    let d = |s: f64| (f(&offset(p, &[(i, s)])) - f(&offset(p, &[(i, -s)]))) / (2.0 * s);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Richardson-extrapolated central second difference `∂_i ∂_j f`.
pub fn fd_second(f: &dyn Fn(&[f64]) -> f64, p: &[f64], i: usize, j: usize, h: f64) -> f64 {
    let d = |s: f64| {
        if i == j {
            (f(&offset(p, &[(i, s)])) - 2.0 * f(p) + f(&offset(p, &[(i, -s)]))) / (s * s)
        } else {
            (f(&offset(p, &[(i, s), (j, s)])) - f(&offset(p, &[(i, s), (j, -s)])) - f(&offset(p, &[(i, -s), (j, s)]))
                + f(&offset(p, &[(i, -s), (j, -s)])))
                / (4.0 * s * s)
        }
    };
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}
