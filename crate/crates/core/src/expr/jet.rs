/// Value and partial derivatives (up to order 3) of a scalar function at a
/// point in `R^n`.
///
/// Derivative arrays are dense and row-major: `d2[i*n + j]`,
/// `d3[(i*n + j)*n + k]`. Only sorted index tuples are ever computed; the
/// remaining entries are copies, so the arrays are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    n: usize,
    order: usize,
    value: f64,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl Jet {
    fn zeros(n: usize, order: usize) -> Jet {
        Jet {
            n,
            order,
            value: 0.0,
            d1: vec![0.0; if order >= 1 { n } else { 0 }],
            d2: vec![0.0; if order >= 2 { n * n } else { 0 }],
            d3: vec![0.0; if order >= 3 { n * n * n } else { 0 }],
        }
    }

    pub fn constant(n: usize, order: usize, c: f64) -> Jet {
        let mut j = Jet::zeros(n, order);
        j.value = c;
        j
    }

    pub fn variable(n: usize, order: usize, index: usize, x: f64) -> Jet {
        let mut j = Jet::constant(n, order, x);
        if order >= 1 {
            j.d1[index] = 1.0;
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn d1(&self, i: usize) -> f64 {
        self.d1[i]
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.n + j]
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.d3[(i * self.n + j) * self.n + k]
    }

    pub fn gradient(&self) -> &[f64] {
        &self.d1
    }

    pub fn hessian(&self) -> &[f64] {
        &self.d2
    }

    pub fn third(&self) -> &[f64] {
        &self.d3
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.d1.iter().all(|v| v.is_finite())
            && self.d2.iter().all(|v| v.is_finite())
            && self.d3.iter().all(|v| v.is_finite())
    }

    fn set2(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.d2[i * n + j] = v;
        self.d2[j * n + i] = v;
    }

    fn set3(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.n;
        for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
            self.d3[(a * n + b) * n + c] = v;
        }
    }

    fn map_linear(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!((self.n, self.order), (other.n, other.order));
        Jet {
            n: self.n,
            order: self.order,
            value: f(self.value, other.value),
            d1: self.d1.iter().zip(&other.d1).map(|(a, b)| f(*a, *b)).collect(),
            d2: self.d2.iter().zip(&other.d2).map(|(a, b)| f(*a, *b)).collect(),
            d3: self.d3.iter().zip(&other.d3).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.map_linear(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.map_linear(other, |a, b| a - b)
    }

    pub fn neg(&self) -> Jet {
        Jet {
            n: self.n,
            order: self.order,
            value: -self.value,
            d1: self.d1.iter().map(|v| -v).collect(),
            d2: self.d2.iter().map(|v| -v).collect(),
            d3: self.d3.iter().map(|v| -v).collect(),
        }
    }

    /// Leibniz rule.
    pub fn mul(&self, other: &Jet) -> Jet {
        let (u, v) = (self, other);
        let n = self.n;
        let mut out = Jet::zeros(n, self.order);
        out.value = u.value * v.value;
        if self.order >= 1 {
            for i in 0..n {
                out.d1[i] = u.d1[i] * v.value + u.value * v.d1[i];
            }
        }
        if self.order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let s = u.d2(i, j) * v.value
                        + u.d1[i] * v.d1[j]
                        + u.d1[j] * v.d1[i]
                        + u.value * v.d2(i, j);
                    out.set2(i, j, s);
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let s = u.d3(i, j, k) * v.value
                            + u.d2(i, j) * v.d1[k]
                            + u.d2(i, k) * v.d1[j]
                            + u.d2(j, k) * v.d1[i]
                            + u.d1[i] * v.d2(j, k)
                            + u.d1[j] * v.d2(i, k)
                            + u.d1[k] * v.d2(i, j)
                            + u.value * v.d3(i, j, k);
                        out.set3(i, j, k, s);
                    }
                }
            }
        }
        out
    }

    /// `h(u)` where `f = [h, h', h'', h''']` are evaluated at `u.value()`.
    pub fn compose(&self, f: [f64; 4]) -> Jet {
        let u = self;
        let n = self.n;
        let mut out = Jet::zeros(n, self.order);
        out.value = f[0];
        if self.order >= 1 {
            for i in 0..n {
                out.d1[i] = f[1] * u.d1[i];
            }
        }
        if self.order >= 2 {
            for i in 0..n {
                for j in i..n {
                    out.set2(i, j, f[2] * u.d1[i] * u.d1[j] + f[1] * u.d2(i, j));
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let s = f[3] * u.d1[i] * u.d1[j] * u.d1[k]
                            + f[2] * (u.d2(i, j) * u.d1[k] + u.d2(i, k) * u.d1[j] + u.d2(j, k) * u.d1[i])
                            + f[1] * u.d3(i, j, k);
                        out.set3(i, j, k, s);
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    #[test]
    fn sin_at_origin() {
        let j = parse("sin(x1)", 1).unwrap().jet(&[0.0], 3).unwrap();
        assert_eq!(j.value(), 0.0);
        assert_eq!(j.d1(0), 1.0);
        assert_eq!(j.d2(0, 0), 0.0);
        assert_eq!(j.d3(0, 0, 0), -1.0);
    }

    #[test]
    fn quadratic_form() {
        let j = parse("x1^2 + x2^2", 2).unwrap().jet(&[1.0, 2.0], 2).unwrap();
        assert_eq!(j.value(), 5.0);
        assert_eq!(j.gradient(), &[2.0, 4.0]);
        assert_eq!(j.hessian(), &[2.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn lower_orders_leave_arrays_empty() {
        let j = parse("x1*x2", 2).unwrap().jet(&[1.0, 2.0], 1).unwrap();
        assert_eq!(j.order(), 1);
        assert!(j.hessian().is_empty());
        assert!(j.third().is_empty());
    }

    #[test]
    fn mixed_third_derivative() {
        // x1^2 x2 x3: d3/dx1 dx2 dx3 = 2 x1 ; d3/dx1^2 dx2 = 2 x3
        let j = parse("x1^2*x2*x3", 3).unwrap().jet(&[1.5, -2.0, 0.5], 3).unwrap();
        assert_eq!(j.d3(0, 1, 2), 3.0);
        assert_eq!(j.d3(2, 0, 1), 3.0);
        assert_eq!(j.d3(0, 0, 1), 1.0);
        assert_eq!(j.d3(1, 1, 1), 0.0);
    }
}
