use super::{ExprError, Func, Node};

/// Hyper-dual number: value, gradient and (row-major, symmetric) Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Dual2 {
    pub fn constant(value: f64, d: usize) -> Self {
        Dual2 {
            value,
            grad: vec![0.0; d],
            hess: vec![0.0; d * d],
        }
    }

    pub fn variable(value: f64, i: usize, d: usize) -> Self {
        let mut v = Dual2::constant(value, d);
        v.grad[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim() + j]
    }

    /// Hessian as nested rows.
    pub fn hess_rows(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..d).map(|i| self.hess[i * d..(i + 1) * d].to_vec()).collect()
    }

    fn neg(mut self) -> Self {
        self.value = -self.value;
        self.grad.iter_mut().for_each(|g| *g = -*g);
        self.hess.iter_mut().for_each(|h| *h = -*h);
        self
    }

    fn add(mut self, rhs: &Dual2, sign: f64) -> Self {
        self.value += sign * rhs.value;
        for (a, b) in self.grad.iter_mut().zip(&rhs.grad) {
            *a += sign * b;
        }
        for (a, b) in self.hess.iter_mut().zip(&rhs.hess) {
            *a += sign * b;
        }
        self
    }

    fn mul(&self, rhs: &Dual2) -> Self {
        let d = self.dim();
        let mut out = Dual2::constant(self.value * rhs.value, d);
        for i in 0..d {
            out.grad[i] = self.value * rhs.grad[i] + rhs.value * self.grad[i];
        }
        for i in 0..d {
            for j in i..d {
                let k = i * d + j;
                out.hess[k] = self.value * rhs.hess[k]
                    + rhs.value * self.hess[k]
                    + self.grad[i] * rhs.grad[j]
                    + rhs.grad[i] * self.grad[j];
            }
        }
        mirror(&mut out.hess, d);
        out
    }

    /// Applies a scalar function given its value and first two derivatives at `self.value`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let d = self.dim();
        let mut out = Dual2::constant(f0, d);
        for i in 0..d {
            out.grad[i] = f1 * self.grad[i];
        }
        for i in 0..d {
            for j in i..d {
                let k = i * d + j;
                out.hess[k] = f1 * self.hess[k] + f2 * self.grad[i] * self.grad[j];
            }
        }
        mirror(&mut out.hess, d);
        out
    }
}

fn mirror(h: &mut [f64], d: usize) {
    for i in 0..d {
        for j in 0..i {
            h[i * d + j] = h[j * d + i];
        }
    }
}

pub(super) fn eval(n: &Node, x: &[f64], t: f64) -> Result<Dual2, ExprError> {
    let d = x.len();
    Ok(match n {
        Node::Const(c) => Dual2::constant(*c, d),
        Node::Var(i) => Dual2::variable(x[*i], *i, d),
        Node::Param => Dual2::constant(t, d),
        Node::Neg(a) => eval(a, x, t)?.neg(),
        Node::Add(a, b) => eval(a, x, t)?.add(&eval(b, x, t)?, 1.0),
        Node::Sub(a, b) => eval(a, x, t)?.add(&eval(b, x, t)?, -1.0),
        Node::Mul(a, b) => eval(a, x, t)?.mul(&eval(b, x, t)?),
        Node::Div(a, b) => {
            let den = eval(b, x, t)?;
            let u = den.value;
            if u == 0.0 {
                return Err(ExprError::Domain("division by zero".into()));
            }
            let recip = den.chain(1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u));
            eval(a, x, t)?.mul(&recip)
        }
        Node::Pow(a, k) => {
            let base = eval(a, x, t)?;
            let u = base.value;
            let k = *k;
            if k == 0 {
                return Ok(Dual2::constant(1.0, d));
            }
            if u == 0.0 && k < 0 {
                return Err(ExprError::Domain("zero raised to a negative power".into()));
            }
            let kf = k as f64;
            let f1 = if k == 1 { 1.0 } else { kf * u.powi(k - 1) };
            let f2 = match k {
                1 => 0.0,
                2 => 2.0,
                _ => kf * (kf - 1.0) * u.powi(k - 2),
            };
            base.chain(u.powi(k), f1, f2)
        }
        Node::Call(func, a) => {
            let arg = eval(a, x, t)?;
            let u = arg.value;
            match func {
                Func::Sin => arg.chain(u.sin(), u.cos(), -u.sin()),
                Func::Cos => arg.chain(u.cos(), -u.sin(), -u.cos()),
                Func::Exp => {
                    let e = u.exp();
                    arg.chain(e, e, e)
                }
                Func::Abs => {
                    if u == 0.0 {
                        return Err(ExprError::Domain(
                            "abs is not differentiable at 0".into(),
                        ));
                    }
                    arg.chain(u.abs(), u.signum(), 0.0)
                }
                Func::Sqrt => {
                    if u <= 0.0 {
                        return Err(ExprError::Domain(format!(
                            "sqrt is not differentiable at {u}"
                        )));
                    }
                    let s = u.sqrt();
                    arg.chain(s, 0.5 / s, -0.25 / (s * u))
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use crate::expr::Expression;

    #[test]
    fn product_rule_hessian() {
        // f = x1*x2*sin(x3)
        let e = Expression::parse("x(1)*x(2)*sin(x(3))", 3).unwrap();
        let x = [2.0, 3.0, 0.5];
        let d = e.eval2(&x).unwrap();
        let (s, c) = (0.5f64.sin(), 0.5f64.cos());
        assert!((d.value - 6.0 * s).abs() < 1e-15);
        assert_eq!(d.grad, vec![3.0 * s, 2.0 * s, 6.0 * c]);
        let expect = [
            [0.0, s, 3.0 * c],
            [s, 0.0, 2.0 * c],
            [3.0 * c, 2.0 * c, -6.0 * s],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((d.hess_at(i, j) - expect[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quotient_and_powers() {
        let e = Expression::parse("1/(1 + x(1)^2)", 1).unwrap();
        let d = e.eval2(&[1.0]).unwrap();
        // f = 1/(1+x^2): f' = -2x/(1+x^2)^2, f'' = (6x^2-2)/(1+x^2)^3
        assert!((d.value - 0.5).abs() < 1e-15);
        assert!((d.grad[0] + 0.5).abs() < 1e-15);
        assert!((d.hess[0] - 0.5).abs() < 1e-15);
        let e = Expression::parse("x(1)^-2", 1).unwrap();
        let d = e.eval2(&[2.0]).unwrap();
        assert!((d.grad[0] + 0.25).abs() < 1e-15);
        assert!((d.hess[0] - 6.0 / 16.0).abs() < 1e-15);
    }
}
