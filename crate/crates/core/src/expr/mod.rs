//! Symbolic scalar expressions over `x(1)..x(d)` with exact first and second derivatives.
//!
//! Expressions are parsed from text (see `docs/grammar.md`), evaluated in plain
//! `f64` arithmetic, or evaluated with [`Dual2`] hyper-dual numbers which carry the
//! value, gradient and Hessian through every operation.

mod dual;
mod parser;

pub use dual::Dual2;

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable x({index}) out of range 1..={dim} at offset {offset}")]
    VariableIndexOutOfRange {
        index: usize,
        dim: usize,
        offset: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression tree. Variables are stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    /// The grid parameter `t` of a semi-infinite constraint.
    Param,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

/// A parsed expression together with the dimension it was parsed against.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    dim: usize,
}

impl Expression {
    /// Parses `text` over variables `x(1)..x(dim)`. The parameter `t` is rejected.
    pub fn parse(text: &str, dim: usize) -> Result<Self, ExprError> {
        let root = parser::parse(text, dim, false)?;
        Ok(Expression { root, dim })
    }

    /// Parses `text` allowing the semi-infinite grid parameter `t`.
    pub fn parse_with_param(text: &str, dim: usize) -> Result<Self, ExprError> {
        let root = parser::parse(text, dim, true)?;
        Ok(Expression { root, dim })
    }

    pub fn from_node(root: Node, dim: usize) -> Self {
        Expression { root, dim }
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_param(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Param => true,
                Node::Const(_) | Node::Var(_) => false,
                Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => walk(a),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a) || walk(b)
                }
            }
        }
        walk(&self.root)
    }

    /// Replaces the parameter `t` by the constant `t`.
    pub fn substitute_param(&self, t: f64) -> Expression {
        fn walk(n: &Node, t: f64) -> Node {
            match n {
                Node::Param => Node::Const(t),
                Node::Const(c) => Node::Const(*c),
                Node::Var(i) => Node::Var(*i),
                Node::Neg(a) => Node::Neg(Box::new(walk(a, t))),
                Node::Pow(a, k) => Node::Pow(Box::new(walk(a, t)), *k),
                Node::Call(f, a) => Node::Call(*f, Box::new(walk(a, t))),
                Node::Add(a, b) => Node::Add(Box::new(walk(a, t)), Box::new(walk(b, t))),
                Node::Sub(a, b) => Node::Sub(Box::new(walk(a, t)), Box::new(walk(b, t))),
                Node::Mul(a, b) => Node::Mul(Box::new(walk(a, t)), Box::new(walk(b, t))),
                Node::Div(a, b) => Node::Div(Box::new(walk(a, t)), Box::new(walk(b, t))),
            }
        }
        Expression {
            root: walk(&self.root, t),
            dim: self.dim,
        }
    }

    /// Plain floating point evaluation. Only division by zero, negative `sqrt`
    /// arguments and zero bases with negative exponents are errors here.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.eval_at(x, 0.0)
    }

    pub fn eval_at(&self, x: &[f64], t: f64) -> Result<f64, ExprError> {
        check_len(x, self.dim)?;
        eval_f64(&self.root, x, t)
    }

    /// Value, gradient and Hessian at `x`.
    pub fn eval2(&self, x: &[f64]) -> Result<Dual2, ExprError> {
        self.eval2_at(x, 0.0)
    }

    pub fn eval2_at(&self, x: &[f64], t: f64) -> Result<Dual2, ExprError> {
        check_len(x, self.dim)?;
        dual::eval(&self.root, x, t)
    }
}

fn check_len(x: &[f64], dim: usize) -> Result<(), ExprError> {
    if x.len() != dim {
        return Err(ExprError::Domain(format!(
            "point has {} coordinates, expression expects {dim}",
            x.len()
        )));
    }
    Ok(())
}

fn eval_f64(n: &Node, x: &[f64], t: f64) -> Result<f64, ExprError> {
    Ok(match n {
        Node::Const(c) => *c,
        Node::Var(i) => x[*i],
        Node::Param => t,
        Node::Neg(a) => -eval_f64(a, x, t)?,
        Node::Add(a, b) => eval_f64(a, x, t)? + eval_f64(b, x, t)?,
        Node::Sub(a, b) => eval_f64(a, x, t)? - eval_f64(b, x, t)?,
        Node::Mul(a, b) => eval_f64(a, x, t)? * eval_f64(b, x, t)?,
        Node::Div(a, b) => {
            let den = eval_f64(b, x, t)?;
            if den == 0.0 {
                return Err(ExprError::Domain("division by zero".into()));
            }
            eval_f64(a, x, t)? / den
        }
        Node::Pow(a, k) => {
            let base = eval_f64(a, x, t)?;
            if base == 0.0 && *k < 0 {
                return Err(ExprError::Domain("zero raised to a negative power".into()));
            }
            base.powi(*k)
        }
        Node::Call(f, a) => {
            let u = eval_f64(a, x, t)?;
            match f {
                Func::Sin => u.sin(),
                Func::Cos => u.cos(),
                Func::Exp => u.exp(),
                Func::Abs => u.abs(),
                Func::Sqrt => {
                    if u < 0.0 {
                        return Err(ExprError::Domain(format!("sqrt of negative value {u}")));
                    }
                    u.sqrt()
                }
            }
        }
    })
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

// Fully parenthesised so that the printed text parses back to the same tree.
fn write_node(n: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match n {
        Node::Const(c) => {
            if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                write!(f, "({c:?})")
            } else {
                write!(f, "{c:?}")
            }
        }
        Node::Var(i) => write!(f, "x({})", i + 1),
        Node::Param => write!(f, "t"),
        Node::Neg(a) => {
            write!(f, "(-(")?;
            write_node(a, f)?;
            write!(f, "))")
        }
        Node::Add(a, b) => binary(f, a, "+", b),
        Node::Sub(a, b) => binary(f, a, "-", b),
        Node::Mul(a, b) => binary(f, a, "*", b),
        Node::Div(a, b) => binary(f, a, "/", b),
        Node::Pow(a, k) => {
            write!(f, "(")?;
            write_node(a, f)?;
            if *k < 0 {
                write!(f, ")^({k})")
            } else {
                write!(f, ")^{k}")
            }
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(a, f)?;
            write!(f, ")")
        }
    }
}

fn binary(f: &mut fmt::Formatter<'_>, a: &Node, op: &str, b: &Node) -> fmt::Result {
    write!(f, "(")?;
    write_node(a, f)?;
    write!(f, " {op} ")?;
    write_node(b, f)?;
    write!(f, ")")
}
