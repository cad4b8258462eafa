//! Generator expression language.
//!
//! A generator is a `;`-separated list of scalar expressions over the
//! variables `s`, `y`, `ybar`, `z`, `zbar` (terminal conditions use `w`).
//! See the grammar in [`parser`].

pub mod ast;
pub mod builtins;
pub mod eval;
pub mod parser;

use thiserror::Error;

pub use ast::{BinOp, Expr, ExprKind, Func, GeneratorExpr, Span, Var};
pub use builtins::Builtin;
pub use eval::{
    eval_scalar, eval_scalar_batch, evaluate, evaluate_batch, BatchBindings, BatchVar, Bindings,
};
pub use parser::{parse, parse_expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unknown identifier '{name}' at {line}:{col}")]
    UnknownIdentifier { name: String, line: usize, col: usize },
    #[error("{func} expects {expected} argument(s), found {found} at {line}:{col}")]
    Arity {
        func: &'static str,
        expected: usize,
        found: usize,
        line: usize,
        col: usize,
    },
    #[error("dimension error at {line}:{col}: {message}")]
    Dimension {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("variable '{name}' is not allowed in a {role} at {line}:{col}")]
    VariableNotAllowed {
        name: &'static str,
        role: &'static str,
        line: usize,
        col: usize,
    },
    #[error("unknown builtin '{0}'")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalErrorKind {
    Domain(String),
    Dimension(String),
    NonFinite,
    Unbound(&'static str),
}

/// Evaluation failure, located at the offending node.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{} in '{node}' at {line}:{col}", describe(.kind))]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub node: String,
    pub line: usize,
    pub col: usize,
}

fn describe(kind: &EvalErrorKind) -> String {
    match kind {
        EvalErrorKind::Domain(m) => format!("domain error ({m})"),
        EvalErrorKind::Dimension(m) => format!("dimension error ({m})"),
        EvalErrorKind::NonFinite => "non-finite result".to_string(),
        EvalErrorKind::Unbound(v) => format!("variable '{v}' has no value"),
    }
}

/// Which variables an expression may use, and their lengths.
#[derive(Debug, Clone, Copy)]
pub struct Signature {
    pub role: &'static str,
    pub s: bool,
    pub y: Option<usize>,
    pub ybar: Option<usize>,
    pub z: Option<usize>,
    pub zbar: Option<usize>,
    pub w: Option<usize>,
    pub d: usize,
}

impl Signature {
    /// Generator of an `n`-dimensional equation driven by `d` Brownian motions.
    pub fn generator(n: usize, d: usize) -> Self {
        Self {
            role: "generator",
            s: true,
            y: Some(n),
            ybar: Some(n),
            z: Some(n * d),
            zbar: Some(n * d),
            w: None,
            d,
        }
    }

    /// Terminal condition as a function of `W_T`.
    pub fn terminal(d: usize) -> Self {
        Self {
            role: "terminal condition",
            s: false,
            y: None,
            ybar: None,
            z: None,
            zbar: None,
            w: Some(d),
            d,
        }
    }

    /// Deterministic function of time only (growth envelopes).
    pub fn time_only() -> Self {
        Self {
            role: "time function",
            s: true,
            y: None,
            ybar: None,
            z: None,
            zbar: None,
            w: None,
            d: 1,
        }
    }

    fn len_of(&self, v: Var) -> Option<usize> {
        match v {
            Var::S => self.s.then_some(1),
            Var::Y => self.y,
            Var::Ybar => self.ybar,
            Var::Z => self.z,
            Var::Zbar => self.zbar,
            Var::W => self.w,
        }
    }
}

fn dim_err(e: &Expr, message: String) -> DslError {
    DslError::Dimension {
        line: e.span.line,
        col: e.span.col,
        message,
    }
}

/// Infers the vector length of `e` under `sig` without evaluating it.
pub fn infer_len(e: &Expr, sig: &Signature) -> Result<usize, DslError> {
    let var_len = |v: Var| {
        sig.len_of(v).ok_or(DslError::VariableNotAllowed {
            name: v.name(),
            role: sig.role,
            line: e.span.line,
            col: e.span.col,
        })
    };
    match &e.kind {
        ExprKind::Num(_) => Ok(1),
        ExprKind::Var(v) => var_len(*v),
        ExprKind::Index(v, idx) => {
            let len = var_len(*v)?;
            let at = match idx.as_slice() {
                [i] => *i,
                [k, j] => {
                    if !matches!(v, Var::Z | Var::Zbar) || *j >= sig.d {
                        return Err(dim_err(e, format!("bad matrix index on '{}'", v.name())));
                    }
                    k * sig.d + j
                }
                _ => return Err(dim_err(e, "too many indices".into())),
            };
            if at >= len {
                return Err(dim_err(
                    e,
                    format!("index {at} out of range for '{}' of length {len}", v.name()),
                ));
            }
            Ok(1)
        }
        ExprKind::Neg(inner) => infer_len(inner, sig),
        ExprKind::Binary(_, l, r) => {
            let (a, b) = (infer_len(l, sig)?, infer_len(r, sig)?);
            if a == b || b == 1 {
                Ok(a)
            } else if a == 1 {
                Ok(b)
            } else {
                Err(dim_err(e, format!("operands of length {a} and {b} do not broadcast")))
            }
        }
        ExprKind::Call(f, args) => {
            let lens = args
                .iter()
                .map(|a| infer_len(a, sig))
                .collect::<Result<Vec<_>, _>>()?;
            match f {
                Func::Min | Func::Max if lens != [1, 1] => {
                    Err(dim_err(e, format!("{} takes scalar arguments", f.name())))
                }
                Func::Dot if lens[0] != lens[1] => Err(dim_err(
                    e,
                    format!("dot of vectors of length {} and {}", lens[0], lens[1]),
                )),
                _ => Ok(1),
            }
        }
    }
}

/// Checks that every component is scalar and only uses permitted variables.
pub fn check_signature(g: &GeneratorExpr, sig: &Signature) -> Result<(), DslError> {
    for c in &g.components {
        let len = infer_len(c, sig)?;
        if len != 1 {
            return Err(dim_err(c, format!("component evaluates to a vector of length {len}")));
        }
    }
    Ok(())
}
