//! Pointwise and batched evaluation.
//!
//! Both evaluators share the scalar kernels below, so a batched result is
//! bit-identical to evaluating each point on its own.
//!
//! Values are flat vectors; length 1 acts as a scalar and broadcasts.
//! `abs`, `sin`, `cos` and `exp` applied to a vector of length > 1 act on its
//! Euclidean norm.

use super::ast::{BinOp, Expr, ExprKind, Func, GeneratorExpr, Var};
use super::{EvalError, EvalErrorKind};

/// Variable values for one evaluation point.
#[derive(Debug, Clone, Copy)]
pub struct Bindings<'a> {
    pub s: f64,
    pub y: &'a [f64],
    pub ybar: &'a [f64],
    pub z: &'a [f64],
    pub zbar: &'a [f64],
    pub w: &'a [f64],
    /// Brownian dimension, used to resolve `z[k, j]`.
    pub d: usize,
}

impl<'a> Bindings<'a> {
    pub fn new(s: f64, y: &'a [f64], ybar: &'a [f64], z: &'a [f64], zbar: &'a [f64], d: usize) -> Self {
        Self {
            s,
            y,
            ybar,
            z,
            zbar,
            w: &[],
            d,
        }
    }

    pub fn terminal(w: &'a [f64]) -> Self {
        Self {
            s: 0.0,
            y: &[],
            ybar: &[],
            z: &[],
            zbar: &[],
            w,
            d: w.len().max(1),
        }
    }
}

fn error(node: &Expr, kind: EvalErrorKind) -> EvalError {
    EvalError {
        kind,
        node: node.to_string(),
        line: node.span.line,
        col: node.span.col,
    }
}

fn binary_kernel(op: BinOp, a: f64, b: f64) -> Result<f64, &'static str> {
    match op {
        BinOp::Add => Ok(a + b),
        BinOp::Sub => Ok(a - b),
        BinOp::Mul => Ok(a * b),
        BinOp::Div => {
            if b == 0.0 {
                Err("division by zero")
            } else {
                Ok(a / b)
            }
        }
        BinOp::Pow => {
            if a < 0.0 && b.fract() != 0.0 {
                Err("non-integer power of a negative number")
            } else if a == 0.0 && b < 0.0 {
                Err("zero raised to a negative power")
            } else {
                Ok(a.powf(b))
            }
        }
    }
}

fn unary_kernel(f: Func, x: f64) -> f64 {
    match f {
        Func::Abs => x.abs(),
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Exp => x.exp(),
        _ => unreachable!("not a unary map"),
    }
}

fn min_max_kernel(f: Func, a: f64, b: f64) -> f64 {
    if f == Func::Min {
        a.min(b)
    } else {
        a.max(b)
    }
}

fn sum_squares(v: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    for x in v {
        acc += x * x;
    }
    acc
}

fn broadcast_len(node: &Expr, a: usize, b: usize) -> Result<usize, EvalError> {
    if a == b || b == 1 {
        Ok(a)
    } else if a == 1 {
        Ok(b)
    } else {
        Err(error(
            node,
            EvalErrorKind::Dimension(format!("operands of length {a} and {b} do not broadcast")),
        ))
    }
}

fn var_value<'a>(b: &Bindings<'a>, v: Var) -> &'a [f64] {
    match v {
        Var::S => unreachable!("s is handled separately"),
        Var::Y => b.y,
        Var::Ybar => b.ybar,
        Var::Z => b.z,
        Var::Zbar => b.zbar,
        Var::W => b.w,
    }
}

/// Resolves an index list to a flat offset into a variable of length `len`.
fn flat_index(node: &Expr, v: Var, idx: &[usize], len: usize, d: usize) -> Result<usize, EvalError> {
    let at = match idx {
        [i] => *i,
        [k, j] => {
            if !matches!(v, Var::Z | Var::Zbar) {
                return Err(error(
                    node,
                    EvalErrorKind::Dimension(format!("'{}' takes a single index", v.name())),
                ));
            }
            if *j >= d {
                return Err(error(
                    node,
                    EvalErrorKind::Dimension(format!("column {j} out of range for d = {d}")),
                ));
            }
            k * d + j
        }
        _ => unreachable!("parser emits one or two indices"),
    };
    if at >= len {
        return Err(error(
            node,
            EvalErrorKind::Dimension(format!(
                "index {at} out of range for '{}' of length {len}",
                v.name()
            )),
        ));
    }
    Ok(at)
}

fn check_finite(node: &Expr, v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(error(node, EvalErrorKind::NonFinite))
    }
}

/// Evaluates one expression at a single point.
pub fn eval_expr(e: &Expr, b: &Bindings<'_>) -> Result<Vec<f64>, EvalError> {
    match &e.kind {
        ExprKind::Num(v) => Ok(vec![*v]),
        ExprKind::Var(Var::S) => Ok(vec![b.s]),
        ExprKind::Var(v) => {
            let val = var_value(b, *v);
            if val.is_empty() {
                return Err(error(e, EvalErrorKind::Unbound(v.name())));
            }
            Ok(val.to_vec())
        }
        ExprKind::Index(v, idx) => {
            let val = if *v == Var::S { &[b.s][..] } else { var_value(b, *v) };
            if val.is_empty() {
                return Err(error(e, EvalErrorKind::Unbound(v.name())));
            }
            let at = flat_index(e, *v, idx, val.len(), b.d)?;
            Ok(vec![val[at]])
        }
        ExprKind::Neg(inner) => Ok(eval_expr(inner, b)?.into_iter().map(|x| -x).collect()),
        ExprKind::Binary(op, l, r) => {
            let lv = eval_expr(l, b)?;
            let rv = eval_expr(r, b)?;
            let n = broadcast_len(e, lv.len(), rv.len())?;
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                let a = lv[if lv.len() == 1 { 0 } else { k }];
                let c = rv[if rv.len() == 1 { 0 } else { k }];
                let v = binary_kernel(*op, a, c)
                    .map_err(|m| error(e, EvalErrorKind::Domain(m.to_string())))?;
                out.push(check_finite(e, v)?);
            }
            Ok(out)
        }
        ExprKind::Call(f, args) => match f {
            Func::Abs | Func::Sin | Func::Cos | Func::Exp => {
                let v = eval_expr(&args[0], b)?;
                let x = if v.len() == 1 {
                    v[0]
                } else {
                    sum_squares(v.iter().copied()).sqrt()
                };
                Ok(vec![check_finite(e, unary_kernel(*f, x))?])
            }
            Func::Norm2 => {
                let v = eval_expr(&args[0], b)?;
                Ok(vec![check_finite(e, sum_squares(v.iter().copied()).sqrt())?])
            }
            Func::Min | Func::Max => {
                let a = eval_expr(&args[0], b)?;
                let c = eval_expr(&args[1], b)?;
                if a.len() != 1 || c.len() != 1 {
                    return Err(error(
                        e,
                        EvalErrorKind::Dimension(format!("{} takes scalar arguments", f.name())),
                    ));
                }
                Ok(vec![min_max_kernel(*f, a[0], c[0])])
            }
            Func::Dot => {
                let a = eval_expr(&args[0], b)?;
                let c = eval_expr(&args[1], b)?;
                if a.len() != c.len() {
                    return Err(error(
                        e,
                        EvalErrorKind::Dimension(format!(
                            "dot of vectors of length {} and {}",
                            a.len(),
                            c.len()
                        )),
                    ));
                }
                let mut acc = 0.0;
                for (x, y) in a.iter().zip(&c) {
                    acc += x * y;
                }
                Ok(vec![check_finite(e, acc)?])
            }
        },
    }
}

/// Evaluates a scalar expression; vector results are a dimension error.
pub fn eval_scalar(e: &Expr, b: &Bindings<'_>) -> Result<f64, EvalError> {
    let v = eval_expr(e, b)?;
    if v.len() != 1 {
        return Err(error(
            e,
            EvalErrorKind::Dimension(format!("expression yields a vector of length {}", v.len())),
        ));
    }
    Ok(v[0])
}

/// Evaluates every component of a generator at a single point.
pub fn evaluate(g: &GeneratorExpr, b: &Bindings<'_>) -> Result<Vec<f64>, EvalError> {
    g.components.iter().map(|c| eval_scalar(c, b)).collect()
}

/// A variable bound over a batch: either the same vector for every point or
/// one column (over the batch) per vector element.
#[derive(Debug, Clone)]
pub enum BatchVar<'a> {
    Const(&'a [f64]),
    Cols(Vec<&'a [f64]>),
}

impl BatchVar<'_> {
    fn elems(&self) -> usize {
        match self {
            BatchVar::Const(v) => v.len(),
            BatchVar::Cols(c) => c.len(),
        }
    }
}

/// Variable values for a batch of `len` evaluation points.
#[derive(Debug, Clone)]
pub struct BatchBindings<'a> {
    pub len: usize,
    pub s: f64,
    pub y: BatchVar<'a>,
    pub ybar: BatchVar<'a>,
    pub z: BatchVar<'a>,
    pub zbar: BatchVar<'a>,
    pub w: BatchVar<'a>,
    pub d: usize,
}

impl<'a> BatchBindings<'a> {
    pub fn empty(len: usize, s: f64, d: usize) -> Self {
        Self {
            len,
            s,
            y: BatchVar::Const(&[]),
            ybar: BatchVar::Const(&[]),
            z: BatchVar::Const(&[]),
            zbar: BatchVar::Const(&[]),
            w: BatchVar::Const(&[]),
            d,
        }
    }

    fn var(&self, v: Var) -> &BatchVar<'a> {
        match v {
            Var::Y => &self.y,
            Var::Ybar => &self.ybar,
            Var::Z => &self.z,
            Var::Zbar => &self.zbar,
            Var::W => &self.w,
            Var::S => unreachable!("s is handled separately"),
        }
    }
}

#[derive(Debug, Clone)]
enum BVal {
    /// Same vector at every point.
    Const(Vec<f64>),
    /// One column of length `len` per vector element.
    Cols(Vec<Vec<f64>>),
}

impl BVal {
    fn elems(&self) -> usize {
        match self {
            BVal::Const(v) => v.len(),
            BVal::Cols(c) => c.len(),
        }
    }

    fn at(&self, elem: usize, p: usize) -> f64 {
        match self {
            BVal::Const(v) => v[elem],
            BVal::Cols(c) => c[elem][p],
        }
    }

    fn into_column(self, len: usize) -> Vec<Vec<f64>> {
        match self {
            BVal::Const(v) => v.into_iter().map(|x| vec![x; len]).collect(),
            BVal::Cols(c) => c,
        }
    }
}

fn batch_error(node: &Expr, kind: EvalErrorKind, p: usize) -> EvalError {
    let mut err = error(node, kind);
    err.node = format!("{} (batch point {p})", err.node);
    err
}

fn check_column(node: &Expr, col: &[f64]) -> Result<(), EvalError> {
    if let Some(p) = col.iter().position(|v| !v.is_finite()) {
        return Err(batch_error(node, EvalErrorKind::NonFinite, p));
    }
    Ok(())
}

/// Per-point Euclidean norm of a batched vector value.
fn batch_norm(v: &BVal, len: usize) -> BVal {
    match v {
        BVal::Const(c) => BVal::Const(vec![sum_squares(c.iter().copied()).sqrt()]),
        BVal::Cols(cols) => {
            let mut acc = vec![0.0; len];
            for col in cols {
                for (a, x) in acc.iter_mut().zip(col) {
                    *a += x * x;
                }
            }
            for a in &mut acc {
                *a = a.sqrt();
            }
            BVal::Cols(vec![acc])
        }
    }
}

fn eval_batch_node(e: &Expr, b: &BatchBindings<'_>) -> Result<BVal, EvalError> {
    let len = b.len;
    match &e.kind {
        ExprKind::Num(v) => Ok(BVal::Const(vec![*v])),
        ExprKind::Var(Var::S) => Ok(BVal::Const(vec![b.s])),
        ExprKind::Var(v) => {
            let bv = b.var(*v);
            if bv.elems() == 0 {
                return Err(error(e, EvalErrorKind::Unbound(v.name())));
            }
            Ok(match bv {
                BatchVar::Const(c) => BVal::Const(c.to_vec()),
                BatchVar::Cols(cols) => BVal::Cols(cols.iter().map(|c| c.to_vec()).collect()),
            })
        }
        ExprKind::Index(Var::S, idx) => {
            flat_index(e, Var::S, idx, 1, b.d)?;
            Ok(BVal::Const(vec![b.s]))
        }
        ExprKind::Index(v, idx) => {
            let bv = b.var(*v);
            if bv.elems() == 0 {
                return Err(error(e, EvalErrorKind::Unbound(v.name())));
            }
            let at = flat_index(e, *v, idx, bv.elems(), b.d)?;
            Ok(match bv {
                BatchVar::Const(c) => BVal::Const(vec![c[at]]),
                BatchVar::Cols(cols) => BVal::Cols(vec![cols[at].to_vec()]),
            })
        }
        ExprKind::Neg(inner) => Ok(match eval_batch_node(inner, b)? {
            BVal::Const(v) => BVal::Const(v.into_iter().map(|x| -x).collect()),
            BVal::Cols(c) => BVal::Cols(
                c.into_iter()
                    .map(|col| col.into_iter().map(|x| -x).collect())
                    .collect(),
            ),
        }),
        ExprKind::Binary(op, l, r) => {
            let lv = eval_batch_node(l, b)?;
            let rv = eval_batch_node(r, b)?;
            let n = broadcast_len(e, lv.elems(), rv.elems())?;
            let li = |k: usize| if lv.elems() == 1 { 0 } else { k };
            let ri = |k: usize| if rv.elems() == 1 { 0 } else { k };
            if let (BVal::Const(a), BVal::Const(c)) = (&lv, &rv) {
                let mut out = Vec::with_capacity(n);
                for k in 0..n {
                    let v = binary_kernel(*op, a[li(k)], c[ri(k)])
                        .map_err(|m| error(e, EvalErrorKind::Domain(m.to_string())))?;
                    out.push(check_finite(e, v)?);
                }
                return Ok(BVal::Const(out));
            }
            let mut cols = Vec::with_capacity(n);
            for k in 0..n {
                let mut col = Vec::with_capacity(len);
                for p in 0..len {
                    let v = binary_kernel(*op, lv.at(li(k), p), rv.at(ri(k), p))
                        .map_err(|m| batch_error(e, EvalErrorKind::Domain(m.to_string()), p))?;
                    col.push(v);
                }
                check_column(e, &col)?;
                cols.push(col);
            }
            Ok(BVal::Cols(cols))
        }
        ExprKind::Call(f, args) => match f {
            Func::Abs | Func::Sin | Func::Cos | Func::Exp => {
                let v = eval_batch_node(&args[0], b)?;
                let x = if v.elems() == 1 { v } else { batch_norm(&v, len) };
                match x {
                    BVal::Const(c) => Ok(BVal::Const(vec![check_finite(e, unary_kernel(*f, c[0]))?])),
                    BVal::Cols(mut c) => {
                        let mut col = c.swap_remove(0);
                        for x in &mut col {
                            *x = unary_kernel(*f, *x);
                        }
                        check_column(e, &col)?;
                        Ok(BVal::Cols(vec![col]))
                    }
                }
            }
            Func::Norm2 => {
                let v = eval_batch_node(&args[0], b)?;
                let out = batch_norm(&v, len);
                if let BVal::Cols(c) = &out {
                    check_column(e, &c[0])?;
                }
                Ok(out)
            }
            Func::Min | Func::Max => {
                let a = eval_batch_node(&args[0], b)?;
                let c = eval_batch_node(&args[1], b)?;
                if a.elems() != 1 || c.elems() != 1 {
                    return Err(error(
                        e,
                        EvalErrorKind::Dimension(format!("{} takes scalar arguments", f.name())),
                    ));
                }
                if let (BVal::Const(x), BVal::Const(y)) = (&a, &c) {
                    return Ok(BVal::Const(vec![min_max_kernel(*f, x[0], y[0])]));
                }
                let col = (0..len)
                    .map(|p| min_max_kernel(*f, a.at(0, p), c.at(0, p)))
                    .collect();
                Ok(BVal::Cols(vec![col]))
            }
            Func::Dot => {
                let a = eval_batch_node(&args[0], b)?;
                let c = eval_batch_node(&args[1], b)?;
                if a.elems() != c.elems() {
                    return Err(error(
                        e,
                        EvalErrorKind::Dimension(format!(
                            "dot of vectors of length {} and {}",
                            a.elems(),
                            c.elems()
                        )),
                    ));
                }
                if let (BVal::Const(x), BVal::Const(y)) = (&a, &c) {
                    let mut acc = 0.0;
                    for (u, v) in x.iter().zip(y) {
                        acc += u * v;
                    }
                    return Ok(BVal::Const(vec![check_finite(e, acc)?]));
                }
                let mut col = vec![0.0; len];
                for k in 0..a.elems() {
                    for (p, acc) in col.iter_mut().enumerate() {
                        *acc += a.at(k, p) * c.at(k, p);
                    }
                }
                check_column(e, &col)?;
                Ok(BVal::Cols(vec![col]))
            }
        },
    }
}

/// Evaluates a scalar expression over a batch, returning one value per point.
pub fn eval_scalar_batch(e: &Expr, b: &BatchBindings<'_>) -> Result<Vec<f64>, EvalError> {
    let v = eval_batch_node(e, b)?;
    if v.elems() != 1 {
        return Err(error(
            e,
            EvalErrorKind::Dimension(format!("expression yields a vector of length {}", v.elems())),
        ));
    }
    Ok(v.into_column(b.len).swap_remove(0))
}

/// Evaluates every component over a batch: result `[component][point]`.
pub fn evaluate_batch(g: &GeneratorExpr, b: &BatchBindings<'_>) -> Result<Vec<Vec<f64>>, EvalError> {
    g.components.iter().map(|c| eval_scalar_batch(c, b)).collect()
}
