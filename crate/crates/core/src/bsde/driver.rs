//! Drivers evaluated over batches of paths at one time node.

use std::ops::Range;

use crate::dsl::{evaluate_batch, BatchBindings, BatchVar, EvalError, GeneratorExpr, Var};
use crate::process::{MeanCurve, ProcessGrid};

/// A BSDE driver `f(t, y, z)` with any mean-field inputs already frozen.
///
/// `y` holds `n` values per path and `z` holds `n * d` (row-major `n x d`)
/// values per path, for the paths in `paths`. The result is path-major with
/// `n` values per path.
pub trait Driver: Sync {
    fn n(&self) -> usize;
    fn d(&self) -> usize;
    /// Whether the value depends on the solved `y`; if not, the backward
    /// step is explicit.
    fn uses_y(&self) -> bool;
    fn eval(
        &self,
        node: usize,
        t: f64,
        paths: Range<usize>,
        y: &[f64],
        z: &[f64],
    ) -> Result<Vec<f64>, EvalError>;
}

/// Where the `y` argument of an expression driver comes from.
#[derive(Debug, Clone, Copy)]
pub enum StateInput<'a> {
    /// The unknown `Y` of the current step (implicit scheme).
    Solved,
    /// Always zero.
    Zero,
    /// A fixed process, read at the current node and path.
    Frozen(&'a ProcessGrid),
}

/// A DSL generator with frozen mean curves.
#[derive(Debug, Clone)]
pub struct ExprDriver<'a> {
    expr: &'a GeneratorExpr,
    n: usize,
    d: usize,
    y: StateInput<'a>,
    ybar: Option<&'a MeanCurve>,
    zbar: Option<&'a MeanCurve>,
    z_override: Option<&'a ProcessGrid>,
    extra: Option<&'a ProcessGrid>,
}

impl<'a> ExprDriver<'a> {
    /// `y` is the solved value; `ybar` and `zbar` are zero until set.
    pub fn new(expr: &'a GeneratorExpr, n: usize, d: usize) -> Self {
        Self {
            expr,
            n,
            d,
            y: StateInput::Solved,
            ybar: None,
            zbar: None,
            z_override: None,
            extra: None,
        }
    }

    pub fn with_y(mut self, y: StateInput<'a>) -> Self {
        self.y = y;
        self
    }

    pub fn with_means(mut self, ybar: Option<&'a MeanCurve>, zbar: Option<&'a MeanCurve>) -> Self {
        self.ybar = ybar;
        self.zbar = zbar;
        self
    }

    /// Reads `z` from a fixed process instead of the solved one.
    pub fn with_frozen_z(mut self, z: &'a ProcessGrid) -> Self {
        self.z_override = Some(z);
        self
    }

    /// Adds a per-path process (with `n` components) to the value.
    pub fn with_extra(mut self, extra: &'a ProcessGrid) -> Self {
        self.extra = Some(extra);
        self
    }
}

fn columns(values: &[f64], width: usize) -> Vec<Vec<f64>> {
    let len = values.len().checked_div(width).unwrap_or(0);
    (0..width)
        .map(|k| (0..len).map(|p| values[p * width + k]).collect())
        .collect()
}

fn node_rows(grid: &ProcessGrid, node: usize, paths: &Range<usize>) -> Vec<f64> {
    let dims = grid.dims();
    grid.node(node)[paths.start * dims..paths.end * dims].to_vec()
}

impl Driver for ExprDriver<'_> {
    fn n(&self) -> usize {
        self.n
    }

    fn d(&self) -> usize {
        self.d
    }

    fn uses_y(&self) -> bool {
        matches!(self.y, StateInput::Solved) && self.expr.uses(Var::Y)
    }

    fn eval(
        &self,
        node: usize,
        t: f64,
        paths: Range<usize>,
        y: &[f64],
        z: &[f64],
    ) -> Result<Vec<f64>, EvalError> {
        let len = paths.len();
        let n = self.n;
        let nd = self.n * self.d;
        let zeros_n = vec![0.0; n];
        let zeros_nd = vec![0.0; nd];

        let y_cols = match self.y {
            StateInput::Solved => Some(columns(y, n)),
            StateInput::Zero => None,
            StateInput::Frozen(g) => Some(columns(&node_rows(g, node, &paths), n)),
        };
        let z_cols = match self.z_override {
            Some(g) => columns(&node_rows(g, node, &paths), nd),
            None => columns(z, nd),
        };

        let mut bb = BatchBindings::empty(len, t, self.d);
        bb.y = match &y_cols {
            Some(c) => BatchVar::Cols(c.iter().map(Vec::as_slice).collect()),
            None => BatchVar::Const(&zeros_n),
        };
        bb.ybar = BatchVar::Const(self.ybar.map_or(zeros_n.as_slice(), |m| m.value(node)));
        bb.z = BatchVar::Cols(z_cols.iter().map(Vec::as_slice).collect());
        bb.zbar = BatchVar::Const(self.zbar.map_or(zeros_nd.as_slice(), |m| m.value(node)));

        let comps = evaluate_batch(self.expr, &bb)?;
        let mut out = vec![0.0; len * n];
        for (k, col) in comps.iter().enumerate() {
            for (q, v) in col.iter().enumerate() {
                out[q * n + k] = *v;
            }
        }
        if let Some(extra) = self.extra {
            let rows = node_rows(extra, node, &paths);
            out.iter_mut().zip(&rows).for_each(|(o, e)| *o += e);
        }
        Ok(out)
    }
}

/// A driver given by a pointwise closure `(t, y, z) -> f`.
pub struct FnDriver<F> {
    n: usize,
    d: usize,
    uses_y: bool,
    f: F,
}

impl<F> FnDriver<F>
where
    F: Fn(f64, &[f64], &[f64]) -> Vec<f64> + Sync,
{
    pub fn new(n: usize, d: usize, uses_y: bool, f: F) -> Self {
        Self { n, d, uses_y, f }
    }
}

impl<F> Driver for FnDriver<F>
where
    F: Fn(f64, &[f64], &[f64]) -> Vec<f64> + Sync,
{
    fn n(&self) -> usize {
        self.n
    }

    fn d(&self) -> usize {
        self.d
    }

    fn uses_y(&self) -> bool {
        self.uses_y
    }

    fn eval(
        &self,
        _node: usize,
        t: f64,
        paths: Range<usize>,
        y: &[f64],
        z: &[f64],
    ) -> Result<Vec<f64>, EvalError> {
        let (n, nd) = (self.n, self.n * self.d);
        let mut out = Vec::with_capacity(paths.len() * n);
        for q in 0..paths.len() {
            out.extend((self.f)(t, &y[q * n..(q + 1) * n], &z[q * nd..(q + 1) * nd]));
        }
        Ok(out)
    }
}
