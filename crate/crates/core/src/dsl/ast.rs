use std::fmt;

/// Variables a generator or terminal expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// Time `s`.
    S,
    /// Current value `y` (length `n`).
    Y,
    /// Mean `E[Y_s]` (length `n`).
    Ybar,
    /// Current `z` (length `n * d`, row-major `n x d`).
    Z,
    /// Mean `E[Z_s]`.
    Zbar,
    /// Terminal Brownian position `W_T` (length `d`); terminal expressions only.
    W,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::S, Var::Y, Var::Ybar, Var::Z, Var::Zbar, Var::W];

    pub fn name(self) -> &'static str {
        match self {
            Var::S => "s",
            Var::Y => "y",
            Var::Ybar => "ybar",
            Var::Z => "z",
            Var::Zbar => "zbar",
            Var::W => "w",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Abs,
    Sin,
    Cos,
    Exp,
    Min,
    Max,
    Norm2,
    Dot,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Abs,
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Min,
        Func::Max,
        Func::Norm2,
        Func::Dot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Min => "min",
            Func::Max => "max",
            Func::Norm2 => "norm2",
            Func::Dot => "dot",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Dot => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// 1-based source position of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Num(f64),
    Var(Var),
    /// `v[i]` or `v[k, j]` (the latter for `z`/`zbar` only).
    Index(Var, Vec<usize>),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Expression node. Equality is structural and ignores source spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        use ExprKind::*;
        match (&self.kind, &other.kind) {
            (Num(a), Num(b)) => a.to_bits() == b.to_bits(),
            (Var(a), Var(b)) => a == b,
            (Index(a, i), Index(b, j)) => a == b && i == j,
            (Neg(a), Neg(b)) => a == b,
            (Binary(o1, l1, r1), Binary(o2, l2, r2)) => o1 == o2 && l1 == l2 && r1 == r2,
            (Call(f1, a1), Call(f2, a2)) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Self { kind, span }
    }

    pub fn num(v: f64) -> Self {
        Self::new(ExprKind::Num(v), Span::default())
    }

    pub fn var(v: Var) -> Self {
        Self::new(ExprKind::Var(v), Span::default())
    }

    /// Whether `v` occurs anywhere in the tree.
    pub fn uses(&self, v: Var) -> bool {
        match &self.kind {
            ExprKind::Num(_) => false,
            ExprKind::Var(x) | ExprKind::Index(x, _) => *x == v,
            ExprKind::Neg(e) => e.uses(v),
            ExprKind::Binary(_, l, r) => l.uses(v) || r.uses(v),
            ExprKind::Call(_, args) => args.iter().any(|a| a.uses(v)),
        }
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Binary(op, _, _) => op.precedence(),
            ExprKind::Neg(_) => 3,
            _ => 5,
        }
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(v) => write!(f, "{v}"),
            ExprKind::Var(v) => f.write_str(v.name()),
            ExprKind::Index(v, idx) => {
                let parts: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                write!(f, "{}[{}]", v.name(), parts.join(","))
            }
            ExprKind::Neg(e) => {
                f.write_str("-")?;
                write_wrapped(f, e, e.precedence() < 3)
            }
            ExprKind::Binary(op, l, r) => {
                let p = op.precedence();
                if *op == BinOp::Pow {
                    // right-associative; the exponent is parsed at unary level
                    write_wrapped(f, l, l.precedence() <= p)?;
                    f.write_str("^")?;
                    write_wrapped(f, r, r.precedence() < 3)
                } else {
                    write_wrapped(f, l, l.precedence() < p)?;
                    write!(f, " {} ", op.symbol())?;
                    write_wrapped(f, r, r.precedence() <= p)
                }
            }
            ExprKind::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A generator (or terminal condition): one scalar expression per output
/// component.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorExpr {
    pub components: Vec<Expr>,
}

impl GeneratorExpr {
    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn uses(&self, v: Var) -> bool {
        self.components.iter().any(|c| c.uses(v))
    }

    /// Repeats a single-component expression `n` times.
    pub fn broadcast(&self, n: usize) -> GeneratorExpr {
        if self.components.len() == 1 && n > 1 {
            GeneratorExpr {
                components: vec![self.components[0].clone(); n],
            }
        } else {
            self.clone()
        }
    }
}

impl fmt::Display for GeneratorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.components.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}
