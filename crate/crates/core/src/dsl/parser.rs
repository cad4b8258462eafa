//! Recursive-descent parser for the generator grammar.
//!
//! ```text
//! generator := expr (';' expr)*
//! expr      := term (('+' | '-') term)*
//! term      := unary (('*' | '/') unary)*
//! unary     := '-' unary | power
//! power     := postfix ('^' unary)?
//! postfix   := primary ('[' int (',' int)? ']')?
//! primary   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use super::ast::{BinOp, Expr, ExprKind, Func, GeneratorExpr, Span, Var};
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(text: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| DslError::Syntax {
                line,
                col,
                message: format!("malformed number '{s}'"),
            })?;
            col += i - start;
            out.push(Token { tok: Tok::Num(v), span });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token { tok: Tok::Ident(s), span });
            continue;
        }
        if "+-*/^(),[];".contains(c) {
            out.push(Token { tok: Tok::Sym(c), span });
            i += 1;
            col += 1;
            continue;
        }
        return Err(DslError::Syntax {
            line,
            col,
            message: format!("unexpected character '{c}'"),
        });
    }
    out.push(Token {
        tok: Tok::End,
        span: Span { line, col },
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> DslError {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Sym(c) => format!("'{c}'"),
            Tok::End => "end of input".to_string(),
        };
        DslError::Syntax {
            line: t.span.line,
            col: t.span.col,
            message: format!("expected {expected}, found {found}"),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), DslError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let span = self.bump().span;
            let rhs = self.term()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            let span = self.bump().span;
            let rhs = self.unary()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.peek().tok == Tok::Sym('-') {
            let span = self.bump().span;
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), span));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let base = self.postfix()?;
        if self.peek().tok == Tok::Sym('^') {
            let span = self.bump().span;
            let exponent = self.unary()?;
            return Ok(Expr::new(
                ExprKind::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)),
                span,
            ));
        }
        Ok(base)
    }

    fn index(&mut self) -> Result<usize, DslError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e9 => {
                self.bump();
                Ok(v as usize)
            }
            _ => Err(self.unexpected("a non-negative integer index")),
        }
    }

    fn postfix(&mut self) -> Result<Expr, DslError> {
        let prim = self.primary()?;
        if self.peek().tok == Tok::Sym('[') {
            let ExprKind::Var(v) = prim.kind else {
                return Err(self.unexpected("an operator (only variables can be indexed)"));
            };
            self.bump();
            let mut idx = vec![self.index()?];
            if self.eat(',') {
                idx.push(self.index()?);
            }
            self.expect(']')?;
            return Ok(Expr::new(ExprKind::Index(v, idx), prim.span));
        }
        Ok(prim)
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::new(ExprKind::Num(v), t.span))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek().tok == Tok::Sym('(') {
                    let func = Func::from_name(&name).ok_or(DslError::UnknownIdentifier {
                        name: name.clone(),
                        line: t.span.line,
                        col: t.span.col,
                    })?;
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != func.arity() {
                        return Err(DslError::Arity {
                            func: func.name(),
                            expected: func.arity(),
                            found: args.len(),
                            line: t.span.line,
                            col: t.span.col,
                        });
                    }
                    return Ok(Expr::new(ExprKind::Call(func, args), t.span));
                }
                match Var::from_name(&name) {
                    Some(v) => Ok(Expr::new(ExprKind::Var(v), t.span)),
                    None if Func::from_name(&name).is_some() => Err(DslError::Syntax {
                        line: t.span.line,
                        col: t.span.col,
                        message: format!("function '{name}' must be called with arguments"),
                    }),
                    None => Err(DslError::UnknownIdentifier {
                        name,
                        line: t.span.line,
                        col: t.span.col,
                    }),
                }
            }
            _ => Err(self.unexpected("a number, variable, function call or '('")),
        }
    }
}

/// Parses a single scalar expression.
pub fn parse_expr(text: &str) -> Result<Expr, DslError> {
    let mut p = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    if p.peek().tok != Tok::End {
        return Err(p.unexpected("end of input"));
    }
    Ok(e)
}

/// Parses `expr (';' expr)*` into a vector-valued generator.
pub fn parse(text: &str) -> Result<GeneratorExpr, DslError> {
    let mut p = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    let mut components = vec![p.expr()?];
    while p.eat(';') {
        components.push(p.expr()?);
    }
    if p.peek().tok != Tok::End {
        return Err(p.unexpected("';' or end of input"));
    }
    Ok(GeneratorExpr { components })
}
