//! Named generators shipped with the library.

use std::fmt;
use std::str::FromStr;

use super::ast::GeneratorExpr;
use super::parser::parse;
use super::DslError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// `1 + |y| + |ybar| + |z|^2/2 + |zbar|^(1+alpha)`.
    Ex21 { alpha: f64 },
    /// `1 + s + |y| + |ybar| + |z|^2/2 + |sin |zbar||`.
    Ex22,
    /// `1 + |sin y| + |sin ybar| + |z|^2/2 + |sin zbar|`.
    Ex31F1,
    /// `1 + |y| + |ybar| + (|z| + |zbar|)^2/2`.
    Ex31F2,
    /// `1 + |sin y| + |sin ybar| + |z| + |zbar|`.
    Ex41F1,
    /// Same expression as [`Builtin::Ex31F2`].
    Ex41F2,
}

impl Builtin {
    /// The documented source text.
    pub fn text(&self) -> String {
        match self {
            Builtin::Ex21 { alpha } => format!(
                "1 + abs(y) + abs(ybar) + 0.5*norm2(z)^2 + norm2(zbar)^{}",
                1.0 + alpha
            ),
            Builtin::Ex22 => {
                "1 + s + abs(y) + abs(ybar) + 0.5*norm2(z)^2 + abs(sin(norm2(zbar)))".into()
            }
            Builtin::Ex31F1 => {
                "1 + abs(sin(y)) + abs(sin(ybar)) + 0.5*norm2(z)^2 + abs(sin(zbar))".into()
            }
            Builtin::Ex31F2 | Builtin::Ex41F2 => {
                "1 + abs(y) + abs(ybar) + 0.5*(norm2(z) + norm2(zbar))^2".into()
            }
            Builtin::Ex41F1 => "1 + abs(sin(y)) + abs(sin(ybar)) + norm2(z) + norm2(zbar)".into(),
        }
    }

    pub fn expr(&self) -> GeneratorExpr {
        parse(&self.text()).expect("builtin text parses")
    }

    pub fn name(&self) -> String {
        match self {
            Builtin::Ex21 { alpha } => format!("ex2.1({alpha})"),
            Builtin::Ex22 => "ex2.2".into(),
            Builtin::Ex31F1 => "ex3.1-f1".into(),
            Builtin::Ex31F2 => "ex3.1-f2".into(),
            Builtin::Ex41F1 => "ex4.1-f1".into(),
            Builtin::Ex41F2 => "ex4.1-f2".into(),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Builtin {
    type Err = DslError;

    /// Accepts `ex2.2`, `ex3.1-f1`, ..., and `ex2.1(<alpha>)` with
    /// `0 <= alpha < 1` (`ex2.1` alone means `alpha = 0`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || DslError::UnknownBuiltin(s.to_string());
        let t = s.trim();
        Ok(match t {
            "ex2.1" => Builtin::Ex21 { alpha: 0.0 },
            "ex2.2" => Builtin::Ex22,
            "ex3.1-f1" => Builtin::Ex31F1,
            "ex3.1-f2" => Builtin::Ex31F2,
            "ex4.1-f1" => Builtin::Ex41F1,
            "ex4.1-f2" => Builtin::Ex41F2,
            _ => {
                let inner = t
                    .strip_prefix("ex2.1(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(unknown)?;
                let inner = inner.trim();
                let inner = inner.strip_prefix("alpha=").unwrap_or(inner);
                let alpha: f64 = inner.trim().parse().map_err(|_| unknown())?;
                if !(0.0..1.0).contains(&alpha) {
                    return Err(unknown());
                }
                Builtin::Ex21 { alpha }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::eval::{evaluate, Bindings};
    use proptest::prelude::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Direct implementations written from the formulas, independent of the
    /// expression machinery.
    fn closed_form(b: Builtin, s: f64, y: f64, yb: f64, z: &[f64], zb: &[f64]) -> f64 {
        let (nz, nzb) = (norm(z), norm(zb));
        match b {
            Builtin::Ex21 { alpha } => 1.0 + y.abs() + yb.abs() + 0.5 * nz * nz + nzb.powf(1.0 + alpha),
            Builtin::Ex22 => 1.0 + s + y.abs() + yb.abs() + 0.5 * nz * nz + nzb.sin().abs(),
            Builtin::Ex31F1 => 1.0 + y.sin().abs() + yb.sin().abs() + 0.5 * nz * nz + nzb.sin().abs(),
            Builtin::Ex31F2 | Builtin::Ex41F2 => {
                1.0 + y.abs() + yb.abs() + 0.5 * (nz + nzb) * (nz + nzb)
            }
            Builtin::Ex41F1 => 1.0 + y.sin().abs() + yb.sin().abs() + nz + nzb,
        }
    }

    const ALL: [Builtin; 7] = [
        Builtin::Ex21 { alpha: 0.0 },
        Builtin::Ex21 { alpha: 0.5 },
        Builtin::Ex22,
        Builtin::Ex31F1,
        Builtin::Ex31F2,
        Builtin::Ex41F1,
        Builtin::Ex41F2,
    ];

    #[test]
    fn matches_documented_text() {
        assert_eq!(
            Builtin::Ex21 { alpha: 0.5 }.expr(),
            parse("1 + abs(y) + abs(ybar) + 0.5*norm2(z)^2 + norm2(zbar)^1.5").unwrap()
        );
        assert_eq!(
            Builtin::Ex22.expr(),
            parse("1 + s + abs(y) + abs(ybar) + 0.5*norm2(z)^2 + abs(sin(norm2(zbar)))").unwrap()
        );
        assert_eq!(
            Builtin::Ex41F1.expr(),
            parse("1 + abs(sin(y)) + abs(sin(ybar)) + norm2(z) + norm2(zbar)").unwrap()
        );
        assert_eq!(
            Builtin::Ex21 { alpha: 0.0 }.expr(),
            parse("1 + abs(y) + abs(ybar) + 0.5*norm2(z)^2 + norm2(zbar)^1").unwrap()
        );
    }

    #[test]
    fn names_roundtrip() {
        for b in ALL {
            assert_eq!(b.name().parse::<Builtin>().unwrap(), b);
        }
        assert_eq!("ex2.1(alpha=0.25)".parse::<Builtin>().unwrap(), Builtin::Ex21 { alpha: 0.25 });
        assert!("ex9.9".parse::<Builtin>().is_err());
        assert!("ex2.1(1)".parse::<Builtin>().is_err());
    }

    #[test]
    fn origin_values() {
        let zero = [0.0];
        let b = Bindings::new(0.0, &zero, &zero, &zero, &zero, 1);
        assert_eq!(evaluate(&Builtin::Ex21 { alpha: 0.5 }.expr(), &b).unwrap(), vec![1.0]);
        let (y, yb, z, zb) = ([1.0], [0.0], [1.0], [0.0]);
        let b = Bindings::new(0.0, &y, &yb, &z, &zb, 1);
        assert_eq!(evaluate(&Builtin::Ex31F2.expr(), &b).unwrap(), vec![2.5]);
    }

    #[test]
    fn agrees_with_closed_forms() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for b in ALL {
            let e = b.expr();
            for _ in 0..1000 {
                let s: f64 = rng.gen_range(0.0..2.0);
                let y = [rng.gen_range(-3.0..3.0)];
                let yb = [rng.gen_range(-3.0..3.0)];
                let z = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                let zb = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                let got = evaluate(&e, &Bindings::new(s, &y, &yb, &z, &zb, 2)).unwrap()[0];
                let want = closed_form(b, s, y[0], yb[0], &z, &zb);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{b}: {got} vs {want}");
            }
        }
    }

    proptest! {
        #[test]
        fn ex21_alpha_is_respected(alpha in 0.0f64..0.99, zb in 0.0f64..5.0) {
            let e = Builtin::Ex21 { alpha }.expr();
            let zero = [0.0];
            let zbv = [zb];
            let got = evaluate(&e, &Bindings::new(0.0, &zero, &zero, &zero, &zbv, 1)).unwrap()[0];
            prop_assert!((got - (1.0 + zb.powf(1.0 + alpha))).abs() < 1e-12 * got);
        }
    }
}
