use mfbsde::dsl::{
    check_signature, eval_scalar, evaluate, evaluate_batch, parse, BatchBindings, BatchVar,
    BinOp, Bindings, DslError, EvalErrorKind, Expr, ExprKind, Func, GeneratorExpr, Signature,
    Span, Var,
};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0f64..10.0).prop_map(Expr::num),
        prop_oneof![
            Just(Var::S),
            Just(Var::Y),
            Just(Var::Ybar),
            Just(Var::Z),
            Just(Var::Zbar)
        ]
        .prop_map(Expr::var),
        (0usize..2).prop_map(|i| Expr::new(ExprKind::Index(Var::Z, vec![0, i]), Span::default())),
    ]
}

fn node(kind: ExprKind) -> Expr {
    Expr::new(kind, Span::default())
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| node(ExprKind::Neg(Box::new(e)))),
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow)
                ],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| node(ExprKind::Binary(op, Box::new(l), Box::new(r)))),
            (
                prop_oneof![
                    Just(Func::Abs),
                    Just(Func::Sin),
                    Just(Func::Cos),
                    Just(Func::Exp),
                    Just(Func::Norm2)
                ],
                inner.clone()
            )
                .prop_map(|(f, a)| node(ExprKind::Call(f, vec![a]))),
            (prop_oneof![Just(Func::Min), Just(Func::Max)], inner.clone(), inner.clone())
                .prop_map(|(f, a, b)| node(ExprKind::Call(
                    f,
                    vec![
                        node(ExprKind::Call(Func::Norm2, vec![a])),
                        node(ExprKind::Call(Func::Norm2, vec![b]))
                    ]
                ))),
        ]
    })
}

/// Scalar-valued expressions built only from operations that stay finite
/// for bounded inputs.
fn arb_safe_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3.0f64..3.0).prop_map(Expr::num),
        Just(Expr::var(Var::S)),
        Just(Expr::var(Var::Y)),
        Just(Expr::var(Var::Ybar)),
        Just(node(ExprKind::Call(Func::Norm2, vec![Expr::var(Var::Z)]))),
        Just(node(ExprKind::Call(Func::Abs, vec![Expr::var(Var::Zbar)]))),
        Just(node(ExprKind::Index(Var::Z, vec![0, 1]))),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| node(ExprKind::Neg(Box::new(e)))),
            (
                prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul)],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| node(ExprKind::Binary(op, Box::new(l), Box::new(r)))),
            inner.clone().prop_map(|e| node(ExprKind::Binary(
                BinOp::Pow,
                Box::new(node(ExprKind::Call(Func::Abs, vec![e]))),
                Box::new(Expr::num(1.5))
            ))),
            (prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Abs)], inner.clone())
                .prop_map(|(f, a)| node(ExprKind::Call(f, vec![a]))),
            (prop_oneof![Just(Func::Min), Just(Func::Max)], inner.clone(), inner.clone())
                .prop_map(|(f, a, b)| node(ExprKind::Call(f, vec![a, b]))),
            (inner.clone(), inner)
                .prop_map(|(a, b)| node(ExprKind::Binary(
                    BinOp::Div,
                    Box::new(a),
                    Box::new(node(ExprKind::Binary(
                        BinOp::Add,
                        Box::new(Expr::num(1.0)),
                        Box::new(node(ExprKind::Binary(
                            BinOp::Mul,
                            Box::new(b.clone()),
                            Box::new(b)
                        )))
                    )))
                ))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn print_then_parse_is_a_fixed_point(e in arb_expr()) {
        let g = GeneratorExpr { components: vec![e] };
        let printed = g.to_string();
        let reparsed = parse(&printed).unwrap();
        prop_assert_eq!(&reparsed, &g, "printed: {}", printed);
        prop_assert_eq!(reparsed.to_string(), printed);
    }

    #[test]
    fn batch_equals_pointwise(
        e in arb_safe_expr(),
        pts in proptest::collection::vec(
            (0.0f64..2.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..40),
        yb in -3.0f64..3.0,
        zb in -3.0f64..3.0,
    ) {
        let g = GeneratorExpr { components: vec![e] };
        let s = pts[0].0;
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let z0: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let z1: Vec<f64> = pts.iter().map(|p| p.3 * p.4).collect();
        let ybar = [yb];
        let zbar = [zb, -zb];
        let mut bb = BatchBindings::empty(pts.len(), s, 2);
        bb.y = BatchVar::Cols(vec![&y]);
        bb.ybar = BatchVar::Const(&ybar);
        bb.z = BatchVar::Cols(vec![&z0, &z1]);
        bb.zbar = BatchVar::Const(&zbar);
        let batch = evaluate_batch(&g, &bb);
        for p in 0..pts.len() {
            let yp = [y[p]];
            let zp = [z0[p], z1[p]];
            let point = evaluate(&g, &Bindings::new(s, &yp, &ybar, &zp, &zbar, 2));
            match (&batch, point) {
                (Ok(b), Ok(v)) => {
                    let (a, c) = (b[0][p], v[0]);
                    prop_assert!((a - c).abs() <= 1e-14 * c.abs().max(1e-300) || a == c,
                        "{} at point {}: {} vs {}", g, p, a, c);
                }
                (Err(_), _) => {}
                (Ok(_), Err(err)) => prop_assert!(false, "pointwise failed only: {}", err),
            }
        }
    }
}

#[test]
fn domain_errors_name_the_node() {
    let g = parse("1 + 0^(-1)").unwrap();
    let zero = [0.0];
    let err = evaluate(&g, &Bindings::new(0.0, &zero, &zero, &zero, &zero, 1)).unwrap_err();
    assert!(matches!(err.kind, EvalErrorKind::Domain(_)));
    assert_eq!(err.node, "0^-1");
    assert_eq!((err.line, err.col), (1, 6));

    let g = parse("y / ybar").unwrap();
    let err = evaluate(&g, &Bindings::new(0.0, &[1.0], &zero, &zero, &zero, 1)).unwrap_err();
    assert!(err.to_string().contains("division by zero"));

    let g = parse("(-2)^0.5").unwrap();
    assert!(evaluate(&g, &Bindings::new(0.0, &zero, &zero, &zero, &zero, 1)).is_err());
    let g = parse("exp(exp(exp(10)))").unwrap();
    let err = evaluate(&g, &Bindings::new(0.0, &zero, &zero, &zero, &zero, 1)).unwrap_err();
    assert_eq!(err.kind, EvalErrorKind::NonFinite);
}

#[test]
fn constants_ignore_inputs() {
    let g = parse("2*3 - cos(0)").unwrap();
    for v in [-1.0, 0.0, 7.5] {
        let a = [v];
        let b = Bindings::new(v, &a, &a, &a, &a, 1);
        assert_eq!(evaluate(&g, &b).unwrap(), vec![5.0]);
    }
}

#[test]
fn vector_semantics() {
    let z = [3.0, 4.0, 0.0, 1.0];
    let zero2 = [0.0, 0.0];
    let b = Bindings::new(0.0, &zero2, &zero2, &z, &z, 2);
    let e = |t: &str| eval_scalar(&parse(t).unwrap().components[0], &b).unwrap();
    assert_eq!(e("norm2(z)"), 26f64.sqrt());
    assert_eq!(e("abs(z)"), 26f64.sqrt());
    assert_eq!(e("z[1,1]"), 1.0);
    assert_eq!(e("z[1]"), 4.0);
    assert_eq!(e("dot(z, zbar)"), 26.0);
    assert_eq!(e("norm2(2*z - zbar)"), 26f64.sqrt());
    assert!(eval_scalar(&parse("z").unwrap().components[0], &b).is_err());
    assert!(eval_scalar(&parse("z[2,0]").unwrap().components[0], &b).is_err());
}

#[test]
fn signature_checks() {
    let sig = Signature::generator(1, 2);
    assert!(check_signature(&parse("norm2(z) + y").unwrap(), &sig).is_ok());
    assert!(matches!(
        check_signature(&parse("w + y").unwrap(), &sig),
        Err(DslError::VariableNotAllowed { name: "w", .. })
    ));
    assert!(matches!(
        check_signature(&parse("z + 1").unwrap(), &sig),
        Err(DslError::Dimension { .. })
    ));
    assert!(check_signature(&parse("z[0,2]").unwrap(), &sig).is_err());
    assert!(check_signature(&parse("sin(w[0])").unwrap(), &Signature::terminal(2)).is_ok());
    assert!(check_signature(&parse("sin(y)").unwrap(), &Signature::terminal(2)).is_err());
}
