mod common;

use common::*;
use kurzweil::expr::{parse, BinOp, Constant, Expr, ExprKind, Func};
use kurzweil::{kh_integrate, Integrand};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        any::<f64>()
            .prop_filter("finite", |v| v.is_finite())
            .prop_map(|v| Expr::num(v.abs())),
        (0u32..100).prop_map(|n| Expr::num(n as f64)),
        prop_oneof![Just('x'), Just('y')].prop_map(|c| Expr::new(ExprKind::Var(c))),
        prop_oneof![Just(Constant::Pi), Just(Constant::E)].prop_map(|c| Expr::new(ExprKind::Const(c))),
    ]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(6, 64, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow)
        ];
        prop_oneof![
            inner.clone().prop_map(Expr::neg),
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::bin(o, a, b)),
            (proptest::sample::select(Func::ALL.to_vec()), inner).prop_map(|(f, a)| Expr::call(f, a)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_then_parse_is_identity(e in tree()) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &e, "{}", text);
    }
}

#[test]
fn flagship_text_matches_library_integrand() {
    let e = parse("2*x*sin(1/x^2) - (2/x)*cos(1/x^2)").unwrap();
    let f = e.compile(20);
    for k in 1..200 {
        let x = k as f64 / 199.0;
        let (a, b) = (f(x), flagship_fn(x));
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{x}");
    }
    let g = Integrand::from_arc(unit(), f).with_singular_points([0.0]).unwrap();
    let r = kh_integrate(&g, &unit(), 1e-6).unwrap();
    assert!((r.value - 1f64.sin()).abs() < 1e-6);
}

#[test]
fn constant_pi() {
    let e = parse("sin(2*pi*x)").unwrap();
    let ExprKind::Call(Func::Sin, arg) = &e.kind else {
        panic!("{e:?}")
    };
    let ExprKind::Bin(BinOp::Mul, lhs, _) = &arg.kind else {
        panic!("{arg:?}")
    };
    assert_eq!(
        lhs.kind,
        ExprKind::Bin(BinOp::Mul, Box::new(Expr::num(2.0)), Box::new(Expr::new(ExprKind::Const(Constant::Pi))))
    );
}

#[test]
fn trailing_operator_reports_end_offset() {
    let e = parse("x +").unwrap_err();
    assert_eq!(e.offset, 3);
    assert_eq!(e.found, "end of input");
}

#[test]
fn cantor_at_triadic_points() {
    let e = parse("cantor(x)").unwrap();
    for (x, v) in [(1.0 / 3.0, 0.5), (2.0 / 3.0, 0.5), (1.0 / 9.0, 0.25), (7.0 / 9.0, 0.75)] {
        assert!((e.eval(x).unwrap() - v).abs() < 1e-15, "{x}");
    }
}
