use proptest::prelude::*;

use super::*;
use crate::ast::{BinOp, Literal, Prim, TermKind};

fn rapp(p: &str, args: Vec<Pred>) -> Pred {
    Pred::RApp(p.into(), args)
}

#[test]
fn parses_up_closed_bound() {
    let prog = parse_program("bound UpClosed (p :: Int -> Bool) = \\x -> p x => p (x+1)").unwrap();
    let b = &prog.bounds[0];
    assert_eq!(b.name, "UpClosed");
    assert_eq!(b.params, vec![("x".to_string(), None)]);
    let expected = Pred::implies(
        rapp("p", vec![Pred::var("x")]),
        rapp("p", vec![Pred::bin(BinOp::Add, Pred::var("x"), Pred::Int(1))]),
    );
    assert_eq!(b.body, expected);
    let attached = attach_bound(b, &["q".into()], &|_| None, Span::default()).unwrap();
    assert_eq!(attached.params, vec![("x".to_string(), Base::Int)]);
}

#[test]
fn parses_signature_and_definition() {
    let prog = parse_program("val id :: x:Int -> {v:Int | v = x}\nlet id = \\x -> x").unwrap();
    assert_eq!(prog.defs.len(), 1);
    let d = &prog.defs[0];
    assert_eq!(d.name, "id");
    assert!(d.annot.is_some());
    assert!(!d.recursive);
}

#[test]
fn syntax_error_points_at_brace() {
    match parse_program("let bad = \\x -> {oops") {
        Err(SurfaceError::Syntax { span, .. }) => assert_eq!(span, Span::new(1, 17)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn prints_chain_bound() {
    let src = "bound Chain p q r = \\x y z -> q x y => p y z => r x z";
    let prog = parse_program(src).unwrap();
    assert_eq!(print_program(&prog).trim_end(), src);
}

#[test]
fn empty_program_prints_empty() {
    let prog = parse_program("").unwrap();
    assert_eq!(print_program(&prog), "");
}

#[test]
fn abstract_refinement_schema_round_trips() {
    let prog = Program::default();
    let s = parse_schema_with("forall<p::Int->Bool>. Int<p> -> Int<p> -> Int<p>", &prog).unwrap();
    assert_eq!(s.rvar_decls().len(), 1);
    let printed = print_schema(&s);
    let again = parse_schema_with(&printed, &prog).unwrap();
    assert!(schema_alpha_eq(&s, &again), "{printed}");
}

#[test]
fn bounded_schema_fixes_parameter_bases() {
    let src = "bound Chain p q r = \\x y z -> q x y => p y z => r x z\n\
               val compose :: forall <p :: b -> c -> Bool, q :: a -> b -> Bool, r :: a -> c -> Bool>.\n\
               (Chain p q r) => (y:b -> c<p y>) -> (z:a -> b<q z>) -> x:a -> c<r x>\n\
               let compose f g x = f (g x)";
    let prog = parse_program(src).unwrap();
    let s = prog.defs[0].annot.as_ref().unwrap();
    let b = s.bounds()[0];
    let bases: Vec<String> = b.params.iter().map(|(_, b)| b.to_string()).collect();
    assert_eq!(bases, vec!["a", "b", "c"]);
    assert_eq!(s.tyvars().len(), 3);
    let printed = print_program(&prog);
    let again = parse_program(&printed).unwrap();
    assert!(prog.alpha_eq(&again), "{printed}");
}

#[test]
fn binders_are_globally_unique() {
    let prog = parse_program("let f = \\x -> let x = x in x\nlet g = \\x -> x").unwrap();
    let mut all: Vec<String> = Vec::new();
    for d in &prog.defs {
        all.extend(d.body.binders().into_iter().cloned());
    }
    let n = all.len();
    all.sort();
    all.dedup();
    assert_eq!(all.len(), n);
}

#[test]
fn unbound_identifier_is_reported() {
    assert!(matches!(
        parse_program("let f = \\x -> y"),
        Err(SurfaceError::UnboundIdentifier { .. })
    ));
    assert!(matches!(
        parse_program("val f :: {v:Int | g v}\nlet f = 1"),
        Err(SurfaceError::UnboundIdentifier { .. })
    ));
}

#[test]
fn duplicate_definition_is_reported() {
    assert!(matches!(
        parse_program("let f = 1\nlet f = 2"),
        Err(SurfaceError::DuplicateName { .. })
    ));
}

#[test]
fn qualifier_wildcards_are_numbered() {
    let prog = parse_program("qualif Sum(v:Int, *:Int, *:Int): v = * + *").unwrap();
    let q = &prog.qualifiers[0];
    assert_eq!(q.holes.iter().map(|h| h.0.as_str()).collect::<Vec<_>>(), vec!["*0", "*1"]);
    let printed = print_program(&prog);
    assert_eq!(printed.trim_end(), "qualif Sum(v:Int, *:Int, *:Int): v = * + *");
}

#[test]
fn infix_multiplication_needs_literal() {
    let t = parse_term("x * 3").unwrap();
    match &t.kind {
        TermKind::App { fun, .. } => {
            assert_eq!(fun.kind, TermKind::Const(Literal::Prim(Prim::MulBy(3))))
        }
        other => panic!("{other:?}"),
    }
    assert!(parse_term("x * y").is_err());
}

// Random terms over a small grammar for the print/parse round trip.
fn arb_term() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        (-5i64..5).prop_map(|n| if n < 0 { format!("({n})") } else { n.to_string() }),
        Just("true".to_string()),
    ];
    leaf.prop_recursive(5, 40, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} {b})")),
            inner.clone().prop_map(|a| format!("(\\x -> {a})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("(let y = {a} in {b})")),
            (inner.clone(), inner.clone(), inner.clone())
                .prop_map(|(a, b, c)| format!("(if {a} then {b} else {c})")),
            inner.clone().prop_map(|a| format!("({a} * 2)")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("({a} <= {b})")),
        ]
    })
}

proptest! {
    #[test]
    fn term_print_parse_round_trip(src in arb_term()) {
        let t = parse_term(&src).unwrap();
        let printed = print_term(&t);
        let t2 = parse_term(&printed).unwrap();
        prop_assert!(t.alpha_eq(&t2), "{} vs {}", src, printed);
    }

    #[test]
    fn parser_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse_program(&text);
    }

    #[test]
    fn parser_never_panics_on_token_soup(
        toks in proptest::collection::vec(
            prop_oneof![
                Just("let"), Just("val"), Just("x"), Just("="), Just("\\"), Just("->"), Just("{"),
                Just("}"), Just("|"), Just("::"), Just("Int"), Just("forall"), Just("<"), Just(">"),
                Just("("), Just(")"), Just("bound"), Just("1"), Just("*"), Just("qualif"), Just(":"),
            ],
            0..30,
        )
    ) {
        let text = toks.join(" ");
        if let Err(e) = parse_program(&text) {
            prop_assert!(e.span().line >= 1);
        }
    }

    #[test]
    fn parsing_is_deterministic(src in arb_term()) {
        prop_assert_eq!(parse_term(&src).unwrap(), parse_term(&src).unwrap());
    }
}
