//! Refined signatures of constants.

use crate::ast::{Base, BinOp, Literal, Pred, Prim, RType, Schema};
use crate::surface::{parse_schema_with, Program};

pub fn prim_schema(p: Prim) -> Schema {
    let src = match p {
        Prim::Add => "x:Int -> y:Int -> {v:Int | v = x + y}".to_string(),
        Prim::Sub => "x:Int -> y:Int -> {v:Int | v = x - y}".to_string(),
        Prim::MulBy(k) => {
            let body = Pred::eq(Pred::var("v"), Pred::bin(BinOp::Mul, Pred::Int(k), Pred::var("x")));
            return Schema::Mono(RType::fun("x", RType::trivial(Base::Int), RType::base(Base::Int, "v", body)));
        }
        Prim::Lt => "x:Int -> y:Int -> {v:Bool | v <=> x < y}".to_string(),
        Prim::Le => "x:Int -> y:Int -> {v:Bool | v <=> x <= y}".to_string(),
        Prim::Gt => "x:Int -> y:Int -> {v:Bool | v <=> x > y}".to_string(),
        Prim::Ge => "x:Int -> y:Int -> {v:Bool | v <=> x >= y}".to_string(),
        Prim::Eq => "x:Int -> y:Int -> {v:Bool | v <=> x = y}".to_string(),
        Prim::Ne => "x:Int -> y:Int -> {v:Bool | v <=> x != y}".to_string(),
        Prim::Not => "x:Bool -> {v:Bool | v <=> not x}".to_string(),
        Prim::And => "x:Bool -> y:Bool -> {v:Bool | v <=> (x && y)}".to_string(),
        Prim::Or => "x:Bool -> y:Bool -> {v:Bool | v <=> (x || y)}".to_string(),
        Prim::Assert => "forall a. {v:Bool | v} -> a -> a".to_string(),
    };
    parse_schema_with(&src, &Program::default()).expect("primitive signature parses")
}

/// Type of a literal; constants are singletons.
pub fn literal_schema(l: &Literal) -> Schema {
    match l {
        Literal::Int(n) => Schema::Mono(RType::base(Base::Int, "v", Pred::eq(Pred::var("v"), Pred::Int(*n)))),
        Literal::Bool(true) => Schema::Mono(RType::base(Base::Bool, "v", Pred::var("v"))),
        Literal::Bool(false) => Schema::Mono(RType::base(Base::Bool, "v", Pred::not(Pred::var("v")))),
        Literal::Prim(p) => prim_schema(*p),
    }
}
