//! Symbolic differentiation.

use super::{add, div, func, mul, neg, pow, sub, Expr, Func};

/// Partial derivative of `e` with respect to variable position `var`,
/// simplified by the smart constructors.
pub fn diff_expr(e: &Expr, var: usize) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(diff_expr(a, var)),
        Expr::Add(a, b) => add(diff_expr(a, var), diff_expr(b, var)),
        Expr::Sub(a, b) => sub(diff_expr(a, var), diff_expr(b, var)),
        Expr::Mul(a, b) => add(
            mul(diff_expr(a, var), (**b).clone()),
            mul((**a).clone(), diff_expr(b, var)),
        ),
        Expr::Div(a, b) => {
            let (da, db) = (diff_expr(a, var), diff_expr(b, var));
            if db.is_const(0.0) {
                return div(da, (**b).clone());
            }
            div(
                sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                pow((**b).clone(), 2),
            )
        }
        Expr::Pow(a, k) => {
            let da = diff_expr(a, var);
            if da.is_const(0.0) {
                return Expr::Const(0.0);
            }
            mul(mul(Expr::Const(*k as f64), pow((**a).clone(), k - 1)), da)
        }
        Expr::Func(f, a) => {
            let da = diff_expr(a, var);
            if da.is_const(0.0) {
                return Expr::Const(0.0);
            }
            let a = (**a).clone();
            let outer = match f {
                Func::Sin => func(Func::Cos, a),
                Func::Cos => neg(func(Func::Sin, a)),
                Func::Exp => func(Func::Exp, a),
                Func::Log => return div(da, a),
                Func::Sqrt => return div(da, mul(Expr::Const(2.0), func(Func::Sqrt, a))),
                Func::Tanh => sub(Expr::Const(1.0), pow(func(Func::Tanh, a), 2)),
            };
            mul(outer, da)
        }
    }
}
