//! Scalar expressions over the tangent-bundle chart `(x1..xn, u1..un)`.
//!
//! Grammar, loosest binding first:
//!
//! | level | forms                       | associativity |
//! |-------|-----------------------------|---------------|
//! | 1     | `a + b`, `a - b`            | left          |
//! | 2     | `a * b`, `a / b`            | left          |
//! | 3     | `-a`                        | prefix        |
//! | 4     | `a ^ k` (`k` integer literal, optional sign) | left |
//! | 5     | number, `xI`, `uI`, `pi`, `f(a)`, `(a)` |      |
//!
//! Functions: `sin cos tan exp log sqrt sinh cosh tanh`. There is no
//! implicit multiplication.

use std::fmt;

use thiserror::Error;

use crate::jets::{ElemFn, Jet, JetError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// Base coordinate `xI`.
    Base,
    /// Fiber coordinate `uI`.
    Fiber,
}

/// A chart variable; `index` is zero-based (`x1` has index 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    pub kind: VarKind,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Func(ElemFn, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable `{name}` at offset {offset} is out of range for dimension {dimension}")]
    VariableOutOfRange {
        offset: usize,
        name: String,
        dimension: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::VariableOutOfRange { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{expr}`: {source}")]
    Domain {
        expr: String,
        #[source]
        source: JetError,
    },
    #[error("expression uses fiber variable u{} but no fiber coordinates were supplied", .0 + 1)]
    MissingFiber(usize),
    #[error("point has {got} coordinates, expected {expected}")]
    PointLength { expected: usize, got: usize },
}

/// Parse `source` for a chart of dimension `n`.
pub fn parse(source: &str, n: usize) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        src: source.as_bytes(),
        pos: 0,
        n,
    };
    parser.skip_ws();
    if parser.pos >= parser.src.len() {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let expr = parser.sum()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.syntax("unexpected trailing input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.primary()?;
        while self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.integer_exponent()?;
            base = Expr::Pow(Box::new(base), exp);
        }
        Ok(base)
    }

    fn integer_exponent(&mut self) -> Result<i32, ParseError> {
        let start = match self.peek() {
            Some(_) => self.pos,
            None => return Err(self.syntax("expected integer exponent")),
        };
        let mut negative = false;
        if self.src[self.pos] == b'-' || self.src[self.pos] == b'+' {
            negative = self.src[self.pos] == b'-';
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            self.pos = start;
            return Err(self.syntax("exponent must be an integer literal"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'.' | b'e' | b'E') {
            self.pos = start;
            return Err(self.syntax("exponent must be an integer literal"));
        }
        let text = std::str::from_utf8(&self.src[digits_start..self.pos]).expect("ascii digits");
        let magnitude: i32 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: "exponent too large".into(),
        })?;
        Ok(if negative { -magnitude } else { magnitude })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let c = match self.peek() {
            Some(c) => c,
            None => return Err(self.syntax("unexpected end of input")),
        };
        if c == b'(' {
            self.pos += 1;
            let inner = self.sum()?;
            if self.peek() != Some(b')') {
                return Err(self.syntax("expected `)`"));
            }
            self.pos += 1;
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            return self.identifier();
        }
        Err(self.syntax(&format!("unexpected `{}`", c as char)))
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut mantissa = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            mantissa += digits(self);
        }
        if mantissa == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(self.syntax("malformed exponent in number"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Const(v)),
            _ => Err(ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            }),
        }
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        if let Some(func) = ElemFn::from_name(name) {
            if self.peek() != Some(b'(') {
                return Err(self.syntax(&format!("expected `(` after `{name}`")));
            }
            self.pos += 1;
            let arg = self.sum()?;
            if self.peek() != Some(b')') {
                return Err(self.syntax("expected `)`"));
            }
            self.pos += 1;
            return Ok(Expr::Func(func, Box::new(arg)));
        }
        if name == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        let kind = match name.as_bytes()[0] {
            b'x' => Some(VarKind::Base),
            b'u' => Some(VarKind::Fiber),
            _ => None,
        };
        let digits = &name[1..];
        match kind {
            Some(kind)
                if !digits.is_empty()
                    && digits.bytes().all(|b| b.is_ascii_digit())
                    && !(digits.len() > 1 && digits.starts_with('0')) =>
            {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.n {
                    return Err(ParseError::VariableOutOfRange {
                        offset: start,
                        name: name.to_string(),
                        dimension: self.n,
                    });
                }
                Ok(Expr::Var(Var {
                    kind,
                    index: index - 1,
                }))
            }
            _ => Err(ParseError::UnknownIdentifier {
                offset: start,
                name: name.to_string(),
            }),
        }
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    /// True if no fiber variable appears.
    pub fn is_base_only(&self) -> bool {
        !self.any_var(&|v| v.kind == VarKind::Fiber)
    }

    fn any_var(&self, pred: &dyn Fn(&Var) -> bool) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => pred(v),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.any_var(pred),
            Expr::Binary(_, a, b) => a.any_var(pred) || b.any_var(pred),
        }
    }

    /// Largest one-based variable index referenced, 0 if none.
    pub fn max_var_index(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(v) => v.index + 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.max_var_index(),
            Expr::Binary(_, a, b) => a.max_var_index().max(b.max_var_index()),
        }
    }

    /// Literal zero constant.
    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Evaluate with the given jets bound to the base and fiber variables.
    /// `fiber` may be empty when the expression is base-only.
    pub fn eval_with(&self, base: &[Jet], fiber: &[Jet]) -> Result<Jet, EvalError> {
        let template = base
            .first()
            .or_else(|| fiber.first())
            .expect("at least one variable jet");
        self.eval_inner(base, fiber, template)
    }

    fn eval_inner(&self, base: &[Jet], fiber: &[Jet], template: &Jet) -> Result<Jet, EvalError> {
        let domain = |source: JetError| EvalError::Domain {
            expr: self.to_string(),
            source,
        };
        match self {
            Expr::Const(c) => Ok(template.constant_like(*c)),
            Expr::Var(v) => match v.kind {
                VarKind::Base => Ok(base[v.index].clone()),
                VarKind::Fiber => fiber
                    .get(v.index)
                    .cloned()
                    .ok_or(EvalError::MissingFiber(v.index)),
            },
            Expr::Neg(a) => Ok(-&a.eval_inner(base, fiber, template)?),
            Expr::Binary(op, a, b) => {
                let a = a.eval_inner(base, fiber, template)?;
                let b = b.eval_inner(base, fiber, template)?;
                Ok(match op {
                    BinOp::Add => &a + &b,
                    BinOp::Sub => &a - &b,
                    BinOp::Mul => &a * &b,
                    BinOp::Div => a.div(&b).map_err(domain)?,
                })
            }
            Expr::Pow(a, k) => a.eval_inner(base, fiber, template)?.powi(*k).map_err(domain),
            Expr::Func(f, a) => a
                .eval_inner(base, fiber, template)?
                .compose(*f)
                .map_err(domain),
        }
    }

    /// Plain value at `point = (x1..xn, u1..un)`.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        Ok(eval_jet(self, point, 0)?.value())
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

/// Taylor expansion of `e` at `point = (x1..xn, u1..un)` to the given order,
/// in all `2n` chart variables.
pub fn eval_jet(e: &Expr, point: &[f64], order: u8) -> Result<Jet, EvalError> {
    if !point.len().is_multiple_of(2) || point.len() / 2 < e.max_var_index() || point.is_empty() {
        return Err(EvalError::PointLength {
            expected: 2 * e.max_var_index().max(1),
            got: point.len(),
        });
    }
    let vars = Jet::variables(point, order);
    let n = point.len() / 2;
    e.eval_with(&vars[..n], &vars[n..])
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.kind {
            VarKind::Base => 'x',
            VarKind::Fiber => 'u',
        };
        write!(f, "{}{}", prefix, self.index + 1)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool| {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                wrap(f, a, a.precedence() < 3)
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                wrap(f, a, a.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                // right operand of a left-associative op needs parens at equal precedence
                wrap(f, b, b.precedence() <= p)
            }
            Expr::Pow(a, k) => {
                wrap(f, a, a.precedence() < 5)?;
                write!(f, "^{k}")
            }
            Expr::Func(func, a) => write!(f, "{func}({a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::Var(Var {
            kind: VarKind::Base,
            index: i,
        })
    }

    fn u(i: usize) -> Expr {
        Expr::Var(Var {
            kind: VarKind::Fiber,
            index: i,
        })
    }

    #[test]
    fn parses_power_of_function() {
        let e = parse("sin(x1)^2", 2).unwrap();
        assert_eq!(e, Expr::Pow(Box::new(Expr::Func(ElemFn::Sin, Box::new(x(0)))), 2));
    }

    #[test]
    fn addition_is_left_associative() {
        let e = parse("1+u1^2+u2^2", 2).unwrap();
        let want = Expr::Binary(
            BinOp::Add,
            Box::new(Expr::Binary(
                BinOp::Add,
                Box::new(Expr::Const(1.0)),
                Box::new(Expr::Pow(Box::new(u(0)), 2)),
            )),
            Box::new(Expr::Pow(Box::new(u(1)), 2)),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn malformed_operator_offset() {
        let err = parse("1+*2", 2).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 2, .. }), "{err:?}");
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse("-x1^2", 1).unwrap();
        assert_eq!(e, Expr::Neg(Box::new(Expr::Pow(Box::new(x(0)), 2))));
        assert_eq!(e.eval(&[3.0, 0.0]).unwrap(), -9.0);
    }

    #[test]
    fn identifier_errors() {
        assert!(matches!(parse("y1", 2), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse("x3", 2), Err(ParseError::VariableOutOfRange { offset: 0, .. })));
        assert!(matches!(parse("x0", 2), Err(ParseError::VariableOutOfRange { .. })));
        assert!(matches!(parse("x1^1.5", 2), Err(ParseError::Syntax { offset: 3, .. })));
        assert!(matches!(parse("   ", 2), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn product_jet() {
        let e = parse("x1*x2", 2).unwrap();
        let j = eval_jet(&e, &[2.0, 3.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(j.value(), 6.0);
        assert_eq!(j.partial(0), 3.0);
        assert_eq!(j.partial(1), 2.0);
    }

    #[test]
    fn sin_squared_jet() {
        let e = parse("sin(x1)^2", 2).unwrap();
        let p = std::f64::consts::FRAC_PI_4;
        let j = eval_jet(&e, &[p, 0.0, 0.0, 0.0], 2).unwrap();
        assert!((j.value() - 0.5).abs() < 1e-15);
        assert!((j.partial(0) - 1.0).abs() < 1e-15);
        assert!(j.second(0, 0).abs() < 1e-15);
    }

    #[test]
    fn division_by_zero_names_subexpression() {
        let e = parse("1/x2", 2).unwrap();
        let err = eval_jet(&e, &[1.0, 0.0, 0.0, 0.0], 2).unwrap_err();
        match err {
            EvalError::Domain { expr, source } => {
                assert_eq!(expr, "1 / x2");
                assert_eq!(source, JetError::DivisionByZero);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn printing_parenthesizes_minimally() {
        for (src, printed) in [
            ("1-(2-3)", "1 - (2 - 3)"),
            ("(1-2)-3", "1 - 2 - 3"),
            ("(x1+1)^2", "(x1 + 1)^2"),
            ("-(x1+1)", "-(x1 + 1)"),
            ("2/(x1*x2)", "2 / (x1 * x2)"),
            ("(-x1)^2", "(-x1)^2"),
            ("x1^-2", "x1^-2"),
        ] {
            assert_eq!(parse(src, 2).unwrap().to_string(), printed);
        }
    }
}
