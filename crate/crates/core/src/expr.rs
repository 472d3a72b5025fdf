//! Closed-form real fields of `(t, x)`.
//!
//! Coin angles are configured as small infix expressions such as
//! `1 + 0.1*sin(t - x)`. The grammar is a calculator: literals, the symbols
//! `t` and `x`, the constants `pi` and `e`, the binary operators
//! `+ - * / ^`, unary negation, and the functions
//! `sin cos tan exp ln sqrt abs`.
//!
//! Precedence, loosest first: `+ -`, then `* /`, then unary minus, then `^`.
//! All binary operators associate to the left except `^`.
//!
//! ```
//! use qwalk::expr::Expr;
//!
//! let e: Expr = "2^3^2".parse().unwrap();
//! assert_eq!(e.eval(0.0, 0.0).unwrap(), 512.0);
//! let neg: Expr = "-2^2".parse().unwrap();
//! assert_eq!(neg.eval(0.0, 0.0).unwrap(), -4.0);
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Error raised while parsing an expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("invalid number literal `{literal}` at byte {offset}")]
    BadNumber { literal: String, offset: usize },
}

/// Error raised while evaluating an expression at a point.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error in `{subexpr}` at (t = {t}, x = {x}): {reason}")]
pub struct EvalError {
    pub subexpr: String,
    pub reason: String,
    pub t: f64,
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

const NEG_PRECEDENCE: u8 = 3;
const ATOM_PRECEDENCE: u8 = 5;

/// Abstract syntax tree of an angle expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Const(Constant),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call { func: Func, arg: Box<Expr> },
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ExprError> {
        Parser::new(source)?.parse_all()
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        Expr::Call {
            func,
            arg: Box::new(arg),
        }
    }

    /// Evaluates the expression in IEEE double precision.
    ///
    /// Any operation that leaves the reals (logarithm or square root of a
    /// negative number, division by zero, overflow) is reported as an
    /// [`EvalError`] naming the offending subexpression.
    pub fn eval(&self, t: f64, x: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::X) => x,
            Expr::Const(c) => c.value(),
            Expr::Neg(inner) => -inner.eval(t, x)?,
            Expr::Binary { op, lhs, rhs } => {
                let a = lhs.eval(t, x)?;
                let b = rhs.eval(t, x)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(self.domain_error("division by zero", t, x));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call { func, arg } => {
                let a = arg.eval(t, x)?;
                match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Exp => a.exp(),
                    Func::Ln => {
                        if a <= 0.0 {
                            return Err(self.domain_error(
                                &format!("logarithm of non-positive value {a}"),
                                t,
                                x,
                            ));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(self.domain_error(
                                &format!("square root of negative value {a}"),
                                t,
                                x,
                            ));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.domain_error("non-finite result", t, x))
        }
    }

    fn domain_error(&self, reason: &str, t: f64, x: f64) -> EvalError {
        EvalError {
            subexpr: self.to_string(),
            reason: reason.to_string(),
            t,
            x,
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Var(v) => *v == var,
            Expr::Num(_) | Expr::Const(_) => false,
            Expr::Neg(inner) => inner.depends_on(var),
            Expr::Binary { lhs, rhs, .. } => lhs.depends_on(var) || rhs.depends_on(var),
            Expr::Call { arg, .. } => arg.depends_on(var),
        }
    }

    /// True when the expression mentions neither `t` nor `x`.
    pub fn is_constant(&self) -> bool {
        !self.depends_on(Var::T) && !self.depends_on(Var::X)
    }

    /// Value of a constant expression, `None` if it depends on `t` or `x`.
    pub fn constant_value(&self) -> Option<Result<f64, EvalError>> {
        self.is_constant().then(|| self.eval(0.0, 0.0))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Neg(_) => NEG_PRECEDENCE,
            Expr::Binary { op, .. } => op.precedence(),
            _ => ATOM_PRECEDENCE,
        }
    }
}

/// Parses `source` into an [`Expr`].
pub fn parse_angle_expr(source: &str) -> Result<Expr, ExprError> {
    Expr::parse(source)
}

/// Evaluates `e` at `(t, x)`.
pub fn eval_expr(e: &Expr, t: f64, x: f64) -> Result<f64, EvalError> {
    e.eval(t, x)
}

impl FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{})", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Const(Constant::E) => f.write_str("e"),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                write_operand(f, inner, inner.precedence() < NEG_PRECEDENCE)
            }
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                let right_assoc = *op == BinOp::Pow;
                let lhs_parens =
                    lhs.precedence() < p || (right_assoc && lhs.precedence() == p);
                let rhs_parens =
                    rhs.precedence() < p || (!right_assoc && rhs.precedence() == p);
                write_operand(f, lhs, lhs_parens)?;
                if right_assoc {
                    f.write_str(op.symbol())?;
                } else {
                    write!(f, " {} ", op.symbol())?;
                }
                write_operand(f, rhs, rhs_parens)
            }
            Expr::Call { func, arg } => write!(f, "{}({})", func.name(), arg),
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(v) => format!("number {v}"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Op(c) => format!("`{c}`"),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn tokenize(source: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                // exponent only if followed by digits (optionally signed)
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let literal = &source[start..i];
            let value: f64 = literal.parse().map_err(|_| ExprError::BadNumber {
                literal: literal.to_string(),
                offset: start,
            })?;
            if !value.is_finite() {
                return Err(ExprError::BadNumber {
                    literal: literal.to_string(),
                    offset: start,
                });
            }
            tokens.push((Token::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push((Token::Ident(source[start..i].to_string()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Token::Op(c),
                '(' => Token::LParen,
                ')' => Token::RParen,
                _ => {
                    let found = source[start..].chars().next().unwrap_or('?');
                    return Err(ExprError::Syntax {
                        offset: start,
                        expected: "an operand or operator".into(),
                        found: format!("`{found}`"),
                    });
                }
            };
            tokens.push((tok, start));
            i += 1;
        }
    }
    tokens.push((Token::End, source.len()));
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn new(source: &str) -> Result<Self, ExprError> {
        Ok(Parser {
            tokens: tokenize(source)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            expected: expected.to_string(),
            found: self.peek().describe(),
        }
    }

    fn parse_all(&mut self) -> Result<Expr, ExprError> {
        let e = self.parse_sum()?;
        if *self.peek() != Token::End {
            return Err(self.error("an operator or end of input"));
        }
        Ok(e)
    }

    fn parse_sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_product()?;
        loop {
            let op = match self.peek() {
                Token::Op('+') => BinOp::Add,
                Token::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.parse_product()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn parse_product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Token::Op('*') => BinOp::Mul,
                Token::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.parse_unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Token::Op('-') {
            self.advance();
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ExprError> {
        let base = self.parse_atom()?;
        if *self.peek() == Token::Op('^') {
            self.advance();
            // the exponent may itself be negated: 2^-1
            let exponent = self.parse_unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.peek().clone() {
            Token::Num(v) => {
                self.advance();
                Ok(Expr::Num(v))
            }
            Token::LParen => {
                self.advance();
                let e = self.parse_sum()?;
                if *self.peek() != Token::RParen {
                    return Err(self.error("`)`"));
                }
                self.advance();
                Ok(e)
            }
            Token::Ident(name) => {
                self.advance();
                match name.as_str() {
                    "t" => Ok(Expr::Var(Var::T)),
                    "x" => Ok(Expr::Var(Var::X)),
                    "pi" => Ok(Expr::Const(Constant::Pi)),
                    "e" => Ok(Expr::Const(Constant::E)),
                    _ => match Func::from_name(&name) {
                        Some(func) => {
                            if *self.peek() != Token::LParen {
                                return Err(self.error(&format!("`(` after `{name}`")));
                            }
                            self.advance();
                            let arg = self.parse_sum()?;
                            if *self.peek() != Token::RParen {
                                return Err(self.error("`)`"));
                            }
                            self.advance();
                            Ok(Expr::call(func, arg))
                        }
                        None => Err(ExprError::UnknownIdentifier { name, offset }),
                    },
                }
            }
            _ => Err(self.error("a number, `t`, `x`, a constant, a function or `(`")),
        }
    }
}
