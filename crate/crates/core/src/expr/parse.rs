use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};

use super::core::{sqrt_rational, Atom, Expr, Q};
use super::{ExprError, SymbolTable};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Q),
    Ident(String, u8),
    Op(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let b = text.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && i + 1 < b.len() && b[i + 1].is_ascii_digit()) {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let int_part = &text[start..i];
            let mut value = if int_part.is_empty() {
                Q::from_integer(BigInt::from(0))
            } else {
                Q::from_integer(int_part.parse::<BigInt>().unwrap())
            };
            if i < b.len() && b[i] == b'.' {
                i += 1;
                let fs = i;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                let frac = &text[fs..i];
                if !frac.is_empty() {
                    let num: BigInt = frac.parse().unwrap();
                    let den = num_traits::pow(BigInt::from(10), frac.len());
                    value += Q::new(num, den);
                }
            }
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            let name = text[start..i].to_string();
            let mut primes = 0u8;
            while i < b.len() && b[i] == b'\'' {
                primes += 1;
                i += 1;
            }
            out.push((Tok::Ident(name, primes), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(ExprError::Syntax {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

impl Lexer {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn next(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: &str) -> Result<T, ExprError> {
        let msg = if *self.peek() == Tok::End {
            format!("{msg}; unexpected end of input")
        } else {
            msg.to_string()
        };
        Err(ExprError::Syntax { pos: self.at(), msg })
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Op(c) {
            self.next();
            Ok(())
        } else {
            self.err(&format!("expected `{c}`"))
        }
    }
}

pub fn parse(text: &str, table: &SymbolTable) -> Result<Expr, ExprError> {
    let mut lx = Lexer {
        toks: lex(text)?,
        pos: 0,
    };
    let e = expr(&mut lx, table)?;
    if *lx.peek() != Tok::End {
        return lx.err("unexpected token");
    }
    Ok(e)
}

fn expr(lx: &mut Lexer, t: &SymbolTable) -> Result<Expr, ExprError> {
    let mut acc = term(lx, t)?;
    loop {
        match lx.peek() {
            Tok::Op('+') => {
                lx.next();
                acc = acc + term(lx, t)?;
            }
            Tok::Op('-') => {
                lx.next();
                acc = acc - term(lx, t)?;
            }
            _ => return Ok(acc),
        }
    }
}

fn term(lx: &mut Lexer, t: &SymbolTable) -> Result<Expr, ExprError> {
    let mut acc = unary(lx, t)?;
    loop {
        match lx.peek() {
            Tok::Op('*') => {
                lx.next();
                acc = acc * unary(lx, t)?;
            }
            Tok::Op('/') => {
                lx.next();
                let rhs = unary(lx, t)?;
                acc = acc.div(&rhs)?;
            }
            _ => return Ok(acc),
        }
    }
}

fn unary(lx: &mut Lexer, t: &SymbolTable) -> Result<Expr, ExprError> {
    match lx.peek() {
        Tok::Op('-') => {
            lx.next();
            Ok(-unary(lx, t)?)
        }
        Tok::Op('+') => {
            lx.next();
            unary(lx, t)
        }
        _ => power(lx, t),
    }
}

fn exponent(lx: &mut Lexer) -> Result<i32, ExprError> {
    let paren = *lx.peek() == Tok::Op('(');
    if paren {
        lx.next();
    }
    let neg = *lx.peek() == Tok::Op('-');
    if neg {
        lx.next();
    }
    let pos = lx.at();
    let n = match lx.next().0 {
        Tok::Num(v) if v.is_integer() => v.to_integer().to_i32(),
        _ => None,
    };
    let Some(n) = n else {
        return Err(ExprError::Syntax {
            pos,
            msg: "exponent must be an integer".into(),
        });
    };
    if paren {
        lx.expect(')')?;
    }
    Ok(if neg { -n } else { n })
}

fn power(lx: &mut Lexer, t: &SymbolTable) -> Result<Expr, ExprError> {
    let base = primary(lx, t)?;
    if *lx.peek() == Tok::Op('^') {
        lx.next();
        let e = exponent(lx)?;
        return base.pow(e);
    }
    Ok(base)
}

fn primary(lx: &mut Lexer, t: &SymbolTable) -> Result<Expr, ExprError> {
    let (tok, pos) = lx.next();
    match tok {
        Tok::Num(v) => Ok(Expr::constant(v)),
        Tok::Op('(') => {
            let e = expr(lx, t)?;
            lx.expect(')')?;
            Ok(e)
        }
        Tok::Ident(name, 0) if (name == "exp" || name == "sqrt") && *lx.peek() == Tok::Op('(') => {
            lx.next();
            let arg = expr(lx, t)?;
            lx.expect(')')?;
            if name == "exp" {
                Ok(Expr::exp(&arg))
            } else {
                match arg.as_rational() {
                    Some(r) if !r.is_negative() => sqrt_rational(&r),
                    _ => Err(ExprError::Syntax {
                        pos,
                        msg: "sqrt takes a non-negative rational constant".into(),
                    }),
                }
            }
        }
        Tok::Ident(name, primes) => {
            let atom = t.lookup(&name).ok_or_else(|| ExprError::Undeclared(name.clone()))?;
            if primes == 0 {
                return Ok(Expr::atom(atom.clone()));
            }
            match atom {
                Atom::Fun(s, 0) => {
                    if primes > t.cap {
                        return Err(ExprError::OrderCap {
                            name: name.clone(),
                            cap: t.cap,
                        });
                    }
                    Ok(Expr::atom(Atom::Fun(s.clone(), primes)))
                }
                _ => Err(ExprError::Syntax {
                    pos,
                    msg: format!("`{name}` is not a function of t"),
                }),
            }
        }
        Tok::End => Err(ExprError::Syntax {
            pos,
            msg: "unexpected end of input".into(),
        }),
        Tok::Op(c) => Err(ExprError::Syntax {
            pos,
            msg: format!("unexpected `{c}`"),
        }),
    }
}
