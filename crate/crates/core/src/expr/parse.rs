use super::{Expr, Func};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
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
            let text = &src[start..i];
            let value = text.parse::<f64>().map_err(|_| Error::Syntax {
                pos: start,
                msg: format!("malformed number `{text}`"),
            })?;
            out.push((start, Token::Number(value)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Token::Op(c),
                '(' => Token::LParen,
                ')' => Token::RParen,
                _ => {
                    return Err(Error::Syntax {
                        pos: start,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push((start, tok));
            i += c.len_utf8();
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, tok: Token, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Op('+')) => {
                    self.pos += 1;
                    lhs = lhs + self.term()?;
                }
                Some(Token::Op('-')) => {
                    self.pos += 1;
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Op('*')) => {
                    self.pos += 1;
                    lhs = lhs * self.unary()?;
                }
                Some(Token::Op('/')) => {
                    self.pos += 1;
                    lhs = lhs / self.unary()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Token::Op('^')) {
            self.pos += 1;
            let exponent = self.exponent()?;
            Ok(base.powi(exponent))
        } else {
            Ok(base)
        }
    }

    fn exponent(&mut self) -> Result<i32> {
        let parenthesized = self.peek() == Some(&Token::LParen);
        if parenthesized {
            self.pos += 1;
        }
        let sign = match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                -1
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                1
            }
            _ => 1,
        };
        let at = self.offset();
        let value = match self.next() {
            Some(Token::Number(v)) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
            _ => {
                return Err(Error::Syntax {
                    pos: at,
                    msg: "exponent must be an integer literal".into(),
                })
            }
        };
        if parenthesized {
            self.expect(Token::RParen, "`)`")?;
        }
        Ok(sign * value)
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.next() {
            Some(Token::Number(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Token::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Token::RParen, "`)`")?;
                    return Ok(Expr::apply(func, arg));
                }
                match variable_index(&name) {
                    Some(k) if k >= 1 && k <= self.dim => Ok(Expr::Var(k - 1)),
                    Some(k) => Err(Error::VariableOutOfRange {
                        index: k,
                        dim: self.dim,
                        pos: at,
                    }),
                    None => Err(Error::UnknownIdentifier { name, pos: at }),
                }
            }
            Some(tok) => Err(Error::Syntax {
                pos: at,
                msg: format!("unexpected token {tok:?}"),
            }),
            None => Err(Error::Syntax {
                pos: at,
                msg: "unexpected end of input".into(),
            }),
        }
    }
}

fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Parses `src` as an expression over `x1..x{dim}`.
pub fn parse(src: &str, dim: usize) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: src.len(),
        dim,
    };
    let e = parser.expr()?;
    if parser.pos < parser.tokens.len() {
        return parser.error("unexpected trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_forms() {
        assert_eq!(parse("x1^2 + x2^2", 2).unwrap().eval(&[1.0, 2.0]).unwrap(), 5.0);
        assert!(parse("sin(x1)", 1).is_ok());
        let sphere = parse("4/(1+x1^2+x2^2)^2", 2).unwrap();
        assert_eq!(sphere.eval(&[0.0, 0.0]).unwrap(), 4.0);
    }

    #[test]
    fn precedence_and_signs() {
        let p = [3.0];
        assert_eq!(parse("-x1^2", 1).unwrap().eval(&p).unwrap(), -9.0);
        assert_eq!(parse("2*x1^-1", 1).unwrap().eval(&p).unwrap(), 2.0 / 3.0);
        assert_eq!(parse("2^(-1)", 1).unwrap().eval(&p).unwrap(), 0.5);
        assert_eq!(parse("1 - 2 - 3", 1).unwrap().eval(&p).unwrap(), -4.0);
        assert_eq!(parse("8/2/2", 1).unwrap().eval(&p).unwrap(), 2.0);
        assert_eq!(parse("1.5e1 + .5", 1).unwrap().eval(&p).unwrap(), 15.5);
        assert_eq!(parse("2.5E-1", 1).unwrap().eval(&p).unwrap(), 0.25);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            parse("x1 + * 2", 1),
            Err(Error::Syntax {
                pos: 5,
                msg: "unexpected token Op('*')".into()
            })
        );
        assert_eq!(
            parse("x1 + y", 1),
            Err(Error::UnknownIdentifier {
                name: "y".into(),
                pos: 5
            })
        );
        assert_eq!(
            parse("x3", 2),
            Err(Error::VariableOutOfRange {
                index: 3,
                dim: 2,
                pos: 0
            })
        );
        assert!(matches!(parse("x0", 2), Err(Error::VariableOutOfRange { index: 0, .. })));
        assert!(matches!(parse("x1^1.5", 1), Err(Error::Syntax { pos: 3, .. })));
        assert!(matches!(parse("(x1", 1), Err(Error::Syntax { pos: 3, .. })));
        assert!(matches!(parse("x1 x2", 2), Err(Error::Syntax { pos: 3, .. })));
        assert!(matches!(parse("x1 # 2", 1), Err(Error::Syntax { pos: 3, .. })));
        assert!(matches!(parse("", 1), Err(Error::Syntax { pos: 0, .. })));
        assert!(matches!(parse("sin x1", 1), Err(Error::Syntax { .. })));
    }
}
