//! Text format for classical polynomials.
//!
//! ```text
//! expr   := ('+'|'-')? term (('+'|'-') term)*
//! term   := coeff ('*' factor)* | factor ('*' factor)*
//! factor := var ('^' uint)?
//! var    := ('phi' | 'pi' | 'phidot') uint
//! coeff  := decimal literal, optional exponent part
//! ```

use crate::algebra::classical::{ClassicalPoly, Var, VarKind};
use crate::algebra::operator::DEFAULT_MAX_DEGREE;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Var(Var),
    Plus,
    Minus,
    Star,
    Caret,
    Uint(u64),
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    column: usize,
    after_caret: bool,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { chars: src.char_indices().peekable(), src, line: 1, column: 1, after_caret: false }
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let next = self.chars.next();
        if let Some((_, ch)) = next {
            if ch == '\n' {
                self.line += 1;
                self.column = 1;
            } else {
                self.column += 1;
            }
        }
        next
    }

    fn take_while<F: Fn(char) -> bool>(&mut self, start: usize, pred: F) -> &'a str {
        let mut end = start;
        while let Some(&(i, ch)) = self.chars.peek() {
            if !pred(ch) {
                break;
            }
            end = i + ch.len_utf8();
            self.bump();
        }
        &self.src[start..end]
    }

    fn syntax(&self, line: usize, column: usize, message: impl Into<String>) -> Error {
        Error::Syntax { line, column, message: message.into() }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>> {
        let mut out = Vec::new();
        while let Some(&(start, ch)) = self.chars.peek() {
            let (line, column) = (self.line, self.column);
            if ch.is_whitespace() {
                self.bump();
                continue;
            }
            let tok = match ch {
                '+' => {
                    self.bump();
                    Tok::Plus
                }
                '-' => {
                    self.bump();
                    Tok::Minus
                }
                '*' => {
                    self.bump();
                    Tok::Star
                }
                '^' => {
                    self.bump();
                    self.after_caret = true;
                    out.push(Spanned { tok: Tok::Caret, line, column });
                    continue;
                }
                c if c.is_ascii_digit() && self.after_caret => {
                    let text = self.take_while(start, |c| c.is_ascii_digit());
                    let value = text.parse::<u64>().map_err(|_| Error::ExponentOverflow {
                        exponent: u64::MAX,
                        max: DEFAULT_MAX_DEGREE,
                        line,
                        column,
                    })?;
                    Tok::Uint(value)
                }
                c if c.is_ascii_digit() || c == '.' => self.number(start, line, column)?,
                c if c.is_ascii_alphabetic() => {
                    let name = self.take_while(start, |c| c.is_ascii_alphabetic());
                    let digits_start = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len());
                    let digits = self.take_while(digits_start, |c| c.is_ascii_digit());
                    let unknown = || Error::UnknownVariable { name: format!("{name}{digits}"), line, column };
                    let kind = match name {
                        "phi" => VarKind::Phi,
                        "pi" => VarKind::Pi,
                        "phidot" => VarKind::PhiDot,
                        _ => return Err(unknown()),
                    };
                    let mode: usize = digits.parse().map_err(|_| unknown())?;
                    if mode == 0 {
                        return Err(unknown());
                    }
                    Tok::Var(Var { kind, mode })
                }
                other => return Err(self.syntax(line, column, format!("unexpected character '{other}'"))),
            };
            self.after_caret = false;
            out.push(Spanned { tok, line, column });
        }
        Ok(out)
    }

    fn number(&mut self, start: usize, line: usize, column: usize) -> Result<Tok> {
        let mut end = start;
        let mut seen_exp = false;
        let mut prev = ' ';
        while let Some(&(i, ch)) = self.chars.peek() {
            let ok = ch.is_ascii_digit()
                || ch == '.'
                || (!seen_exp && (ch == 'e' || ch == 'E'))
                || ((ch == '+' || ch == '-') && (prev == 'e' || prev == 'E'));
            if !ok {
                break;
            }
            if ch == 'e' || ch == 'E' {
                seen_exp = true;
            }
            prev = ch;
            end = i + ch.len_utf8();
            self.bump();
        }
        let text = &self.src[start..end];
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Tok::Num)
            .ok_or_else(|| self.syntax(line, column, format!("invalid number '{text}'")))
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
    modes: Option<usize>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|s| (s.line, s.column)).unwrap_or(self.end)
    }

    fn error(&self, message: &str) -> Error {
        let (line, column) = self.here();
        Error::Syntax { line, column, message: message.to_string() }
    }

    fn expr(&mut self) -> Result<Vec<(f64, Vec<(Var, u32)>)>> {
        let mut terms = Vec::new();
        let mut sign = match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                -1.0
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                1.0
            }
            _ => 1.0,
        };
        loop {
            let (c, f) = self.term()?;
            terms.push((sign * c, f));
            match self.peek() {
                None => break,
                Some(Tok::Plus) => sign = 1.0,
                Some(Tok::Minus) => sign = -1.0,
                Some(_) => return Err(self.error("expected '+', '-', '*' or end of input")),
            }
            self.pos += 1;
        }
        Ok(terms)
    }

    fn term(&mut self) -> Result<(f64, Vec<(Var, u32)>)> {
        let mut coeff = 1.0;
        let mut factors = Vec::new();
        match self.peek() {
            Some(Tok::Num(v)) => {
                coeff = *v;
                self.pos += 1;
            }
            Some(Tok::Var(_)) => factors.push(self.factor()?),
            _ => return Err(self.error("expected a coefficient or variable")),
        }
        while let Some(Tok::Star) = self.peek() {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        Ok((coeff, factors))
    }

    fn factor(&mut self) -> Result<(Var, u32)> {
        let (line, column) = self.here();
        let var = match self.peek() {
            Some(Tok::Var(v)) => *v,
            _ => return Err(self.error("expected a variable")),
        };
        if let Some(n) = self.modes {
            if var.mode > n {
                return Err(Error::UnknownVariable { name: var.to_string(), line, column });
            }
        }
        self.pos += 1;
        let mut exponent = 1u32;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            let (line, column) = self.here();
            match self.peek() {
                Some(Tok::Uint(e)) => {
                    if *e as usize > DEFAULT_MAX_DEGREE {
                        return Err(Error::ExponentOverflow {
                            exponent: *e,
                            max: DEFAULT_MAX_DEGREE,
                            line,
                            column,
                        });
                    }
                    exponent = *e as u32;
                    self.pos += 1;
                }
                _ => return Err(self.error("expected an unsigned integer exponent")),
            }
        }
        Ok((var, exponent))
    }
}

fn end_position(text: &str) -> (usize, usize) {
    let line = text.matches('\n').count() + 1;
    let column = text.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    (line, column)
}

fn parse_inner(text: &str, modes: Option<usize>) -> Result<ClassicalPoly> {
    let toks = Lexer::new(text).tokens()?;
    let mut parser = Parser { toks, pos: 0, end: end_position(text), modes };
    let terms = parser.expr()?;
    let n = modes.unwrap_or_else(|| {
        terms.iter().flat_map(|(_, f)| f.iter().map(|(v, _)| v.mode)).max().unwrap_or(1)
    });
    let mut poly = ClassicalPoly::zero(n);
    for (c, factors) in terms {
        // repeated variables in one term accumulate exponents
        let mut acc: std::collections::BTreeMap<Var, u64> = std::collections::BTreeMap::new();
        for (v, e) in &factors {
            *acc.entry(*v).or_insert(0) += u64::from(*e);
        }
        if let Some((v, e)) = acc.iter().find(|(_, &e)| e as usize > DEFAULT_MAX_DEGREE) {
            return Err(Error::ExponentOverflow {
                exponent: *e,
                max: DEFAULT_MAX_DEGREE,
                line: 1,
                column: text.find(&v.to_string()).map(|i| i + 1).unwrap_or(1),
            });
        }
        let m = ClassicalPoly::monomial(n, c, acc.into_iter().map(|(v, e)| (v, e as u32)))?;
        poly = poly.add(&m)?;
    }
    Ok(poly)
}

/// Parses a polynomial; the mode count is the largest index that appears.
pub fn parse_poly(text: &str) -> Result<ClassicalPoly> {
    parse_inner(text, None)
}

/// Parses a polynomial over exactly `modes` modes, rejecting larger indices.
pub fn parse_poly_with_modes(text: &str, modes: usize) -> Result<ClassicalPoly> {
    parse_inner(text, Some(modes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let h = parse_poly("0.5*pi1^2 + 0.5*phi1^2").unwrap();
        let want = ClassicalPoly::monomial(1, 0.5, [(Var::pi(1), 2)])
            .unwrap()
            .add(&ClassicalPoly::monomial(1, 0.5, [(Var::phi(1), 2)]).unwrap())
            .unwrap();
        assert_eq!(h, want);
    }

    #[test]
    fn quartic_monomial() {
        let p = parse_poly("phi1^4").unwrap();
        assert_eq!(p, ClassicalPoly::monomial(1, 1.0, [(Var::phi(1), 4)]).unwrap());
    }

    #[test]
    fn mixed_with_constant() {
        let p = parse_poly("2*phi1*pi2 - 1.5").unwrap();
        assert_eq!(p.modes(), 2);
        let want = ClassicalPoly::monomial(2, 2.0, [(Var::phi(1), 1), (Var::pi(2), 1)])
            .unwrap()
            .add(&ClassicalPoly::constant(2, -1.5).unwrap())
            .unwrap();
        assert_eq!(p, want);
    }

    #[test]
    fn phidot_and_whitespace() {
        let p = parse_poly("  phidot1 *\n phi1 ^ 2 ").unwrap();
        assert_eq!(p, ClassicalPoly::monomial(1, 1.0, [(Var::phidot(1), 1), (Var::phi(1), 2)]).unwrap());
    }

    #[test]
    fn syntax_error_position() {
        match parse_poly("phi1 +\n  * pi1") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_poly("phi1 pi1"), Err(Error::Syntax { line: 1, column: 6, .. })));
        assert!(matches!(parse_poly("phi1 +"), Err(Error::Syntax { line: 1, column: 7, .. })));
        assert!(matches!(parse_poly("phi1*2"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn unknown_variable() {
        assert!(matches!(
            parse_poly("0.5*x1^2"),
            Err(Error::UnknownVariable { ref name, line: 1, column: 5 }) if name == "x1"
        ));
        assert!(matches!(parse_poly("phi0"), Err(Error::UnknownVariable { .. })));
        assert!(matches!(parse_poly("phi"), Err(Error::UnknownVariable { .. })));
        assert!(matches!(parse_poly_with_modes("phi3", 2), Err(Error::UnknownVariable { .. })));
    }

    #[test]
    fn exponent_overflow() {
        assert!(matches!(parse_poly("phi1^17"), Err(Error::ExponentOverflow { exponent: 17, .. })));
        assert!(matches!(parse_poly("phi1^99999999999999999999999"), Err(Error::ExponentOverflow { .. })));
        assert!(matches!(parse_poly("phi1^9*phi1^9"), Err(Error::ExponentOverflow { exponent: 18, .. })));
    }

    #[test]
    fn canonical_serializer_round_trips() {
        let p = parse_poly("-0.1*pi1^2 + 0.3333333333333333*phi1*phi2 + 7e-3*phidot2 - 2").unwrap();
        let text = p.to_dsl();
        assert_eq!(parse_poly(&text).unwrap(), p);
        assert!(text.starts_with("-2.0000000000000000e0"), "{text}");
    }
}
