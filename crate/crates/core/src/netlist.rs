//! Loop-charge circuit descriptions.
//!
//! ```text
//! netlist    := (loopdecl | coupledecl)*
//! loopdecl   := "loop" INT "{" elem* "}"
//! coupledecl := "couple" INT INT "{" elem* "}"
//! elem       := ("L" | "C" | "R" | "G") NUMBER
//! ```
//!
//! `#` starts a comment. `L` and `R` belong in loop blocks, `G` in couple
//! blocks, `C` in both (self or coupling capacitance).

use std::fmt::Write as _;

use crate::error::{Error, ParseError, Result};
use crate::linalg::RMatrix;
use crate::model::LagrangianSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct LoopDecl {
    pub index: usize,
    pub l: Option<f64>,
    pub c: Option<f64>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub c: Option<f64>,
    pub g: Option<f64>,
}

/// Loops sorted by index, couplings sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Netlist {
    pub loops: Vec<LoopDecl>,
    pub couplings: Vec<Coupling>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(String),
    Open,
    Close,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    text: String,
}

fn perr(line: usize, column: usize, message: impl Into<String>, token: impl Into<String>) -> Error {
    Error::Parse(ParseError {
        line,
        column,
        message: message.into(),
        token: token.into(),
    })
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for (ln, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
            } else if c == '{' || c == '}' {
                out.push(Token {
                    tok: if c == '{' { Tok::Open } else { Tok::Close },
                    line: ln + 1,
                    col,
                    text: c.to_string(),
                });
                i += 1;
            } else if c.is_ascii_alphabetic() {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Token {
                    tok: Tok::Word(text.clone()),
                    line: ln + 1,
                    col,
                    text,
                });
            } else if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' {
                let start = i;
                while i < chars.len() {
                    let d = chars[i];
                    let exp_sign = (d == '-' || d == '+') && i > start && matches!(chars[i - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign || (i == start && (d == '-' || d == '+')) {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Token {
                    tok: Tok::Number(text.clone()),
                    line: ln + 1,
                    col,
                    text,
                });
            } else {
                return Err(perr(ln + 1, col, "unexpected character", c.to_string()));
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self, what: &str) -> Result<Token> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(perr(self.eof.0, self.eof.1, format!("unexpected end of input, expected {what}"), "")),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token> {
        let t = self.next(what)?;
        if t.tok != want {
            return Err(perr(t.line, t.col, format!("expected {what}"), t.text));
        }
        Ok(t)
    }

    fn index(&mut self) -> Result<(usize, Token)> {
        let t = self.next("a loop index")?;
        let value = match &t.tok {
            Tok::Number(s) if s.chars().all(|c| c.is_ascii_digit()) => s.parse::<usize>().ok(),
            _ => None,
        };
        match value {
            Some(v) if v >= 1 => Ok((v, t)),
            _ => Err(perr(t.line, t.col, "expected a positive integer loop index", t.text)),
        }
    }

    fn number(&mut self) -> Result<(f64, Token)> {
        let t = self.next("a number")?;
        let value = match &t.tok {
            Tok::Number(s) => s.parse::<f64>().ok().filter(|v| v.is_finite()),
            _ => None,
        };
        match value {
            Some(v) => Ok((v, t)),
            None => Err(perr(t.line, t.col, "expected a number", t.text)),
        }
    }

    /// Parses `{ elem* }` returning `(kind, value, kind token, value token)`.
    fn block(&mut self) -> Result<Vec<(char, f64, Token, Token)>> {
        self.expect(Tok::Open, "`{`")?;
        let mut out: Vec<(char, f64, Token, Token)> = Vec::new();
        loop {
            let t = self.next("an element or `}`")?;
            match &t.tok {
                Tok::Close => return Ok(out),
                Tok::Word(w) if matches!(w.as_str(), "L" | "C" | "R" | "G") => {
                    let kind = w.chars().next().unwrap();
                    let (v, vt) = self.number()?;
                    if out.iter().any(|e| e.0 == kind) {
                        return Err(Error::DuplicateElement(format!("{kind} at {}:{}", t.line, t.col)));
                    }
                    out.push((kind, v, t.clone(), vt));
                }
                _ => return Err(perr(t.line, t.col, "expected an element (L, C, R, G) or `}`", t.text.clone())),
            }
        }
    }
}

/// Parses netlist source text.
pub fn parse(src: &str) -> Result<Netlist> {
    let toks = lex(src)?;
    let eof = (src.lines().count().max(1), src.lines().last().map_or(0, |l| l.chars().count()) + 1);
    let mut p = Parser { toks, pos: 0, eof };
    let mut nl = Netlist::default();
    let mut loop_pos: Vec<(usize, Token)> = Vec::new();
    let mut couple_pos: Vec<(usize, usize, Token)> = Vec::new();

    while let Some(t) = p.peek().cloned() {
        match &t.tok {
            Tok::Word(w) if w == "loop" => {
                p.pos += 1;
                let (index, it) = p.index()?;
                if nl.loops.iter().any(|l| l.index == index) {
                    return Err(Error::DuplicateElement(format!("loop {index} at {}:{}", it.line, it.col)));
                }
                let mut decl = LoopDecl { index, l: None, c: None, r: None };
                for (kind, v, kt, vt) in p.block()? {
                    match kind {
                        'L' if v > 0.0 => decl.l = Some(v),
                        'L' => return Err(perr(vt.line, vt.col, "inductance must be positive", vt.text)),
                        'C' if v > 0.0 => decl.c = Some(v),
                        'C' => return Err(perr(vt.line, vt.col, "capacitance must be positive", vt.text)),
                        'R' if v >= 0.0 => decl.r = Some(v),
                        'R' => return Err(perr(vt.line, vt.col, "resistance must be nonnegative", vt.text)),
                        _ => return Err(perr(kt.line, kt.col, "G is only allowed in couple blocks", kt.text)),
                    }
                }
                loop_pos.push((index, it));
                nl.loops.push(decl);
            }
            Tok::Word(w) if w == "couple" => {
                p.pos += 1;
                let (i, it) = p.index()?;
                let (j, jt) = p.index()?;
                if i >= j {
                    return Err(perr(jt.line, jt.col, "coupling indices must satisfy i < j", jt.text));
                }
                if couple_pos.iter().any(|c| c.0 == i && c.1 == j) {
                    return Err(Error::DuplicateElement(format!("couple {i} {j} at {}:{}", it.line, it.col)));
                }
                let mut cp = Coupling { i, j, c: None, g: None };
                for (kind, v, kt, vt) in p.block()? {
                    match kind {
                        'C' if v > 0.0 => cp.c = Some(v),
                        'C' => return Err(perr(vt.line, vt.col, "capacitance must be positive", vt.text)),
                        'G' => cp.g = Some(v),
                        _ => return Err(perr(kt.line, kt.col, format!("{kind} is not allowed in couple blocks"), kt.text)),
                    }
                }
                couple_pos.push((i, j, it));
                if cp.c.is_some() || cp.g.is_some() {
                    nl.couplings.push(cp);
                }
            }
            _ => return Err(perr(t.line, t.col, "expected `loop` or `couple`", t.text)),
        }
    }

    let count = nl.loops.len();
    for (i, j, t) in &couple_pos {
        for k in [i, j] {
            if !nl.loops.iter().any(|l| l.index == *k) {
                return Err(Error::UnknownLoopReference(format!("loop {k} in couple {i} {j} at {}:{}", t.line, t.col)));
            }
        }
    }
    if let Some((index, t)) = loop_pos.iter().find(|(index, _)| *index > count) {
        return Err(perr(t.line, t.col, format!("loop indices must be contiguous from 1 (found {index} among {count} loops)"), t.text.clone()));
    }
    nl.loops.sort_by_key(|l| l.index);
    nl.couplings.sort_by_key(|c| (c.i, c.j));
    Ok(nl)
}

/// Builds `(alpha, eta, theta, R)` from a netlist.
pub fn compile(nl: &Netlist) -> Result<LagrangianSystem> {
    let n = nl.loops.len();
    if n == 0 {
        return Err(Error::DimensionMismatch("netlist declares no loops".into()));
    }
    let mut alpha = RMatrix::zeros(n, n);
    let mut eta = RMatrix::zeros(n, n);
    let mut theta = RMatrix::zeros(n, n);
    let mut r = RMatrix::zeros(n, n);
    for (k, lp) in nl.loops.iter().enumerate() {
        if lp.index != k + 1 {
            return Err(Error::UnknownLoopReference(format!("loop {} (expected {})", lp.index, k + 1)));
        }
        alpha[(k, k)] = lp.l.ok_or(Error::MissingInductance(lp.index))?;
        if let Some(c) = lp.c {
            eta[(k, k)] += 1.0 / c;
        }
        r[(k, k)] = lp.r.unwrap_or(0.0);
    }
    for cp in &nl.couplings {
        if cp.i == 0 || cp.j > n || cp.i >= cp.j {
            return Err(Error::UnknownLoopReference(format!("couple {} {}", cp.i, cp.j)));
        }
        let (i, j) = (cp.i - 1, cp.j - 1);
        if let Some(c) = cp.c {
            let inv = 1.0 / c;
            eta[(i, i)] += inv;
            eta[(j, j)] += inv;
            eta[(i, j)] -= inv;
            eta[(j, i)] -= inv;
        }
        if let Some(g) = cp.g {
            theta[(i, j)] = -g / 2.0;
            theta[(j, i)] = g / 2.0;
        }
    }
    if r.iter().all(|&x| x == 0.0) {
        return Err(Error::NoDissipation);
    }
    LagrangianSystem::new(alpha, eta, theta, r)
}

/// Canonical text; `parse(emit(nl)) == nl` for parsed netlists.
pub fn emit(nl: &Netlist) -> String {
    let mut out = String::new();
    for lp in &nl.loops {
        let _ = write!(out, "loop {} {{", lp.index);
        for (k, v) in [("L", lp.l), ("C", lp.c), ("R", lp.r)] {
            if let Some(v) = v {
                let _ = write!(out, " {k} {v}");
            }
        }
        out.push_str(" }\n");
    }
    for cp in &nl.couplings {
        if cp.c.is_none() && cp.g.is_none() {
            continue;
        }
        let _ = write!(out, "couple {} {} {{", cp.i, cp.j);
        for (k, v) in [("C", cp.c), ("G", cp.g)] {
            if let Some(v) = v {
                let _ = write!(out, " {k} {v}");
            }
        }
        out.push_str(" }\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CIRCUIT: &str = "loop 1 { L 10 C 25 }\nloop 2 { L 0.5 C 25 R 10 }\ncouple 1 2 { C 8.3333333333 G 2.5 }";

    #[test]
    fn parse_circuit() {
        let nl = parse(CIRCUIT).unwrap();
        assert_eq!(nl.loops.len(), 2);
        assert_eq!(nl.couplings.len(), 1);
        assert_eq!(nl.couplings[0].g, Some(2.5));
        assert_eq!(parse(&emit(&nl)).unwrap(), nl);
    }

    #[test]
    fn parse_empty_and_comments() {
        assert_eq!(parse("").unwrap(), Netlist::default());
        assert_eq!(parse("# nothing\n  \n").unwrap(), Netlist::default());
        assert!(compile(&parse("").unwrap()).is_err());
        let nl = parse("loop 1 { L 1 C 1 R 1 } # trailing").unwrap();
        assert_eq!(nl.loops[0].r, Some(1.0));
    }

    #[test]
    fn parse_errors() {
        match parse("loop 1 { L -3 }") {
            Err(Error::Parse(e)) => {
                assert_eq!((e.line, e.column), (1, 12));
                assert_eq!(e.token, "-3");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("loop 1 { L 1 L 2 }"), Err(Error::DuplicateElement(_))));
        assert!(matches!(parse("loop 1 { L 1 }\nloop 1 { L 2 }"), Err(Error::DuplicateElement(_))));
        assert!(matches!(parse("loop 1 { L 1 }\ncouple 1 3 { G 1 }"), Err(Error::UnknownLoopReference(_))));
        assert!(matches!(parse("loop 1 { G 1 }"), Err(Error::Parse(_))));
        assert!(matches!(parse("loop 1 { L 1 }\nloop 2 { L 1 }\ncouple 1 2 { L 1 }"), Err(Error::Parse(_))));
        assert!(matches!(parse("loop 1 { L 1 }\nloop 2 { L 1 }\ncouple 2 1 { G 1 }"), Err(Error::Parse(_))));
        assert!(matches!(parse("loop 2 { L 1 }"), Err(Error::Parse(_))));
        assert!(matches!(parse("loop 1 { L 1"), Err(Error::Parse(_))));
        assert!(matches!(parse("loop 1 { L abc }"), Err(Error::Parse(_))));
        assert!(matches!(parse("loop 1 { L 1 } @"), Err(Error::Parse(_))));
    }

    #[test]
    fn compile_circuit() {
        let nl = parse("loop 1 { L 10 C 25 }\nloop 2 { L 0.5 C 25 R 10 }\ncouple 1 2 { C 8.333333333333334 G 2.5 }").unwrap();
        let sys = compile(&nl).unwrap();
        assert_eq!(sys.alpha(), &RMatrix::from_row_slice(2, 2, &[10.0, 0.0, 0.0, 0.5]));
        let eta = RMatrix::from_row_slice(2, 2, &[0.16, -0.12, -0.12, 0.16]);
        assert!((sys.eta() - eta).norm() < 1e-15);
        assert_eq!(sys.theta(), &RMatrix::from_row_slice(2, 2, &[0.0, -1.25, 1.25, 0.0]));
        assert_eq!(sys.r(), &RMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 10.0]));
    }

    #[test]
    fn compile_small_cases() {
        let sys = compile(&parse("loop 1 { L 1 C 1 R 1 }").unwrap()).unwrap();
        assert_eq!(sys.alpha()[(0, 0)], 1.0);
        assert_eq!(sys.eta()[(0, 0)], 1.0);
        assert_eq!(sys.r()[(0, 0)], 1.0);
        assert_eq!(sys.theta()[(0, 0)], 0.0);

        let sys = compile(&parse("loop 1 { L 1 C 2 R 1 }\nloop 2 { L 1 C 4 }\ncouple 1 2 { G 3 }").unwrap()).unwrap();
        assert_eq!(sys.eta(), &RMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]));
        assert_eq!(sys.theta(), &RMatrix::from_row_slice(2, 2, &[0.0, -1.5, 1.5, 0.0]));

        assert!(matches!(compile(&parse("loop 1 { C 1 R 1 }").unwrap()), Err(Error::MissingInductance(1))));
        assert!(matches!(compile(&parse("loop 1 { L 1 C 1 }").unwrap()), Err(Error::NoDissipation)));
        let singular = compile(&parse("loop 1 { L 1 R 1 }").unwrap()).unwrap();
        assert!(!singular.duality_ok());
    }

    #[test]
    fn emit_is_canonical() {
        let nl = parse("couple 1 2 { G 0.1 }\nloop 2 { R 3 L 2 }\nloop 1 { L 1 }\ncouple 1 2 { }").unwrap_err();
        assert!(matches!(nl, Error::DuplicateElement(_)));
        let nl = parse("couple 1 2 { G 0.1 }\nloop 2 { R 3 L 2 }\nloop 1 { L 1 }").unwrap();
        assert_eq!(emit(&nl), "loop 1 { L 1 }\nloop 2 { L 2 R 3 }\ncouple 1 2 { G 0.1 }\n");
        let nl = parse("loop 1 { L 1 }\nloop 2 { L 1 }\ncouple 1 2 { }").unwrap();
        assert!(nl.couplings.is_empty());
        assert_eq!(emit(&nl), "loop 1 { L 1 }\nloop 2 { L 1 }\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn value() -> impl Strategy<Value = f64> {
            prop_oneof![1e-6f64..1e6, (1u32..1000).prop_map(|x| x as f64), 1e-30f64..1e-20]
        }

        fn netlist() -> impl Strategy<Value = Netlist> {
            (1usize..5).prop_flat_map(|n| {
                let loops = proptest::collection::vec((value(), proptest::option::of(value()), proptest::option::of(value())), n);
                let couples = proptest::collection::vec((proptest::option::of(value()), proptest::option::of(-5.0f64..5.0)), n * (n - 1) / 2);
                (loops, couples).prop_map(move |(ls, cs)| {
                    let loops = ls
                        .into_iter()
                        .enumerate()
                        .map(|(k, (l, c, r))| LoopDecl { index: k + 1, l: Some(l), c, r })
                        .collect();
                    let mut couplings = Vec::new();
                    let mut it = cs.into_iter();
                    for i in 1..=n {
                        for j in (i + 1)..=n {
                            let (c, g) = it.next().unwrap();
                            if c.is_some() || g.is_some() {
                                couplings.push(Coupling { i, j, c, g });
                            }
                        }
                    }
                    Netlist { loops, couplings }
                })
            })
        }

        proptest! {
            #[test]
            fn emit_round_trips(nl in netlist()) {
                let text = emit(&nl);
                let back = parse(&text).unwrap();
                prop_assert_eq!(&back, &nl);
                prop_assert_eq!(emit(&back), text);
            }
        }
    }
}
