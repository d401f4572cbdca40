//! Property files: `property <name> is <form>`, optionally followed by
//! `expect: TRUE|FALSE`. Statements may span lines; `//` starts a comment.

use thiserror::Error;

use super::{Atom, Pred, PropKind, Property};
use crate::model::CmpOp;
use crate::syntax::Pos;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{pos}: {msg}")]
pub struct PropParseError {
    pub pos: Pos,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Punct(&'static str),
}

impl Tok {
    fn show(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Punct(p) => format!("`{p}`"),
        }
    }
}

fn word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '/' | '.')
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, PropParseError> {
    const PUNCT: [&str; 13] = ["!=", "<=", ">=", "=", "<", ">", "(", ")", "[", "]", ",", "@", ":"];
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let line = line.split("//").next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let pos = Pos { line: li as u32 + 1, col: i as u32 + 1 };
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if word_char(c) {
                let start = i;
                while i < chars.len() && word_char(chars[i]) {
                    i += 1;
                }
                out.push((Tok::Word(chars[start..i].iter().collect()), pos));
            } else {
                let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) else {
                    return Err(PropParseError { pos, msg: format!("unexpected character `{c}`") });
                };
                out.push((Tok::Punct(p), pos));
                i += p.len();
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    end: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.0)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.i).map(|t| t.1).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, PropParseError> {
        Err(PropParseError { pos: self.pos(), msg: msg.into() })
    }

    fn found(&self) -> String {
        self.peek().map(Tok::show).unwrap_or_else(|| "end of input".into())
    }

    fn word(&mut self, what: &str) -> Result<String, PropParseError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.i += 1;
                Ok(w)
            }
            _ => self.err(format!("expected {what}, found {}", self.found())),
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x == w)
    }

    fn keyword(&mut self, w: &str) -> Result<(), PropParseError> {
        if self.is_word(w) {
            self.i += 1;
            Ok(())
        } else {
            self.err(format!("expected `{w}`, found {}", self.found()))
        }
    }

    fn punct(&mut self, p: &str) -> Result<(), PropParseError> {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.i += 1;
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", self.found()))
        }
    }

    fn int(&mut self, what: &str) -> Result<i64, PropParseError> {
        let pos = self.pos();
        let w = self.word(what)?;
        w.parse().map_err(|_| PropParseError { pos, msg: format!("expected {what}, found `{w}`") })
    }

    fn cmp(&mut self) -> Result<CmpOp, PropParseError> {
        let op = match self.peek() {
            Some(Tok::Punct("=")) => CmpOp::Eq,
            Some(Tok::Punct("!=")) => CmpOp::Ne,
            Some(Tok::Punct("<")) => CmpOp::Lt,
            Some(Tok::Punct("<=")) => CmpOp::Le,
            Some(Tok::Punct(">")) => CmpOp::Gt,
            Some(Tok::Punct(">=")) => CmpOp::Ge,
            _ => return self.err(format!("expected a comparison, found {}", self.found())),
        };
        self.i += 1;
        Ok(op)
    }

    fn pred(&mut self) -> Result<Pred, PropParseError> {
        let mut lhs = self.conj()?;
        while self.is_word("or") {
            self.i += 1;
            lhs = Pred::Or(Box::new(lhs), Box::new(self.conj()?));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Pred, PropParseError> {
        let mut lhs = self.unary()?;
        while self.is_word("and") {
            self.i += 1;
            lhs = Pred::And(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Pred, PropParseError> {
        if self.is_word("not") {
            self.i += 1;
            return Ok(Pred::Not(Box::new(self.unary()?)));
        }
        if self.peek() == Some(&Tok::Punct("(")) {
            self.i += 1;
            let p = self.pred()?;
            self.punct(")")?;
            return Ok(p);
        }
        self.atom()
    }

    fn paren_word(&mut self, what: &str) -> Result<String, PropParseError> {
        self.punct("(")?;
        let w = self.word(what)?;
        self.punct(")")?;
        Ok(w)
    }

    fn atom(&mut self) -> Result<Pred, PropParseError> {
        let pos = self.pos();
        let head = self.word("a predicate")?;
        let atom = match head.as_str() {
            "true" => return Ok(Pred::True),
            "false" => return Ok(Pred::Not(Box::new(Pred::True))),
            "node" => {
                let node = self.paren_word("a node name")?;
                self.punct("@")?;
                Atom::NodeAt { node, loc: self.word("a location")? }
            }
            "sv" => {
                let sv = self.paren_word("a variable name")?;
                let op = self.cmp()?;
                Atom::SvCmp { sv, op, value: self.word("a value")? }
            }
            "rstatus" => {
                let node = self.paren_word("a node name")?;
                let op = self.cmp()?;
                if !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                    return Err(PropParseError { pos, msg: "statuses only compare with = or !=".into() });
                }
                Atom::Status { node, op, status: self.word("a status")? }
            }
            "local" => {
                let p = self.pos();
                let path = self.paren_word("node.variable")?;
                let Some((node, var)) = path.rsplit_once('.') else {
                    return Err(PropParseError { pos: p, msg: format!("expected node.variable, found `{path}`") });
                };
                let op = self.cmp()?;
                Atom::Local { node: node.into(), var: var.into(), op, value: self.int("an integer")? }
            }
            "terminal" => Atom::Terminal(self.paren_word("success or failure")?),
            _ => return Err(PropParseError { pos, msg: format!("unknown predicate `{head}`") }),
        };
        Ok(Pred::Atom(atom, pos))
    }

    fn property(&mut self) -> Result<Property, PropParseError> {
        let pos = self.pos();
        self.keyword("property")?;
        let name = self.word("a property name")?;
        self.keyword("is")?;
        let kind = if self.is_word("absent") {
            self.i += 1;
            PropKind::Absent(self.pred()?)
        } else if self.is_word("present") {
            self.i += 1;
            PropKind::Present(self.pred()?)
        } else if self.is_word("deadlockfree") {
            self.i += 1;
            PropKind::DeadlockFree
        } else if self.is_word("always") {
            self.i += 1;
            let p = self.pred()?;
            self.keyword("implies")?;
            self.keyword("eventually")?;
            PropKind::ImpliesEventually(p, self.pred()?)
        } else {
            let p = self.pred()?;
            self.keyword("leadsto")?;
            let q = self.pred()?;
            self.keyword("within")?;
            self.punct("[")?;
            let bpos = self.pos();
            let a = self.int("a lower bound")?;
            self.punct(",")?;
            let b = self.int("an upper bound")?;
            self.punct("]")?;
            if a < 0 || a > b {
                return Err(PropParseError { pos: bpos, msg: format!("bad bounds [{a},{b}]") });
            }
            PropKind::LeadsTo { p, q, a: a as u32, b: b as u32 }
        };
        let mut expect = None;
        if self.is_word("expect") {
            self.i += 1;
            self.punct(":")?;
            let vpos = self.pos();
            expect = Some(match self.word("TRUE or FALSE")?.to_ascii_uppercase().as_str() {
                "TRUE" => true,
                "FALSE" => false,
                other => return Err(PropParseError { pos: vpos, msg: format!("expected TRUE or FALSE, found `{other}`") }),
            });
        }
        Ok(Property { name, kind, expect, pos })
    }
}

pub fn parse_properties(text: &str) -> Result<Vec<Property>, PropParseError> {
    let toks = lex(text)?;
    let end = Pos { line: text.lines().count().max(1) as u32, col: text.lines().last().map_or(1, |l| l.len() as u32 + 1) };
    let mut p = Parser { toks, i: 0, end };
    let mut out: Vec<Property> = Vec::new();
    while p.peek().is_some() {
        let prop = p.property()?;
        if out.iter().any(|q| q.name == prop.name) {
            return Err(PropParseError { pos: prop.pos, msg: format!("duplicate property `{}`", prop.name) });
        }
        out.push(prop);
    }
    Ok(out)
}
