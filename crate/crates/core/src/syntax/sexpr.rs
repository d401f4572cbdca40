//! Tokenizer and S-expression reader.

use super::ast::{Atom, Op, Pos};
use super::ParseError;

/// Nesting beyond this is rejected rather than risking deep recursion later.
pub const MAX_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Atom(Atom, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, p) | SExpr::List(_, p) => *p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

fn tokenize(text: &str) -> Vec<(Token, Pos)> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut col = 0u32;
    let mut cur = String::new();
    let mut cur_pos = Pos::default();
    let mut in_comment = false;

    let flush = |cur: &mut String, cur_pos: Pos, out: &mut Vec<(Token, Pos)>| {
        if !cur.is_empty() {
            out.push((Token::Atom(std::mem::take(cur)), cur_pos));
        }
    };

    for ch in text.chars() {
        col += 1;
        let here = Pos { line, col };
        if ch == '\n' {
            flush(&mut cur, cur_pos, &mut out);
            in_comment = false;
            line += 1;
            col = 0;
            continue;
        }
        if in_comment {
            continue;
        }
        match ch {
            ';' => {
                flush(&mut cur, cur_pos, &mut out);
                in_comment = true;
            }
            '(' | ')' => {
                flush(&mut cur, cur_pos, &mut out);
                out.push((if ch == '(' { Token::Open } else { Token::Close }, here));
            }
            c if c.is_whitespace() => flush(&mut cur, cur_pos, &mut out),
            c => {
                if cur.is_empty() {
                    cur_pos = here;
                }
                cur.push(c);
            }
        }
    }
    flush(&mut cur, cur_pos, &mut out);
    out
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '/'))
}

fn is_number(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.map_or(true, |f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

/// Classify a raw atom; `None` means the token is not part of the language.
pub fn classify(s: &str) -> Option<Atom> {
    if let Some(op) = Op::from_symbol(s) {
        return Some(Atom::Op(op));
    }
    if let Some(k) = s.strip_prefix(':') {
        return is_ident(k).then(|| Atom::Keyword(k.to_string()));
    }
    if let Some(v) = s.strip_prefix('$') {
        return is_ident(v).then(|| Atom::ArgRef(v.to_string()));
    }
    if is_number(s) {
        return Some(Atom::Num(s.to_string()));
    }
    if let Some((name, field)) = s.split_once('.') {
        return (field == "rstatus" && is_ident(name)).then(|| Atom::StatusRef(name.to_string()));
    }
    is_ident(s).then(|| Atom::Ident(s.to_string()))
}

/// Read a whole document: exactly one top-level list.
pub fn read_document(text: &str) -> Result<SExpr, ParseError> {
    let tokens = tokenize(text);
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut done: Option<SExpr> = None;

    for (tok, pos) in tokens {
        if done.is_some() {
            return Err(ParseError::Syntax {
                pos,
                detail: "content after the closing parenthesis of the document".into(),
            });
        }
        match tok {
            Token::Open => {
                if stack.len() >= MAX_DEPTH {
                    return Err(ParseError::Syntax { pos, detail: "nesting too deep".into() });
                }
                stack.push((Vec::new(), pos));
            }
            Token::Close => {
                let Some((items, open)) = stack.pop() else {
                    return Err(ParseError::Unbalanced { pos, detail: "unexpected `)`".into() });
                };
                let list = SExpr::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => done = Some(list),
                }
            }
            Token::Atom(raw) => {
                let atom = classify(&raw)
                    .ok_or_else(|| ParseError::InvalidToken { pos, token: raw.clone() })?;
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(SExpr::Atom(atom, pos)),
                    None => {
                        return Err(ParseError::Syntax {
                            pos,
                            detail: format!("expected `(` to open the document, found `{raw}`"),
                        })
                    }
                }
            }
        }
    }
    if let Some((_, open)) = stack.pop() {
        return Err(ParseError::Unbalanced { pos: open, detail: "unclosed `(`".into() });
    }
    done.ok_or(ParseError::Syntax { pos: Pos { line: 1, col: 1 }, detail: "empty document".into() })
}
