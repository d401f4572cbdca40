//! The `.btf` front end: reader, parser, validator and canonical printer.

pub mod ast;
mod emit;
mod parse;
pub mod sexpr;
mod validate;

pub use ast::{BtSpec, Expression, NodeAst, NodeKind, Pos, SvDecl, SvKind, Value};
pub use emit::{emit_canonical, emit_spec};
pub use parse::parse_btf;
pub use validate::{
    validate, ArgItem, Driven, NodeId, NodeInfo, Params, SemanticError, SvDomain, SvId, SvInfo, TreeInfo, TypedExpr,
    ValidatedSpec, Warning,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{pos}: unbalanced parentheses: {detail}")]
    Unbalanced { pos: Pos, detail: String },
    #[error("{pos}: invalid token `{token}`")]
    InvalidToken { pos: Pos, token: String },
    #[error("{pos}: unknown node kind `{kind}`")]
    UnknownKind { pos: Pos, kind: String },
    #[error("{pos}: malformed keyword pair: {detail}")]
    MalformedKeyword { pos: Pos, detail: String },
    #[error("{pos}: malformed defsv: {detail}")]
    MalformedDefsv { pos: Pos, detail: String },
    #[error("{pos}: malformed expression: {detail}")]
    MalformedExpr { pos: Pos, detail: String },
    #[error("{pos}: {detail}")]
    Syntax { pos: Pos, detail: String },
}

impl ParseError {
    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Unbalanced { pos, .. }
            | ParseError::InvalidToken { pos, .. }
            | ParseError::UnknownKind { pos, .. }
            | ParseError::MalformedKeyword { pos, .. }
            | ParseError::MalformedDefsv { pos, .. }
            | ParseError::MalformedExpr { pos, .. }
            | ParseError::Syntax { pos, .. } => *pos,
        }
    }
}

/// Any front-end failure: either the text does not parse or it does not
/// validate.
#[derive(Debug, Error)]
pub enum FrontError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Semantic(Vec<SemanticError>),
}

/// Parse and validate in one step.
pub fn load(text: &str) -> Result<ValidatedSpec, FrontError> {
    let spec = parse_btf(text)?;
    validate(spec).map_err(FrontError::Semantic)
}
