//! Concrete syntax: a shared lexer plus recursive-descent parsers for
//! phantom types (postfix constructors, quoted variables), target-side
//! types (prefix `T`, `1`, bare variables), source types, and the terms
//! of both calculi. Every parser accepts exactly what the corresponding
//! pretty-printer emits, so printed output round-trips.

use crate::hierarchy::{Hierarchy, Sort};
use crate::phantom::{arrow, con, prod, var, PhantomType};
use crate::source::{Interpretation, SourceTerm, SourceType};
use crate::target::{TargetInterpretation, TargetTerm};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: String,
}

impl ParseError {
    fn new(line: usize, col: usize, expected: impl Into<String>) -> ParseError {
        ParseError {
            line,
            col,
            expected: expected.into(),
        }
    }

    /// Re-anchors an error produced for a text fragment to the position
    /// of that fragment inside a larger file. `line` and `col` locate the
    /// fragment's first character (both 1-based).
    pub fn offset(mut self, line: usize, col: usize) -> ParseError {
        if self.line == 1 {
            self.col += col - 1;
        }
        self.line += line - 1;
        self
    }
}

impl std::error::Error for ParseError {}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(
            f,
            "parse error at {}:{}: expected {}",
            self.line, self.col, self.expected
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Token {
    Ident(String),
    /// `'a` style type variable; the payload omits the quote.
    QuotedVar(String),
    Number(String),
    Lambda,
    TyLambda,
    Dot,
    Colon,
    Arrow,
    Star,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    SubtypeOf,
    Lt,
    Eq,
    Pipe,
    Eof,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("'{s}'"),
            Token::QuotedVar(s) => format!("''{s}'"),
            Token::Number(s) => format!("'{s}'"),
            Token::Lambda => "'\\'".into(),
            Token::TyLambda => "'/\\'".into(),
            Token::Dot => "'.'".into(),
            Token::Colon => "':'".into(),
            Token::Arrow => "'->'".into(),
            Token::Star => "'*'".into(),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
            Token::LBracket => "'['".into(),
            Token::RBracket => "']'".into(),
            Token::LBrace => "'{'".into(),
            Token::RBrace => "'}'".into(),
            Token::Comma => "','".into(),
            Token::Semi => "';'".into(),
            Token::SubtypeOf => "'<:'".into(),
            Token::Lt => "'<'".into(),
            Token::Eq => "'='".into(),
            Token::Pipe => "'|'".into(),
            Token::Eof => "end of input".into(),
        }
    }
}

/// A token with its 1-based position and byte offset in the input.
#[derive(Clone, Debug)]
pub struct Spanned {
    pub tok: Token,
    pub line: usize,
    pub col: usize,
    pub offset: usize,
}

/// Tokenizes the whole input. `#` starts a comment running to the end of
/// the line. The result always ends with an [`Token::Eof`] entry carrying
/// the end-of-input position.
pub fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let bytes = text.as_bytes();
    let mut i = 0usize;
    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            toks.push(Spanned {
                tok: $tok,
                line,
                col,
                offset: i,
            });
            i += $len;
            col += $len;
        }};
    }
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '\\' => push!(Token::Lambda, 1),
            '/' => {
                if bytes.get(i + 1) == Some(&b'\\') {
                    push!(Token::TyLambda, 2);
                } else {
                    return Err(ParseError::new(line, col, "'\\' after '/'"));
                }
            }
            '.' => push!(Token::Dot, 1),
            ':' => push!(Token::Colon, 1),
            '-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    push!(Token::Arrow, 2);
                } else {
                    return Err(ParseError::new(line, col, "'>' after '-'"));
                }
            }
            '*' => push!(Token::Star, 1),
            '(' => push!(Token::LParen, 1),
            ')' => push!(Token::RParen, 1),
            '[' => push!(Token::LBracket, 1),
            ']' => push!(Token::RBracket, 1),
            '{' => push!(Token::LBrace, 1),
            '}' => push!(Token::RBrace, 1),
            ',' => push!(Token::Comma, 1),
            ';' => push!(Token::Semi, 1),
            '=' => push!(Token::Eq, 1),
            '|' => push!(Token::Pipe, 1),
            '<' => {
                if bytes.get(i + 1) == Some(&b':') {
                    push!(Token::SubtypeOf, 2);
                } else {
                    push!(Token::Lt, 1);
                }
            }
            '\'' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && is_ident_char(bytes[j]) {
                    j += 1;
                }
                if j == start {
                    return Err(ParseError::new(line, col, "a variable name after '''"));
                }
                let name = text[start..j].to_string();
                push!(Token::QuotedVar(name), j - i);
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len() && is_ident_char(bytes[j]) {
                    j += 1;
                }
                let name = text[i..j].to_string();
                let len = j - i;
                push!(Token::Ident(name), len);
            }
            _ if c.is_ascii_digit() => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let num = text[i..j].to_string();
                let len = j - i;
                push!(Token::Number(num), len);
            }
            _ => {
                return Err(ParseError::new(
                    line,
                    col,
                    format!("a token (found {c:?})"),
                ));
            }
        }
    }
    toks.push(Spanned {
        tok: Token::Eof,
        line,
        col,
        offset: i,
    });
    Ok(toks)
}

fn is_ident_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

pub struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
}

impl<'a> Parser<'a> {
    pub fn new(toks: &'a [Spanned]) -> Parser<'a> {
        Parser { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos.min(self.toks.len() - 1)];
        (s.line, s.col)
    }

    /// Byte offset of the next token; the end of input once exhausted.
    pub fn offset(&self) -> usize {
        self.toks[self.pos.min(self.toks.len() - 1)].offset
    }

    /// Line and column (both 1-based) of the next token.
    pub fn position(&self) -> (usize, usize) {
        self.here()
    }

    pub fn err(&self, expected: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        let mut expected = expected.into();
        expected.push_str(&format!(", found {}", self.peek().describe()));
        ParseError::new(line, col, expected)
    }

    pub fn advance(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub fn eat(&mut self, t: &Token) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, t: &Token) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.err(t.describe()))
        }
    }

    pub fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Token::Ident(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.err(what)),
        }
    }

    pub fn expect_eof(&self) -> Result<(), ParseError> {
        match self.peek() {
            Token::Eof => Ok(()),
            _ => Err(self.err("end of input")),
        }
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Token::Ident(s) if s == kw)
    }

    // ----- phantom types: postfix constructors, quoted variables -----

    pub fn phantom_type(&mut self) -> Result<PhantomType, ParseError> {
        let dom = self.phantom_prod()?;
        if self.eat(&Token::Arrow) {
            let cod = self.phantom_type()?;
            Ok(arrow(dom, cod))
        } else {
            Ok(dom)
        }
    }

    fn phantom_prod(&mut self) -> Result<PhantomType, ParseError> {
        let left = self.phantom_app()?;
        if self.eat(&Token::Star) {
            let right = self.phantom_prod()?;
            Ok(prod(left, right))
        } else {
            Ok(left)
        }
    }

    fn phantom_app(&mut self) -> Result<PhantomType, ParseError> {
        let mut t = self.phantom_atom()?;
        while let Token::Ident(c) = self.peek() {
            if c == "unit" {
                break;
            }
            let c = c.clone();
            self.advance();
            t = con(&c, t);
        }
        Ok(t)
    }

    fn phantom_atom(&mut self) -> Result<PhantomType, ParseError> {
        match self.peek().clone() {
            Token::Ident(s) if s == "unit" => {
                self.advance();
                Ok(PhantomType::Unit)
            }
            Token::Number(n) if n == "1" => {
                self.advance();
                Ok(PhantomType::Unit)
            }
            Token::QuotedVar(v) => {
                self.advance();
                Ok(var(&v))
            }
            Token::LParen => {
                self.advance();
                let t = self.phantom_type()?;
                self.expect(&Token::RParen)?;
                Ok(t)
            }
            _ => Err(self.err("a type")),
        }
    }

    // ----- target types: prefix T, 1, bare variables -----

    pub fn target_type(&mut self) -> Result<PhantomType, ParseError> {
        let dom = self.target_prod()?;
        if self.eat(&Token::Arrow) {
            let cod = self.target_type()?;
            Ok(arrow(dom, cod))
        } else {
            Ok(dom)
        }
    }

    fn target_prod(&mut self) -> Result<PhantomType, ParseError> {
        let left = self.target_app()?;
        if self.eat(&Token::Star) {
            let right = self.target_prod()?;
            Ok(prod(left, right))
        } else {
            Ok(left)
        }
    }

    fn target_app(&mut self) -> Result<PhantomType, ParseError> {
        if self.keyword("T") {
            self.advance();
            let arg = self.target_app()?;
            Ok(con("T", arg))
        } else {
            self.target_atom()
        }
    }

    fn target_atom(&mut self) -> Result<PhantomType, ParseError> {
        match self.peek().clone() {
            Token::Number(n) if n == "1" => {
                self.advance();
                Ok(PhantomType::Unit)
            }
            Token::Ident(v) => {
                self.advance();
                Ok(var(&v))
            }
            Token::LParen => {
                self.advance();
                let t = self.target_type()?;
                self.expect(&Token::RParen)?;
                Ok(t)
            }
            _ => Err(self.err("a type")),
        }
    }

    // ----- source types: sort names resolve against the hierarchy -----

    pub fn source_type(&mut self, h: &Hierarchy) -> Result<SourceType, ParseError> {
        let dom = self.source_atom_type(h)?;
        if self.eat(&Token::Arrow) {
            let cod = self.source_type(h)?;
            Ok(SourceType::Arrow(Box::new(dom), Box::new(cod)))
        } else {
            Ok(dom)
        }
    }

    fn source_atom_type(&mut self, h: &Hierarchy) -> Result<SourceType, ParseError> {
        match self.peek().clone() {
            Token::Ident(name) => {
                self.advance();
                if h.contains(&Sort::new(name.clone())) {
                    Ok(SourceType::Base(Sort::new(name)))
                } else {
                    Ok(SourceType::Var(name))
                }
            }
            Token::LParen => {
                self.advance();
                let t = self.source_type(h)?;
                self.expect(&Token::RParen)?;
                Ok(t)
            }
            _ => Err(self.err("a type")),
        }
    }

    // ----- source terms -----

    pub fn source_term(
        &mut self,
        interp: &Interpretation,
        scope: &mut Vec<String>,
    ) -> Result<SourceTerm, ParseError> {
        let h = interp.hierarchy();
        if self.eat(&Token::Lambda) {
            let x = self.ident("a parameter name")?;
            self.expect(&Token::Colon)?;
            let annot = self.source_type(h)?;
            self.expect(&Token::Dot)?;
            scope.push(x.clone());
            let body = self.source_term(interp, scope)?;
            scope.pop();
            return Ok(SourceTerm::Lam(x, annot, Box::new(body)));
        }
        if self.eat(&Token::TyLambda) {
            let mut bounds = Vec::new();
            loop {
                let a = self.ident("a type variable")?;
                self.expect(&Token::SubtypeOf)?;
                let b = self.source_type(h)?;
                bounds.push((a, b));
                if !self.eat(&Token::Comma) {
                    break;
                }
            }
            self.expect(&Token::Dot)?;
            let body = self.source_term(interp, scope)?;
            return Ok(SourceTerm::TyLam(bounds, Box::new(body)));
        }
        if self.keyword("let") {
            self.advance();
            let x = self.ident("a binder name")?;
            self.expect(&Token::Eq)?;
            let bound = self.source_term(interp, scope)?;
            if !self.keyword("in") {
                return Err(self.err("'in'"));
            }
            self.advance();
            scope.push(x.clone());
            let body = self.source_term(interp, scope)?;
            scope.pop();
            return Ok(SourceTerm::Let(x, Box::new(bound), Box::new(body)));
        }
        if self.keyword("prim") {
            self.advance();
            let f = self.ident("a primitive name")?;
            self.expect(&Token::Colon)?;
            let ty = self.source_type(h)?;
            return match ty {
                SourceType::Arrow(d, c) => Ok(SourceTerm::Prim(f, Some((*d, *c)))),
                _ => Err(self.err("an arrow ascription")),
            };
        }
        self.source_app(interp, scope)
    }

    fn source_app(
        &mut self,
        interp: &Interpretation,
        scope: &mut Vec<String>,
    ) -> Result<SourceTerm, ParseError> {
        let mut t = self.source_postfix(interp, scope)?;
        while self.starts_atom() {
            let arg = self.source_postfix(interp, scope)?;
            t = SourceTerm::App(Box::new(t), Box::new(arg));
        }
        Ok(t)
    }

    fn source_postfix(
        &mut self,
        interp: &Interpretation,
        scope: &mut Vec<String>,
    ) -> Result<SourceTerm, ParseError> {
        let mut t = self.source_atom(interp, scope)?;
        while self.eat(&Token::LBracket) {
            let mut args = vec![self.source_type(interp.hierarchy())?];
            while self.eat(&Token::Comma) {
                args.push(self.source_type(interp.hierarchy())?);
            }
            self.expect(&Token::RBracket)?;
            t = SourceTerm::TyApp(Box::new(t), args);
        }
        Ok(t)
    }

    fn source_atom(
        &mut self,
        interp: &Interpretation,
        scope: &mut Vec<String>,
    ) -> Result<SourceTerm, ParseError> {
        match self.peek().clone() {
            Token::Ident(name) if !is_term_keyword(&name) => {
                self.advance();
                if scope.iter().any(|x| *x == name) {
                    Ok(SourceTerm::Var(name))
                } else if interp.prim_rows(&name).is_some() {
                    Ok(SourceTerm::Prim(name, None))
                } else if interp.constant_sort(&name).is_some() {
                    Ok(SourceTerm::Const(name))
                } else {
                    Ok(SourceTerm::Var(name))
                }
            }
            Token::LParen => {
                self.advance();
                let t = self.source_term(interp, scope)?;
                self.expect(&Token::RParen)?;
                Ok(t)
            }
            _ => Err(self.err("a term")),
        }
    }

    // ----- target terms -----

    pub fn target_term(
        &mut self,
        interp: &TargetInterpretation,
        scope: &mut Vec<String>,
    ) -> Result<TargetTerm, ParseError> {
        if self.eat(&Token::Lambda) {
            let x = self.ident("a parameter name")?;
            self.expect(&Token::Colon)?;
            let annot = self.target_type()?;
            self.expect(&Token::Dot)?;
            scope.push(x.clone());
            let body = self.target_term(interp, scope)?;
            scope.pop();
            return Ok(TargetTerm::Lam(x, annot, Box::new(body)));
        }
        if self.eat(&Token::TyLambda) {
            let mut vars = vec![self.ident("a type variable")?];
            while self.eat(&Token::Comma) {
                vars.push(self.ident("a type variable")?);
            }
            self.expect(&Token::Dot)?;
            let body = self.target_term(interp, scope)?;
            return Ok(TargetTerm::TyLam(vars, Box::new(body)));
        }
        if self.keyword("let") {
            self.advance();
            let x = self.ident("a binder name")?;
            self.expect(&Token::Eq)?;
            let bound = self.target_term(interp, scope)?;
            if !self.keyword("in") {
                return Err(self.err("'in'"));
            }
            self.advance();
            scope.push(x.clone());
            let body = self.target_term(interp, scope)?;
            scope.pop();
            return Ok(TargetTerm::Let(x, Box::new(bound), Box::new(body)));
        }
        if self.keyword("prim") {
            self.advance();
            let f = self.ident("a primitive name")?;
            self.expect(&Token::Colon)?;
            let ty = self.target_type()?;
            return match ty {
                PhantomType::Arrow(d, c) => Ok(TargetTerm::Prim(f, Some((*d, *c)))),
                _ => Err(self.err("an arrow ascription")),
            };
        }
        self.target_term_app(interp, scope)
    }

    fn target_term_app(
        &mut self,
        interp: &TargetInterpretation,
        scope: &mut Vec<String>,
    ) -> Result<TargetTerm, ParseError> {
        let mut t = self.target_postfix(interp, scope)?;
        while self.starts_atom() {
            let arg = self.target_postfix(interp, scope)?;
            t = TargetTerm::App(Box::new(t), Box::new(arg));
        }
        Ok(t)
    }

    fn target_postfix(
        &mut self,
        interp: &TargetInterpretation,
        scope: &mut Vec<String>,
    ) -> Result<TargetTerm, ParseError> {
        let mut t = self.target_term_atom(interp, scope)?;
        while self.eat(&Token::LBracket) {
            let mut args = vec![self.target_type()?];
            while self.eat(&Token::Comma) {
                args.push(self.target_type()?);
            }
            self.expect(&Token::RBracket)?;
            t = TargetTerm::TyApp(Box::new(t), args);
        }
        Ok(t)
    }

    fn target_term_atom(
        &mut self,
        interp: &TargetInterpretation,
        scope: &mut Vec<String>,
    ) -> Result<TargetTerm, ParseError> {
        match self.peek().clone() {
            Token::Ident(name) if !is_term_keyword(&name) => {
                self.advance();
                if scope.iter().any(|x| *x == name) {
                    Ok(TargetTerm::Var(name))
                } else if interp.prim_rows(&name).is_some() {
                    Ok(TargetTerm::Prim(name, None))
                } else if interp.constant_type(&name).is_some() {
                    Ok(TargetTerm::Const(name))
                } else {
                    Ok(TargetTerm::Var(name))
                }
            }
            Token::LParen => {
                self.advance();
                let t = self.target_term(interp, scope)?;
                self.expect(&Token::RParen)?;
                Ok(t)
            }
            _ => Err(self.err("a term")),
        }
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Token::LParen => true,
            Token::Ident(name) => !is_term_keyword(name),
            _ => false,
        }
    }
}

fn is_term_keyword(name: &str) -> bool {
    matches!(name, "let" | "in" | "prim")
}

pub fn parse_phantom_type(text: &str) -> Result<PhantomType, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks);
    let t = p.phantom_type()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_target_type(text: &str) -> Result<PhantomType, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks);
    let t = p.target_type()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_source_type(text: &str, h: &Hierarchy) -> Result<SourceType, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks);
    let t = p.source_type(h)?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_source_term(text: &str, interp: &Interpretation) -> Result<SourceTerm, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks);
    let t = p.source_term(interp, &mut Vec::new())?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_target_term(
    text: &str,
    interp: &TargetInterpretation,
) -> Result<TargetTerm, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser::new(&toks);
    let t = p.target_term(interp, &mut Vec::new())?;
    p.expect_eof()?;
    Ok(t)
}
