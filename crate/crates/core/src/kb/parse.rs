use super::ast::{AltAtom, Atom, BodyAtom, CptEntry, HornClause, Pos, ProbDependency, Statement, Term};
use super::validate::{signature_diagnostics, Diagnostic};
use super::KnowledgeBase;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error(transparent)]
    Invalid(Diagnostic),
}

impl ParseError {
    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Syntax { pos, .. } => *pos,
            ParseError::Invalid(d) => d.pos,
        }
    }

    pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        ParseError::Syntax { pos, message: message.into() }
    }
}

/// Parses a knowledge base and rejects arity, alternative-slot and outcome-set
/// conflicts. CPT completeness and normalization are left to [`validate_kb`](super::validate_kb).
pub fn parse_kb(text: &str) -> Result<KnowledgeBase, ParseError> {
    let kb = parse_statements(text)?;
    if let Some(d) = signature_diagnostics(&kb).into_iter().next() {
        return Err(ParseError::Invalid(d));
    }
    Ok(kb)
}

/// Syntax-only parse; no cross-statement consistency checks.
pub fn parse_statements(text: &str) -> Result<KnowledgeBase, ParseError> {
    let mut p = Parser::new(text)?;
    let mut statements = Vec::new();
    let mut positions = Vec::new();
    while !p.at(&Tok::Eof) {
        let pos = p.pos();
        statements.push(p.statement()?);
        positions.push(pos);
    }
    Ok(KnowledgeBase::with_positions(statements, positions))
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Var(String),
    Num(f64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Semi,
    Colon,
    Pipe,
    Arrow,
    Neck,
    Eq,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Var(s) => format!("variable `?{s}`"),
            Tok::Num(n) => format!("number `{n}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Arrow => "`<-`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

pub(crate) fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        let start = i;
        let tok = match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '(' => single(&mut i, Tok::LParen),
            ')' => single(&mut i, Tok::RParen),
            '{' => single(&mut i, Tok::LBrace),
            '}' => single(&mut i, Tok::RBrace),
            ',' => single(&mut i, Tok::Comma),
            '.' => single(&mut i, Tok::Dot),
            ';' => single(&mut i, Tok::Semi),
            '|' => single(&mut i, Tok::Pipe),
            '=' => single(&mut i, Tok::Eq),
            ':' if chars.get(i + 1) == Some(&'-') && !chars.get(i + 2).is_some_and(|d| d.is_ascii_digit()) => {
                i += 2;
                Tok::Neck
            }
            ':' => single(&mut i, Tok::Colon),
            '<' if chars.get(i + 1) == Some(&'-') => {
                i += 2;
                Tok::Arrow
            }
            '?' => {
                i += 1;
                let s = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                if s == i || !is_ident_start(chars[s]) {
                    return Err(ParseError::syntax(pos, "expected variable name after `?`"));
                }
                Tok::Var(chars[s..i].iter().collect())
            }
            c if is_ident_start(c) => {
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                Tok::Ident(chars[start..i].iter().collect())
            }
            c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if matches!(chars.get(i), Some('e' | 'E')) {
                    let mut j = i + 1;
                    if matches!(chars.get(j), Some('+' | '-')) {
                        j += 1;
                    }
                    if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit: String = chars[start..i].iter().collect();
                let value = lit
                    .parse::<f64>()
                    .map_err(|_| ParseError::syntax(pos, format!("malformed number `{lit}`")))?;
                Tok::Num(value)
            }
            other => return Err(ParseError::syntax(pos, format!("unexpected character `{other}`"))),
        };
        col += i - start;
        out.push((tok, pos));
    }
    out.push((Tok::Eof, Pos { line, column: col }));
    Ok(out)
}

fn single(i: &mut usize, t: Tok) -> Tok {
    *i += 1;
    t
}

/// An atom as written, before it is classified as plain or alternative.
pub(crate) struct RawAtom {
    pub predicate: String,
    pub args: Vec<RawArg>,
    pub pos: Pos,
}

pub(crate) enum RawArg {
    Term(Term),
    Outcomes(Vec<String>),
}

pub(crate) enum Classified {
    Plain(Atom),
    Alt(AltAtom),
}

impl RawAtom {
    pub fn classify(self) -> Result<Classified, ParseError> {
        let mut slot = None;
        let mut outcomes = Vec::new();
        let mut args = Vec::new();
        for (i, a) in self.args.into_iter().enumerate() {
            match a {
                RawArg::Term(t) => args.push(t),
                RawArg::Outcomes(o) => {
                    if slot.is_some() {
                        return Err(ParseError::syntax(self.pos, "more than one outcome set in one atom"));
                    }
                    slot = Some(i);
                    outcomes = o;
                }
            }
        }
        Ok(match slot {
            None => Classified::Plain(Atom { predicate: self.predicate, args }),
            Some(alt_slot) => Classified::Alt(AltAtom { predicate: self.predicate, args, alt_slot, outcomes }),
        })
    }

    pub fn into_plain(self) -> Result<Atom, ParseError> {
        let pos = self.pos;
        match self.classify()? {
            Classified::Plain(a) => Ok(a),
            Classified::Alt(a) => Err(ParseError::syntax(
                pos,
                format!("alternative-outcome atom `{}` is not allowed in a Horn clause", a.predicate),
            )),
        }
    }
}

pub(crate) struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    pub fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(text)?, at: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    pub fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.unexpected(&t.describe()))
        }
    }

    pub fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::syntax(self.pos(), format!("expected {wanted}, found {}", self.peek().describe()))
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let is_prob = matches!(self.peek(), Tok::Ident(s) if s == "prob") && matches!(self.peek2(), Tok::Ident(_));
        if is_prob {
            self.bump();
            return self.dependency().map(Statement::Dependency);
        }
        let head = self.atom()?.into_plain()?;
        let mut body = Vec::new();
        if self.eat(&Tok::Neck) {
            loop {
                body.push(self.atom()?.into_plain()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::Dot)?;
        Ok(Statement::Clause(HornClause { head, body }))
    }

    fn dependency(&mut self) -> Result<ProbDependency, ParseError> {
        let head_raw = self.atom()?;
        let head_pos = head_raw.pos;
        let head = match head_raw.classify()? {
            Classified::Alt(a) => a,
            Classified::Plain(a) => {
                return Err(ParseError::syntax(
                    head_pos,
                    format!("head `{a}` of a dependency statement needs an outcome set"),
                ))
            }
        };
        let mut body = Vec::new();
        if self.eat(&Tok::Arrow) {
            loop {
                body.push(match self.atom()?.classify()? {
                    Classified::Plain(a) => BodyAtom::Plain(a),
                    Classified::Alt(a) => BodyAtom::Alt(a),
                });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::Eq)?;
        self.expect(Tok::LBrace)?;
        let mut cpt = Vec::new();
        if !self.at(&Tok::RBrace) {
            loop {
                cpt.push(self.entry()?);
                if !self.eat(&Tok::Semi) {
                    break;
                }
            }
        }
        self.expect(Tok::RBrace)?;
        self.expect(Tok::Dot)?;
        Ok(ProbDependency { head, body, cpt })
    }

    fn entry(&mut self) -> Result<CptEntry, ParseError> {
        self.expect(Tok::LParen)?;
        let head = self.ident()?;
        let mut body = Vec::new();
        if self.eat(&Tok::Pipe) {
            loop {
                body.push(self.ident()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Colon)?;
        match *self.peek() {
            Tok::Num(prob) => {
                self.bump();
                Ok(CptEntry { head, body, prob })
            }
            _ => Err(self.unexpected("probability")),
        }
    }

    pub fn atom(&mut self) -> Result<RawAtom, ParseError> {
        let pos = self.pos();
        let predicate = self.ident()?;
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            if !self.at(&Tok::RParen) {
                loop {
                    args.push(self.arg()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok(RawAtom { predicate, args, pos })
    }

    fn arg(&mut self) -> Result<RawArg, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(RawArg::Term(Term::Var(v)))
            }
            Tok::Ident(c) => {
                self.bump();
                Ok(RawArg::Term(Term::Const(c)))
            }
            Tok::LBrace => {
                let pos = self.pos();
                self.bump();
                let mut outcomes: Vec<String> = Vec::new();
                loop {
                    let o = self.ident()?;
                    if outcomes.contains(&o) {
                        return Err(ParseError::syntax(pos, format!("duplicate outcome `{o}`")));
                    }
                    outcomes.push(o);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RBrace)?;
                Ok(RawArg::Outcomes(outcomes))
            }
            _ => Err(self.unexpected("term or outcome set")),
        }
    }
}
