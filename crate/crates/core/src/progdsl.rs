//! Source language of select-programs.
//!
//! ```text
//! program := proc ('|' proc)*
//! proc    := action | 'select' '(' action (',' action)* ')'
//! action  := '!'? identifier
//! ```
//!
//! A bare identifier is an input on that channel, `!c` an output. Identifiers
//! match `[A-Za-z][A-Za-z0-9_]*`; whitespace is insignificant.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

/// Channel name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelId(Arc<str>);

impl ChannelId {
    /// Validates `name` as an identifier.
    pub fn new(name: &str) -> Result<Self, ParseError> {
        let mut chars = name.chars();
        let ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if ok {
            Ok(ChannelId(Arc::from(name)))
        } else {
            Err(ParseError::InvalidIdentifier {
                name: name.to_string(),
            })
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

/// Direction of an action. Inputs order before outputs.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Polarity {
    Input,
    Output,
}

impl Polarity {
    pub fn flip(self) -> Self {
        match self {
            Polarity::Input => Polarity::Output,
            Polarity::Output => Polarity::Input,
        }
    }
}

/// Input `c` or output `!c` on a channel.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub channel: ChannelId,
    pub polarity: Polarity,
}

impl Action {
    /// # Panics
    ///
    /// If `channel` is not a valid identifier.
    pub fn input(channel: &str) -> Self {
        Action {
            channel: ChannelId::new(channel).expect("invalid channel name"),
            polarity: Polarity::Input,
        }
    }

    /// # Panics
    ///
    /// If `channel` is not a valid identifier.
    pub fn output(channel: &str) -> Self {
        Action {
            channel: ChannelId::new(channel).expect("invalid channel name"),
            polarity: Polarity::Output,
        }
    }

    pub fn complement(&self) -> Self {
        Action {
            channel: self.channel.clone(),
            polarity: self.polarity.flip(),
        }
    }

    pub fn is_input(&self) -> bool {
        self.polarity == Polarity::Input
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.polarity {
            Polarity::Input => write!(f, "{}", self.channel),
            Polarity::Output => write!(f, "!{}", self.channel),
        }
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// One parallel component of a program.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum SourceProc {
    /// A released action.
    Action(Action),
    /// Synchronization on a non-empty choice of actions.
    Select(Vec<Action>),
}

impl SourceProc {
    pub fn actions(&self) -> &[Action] {
        match self {
            SourceProc::Action(a) => std::slice::from_ref(a),
            SourceProc::Select(v) => v,
        }
    }
}

impl fmt::Display for SourceProc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceProc::Action(a) => write!(f, "{a}"),
            SourceProc::Select(actions) => {
                f.write_str("select(")?;
                for (i, a) in actions.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Parallel composition of source processes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Program {
    pub procs: Vec<SourceProc>,
}

impl Program {
    pub fn new(procs: Vec<SourceProc>) -> Self {
        Program { procs }
    }

    /// Every channel mentioned anywhere in the program.
    pub fn channels(&self) -> BTreeSet<ChannelId> {
        self.procs
            .iter()
            .flat_map(|p| p.actions().iter().map(|a| a.channel.clone()))
            .collect()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.procs.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_program(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty program")]
    Empty,
    #[error("at byte {position}: expected {expected}, found {found}")]
    Unexpected {
        position: usize,
        expected: &'static str,
        found: String,
    },
    #[error("invalid identifier {name:?}")]
    InvalidIdentifier { name: String },
}

/// Parses program text.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut parser = Parser { text, pos: 0 };
    parser.skip_ws();
    if parser.at_end() {
        return Err(ParseError::Empty);
    }
    let mut procs = vec![parser.proc()?];
    loop {
        parser.skip_ws();
        if parser.at_end() {
            break;
        }
        parser.expect('|', "'|' or end of input")?;
        procs.push(parser.proc()?);
    }
    Ok(Program { procs })
}

/// Renders a program in the canonical concrete syntax.
pub fn format_program(p: &Program) -> String {
    p.to_string()
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(c) => format!("{c:?}"),
            None => "end of input".to_string(),
        }
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        ParseError::Unexpected {
            position: self.pos,
            expected,
            found: self.found(),
        }
    }

    fn expect(&mut self, c: char, expected: &'static str) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn identifier(&mut self) -> Result<ChannelId, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => self.pos += 1,
            _ => return Err(self.unexpected("identifier")),
        }
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(ChannelId(Arc::from(&self.text[start..self.pos])))
    }

    fn action(&mut self) -> Result<Action, ParseError> {
        self.skip_ws();
        let polarity = if self.peek() == Some('!') {
            self.pos += 1;
            Polarity::Output
        } else {
            Polarity::Input
        };
        let channel = self.identifier()?;
        Ok(Action { channel, polarity })
    }

    fn proc(&mut self) -> Result<SourceProc, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let action = self.action()?;
        if action.is_input() && action.channel.as_str() == "select" {
            self.skip_ws();
            if self.peek() == Some('(') {
                self.pos += 1;
                let mut actions = vec![self.action()?];
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(',') => {
                            self.pos += 1;
                            actions.push(self.action()?);
                        }
                        Some(')') => {
                            self.pos += 1;
                            return Ok(SourceProc::Select(actions));
                        }
                        _ => return Err(self.unexpected("',' or ')'")),
                    }
                }
            }
        }
        debug_assert!(self.pos > start);
        Ok(SourceProc::Action(action))
    }
}
