//! Page identifiers and the augmented token alphabet.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Dense integer id of a web page.
///
/// Ids `0` and `1` are reserved for the artificial start and finish states
/// and never name a page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PageId(u32);

impl PageId {
    /// Integer code of the artificial start state in numeric encodings.
    pub const START_CODE: u32 = 0;
    /// Integer code of the artificial finish state in numeric encodings.
    pub const FINISH_CODE: u32 = 1;
    /// First id handed out to a real page.
    pub const FIRST: u32 = 2;

    pub fn new(id: u32) -> Result<Self> {
        if id < Self::FIRST {
            return Err(Error::ReservedPage(id));
        }
        Ok(PageId(id))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One symbol of an augmented session: `S`, a page, or `F`.
///
/// The derived order puts `Start` before every page and `Finish` after every
/// page, which is the order used for lexicographic tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Token {
    Start,
    Page(PageId),
    Finish,
}

impl Token {
    pub fn page(self) -> Option<PageId> {
        match self {
            Token::Page(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_page(self) -> bool {
        matches!(self, Token::Page(_))
    }

    /// Numeric code: `0` for `S`, `1` for `F`, the page id otherwise.
    pub fn code(self) -> u32 {
        match self {
            Token::Start => PageId::START_CODE,
            Token::Finish => PageId::FINISH_CODE,
            Token::Page(p) => p.get(),
        }
    }

    pub fn from_code(code: u32) -> Token {
        match code {
            PageId::START_CODE => Token::Start,
            PageId::FINISH_CODE => Token::Finish,
            id => Token::Page(PageId(id)),
        }
    }
}

impl From<PageId> for Token {
    fn from(p: PageId) -> Self {
        Token::Page(p)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Start => f.write_str("S"),
            Token::Finish => f.write_str("F"),
            Token::Page(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for Token {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" => Ok(Token::Start),
            "F" => Ok(Token::Finish),
            other => other
                .parse::<u32>()
                .map(Token::from_code)
                .map_err(|_| Error::Parse { line: 0, message: format!("bad token {other:?}") }),
        }
    }
}

/// Space-separated rendering used by every text output (`2 3 4 F`).
pub fn format_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.to_string());
    }
    out
}

/// Inverse of [`format_tokens`].
pub fn parse_tokens(s: &str) -> Result<Vec<Token>> {
    s.split_whitespace().map(str::parse).collect()
}
