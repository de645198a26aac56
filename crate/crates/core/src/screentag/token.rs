use std::fmt;

use crate::taxonomy::UiClass;

pub const MAX_BIN: u16 = 500;
pub const DOC_OPEN: &str = "<screentag>";
pub const DOC_CLOSE: &str = "</screentag>";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    DocOpen,
    DocClose,
    Open(UiClass),
    Close(UiClass),
    /// Quantized coordinate, `0..=500`.
    Loc(u16),
    /// Unescaped text content.
    Text(String),
}

/// Which weight bucket a token falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenClass {
    Tag,
    Loc,
    Other,
}

impl Token {
    pub fn class(&self) -> TokenClass {
        classify_token(self)
    }

    /// Surface form; text is entity-escaped.
    pub fn surface(&self) -> String {
        self.to_string()
    }

    /// Maps a special-token surface form back to its token. Anything that is
    /// not a special token becomes a verbatim text piece.
    pub fn from_surface(s: &str) -> Token {
        parse_special(s).unwrap_or_else(|| Token::Text(s.to_string()))
    }
}

pub fn classify_token(t: &Token) -> TokenClass {
    match t {
        Token::DocOpen | Token::DocClose | Token::Open(_) | Token::Close(_) => TokenClass::Tag,
        Token::Loc(_) => TokenClass::Loc,
        Token::Text(_) => TokenClass::Other,
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::DocOpen => f.write_str(DOC_OPEN),
            Token::DocClose => f.write_str(DOC_CLOSE),
            Token::Open(c) => write!(f, "<{}>", c.tag_name()),
            Token::Close(c) => write!(f, "</{}>", c.tag_name()),
            Token::Loc(b) => write!(f, "<loc_{b}>"),
            Token::Text(t) => f.write_str(&escape_text(t)),
        }
    }
}

pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
    out
}

/// Parses the inside of `<...>`. Returns `Err` with a reason for unknown names.
pub(crate) fn parse_tag_body(body: &str) -> Result<Token, String> {
    if body == "screentag" {
        return Ok(Token::DocOpen);
    }
    if body == "/screentag" {
        return Ok(Token::DocClose);
    }
    if let Some(num) = body.strip_prefix("loc_") {
        let canonical = !num.is_empty()
            && num.bytes().all(|b| b.is_ascii_digit())
            && (num == "0" || !num.starts_with('0'));
        if !canonical {
            return Err(format!("malformed location token <{body}>"));
        }
        return match num.parse::<u32>() {
            Ok(v) if v <= MAX_BIN as u32 => Ok(Token::Loc(v as u16)),
            _ => Err(format!("location bin {num} outside 0..=500")),
        };
    }
    if let Some(name) = body.strip_prefix('/') {
        return UiClass::from_tag_name(name)
            .map(Token::Close)
            .ok_or_else(|| format!("unknown closing tag </{name}>"));
    }
    UiClass::from_tag_name(body)
        .map(Token::Open)
        .ok_or_else(|| format!("unknown tag <{body}>"))
}

fn parse_special(s: &str) -> Option<Token> {
    let body = s.strip_prefix('<')?.strip_suffix('>')?;
    parse_tag_body(body).ok()
}

/// The full special-token inventory: document delimiters, 55 opening tags,
/// 55 closing tags, then `<loc_0>` to `<loc_500>`.
pub fn vocabulary() -> Vec<Token> {
    let mut v = Vec::with_capacity(2 + 2 * 55 + 501);
    v.push(Token::DocOpen);
    v.push(Token::DocClose);
    v.extend(UiClass::all().map(Token::Open));
    v.extend(UiClass::all().map(Token::Close));
    v.extend((0..=MAX_BIN).map(Token::Loc));
    v
}

/// An ordered token stream.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq(pub Vec<Token>);

impl TokenSeq {
    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn classes(&self) -> Vec<TokenClass> {
        self.0.iter().map(classify_token).collect()
    }

    /// Concatenated surface forms, no separators.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in &self.0 {
            use fmt::Write;
            let _ = write!(out, "{t}");
        }
        out
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|t| write!(f, "{t}"))
    }
}

impl From<Vec<Token>> for TokenSeq {
    fn from(v: Vec<Token>) -> Self {
        TokenSeq(v)
    }
}
