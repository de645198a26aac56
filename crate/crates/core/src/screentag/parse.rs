use crate::geom::{BBox, Viewport};
use crate::page::{PageRecord, UiElement};
use crate::scalar::Scalar;

use super::token::{parse_tag_body, Token, TokenSeq};
use super::{dequantize, ScreenTagError};

fn malformed(offset: usize, reason: impl Into<String>) -> ScreenTagError {
    ScreenTagError::MalformedMarkup {
        offset,
        reason: reason.into(),
    }
}

/// Splits markup into tokens paired with their byte offsets. Text runs are
/// unescaped (`&lt;`, `&gt;`, `&amp;` and numeric `&#N;`/`&#xH;` references).
pub fn tokenize(input: &str) -> Result<Vec<(Token, usize)>, ScreenTagError> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'<' {
            let rest = &input[i + 1..];
            let end = rest
                .find(['>', '<'])
                .filter(|&j| rest.as_bytes()[j] == b'>')
                .ok_or_else(|| malformed(i, "unterminated tag"))?;
            let tok = parse_tag_body(&rest[..end]).map_err(|r| malformed(i, r))?;
            out.push((tok, i));
            i += end + 2;
        } else {
            let len = input[i..].find('<').unwrap_or(input.len() - i);
            let text = unescape(&input[i..i + len], i)?;
            out.push((Token::Text(text), i));
            i += len;
        }
    }
    Ok(out)
}

fn unescape(raw: &str, base: usize) -> Result<String, ScreenTagError> {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    let mut pos = base;
    while let Some(k) = rest.find(['&', '>']) {
        out.push_str(&rest[..k]);
        pos += k;
        if rest.as_bytes()[k] == b'>' {
            return Err(malformed(pos, "unescaped '>' in text"));
        }
        let tail = &rest[k..];
        let semi = tail
            .find(';')
            .filter(|&s| s <= 10)
            .ok_or_else(|| malformed(pos, "unterminated character reference"))?;
        let entity = &tail[1..semi];
        let ch = match entity {
            "lt" => '<',
            "gt" => '>',
            "amp" => '&',
            _ => entity
                .strip_prefix("#x")
                .or_else(|| entity.strip_prefix("#X"))
                .map(|h| u32::from_str_radix(h, 16))
                .or_else(|| entity.strip_prefix('#').map(|d| d.parse::<u32>()))
                .and_then(Result::ok)
                .and_then(char::from_u32)
                .ok_or_else(|| malformed(pos, format!("unknown character reference &{entity};")))?,
        };
        out.push(ch);
        pos += semi + 1;
        rest = &tail[semi + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Parses a markup string into a page with dequantized boxes.
///
/// The `<screentag>` framing is optional; a bare sequence of elements is
/// accepted as well.
pub fn parse<T: Scalar>(input: &str, viewport: Viewport) -> Result<PageRecord<T>, ScreenTagError> {
    let tokens = tokenize(input)?;
    build(&tokens, viewport, input.len())
}

/// Parses an already tokenized stream. Error offsets are token indices.
pub fn parse_tokens<T: Scalar>(
    seq: &TokenSeq,
    viewport: Viewport,
) -> Result<PageRecord<T>, ScreenTagError> {
    let tokens: Vec<(Token, usize)> = seq.0.iter().cloned().zip(0..).collect();
    build(&tokens, viewport, seq.len())
}

enum Slot {
    /// Opened and located; text may still follow.
    Fresh,
    HasText,
    InChildren,
}

fn build<T: Scalar>(
    tokens: &[(Token, usize)],
    viewport: Viewport,
    end_offset: usize,
) -> Result<PageRecord<T>, ScreenTagError> {
    if !viewport.is_valid() {
        let bad = viewport.width.min(viewport.height);
        return Err(ScreenTagError::InvalidViewport(bad as f64));
    }
    let w = T::from_f64_lossy(viewport.width as f64);
    let h = T::from_f64_lossy(viewport.height as f64);
    let mut page = PageRecord::new("", viewport);
    let framed = matches!(tokens.first(), Some((Token::DocOpen, _)));
    let mut stack: Vec<(usize, Slot)> = Vec::new();
    let mut closed = false;
    let mut i = usize::from(framed);

    while i < tokens.len() {
        let (tok, off) = &tokens[i];
        if closed {
            return Err(malformed(*off, "trailing content after </screentag>"));
        }
        match tok {
            Token::DocOpen => return Err(malformed(*off, "unexpected <screentag>")),
            Token::DocClose => {
                if let Some(&(open, _)) = stack.last() {
                    let tag = page.elements[open].class.tag_name();
                    return Err(malformed(*off, format!("</screentag> while <{tag}> is open")));
                }
                if !framed {
                    return Err(malformed(*off, "</screentag> without <screentag>"));
                }
                closed = true;
            }
            Token::Loc(_) => return Err(malformed(*off, "location token outside an element header")),
            Token::Open(class) => {
                let mut bins = [0u32; 4];
                for (k, bin) in bins.iter_mut().enumerate() {
                    match tokens.get(i + 1 + k) {
                        Some((Token::Loc(b), _)) => *bin = *b as u32,
                        other => {
                            let at = other.map_or(end_offset, |(_, o)| *o);
                            return Err(malformed(
                                at,
                                format!(
                                    "<{}> needs 4 location tokens, found {k}",
                                    class.tag_name()
                                ),
                            ));
                        }
                    }
                }
                let bbox = BBox::new(
                    dequantize(bins[0], w)?,
                    dequantize(bins[1], h)?,
                    dequantize(bins[2], w)?,
                    dequantize(bins[3], h)?,
                );
                let parent = match stack.last_mut() {
                    Some((p, slot)) => {
                        *slot = Slot::InChildren;
                        Some(*p)
                    }
                    None => None,
                };
                let idx = page.push(UiElement::new(bbox, *class), parent);
                stack.push((idx, Slot::Fresh));
                i += 4;
            }
            Token::Text(t) => match stack.last_mut() {
                None if t.chars().all(char::is_whitespace) && !framed => {}
                None => return Err(malformed(*off, "text outside any element")),
                Some((_, Slot::InChildren)) => {
                    return Err(malformed(*off, "text after child elements"))
                }
                Some((idx, slot)) => {
                    page.elements[*idx]
                        .text
                        .get_or_insert_with(String::new)
                        .push_str(t);
                    *slot = Slot::HasText;
                }
            },
            Token::Close(class) => match stack.pop() {
                Some((idx, _)) if page.elements[idx].class == *class => {}
                Some((idx, _)) => {
                    return Err(malformed(
                        *off,
                        format!(
                            "tag mismatch: expected </{}>, found </{}>",
                            page.elements[idx].class.tag_name(),
                            class.tag_name()
                        ),
                    ))
                }
                None => {
                    return Err(malformed(*off, format!("unmatched </{}>", class.tag_name())))
                }
            },
        }
        i += 1;
    }
    if let Some(&(idx, _)) = stack.last() {
        return Err(malformed(
            end_offset,
            format!("unclosed <{}>", page.elements[idx].class.tag_name()),
        ));
    }
    if framed && !closed {
        return Err(malformed(end_offset, "missing </screentag>"));
    }
    for e in &mut page.elements {
        if e.text.as_deref() == Some("") {
            e.text = None;
        }
    }
    Ok(page)
}
