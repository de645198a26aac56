//! ScreenTag markup: coordinate quantization, serialization of a page's
//! element forest to a token stream, and parsing back.
//!
//! Per element the stream holds
//! `<class><loc_x1><loc_y1><loc_x2><loc_y2>text children</class>`,
//! the whole page wrapped in `<screentag>`/`</screentag>`. x coordinates are
//! quantized against the viewport width, y against its height. Roots and
//! siblings are emitted in ascending (y1, x1) grid order, ties broken by
//! element index.

mod parse;
mod token;

use thiserror::Error;

use crate::page::{ForestError, PageRecord};
use crate::scalar::Scalar;

pub use parse::{parse, parse_tokens, tokenize};
pub use token::{
    classify_token, escape_text, vocabulary, Token, TokenClass, TokenSeq, DOC_CLOSE, DOC_OPEN,
    MAX_BIN,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScreenTagError {
    #[error("invalid viewport extent {0}")]
    InvalidViewport(f64),
    #[error("location bin {0} outside 0..=500")]
    InvalidBin(u32),
    #[error("non-finite coordinate {0}")]
    InvalidCoordinate(f64),
    /// `offset` is a byte offset for string input, a token index for token input.
    #[error("malformed markup at offset {offset}: {reason}")]
    MalformedMarkup { offset: usize, reason: String },
    #[error("malformed forest: {0}")]
    MalformedForest(#[from] ForestError),
}

/// Maps a coordinate onto the 0..=500 grid: `round(coord / extent * 500)`,
/// rounding halves up and clamping.
pub fn quantize<T: Scalar>(coord: T, extent: T) -> Result<u16, ScreenTagError> {
    if extent <= T::zero() || !extent.is_finite() {
        return Err(ScreenTagError::InvalidViewport(extent.to_f64_lossy()));
    }
    if !coord.is_finite() {
        return Err(ScreenTagError::InvalidCoordinate(coord.to_f64_lossy()));
    }
    let max = T::from_f64_lossy(MAX_BIN as f64);
    // multiply first: exact for integer pixel coordinates, so true halves stay halves
    let scaled = coord * max / extent;
    let bin = (scaled + T::half()).floor().max(T::zero()).min(max);
    Ok(bin.to_u16().unwrap_or(0))
}

/// Bin-edge inverse of [`quantize`]: `bin / 500 * extent`.
pub fn dequantize<T: Scalar>(bin: u32, extent: T) -> Result<T, ScreenTagError> {
    if bin > MAX_BIN as u32 {
        return Err(ScreenTagError::InvalidBin(bin));
    }
    Ok(T::from_f64_lossy(bin as f64) * extent / T::from_f64_lossy(MAX_BIN as f64))
}

fn quantized_box<T: Scalar>(
    page: &PageRecord<T>,
    i: usize,
) -> Result<[u16; 4], ScreenTagError> {
    let w = T::from_f64_lossy(page.viewport.width as f64);
    let h = T::from_f64_lossy(page.viewport.height as f64);
    let b = &page.elements[i].bbox;
    Ok([
        quantize(b.x1, w)?,
        quantize(b.y1, h)?,
        quantize(b.x2, w)?,
        quantize(b.y2, h)?,
    ])
}

/// Serializes the page's element forest to a token stream.
pub fn serialize<T: Scalar>(page: &PageRecord<T>) -> Result<TokenSeq, ScreenTagError> {
    if !page.viewport.is_valid() {
        let bad = page.viewport.width.min(page.viewport.height);
        return Err(ScreenTagError::InvalidViewport(bad as f64));
    }
    page.validate_forest()?;
    let locs = (0..page.elements.len())
        .map(|i| quantized_box(page, i))
        .collect::<Result<Vec<_>, _>>()?;
    let order = |ids: &mut Vec<usize>| {
        ids.sort_by_key(|&i| (locs[i][1], locs[i][0], i));
    };

    let mut out = Vec::with_capacity(2 + 7 * page.elements.len());
    out.push(Token::DocOpen);

    enum Step {
        Enter(usize),
        Exit(usize),
    }
    let mut roots: Vec<usize> = page.roots().collect();
    order(&mut roots);
    let mut stack: Vec<Step> = roots.into_iter().rev().map(Step::Enter).collect();
    while let Some(step) = stack.pop() {
        match step {
            Step::Enter(i) => {
                let e = &page.elements[i];
                out.push(Token::Open(e.class));
                out.extend(locs[i].iter().map(|&b| Token::Loc(b)));
                if let Some(t) = e.visible_text() {
                    out.push(Token::Text(t.to_string()));
                }
                stack.push(Step::Exit(i));
                let mut kids = e.children.clone();
                order(&mut kids);
                stack.extend(kids.into_iter().rev().map(Step::Enter));
            }
            Step::Exit(i) => out.push(Token::Close(page.elements[i].class)),
        }
    }
    out.push(Token::DocClose);
    Ok(TokenSeq(out))
}

/// [`serialize`] rendered to its string form.
pub fn to_markup<T: Scalar>(page: &PageRecord<T>) -> Result<String, ScreenTagError> {
    serialize(page).map(|s| s.render())
}
