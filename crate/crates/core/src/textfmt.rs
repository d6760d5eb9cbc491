//! Helpers for the line-oriented text formats (court files, configs, manifests).

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Yields `(line_number, tokens)` for every non-blank line, with `#` comments stripped.
pub(crate) fn token_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            None
        } else {
            Some((i + 1, toks))
        }
    })
}

pub(crate) fn parse_tok<T: FromStr>(path: &Path, line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| Error::parse(path, line, format!("invalid {what} `{tok}`")))
}

/// Parses all tokens after the keyword as `n` values of type `T`.
pub(crate) fn parse_args<T: FromStr>(
    path: &Path,
    line: usize,
    toks: &[&str],
    n: usize,
) -> Result<Vec<T>> {
    let key = toks[0];
    if toks.len() != n + 1 {
        return Err(Error::parse(
            path,
            line,
            format!("`{key}` expects {n} value(s), found {}", toks.len() - 1),
        ));
    }
    toks[1..]
        .iter()
        .map(|t| parse_tok(path, line, t, key))
        .collect()
}
