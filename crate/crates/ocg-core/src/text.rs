//! Field escaping shared by the line-oriented formats.
//!
//! Records are single lines with fields joined by ` | ` and list entries
//! joined by `;`. Escaping makes that reversible for arbitrary field content:
//! `\\` backslash, `\|` pipe, `\;` semicolon, `\n` newline, `\r` carriage
//! return. Escaped text never contains a bare `|`, so the field separator can
//! be found by plain substring search.

/// Join separator between fields of one record line.
pub(crate) const FIELD_SEP: &str = " | ";

/// Escape one field for embedding in a record line.
pub(crate) fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\|"),
            ';' => out.push_str("\\;"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
    out
}

/// Reverse [`escape_field`]. Errors on unknown escapes or a trailing `\`.
pub(crate) fn unescape_field(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('|') => out.push('|'),
            Some(';') => out.push(';'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("unknown escape sequence \\{other}")),
            None => return Err("dangling escape at end of field".to_string()),
        }
    }
    Ok(out)
}

/// Split a record tail into still-escaped field fragments.
pub(crate) fn split_fields(tail: &str) -> Vec<&str> {
    tail.split(FIELD_SEP).collect()
}

/// Render a list-valued field. The empty list renders as the empty string;
/// entries are escaped individually, so `;` separators are unambiguous.
pub(crate) fn join_list(entries: &[String]) -> String {
    entries.iter().map(|e| escape_field(e)).collect::<Vec<_>>().join(";")
}

/// Parse a list-valued field from its still-escaped fragment.
pub(crate) fn split_list(fragment: &str) -> Result<Vec<String>, String> {
    if fragment.is_empty() {
        return Ok(Vec::new());
    }
    let mut entries = Vec::new();
    let mut current = String::new();
    let mut chars = fragment.chars();
    while let Some(c) = chars.next() {
        match c {
            ';' => entries.push(std::mem::take(&mut current)),
            '\\' => match chars.next() {
                Some('\\') => current.push('\\'),
                Some('|') => current.push('|'),
                Some(';') => current.push(';'),
                Some('n') => current.push('\n'),
                Some('r') => current.push('\r'),
                Some(other) => return Err(format!("unknown escape sequence \\{other}")),
                None => return Err("dangling escape at end of field".to_string()),
            },
            other => current.push(other),
        }
    }
    entries.push(current);
    Ok(entries)
}
