//! Minimal S-expression reader for solver output.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    /// Symbol, numeral, decimal or keyword; `|quoted|` symbols arrive unquoted.
    Atom(String),
    Str(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn head(&self) -> Option<&str> {
        self.list()?.first()?.atom()
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::Str(s) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("s-expression syntax error at byte {offset}: {message}")]
pub struct SexpError {
    pub offset: usize,
    pub message: String,
}

pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let err = |offset, message: &str| SexpError { offset, message: message.to_string() };
    while pos < bytes.len() {
        let b = bytes[pos];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => pos += 1,
            b';' => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            b'(' => {
                stack.push(Vec::new());
                pos += 1;
            }
            b')' => {
                if stack.len() == 1 {
                    return Err(err(pos, "unbalanced `)`"));
                }
                let done = stack.pop().unwrap();
                stack.last_mut().unwrap().push(Sexp::List(done));
                pos += 1;
            }
            b'"' => {
                let start = pos;
                pos += 1;
                let mut s = String::new();
                loop {
                    if pos >= bytes.len() {
                        return Err(err(start, "unterminated string"));
                    }
                    if bytes[pos] == b'"' {
                        if bytes.get(pos + 1) == Some(&b'"') {
                            s.push('"');
                            pos += 2;
                            continue;
                        }
                        pos += 1;
                        break;
                    }
                    let ch = text[pos..].chars().next().unwrap();
                    s.push(ch);
                    pos += ch.len_utf8();
                }
                stack.last_mut().unwrap().push(Sexp::Str(s));
            }
            b'|' => {
                let start = pos;
                let end = text[pos + 1..].find('|').ok_or_else(|| err(start, "unterminated |symbol|"))?;
                stack.last_mut().unwrap().push(Sexp::Atom(text[pos + 1..pos + 1 + end].to_string()));
                pos += end + 2;
            }
            _ => {
                let start = pos;
                while pos < bytes.len() && !matches!(bytes[pos], b' ' | b'\t' | b'\r' | b'\n' | b'(' | b')' | b';' | b'"')
                {
                    pos += 1;
                }
                stack.last_mut().unwrap().push(Sexp::Atom(text[start..pos].to_string()));
            }
        }
    }
    if stack.len() != 1 {
        return Err(err(bytes.len(), "unbalanced `(`"));
    }
    Ok(stack.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_strings_and_quoted_symbols() {
        let parsed = parse_all("sat\n(model (define-fun |a b| () Bool true)) ; comment\n(error \"x \"\"y\"\"\")").unwrap();
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed[0], Sexp::Atom("sat".into()));
        assert_eq!(parsed[1].head(), Some("model"));
        let inner = parsed[1].list().unwrap()[1].list().unwrap();
        assert_eq!(inner[1], Sexp::Atom("a b".into()));
        assert_eq!(parsed[2].list().unwrap()[1], Sexp::Str("x \"y\"".into()));
    }

    #[test]
    fn rejects_unbalanced_input() {
        assert!(parse_all("(a (b)").is_err());
        assert!(parse_all("a)").is_err());
        assert!(parse_all("\"open").is_err());
    }
}
