//! Tokenizer for the scenario description language.
//!
//! Identifiers may contain `-`, and `->` / `-|` are arrow tokens, so a dash
//! inside an identifier ends it only when `>` or `|` follows. Numbers keep
//! their raw spelling because a bare integer can double as a case id.

use super::{ErrorKind, ParseError};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number { value: f64, raw: String },
    Str(String),
    LBrace,
    RBrace,
    Colon,
    Comma,
    Dot,
    Bang,
    /// `->`
    ExcArrow,
    /// `-|`
    InhArrow,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number { raw, .. } => format!("number `{raw}`"),
            Tok::Str(_) => "string".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Bang => "`!`".into(),
            Tok::ExcArrow => "`->`".into(),
            Tok::InhArrow => "`-|`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub column: u32,
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn ident_continue(c: char) -> bool {
    ident_start(c) || c == '-'
}

/// Tokenizes the source, reporting unlexable characters as syntax
/// diagnostics and skipping them.
pub fn lex(text: &str) -> (Vec<Token>, Vec<ParseError>) {
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut column = 1u32;

    macro_rules! advance {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let (tok_line, tok_col) = (line, column);
        match c {
            ' ' | '\t' | '\r' | '\n' => advance!(),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    advance!();
                }
            }
            '{' | '}' | ':' | ',' | '.' | '!' => {
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ':' => Tok::Colon,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    _ => Tok::Bang,
                };
                tokens.push(Token {
                    tok,
                    line: tok_line,
                    column: tok_col,
                });
                advance!();
            }
            '"' => {
                advance!();
                let mut s = String::new();
                let mut closed = false;
                while i < chars.len() {
                    if chars[i] == '"' {
                        advance!();
                        closed = true;
                        break;
                    }
                    if chars[i] == '\n' {
                        break;
                    }
                    s.push(chars[i]);
                    advance!();
                }
                if closed {
                    tokens.push(Token {
                        tok: Tok::Str(s),
                        line: tok_line,
                        column: tok_col,
                    });
                } else {
                    errors.push(ParseError {
                        line: tok_line,
                        column: tok_col,
                        kind: ErrorKind::Syntax,
                        message: "unterminated string".into(),
                    });
                }
            }
            '-' => {
                let next = chars.get(i + 1).copied();
                match next {
                    Some('>') => {
                        tokens.push(Token {
                            tok: Tok::ExcArrow,
                            line: tok_line,
                            column: tok_col,
                        });
                        advance!();
                        advance!();
                    }
                    Some('|') => {
                        tokens.push(Token {
                            tok: Tok::InhArrow,
                            line: tok_line,
                            column: tok_col,
                        });
                        advance!();
                        advance!();
                    }
                    Some(d) if d.is_ascii_digit() => {
                        let mut raw = String::from('-');
                        advance!();
                        scan_digits(&chars, &mut i, &mut line, &mut column, &mut raw);
                        push_number(&mut tokens, &mut errors, raw, tok_line, tok_col);
                    }
                    _ => {
                        errors.push(ParseError {
                            line: tok_line,
                            column: tok_col,
                            kind: ErrorKind::Syntax,
                            message: "stray `-`".into(),
                        });
                        advance!();
                    }
                }
            }
            d if d.is_ascii_digit() => {
                let mut raw = String::new();
                scan_digits(&chars, &mut i, &mut line, &mut column, &mut raw);
                // A digit run flowing straight into letters is an identifier
                // like `2nd-try`, not a number.
                if i < chars.len() && ident_continue(chars[i]) && !raw.contains('.') {
                    let mut name = raw;
                    scan_ident(&chars, &mut i, &mut line, &mut column, &mut name);
                    tokens.push(Token {
                        tok: Tok::Ident(name),
                        line: tok_line,
                        column: tok_col,
                    });
                } else {
                    push_number(&mut tokens, &mut errors, raw, tok_line, tok_col);
                }
            }
            a if ident_start(a) => {
                let mut name = String::new();
                scan_ident(&chars, &mut i, &mut line, &mut column, &mut name);
                tokens.push(Token {
                    tok: Tok::Ident(name),
                    line: tok_line,
                    column: tok_col,
                });
            }
            other => {
                errors.push(ParseError {
                    line: tok_line,
                    column: tok_col,
                    kind: ErrorKind::Syntax,
                    message: format!("unexpected character `{other}`"),
                });
                advance!();
            }
        }
    }
    (tokens, errors)
}

fn scan_digits(chars: &[char], i: &mut usize, line: &mut u32, column: &mut u32, out: &mut String) {
    let take = |i: &mut usize, column: &mut u32, out: &mut String| {
        out.push(chars[*i]);
        *i += 1;
        *column += 1;
    };
    let _ = line;
    while *i < chars.len() && chars[*i].is_ascii_digit() {
        take(i, column, out);
    }
    if *i < chars.len()
        && chars[*i] == '.'
        && chars.get(*i + 1).is_some_and(|c| c.is_ascii_digit())
    {
        take(i, column, out);
        while *i < chars.len() && chars[*i].is_ascii_digit() {
            take(i, column, out);
        }
    }
}

fn scan_ident(chars: &[char], i: &mut usize, line: &mut u32, column: &mut u32, out: &mut String) {
    let _ = line;
    while *i < chars.len() && ident_continue(chars[*i]) {
        if chars[*i] == '-' {
            match chars.get(*i + 1) {
                Some('>') | Some('|') => break,
                _ => {}
            }
        }
        out.push(chars[*i]);
        *i += 1;
        *column += 1;
    }
}

fn push_number(
    tokens: &mut Vec<Token>,
    errors: &mut Vec<ParseError>,
    raw: String,
    line: u32,
    column: u32,
) {
    match raw.parse::<f64>() {
        Ok(value) => tokens.push(Token {
            tok: Tok::Number { raw, value },
            line,
            column,
        }),
        Err(_) => errors.push(ParseError {
            line,
            column,
            kind: ErrorKind::Syntax,
            message: format!("malformed number `{raw}`"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<Tok> {
        let (tokens, errors) = lex(text);
        assert!(errors.is_empty(), "unexpected lex errors: {errors:?}");
        tokens.into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn arrows_split_dashed_identifiers() {
        assert_eq!(
            toks("hands-free a->b c -| d"),
            vec![
                Tok::Ident("hands-free".into()),
                Tok::Ident("a".into()),
                Tok::ExcArrow,
                Tok::Ident("b".into()),
                Tok::Ident("c".into()),
                Tok::InhArrow,
                Tok::Ident("d".into()),
            ]
        );
    }

    #[test]
    fn numbers_keep_raw_text_and_sign() {
        let (tokens, errors) = lex("0.5 -1 2");
        assert!(errors.is_empty());
        let raws: Vec<&str> = tokens
            .iter()
            .map(|t| match &t.tok {
                Tok::Number { raw, .. } => raw.as_str(),
                _ => panic!("expected number"),
            })
            .collect();
        assert_eq!(raws, ["0.5", "-1", "2"]);
    }

    #[test]
    fn comments_run_to_end_of_line() {
        assert_eq!(
            toks("a # b c d\ne"),
            vec![Tok::Ident("a".into()), Tok::Ident("e".into())]
        );
    }

    #[test]
    fn positions_are_one_based_lines_and_columns() {
        let (tokens, _) = lex("ab\n  cd");
        assert_eq!((tokens[0].line, tokens[0].column), (1, 1));
        assert_eq!((tokens[1].line, tokens[1].column), (2, 3));
    }

    #[test]
    fn unterminated_string_is_a_syntax_error_at_the_quote() {
        let (_, errors) = lex("scenario \"oops\n");
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].kind, ErrorKind::Syntax);
        assert_eq!((errors[0].line, errors[0].column), (1, 10));
    }

    #[test]
    fn leading_digit_identifiers_stay_identifiers() {
        assert_eq!(toks("2nd-try"), vec![Tok::Ident("2nd-try".into())]);
    }
}
