//! Tokenizer for the KB text format. `#` starts a line comment.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    LBrace,
    RBrace,
    Eq,
    Ne,
    Colon,
    DoseUp,
    DoseDown,
    Str(String),
    Word(String),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Ne => f.write_str("`!=`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::DoseUp => f.write_str("`^+`"),
            Tok::DoseDown => f.write_str("`^-`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug)]
pub(crate) struct LexError {
    pub pos: Pos,
    pub message: String,
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '{' | '}' | '=' | ':' | '"' | '#' | '^' | '!')
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Spanned>, LexError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '{' | '}' | '=' | ':' => {
                bump!();
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '=' => Tok::Eq,
                    _ => Tok::Colon,
                };
                out.push(Spanned { tok, pos });
            }
            '!' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    out.push(Spanned { tok: Tok::Ne, pos });
                } else {
                    return Err(LexError {
                        pos,
                        message: "expected `!=`".into(),
                    });
                }
            }
            '^' => {
                bump!();
                let tok = match chars.peek() {
                    Some('+') => Tok::DoseUp,
                    Some('-') => Tok::DoseDown,
                    _ => {
                        return Err(LexError {
                            pos,
                            message: "expected `^+` or `^-`".into(),
                        })
                    }
                };
                bump!();
                out.push(Spanned { tok, pos });
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some(e @ ('"' | '\\')) => s.push(e),
                            Some('n') => s.push('\n'),
                            _ => {
                                return Err(LexError {
                                    pos,
                                    message: "invalid escape in string".into(),
                                })
                            }
                        },
                        Some('\n') | None => {
                            return Err(LexError {
                                pos,
                                message: "unterminated string".into(),
                            })
                        }
                        Some(c) => s.push(c),
                    }
                }
                out.push(Spanned {
                    tok: Tok::Str(s),
                    pos,
                });
            }
            _ => {
                let mut w = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_word_char(c) {
                        break;
                    }
                    w.push(c);
                    bump!();
                }
                out.push(Spanned {
                    tok: Tok::Word(w),
                    pos,
                });
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}
