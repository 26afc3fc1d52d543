use super::PddlError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    LParen,
    RParen,
    /// Identifiers, keywords (`:action`), variables (`?x`), the dash, and
    /// quoted reified names (quotes retained).
    Sym(String),
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(text: &str) -> Result<Vec<Token>, PddlError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            ';' => {
                // comment to end of line
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' => {
                chars.next();
                col += 1;
                out.push(Token { tok: Tok::LParen, line: tl, col: tc });
            }
            ')' => {
                chars.next();
                col += 1;
                out.push(Token { tok: Tok::RParen, line: tl, col: tc });
            }
            '"' => {
                chars.next();
                col += 1;
                let mut s = String::from("\"");
                let mut closed = false;
                while let Some(&c) = chars.peek() {
                    chars.next();
                    col += 1;
                    if c == '"' {
                        s.push('"');
                        closed = true;
                        break;
                    }
                    if c == '\n' {
                        break;
                    }
                    s.push(c);
                }
                if !closed {
                    return Err(PddlError::Parse {
                        line: tl,
                        col: tc,
                        message: "unterminated quoted name".into(),
                    });
                }
                out.push(Token { tok: Tok::Sym(s), line: tl, col: tc });
            }
            c if is_sym_char(c) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_sym_char(c) {
                        break;
                    }
                    s.push(c);
                    chars.next();
                    col += 1;
                }
                out.push(Token { tok: Tok::Sym(s), line: tl, col: tc });
            }
            c => {
                return Err(PddlError::Parse {
                    line: tl,
                    col: tc,
                    message: format!("unexpected character {c:?}"),
                });
            }
        }
    }
    Ok(out)
}

fn is_sym_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | ':' | '?')
}
