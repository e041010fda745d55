/// Token of the specification language. Columns are 1-based character
/// offsets into the line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Arrow,
    Sym(char),
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number {s}"),
            Tok::Str(_) => "string".to_string(),
            Tok::Arrow => "`->`".to_string(),
            Tok::Sym(c) => format!("`{c}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LexError {
    pub col: usize,
    pub expected: String,
}

/// Splits one line into tokens, dropping a trailing `#` comment.
pub(crate) fn lex_line(line: &str) -> Result<Vec<Spanned>, LexError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            break;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), col });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Spanned { tok: Tok::Number(chars[start..i].iter().collect()), col });
        } else if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                i += 1;
            }
            if i == chars.len() {
                return Err(LexError { col: chars.len() + 1, expected: "closing `\"`".into() });
            }
            out.push(Spanned { tok: Tok::Str(chars[start..i].iter().collect()), col });
            i += 1;
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Spanned { tok: Tok::Arrow, col });
            i += 2;
        } else if "(),:=@+-".contains(c) {
            out.push(Spanned { tok: Tok::Sym(c), col });
            i += 1;
        } else {
            return Err(LexError { col, expected: format!("a token, found `{c}`") });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex_line(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn step_line() {
        assert_eq!(
            toks("step 9.2 WS -> User over insecure: link=L # email"),
            vec![
                Tok::Ident("step".into()),
                Tok::Number("9.2".into()),
                Tok::Ident("WS".into()),
                Tok::Arrow,
                Tok::Ident("User".into()),
                Tok::Ident("over".into()),
                Tok::Ident("insecure".into()),
                Tok::Sym(':'),
                Tok::Ident("link".into()),
                Tok::Sym('='),
                Tok::Ident("L".into()),
            ]
        );
    }

    #[test]
    fn strings_keep_hashes() {
        assert_eq!(toks("goal \"a # b\""), vec![Tok::Ident("goal".into()), Tok::Str("a # b".into())]);
    }

    #[test]
    fn columns_are_one_based() {
        let t = lex_line("  capability +x").unwrap();
        assert_eq!(t[0].col, 3);
        assert_eq!(t[1].col, 14);
    }

    #[test]
    fn rejects_stray_characters() {
        let err = lex_line("step 1 $").unwrap_err();
        assert_eq!(err.col, 8);
        assert!(lex_line("goal \"open").is_err());
    }
}
