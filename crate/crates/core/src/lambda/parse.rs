use thiserror::Error;

use super::term::Term;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {position}: {message}")]
pub struct ParseError {
    /// Character offset into the input.
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Lambda,
    Dot,
    Open,
    Close,
    Ident(String),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '\\' | 'λ' => {
                tokens.push((i, Token::Lambda));
                i += 1;
            }
            '.' => {
                tokens.push((i, Token::Dot));
                i += 1;
            }
            '(' => {
                tokens.push((i, Token::Open));
                i += 1;
            }
            ')' => {
                tokens.push((i, Token::Close));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
                {
                    i += 1;
                }
                tokens.push((start, Token::Ident(chars[start..i].iter().collect())));
            }
            other => {
                return Err(ParseError {
                    position: i,
                    message: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(Token::Lambda) => self.abstraction(),
            _ => self.application(),
        }
    }

    fn abstraction(&mut self) -> Result<Term, ParseError> {
        self.pos += 1;
        let mut binders = Vec::new();
        while let Some(Token::Ident(name)) = self.peek() {
            binders.push(name.clone());
            self.pos += 1;
        }
        if binders.is_empty() {
            return self.error("expected a binder after lambda");
        }
        if self.peek() != Some(&Token::Dot) {
            return self.error("expected '.' after binders");
        }
        self.pos += 1;
        let body = self.term()?;
        Ok(binders
            .into_iter()
            .rev()
            .fold(body, |body, binder| Term::abs(binder, body)))
    }

    fn application(&mut self) -> Result<Term, ParseError> {
        let mut acc = match self.atom()? {
            Some(t) => t,
            None => return self.error("expected a term"),
        };
        loop {
            // A trailing abstraction extends to the end, as in `f \x.x`.
            if self.peek() == Some(&Token::Lambda) {
                let arg = self.abstraction()?;
                return Ok(Term::app(acc, arg));
            }
            match self.atom()? {
                Some(arg) => acc = Term::app(acc, arg),
                None => return Ok(acc),
            }
        }
    }

    fn atom(&mut self) -> Result<Option<Term>, ParseError> {
        match self.peek() {
            Some(Token::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(Some(Term::Var(name)))
            }
            Some(Token::Open) => {
                self.pos += 1;
                let inner = self.term()?;
                if self.peek() != Some(&Token::Close) {
                    return self.error("expected ')'");
                }
                self.pos += 1;
                Ok(Some(inner))
            }
            _ => Ok(None),
        }
    }
}

/// Parses the surface syntax: `\x y.M` (or `λ`), left-associative
/// application, and parenthesized subterms. Abstraction bodies extend as far
/// right as possible.
pub fn parse(text: &str) -> Result<Term, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.chars().count(),
    };
    let term = parser.term()?;
    if parser.pos != parser.tokens.len() {
        return parser.error("unexpected trailing input");
    }
    Ok(term)
}
