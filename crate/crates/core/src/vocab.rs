//! Token alphabet for the synthetic reasoning tasks.
//!
//! A vocabulary is an ordered list of distinct symbols: the ten digits,
//! operator symbols, an answer open/close tag pair, an end-of-sequence
//! marker, and one or more filler "reasoning" symbols. Tokens are indices
//! into that list.

use crate::{Error, Result};

/// Index of a symbol in a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(pub usize);

impl Token {
    pub fn idx(self) -> usize {
        self.0
    }
}

const OPEN_TAG: &str = "<answer>";
const CLOSE_TAG: &str = "</answer>";
const EOS: &str = "<eos>";
const OPERATORS: [&str; 2] = ["+", "mod"];
const FILLER_NAMES: [&str; 8] = ["think", "hmm", "so", "check", "wait", "note", "recall", "thus"];

/// Ordered token alphabet with the special symbols resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    digits: [Token; 10],
    ops: Vec<Token>,
    open_tag: Token,
    close_tag: Token,
    eos: Token,
    fillers: Vec<Token>,
}

impl Vocabulary {
    /// Standard alphabet: digits 0-9, `+`, `mod`, the answer tag pair,
    /// `<eos>`, and `n_fillers` filler symbols. `n_fillers = 1` gives the
    /// 16-symbol alphabet used throughout the experiments.
    pub fn standard(n_fillers: usize) -> Result<Self> {
        if n_fillers == 0 || n_fillers > FILLER_NAMES.len() {
            return Err(Error::Vocab(format!(
                "n_fillers must be in 1..={}, got {n_fillers}",
                FILLER_NAMES.len()
            )));
        }
        let mut symbols: Vec<String> = (0..10).map(|d| d.to_string()).collect();
        symbols.extend(OPERATORS.iter().map(|s| s.to_string()));
        symbols.push(OPEN_TAG.to_string());
        symbols.push(CLOSE_TAG.to_string());
        symbols.push(EOS.to_string());
        symbols.extend(FILLER_NAMES[..n_fillers].iter().map(|s| s.to_string()));
        Self::from_symbols(symbols)
    }

    /// Build from an explicit symbol list. Special symbols are recognized
    /// by name; digits `0`-`9`, `<answer>`, `</answer>`, and `<eos>` must
    /// all be present exactly once, and at least one symbol must remain as
    /// filler.
    pub fn from_symbols(symbols: Vec<String>) -> Result<Self> {
        if symbols.len() < 14 {
            return Err(Error::Vocab(format!(
                "vocabulary needs at least 14 symbols, got {}",
                symbols.len()
            )));
        }
        for s in &symbols {
            if s.is_empty() || s.contains(' ') || s.contains(',') || s.contains('\n') {
                return Err(Error::Vocab(format!("symbol {s:?} contains reserved characters")));
            }
        }
        let find_unique = |name: &str| -> Result<Token> {
            let hits: Vec<usize> = symbols
                .iter()
                .enumerate()
                .filter(|(_, s)| s.as_str() == name)
                .map(|(i, _)| i)
                .collect();
            match hits.as_slice() {
                [i] => Ok(Token(*i)),
                [] => Err(Error::Vocab(format!("missing symbol {name:?}"))),
                _ => Err(Error::Vocab(format!("symbol {name:?} occurs more than once"))),
            }
        };
        let mut seen = std::collections::HashSet::new();
        for s in &symbols {
            if !seen.insert(s.as_str()) {
                return Err(Error::Vocab(format!("duplicate symbol {s:?}")));
            }
        }
        let mut digits = [Token(0); 10];
        for d in 0..10 {
            digits[d] = find_unique(&d.to_string())?;
        }
        let open_tag = find_unique(OPEN_TAG)?;
        let close_tag = find_unique(CLOSE_TAG)?;
        let eos = find_unique(EOS)?;
        let special: std::collections::HashSet<usize> = digits
            .iter()
            .map(|t| t.0)
            .chain([open_tag.0, close_tag.0, eos.0])
            .collect();
        let ops: Vec<Token> = symbols
            .iter()
            .enumerate()
            .filter(|(i, s)| !special.contains(i) && OPERATORS.contains(&s.as_str()))
            .map(|(i, _)| Token(i))
            .collect();
        let fillers: Vec<Token> = symbols
            .iter()
            .enumerate()
            .filter(|(i, s)| !special.contains(i) && !OPERATORS.contains(&s.as_str()))
            .map(|(i, _)| Token(i))
            .collect();
        if fillers.is_empty() {
            return Err(Error::Vocab("vocabulary needs at least one filler symbol".into()));
        }
        Ok(Self { symbols, digits, ops, open_tag, close_tag, eos, fillers })
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn open_tag(&self) -> Token {
        self.open_tag
    }

    pub fn close_tag(&self) -> Token {
        self.close_tag
    }

    pub fn eos(&self) -> Token {
        self.eos
    }

    pub fn fillers(&self) -> &[Token] {
        &self.fillers
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// The token for decimal digit `d` (0-9).
    pub fn digit(&self, d: u8) -> Token {
        self.digits[d as usize]
    }

    /// Decimal value of a digit token, if it is one.
    pub fn digit_value(&self, t: Token) -> Option<u8> {
        self.digits.iter().position(|&d| d == t).map(|v| v as u8)
    }

    pub fn is_digit(&self, t: Token) -> bool {
        self.digit_value(t).is_some()
    }

    /// The `+` operator token.
    pub fn plus(&self) -> Token {
        self.ops[0]
    }

    /// The `mod` operator token.
    pub fn modulo(&self) -> Token {
        self.ops[1]
    }

    pub fn symbol(&self, t: Token) -> &str {
        &self.symbols[t.0]
    }

    pub fn token_for(&self, symbol: &str) -> Result<Token> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .map(Token)
            .ok_or_else(|| Error::Vocab(format!("unknown symbol {symbol:?}")))
    }

    pub fn contains(&self, t: Token) -> bool {
        t.0 < self.symbols.len()
    }

    /// Tokens for the decimal expansion of `value` (no leading zeros;
    /// zero renders as the single digit `0`).
    pub fn digit_tokens(&self, value: u64) -> Vec<Token> {
        value
            .to_string()
            .bytes()
            .map(|b| self.digit(b - b'0'))
            .collect()
    }

    /// Render a token sequence as space-separated symbol names.
    pub fn render(&self, tokens: &[Token]) -> String {
        tokens
            .iter()
            .map(|&t| self.symbol(t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parse space-separated symbol names.
    pub fn parse(&self, text: &str) -> Result<Vec<Token>> {
        text.split_whitespace().map(|s| self.token_for(s)).collect()
    }

    /// FNV-1a hash of the symbol list; binds pool files to the task
    /// vocabulary they were curated against.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for s in &self.symbols {
            for b in s.bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= 0x1f;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}
