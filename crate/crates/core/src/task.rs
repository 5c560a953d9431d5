//! Synthetic verifiable-reasoning tasks.
//!
//! Each query is a modular-arithmetic chain `a + b + ... mod m` rendered
//! as tokens; the ground truth is the decimal expansion of the result.
//! Responses are verified by exact token match of the span inside the
//! answer tags, and rewarded with a composite accuracy+format score
//! `R = (1 - beta) * accuracy + beta * format`.
//!
//! A configurable fraction of queries is "hard": their ground truth
//! contains a designated rare digit that never appears in easy ground
//! truths or in any prompt, so a policy that cannot emit that digit
//! cannot solve them.

use crate::seed;
use crate::vocab::{Token, Vocabulary};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// One task: a prompt and its verified answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub id: u64,
    /// Problem statement tokens; never contains answer tags.
    pub prompt: Vec<Token>,
    /// Digit tokens of the correct answer, tags excluded.
    pub ground_truth: Vec<Token>,
    /// Whether this query's ground truth uses the rare digit.
    pub hard: bool,
}

/// A vocabulary plus an ordered set of queries.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    pub vocab: Vocabulary,
    pub queries: Vec<Query>,
}

impl TaskSet {
    pub fn query(&self, id: u64) -> Option<&Query> {
        self.queries.iter().find(|q| q.id == id)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Shape of the generated tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyProfile {
    /// Inclusive range for the number of chained operands (>= 2).
    pub chain_len: (usize, usize),
    /// Inclusive digit range operands are drawn from (rare digit excluded).
    pub operands: (u8, u8),
    /// Modulus for easy queries.
    pub easy_modulus: u32,
    /// Modulus for hard queries.
    pub hard_modulus: u32,
    /// Fraction of queries flagged hard: exactly floor(fraction * n).
    pub hard_fraction: f64,
    /// Digit reserved for hard ground truths.
    pub rare_digit: u8,
}

impl Default for DifficultyProfile {
    fn default() -> Self {
        Self {
            chain_len: (3, 7),
            operands: (0, 8),
            easy_modulus: 87,
            hard_modulus: 10,
            hard_fraction: 0.0,
            rare_digit: 9,
        }
    }
}

impl DifficultyProfile {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.chain_len;
        if lo < 2 || lo > hi {
            return Err(Error::Config(format!("empty or invalid chain_len range {lo}..={hi}")));
        }
        let (olo, ohi) = self.operands;
        if olo > ohi || ohi > 9 {
            return Err(Error::Config(format!("empty or invalid operand range {olo}..={ohi}")));
        }
        if self.rare_digit > 9 {
            return Err(Error::Config(format!("rare_digit must be a digit, got {}", self.rare_digit)));
        }
        if !self.allowed_operands().next().is_some() {
            return Err(Error::Config("operand range contains only the rare digit".into()));
        }
        if self.easy_modulus < 2 || self.hard_modulus < 2 {
            return Err(Error::Config("moduli must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.hard_fraction) {
            return Err(Error::Config(format!(
                "hard_fraction must be in [0, 1], got {}",
                self.hard_fraction
            )));
        }
        Ok(())
    }

    fn allowed_operands(&self) -> impl Iterator<Item = u8> + '_ {
        (self.operands.0..=self.operands.1).filter(move |&d| d != self.rare_digit)
    }
}

fn decimal_contains_digit(value: u64, digit: u8) -> bool {
    value.to_string().bytes().any(|b| b - b'0' == digit)
}

/// Deterministically generate `n_queries` tasks for a seed and profile.
///
/// Hard flags go to the first `floor(hard_fraction * n)` ids after a
/// seeded shuffle; hard chains are adjusted so the result's decimal
/// expansion contains the rare digit, easy chains so it does not.
pub fn generate_taskset(
    seed: u64,
    n_queries: usize,
    difficulty: &DifficultyProfile,
) -> Result<TaskSet> {
    difficulty.validate()?;
    if n_queries == 0 {
        return Err(Error::Config("n_queries must be >= 1".into()));
    }
    let vocab = Vocabulary::standard(1)?;

    let hard_count = (difficulty.hard_fraction * n_queries as f64).floor() as usize;
    let mut order: Vec<u64> = (0..n_queries as u64).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, &[0])));
    let hard_ids: std::collections::HashSet<u64> = order[..hard_count].iter().copied().collect();

    let hard_targets: Vec<u64> = (0..difficulty.hard_modulus as u64)
        .filter(|&r| decimal_contains_digit(r, difficulty.rare_digit))
        .collect();
    if hard_count > 0 && hard_targets.is_empty() {
        return Err(Error::Config(format!(
            "hard_modulus {} admits no result containing digit {}",
            difficulty.hard_modulus, difficulty.rare_digit
        )));
    }

    let allowed: Vec<u8> = difficulty.allowed_operands().collect();
    let mut queries = Vec::with_capacity(n_queries);
    for id in 0..n_queries as u64 {
        let hard = hard_ids.contains(&id);
        let mut rng = seed::rng(seed::derive(seed, &[1, id]));
        let (operands, result) = loop {
            let len = rng.random_range(difficulty.chain_len.0..=difficulty.chain_len.1);
            let mut ops: Vec<u8> = (0..len)
                .map(|_| allowed[rng.random_range(0..allowed.len())])
                .collect();
            let modulus = if hard { difficulty.hard_modulus } else { difficulty.easy_modulus } as u64;
            if hard {
                // Pick a result containing the rare digit and solve for the
                // last operand; retry when the solution is not an allowed digit.
                let target = hard_targets[rng.random_range(0..hard_targets.len())];
                let partial: u64 = ops[..len - 1].iter().map(|&d| d as u64).sum();
                let x = (target as i64 - (partial % modulus) as i64).rem_euclid(modulus as i64);
                if x <= 9 && allowed.contains(&(x as u8)) {
                    ops[len - 1] = x as u8;
                    break (ops, target);
                }
            } else {
                let sum: u64 = ops.iter().map(|&d| d as u64).sum();
                let result = sum % modulus;
                if !decimal_contains_digit(result, difficulty.rare_digit) {
                    break (ops, result);
                }
            }
        };
        let modulus = if hard { difficulty.hard_modulus } else { difficulty.easy_modulus };
        let mut prompt = Vec::new();
        for (i, &d) in operands.iter().enumerate() {
            if i > 0 {
                prompt.push(vocab.plus());
            }
            prompt.push(vocab.digit(d));
        }
        prompt.push(vocab.modulo());
        prompt.extend(vocab.digit_tokens(modulus as u64));
        queries.push(Query {
            id,
            prompt,
            ground_truth: vocab.digit_tokens(result),
            hard,
        });
    }
    Ok(TaskSet { vocab, queries })
}

/// Token index range of the answer span (exclusive of the tags).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnswerSpan {
    pub start: usize,
    pub end: usize,
}

impl AnswerSpan {
    pub fn slice<'a>(&self, tokens: &'a [Token]) -> &'a [Token] {
        &tokens[self.start..self.end]
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Extract the answer span: the tokens strictly between the first open
/// tag and the next close tag after it. Nesting is not permitted (a
/// second open tag before the close invalidates the span), and an empty
/// span counts as absent.
pub fn extract_answer(vocab: &Vocabulary, response: &[Token]) -> Option<AnswerSpan> {
    let open = response.iter().position(|&t| t == vocab.open_tag())?;
    let close = open
        + 1
        + response[open + 1..]
            .iter()
            .position(|&t| t == vocab.close_tag())?;
    if response[open + 1..close].iter().any(|&t| t == vocab.open_tag()) {
        return None;
    }
    if close == open + 1 {
        return None;
    }
    Some(AnswerSpan { start: open + 1, end: close })
}

/// Accuracy, format, and total reward of a response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub accuracy: bool,
    pub format: bool,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn compose(accuracy: bool, format: bool, beta: f64) -> Self {
        let total = (1.0 - beta) * (accuracy as u8 as f64) + beta * (format as u8 as f64);
        Self { accuracy, format, total }
    }
}

/// Rule-based verifier: format holds iff an answer span extracts,
/// accuracy iff the extracted span equals the ground truth token for
/// token. Under this verifier accuracy implies format.
pub fn composite_reward(
    vocab: &Vocabulary,
    response: &[Token],
    query: &Query,
    beta: f64,
) -> Result<RewardBreakdown> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Config(format!("beta must be in [0, 1), got {beta}")));
    }
    let span = extract_answer(vocab, response);
    let format = span.is_some();
    let accuracy = span
        .map(|s| s.slice(response) == query.ground_truth.as_slice())
        .unwrap_or(false);
    Ok(RewardBreakdown::compose(accuracy, format, beta))
}

/// Accuracy-only check, independent of the reward weighting.
pub fn is_correct(vocab: &Vocabulary, response: &[Token], query: &Query) -> bool {
    extract_answer(vocab, response)
        .map(|s| s.slice(response) == query.ground_truth.as_slice())
        .unwrap_or(false)
}
