//! Tabular autoregressive softmax policies with exact math.
//!
//! A policy is a `(V + 1) x V` table of logits: one row per previous
//! token plus a distinguished start row. Conditioning is first-order
//! (the context is the previous token, or the prompt tail for the first
//! generated token), which keeps log-probabilities, entropies, and
//! gradients of weighted log-likelihood exact and cheap to verify
//! against finite differences.

use crate::task::{Query, RewardBreakdown};
use crate::teacher::TeacherId;
use crate::vocab::Token;
use crate::{Error, Result};
use rand::Rng;

/// Conditioning context for one emission step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Context {
    /// No preceding token (empty prompt).
    Start,
    /// The previous token.
    Prev(Token),
}

/// Logit table of a tabular policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    vocab_size: usize,
    /// Row-major `(V + 1) x V`; row `V` is the start context.
    logits: Vec<f64>,
}

impl PolicyParams {
    /// All-zero logits: the uniform policy.
    pub fn zeros(vocab_size: usize) -> Self {
        Self { vocab_size, logits: vec![0.0; (vocab_size + 1) * vocab_size] }
    }

    /// Small random logits, for tests and randomized initializations.
    pub fn random<R: Rng>(vocab_size: usize, scale: f64, rng: &mut R) -> Self {
        let logits = (0..(vocab_size + 1) * vocab_size)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
            .collect();
        Self { vocab_size, logits }
    }

    /// Rebuild from a raw row-major table; must be `(V + 1) * V` long and finite.
    pub fn from_raw(vocab_size: usize, logits: Vec<f64>) -> Result<Self> {
        if logits.len() != (vocab_size + 1) * vocab_size {
            return Err(Error::Shape(format!(
                "logit table must be {} entries, got {}",
                (vocab_size + 1) * vocab_size,
                logits.len()
            )));
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::Policy("logit table contains non-finite entries".into()));
        }
        Ok(Self { vocab_size, logits })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn context_count(&self) -> usize {
        self.vocab_size + 1
    }

    fn row_index(&self, context: Context) -> Result<usize> {
        match context {
            Context::Start => Ok(self.vocab_size),
            Context::Prev(t) if t.0 < self.vocab_size => Ok(t.0),
            Context::Prev(t) => Err(Error::Policy(format!(
                "context token {} outside vocabulary of size {}",
                t.0, self.vocab_size
            ))),
        }
    }

    pub fn row(&self, context: Context) -> Result<&[f64]> {
        let r = self.row_index(context)?;
        Ok(&self.logits[r * self.vocab_size..(r + 1) * self.vocab_size])
    }

    pub fn logit(&self, context: Context, token: Token) -> f64 {
        let r = self.row_index(context).expect("context in range");
        self.logits[r * self.vocab_size + token.0]
    }

    pub fn logit_mut(&mut self, context: Context, token: Token) -> &mut f64 {
        let r = self.row_index(context).expect("context in range");
        &mut self.logits[r * self.vocab_size + token.0]
    }

    pub fn raw(&self) -> &[f64] {
        &self.logits
    }

    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    /// One gradient-ascent step: `logits += lr * grad`.
    pub fn apply_ascent(&mut self, grad: &Gradient, lr: f64) {
        debug_assert_eq!(grad.values.len(), self.logits.len());
        for (x, g) in self.logits.iter_mut().zip(&grad.values) {
            *x += lr * g;
        }
    }
}

/// Dense gradient with the same shape as the logit table.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    vocab_size: usize,
    values: Vec<f64>,
}

impl Gradient {
    pub fn zeros(vocab_size: usize) -> Self {
        Self { vocab_size, values: vec![0.0; (vocab_size + 1) * vocab_size] }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, context: Context, token: Token) -> f64 {
        let r = match context {
            Context::Start => self.vocab_size,
            Context::Prev(t) => t.0,
        };
        self.values[r * self.vocab_size + token.0]
    }

    /// `self += other`, elementwise.
    pub fn add(&mut self, other: &Gradient) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn add_row(&mut self, row: usize, weight: f64, probs: &[f64], token: Token) {
        let base = row * self.vocab_size;
        for (k, &p) in probs.iter().enumerate() {
            self.values[base + k] -= weight * p;
        }
        self.values[base + token.0] += weight;
    }

    /// Add `weight * dH/dlogits` of the entropy at `probs`/`logprobs`.
    fn add_entropy_row(&mut self, row: usize, weight: f64, probs: &[f64], logprobs: &[f64]) {
        let entropy = entropy_from(probs, logprobs);
        let base = row * self.vocab_size;
        for (k, (&p, &lp)) in probs.iter().zip(logprobs).enumerate() {
            if p > 0.0 {
                self.values[base + k] += weight * (-p * (lp + entropy));
            }
        }
    }
}

/// Numerically stable log-softmax of `row / temperature`.
fn log_softmax(row: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = row.iter().map(|x| x / temperature).collect();
    let m = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scaled.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    scaled.iter().map(|x| x - lse).collect()
}

fn entropy_from(probs: &[f64], logprobs: &[f64]) -> f64 {
    probs
        .iter()
        .zip(logprobs)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &lp)| -p * lp)
        .sum()
}

/// Log-probability of `token` in `context` at the given temperature.
pub fn token_logprob(
    params: &PolicyParams,
    context: Context,
    token: Token,
    temperature: f64,
) -> Result<f64> {
    if temperature <= 0.0 {
        return Err(Error::Config(format!("temperature must be > 0, got {temperature}")));
    }
    if token.0 >= params.vocab_size() {
        return Err(Error::Policy(format!(
            "token {} outside vocabulary of size {}",
            token.0,
            params.vocab_size()
        )));
    }
    let lp = log_softmax(params.row(context)?, temperature);
    Ok(lp[token.0])
}

/// Full distribution (probs, logprobs) for a context at a temperature.
pub fn distribution(
    params: &PolicyParams,
    context: Context,
    temperature: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let logprobs = log_softmax(params.row(context)?, temperature);
    let probs = logprobs.iter().map(|lp| lp.exp()).collect();
    Ok((probs, logprobs))
}

/// Entropy (nats) of the policy distribution in a context, at temperature 1.
pub fn context_entropy(params: &PolicyParams, context: Context) -> Result<f64> {
    let (probs, logprobs) = distribution(params, context, 1.0)?;
    Ok(entropy_from(&probs, &logprobs))
}

/// Where a rollout came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    OnPolicy,
    OffPolicy(TeacherId),
}

/// A generated response with the log-probs of its generating policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub query_id: u64,
    /// Generated tokens, prompt excluded; ends with EOS or at max length.
    pub tokens: Vec<Token>,
    /// Per-token log-probs under the generating policy, aligned with `tokens`.
    pub gen_logprobs: Vec<f64>,
    pub origin: Origin,
    /// Filled by the trainer after verification.
    pub reward: Option<RewardBreakdown>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn total_reward(&self) -> Option<f64> {
        self.reward.map(|r| r.total)
    }
}

/// Context sequence for scoring `tokens` as a continuation of the prompt.
pub(crate) fn contexts_for<'a>(
    query: &'a Query,
    tokens: &'a [Token],
) -> impl Iterator<Item = Context> + 'a {
    let first = match query.prompt.last() {
        Some(&t) => Context::Prev(t),
        None => Context::Start,
    };
    std::iter::once(first).chain(tokens.iter().map(|&t| Context::Prev(t))).take(tokens.len())
}

/// Ancestral sampling from the policy, conditioned on the query prompt.
///
/// Prompt tokens condition but are not sampled. Sampling stops at `eos`
/// or after `max_len` tokens; `gen_logprobs` are recorded at the sampling
/// temperature. Deterministic given the RNG state.
pub fn sample_rollout<R: Rng>(
    params: &PolicyParams,
    query: &Query,
    eos: Token,
    temperature: f64,
    max_len: usize,
    rng: &mut R,
) -> Rollout {
    assert!(max_len >= 1, "max_len must be >= 1");
    assert!(temperature > 0.0, "temperature must be > 0");
    let mut tokens = Vec::new();
    let mut logprobs = Vec::new();
    let mut context = match query.prompt.last() {
        Some(&t) => Context::Prev(t),
        None => Context::Start,
    };
    while tokens.len() < max_len {
        let (probs, lps) = distribution(params, context, temperature).expect("context in range");
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut choice = params.vocab_size() - 1;
        for (k, &p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                choice = k;
                break;
            }
        }
        let tok = Token(choice);
        tokens.push(tok);
        logprobs.push(lps[choice]);
        if tok == eos {
            break;
        }
        context = Context::Prev(tok);
    }
    Rollout {
        query_id: query.id,
        tokens,
        gen_logprobs: logprobs,
        origin: Origin::OnPolicy,
        reward: None,
    }
}

/// Score an arbitrary token sequence as a continuation of the prompt.
///
/// Element `t` is the log-prob of `tokens[t]` in the context induced by
/// `tokens[t-1]` (or the prompt tail / start for `t = 0`).
pub fn sequence_logprobs(
    params: &PolicyParams,
    query: &Query,
    tokens: &[Token],
    temperature: f64,
) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::Shape("cannot score an empty sequence".into()));
    }
    let mut out = Vec::with_capacity(tokens.len());
    for (ctx, &tok) in contexts_for(query, tokens).zip(tokens) {
        out.push(token_logprob(params, ctx, tok, temperature)?);
    }
    Ok(out)
}

/// Accumulate the exact gradient of `sum_t weights[t] * log pi(tokens[t] | ctx_t)`
/// with respect to the logit table (temperature 1).
///
/// For each position with context row `c`:
/// `grad[c] += w_t * (onehot(tokens[t]) - softmax(logits[c]))`.
pub fn accumulate_weighted_logprob_grad(
    params: &PolicyParams,
    query: &Query,
    tokens: &[Token],
    weights: &[f64],
    accumulator: &mut Gradient,
) -> Result<()> {
    if tokens.len() != weights.len() {
        return Err(Error::Shape(format!(
            "tokens ({}) and weights ({}) differ in length",
            tokens.len(),
            weights.len()
        )));
    }
    if accumulator.vocab_size != params.vocab_size() {
        return Err(Error::Shape("gradient and params vocabulary sizes differ".into()));
    }
    for (ctx, (&tok, &w)) in contexts_for(query, tokens).zip(tokens.iter().zip(weights)) {
        if w == 0.0 {
            continue;
        }
        if tok.0 >= params.vocab_size() {
            return Err(Error::Policy(format!("token {} outside vocabulary", tok.0)));
        }
        let row = params.row_index(ctx)?;
        let (probs, _) = distribution(params, ctx, 1.0)?;
        accumulator.add_row(row, w, &probs, tok);
    }
    Ok(())
}

/// Accumulate `weight * d/dlogits` of the summed entropy over the contexts
/// of `tokens` (temperature 1). Companion to [`mean_token_entropy`].
pub(crate) fn accumulate_entropy_grad(
    params: &PolicyParams,
    query: &Query,
    tokens: &[Token],
    weight: f64,
    accumulator: &mut Gradient,
) -> Result<()> {
    for ctx in contexts_for(query, tokens) {
        let row = params.row_index(ctx)?;
        let (probs, logprobs) = distribution(params, ctx, 1.0)?;
        accumulator.add_entropy_row(row, weight, &probs, &logprobs);
    }
    Ok(())
}

/// Mean policy entropy over all on-policy token positions of a batch.
///
/// Each position contributes the full-distribution entropy of the policy
/// at that position's context, in nats. Off-policy rollouts are ignored;
/// errors if no on-policy positions exist.
pub fn mean_token_entropy(params: &PolicyParams, batch: &[(&Query, &Rollout)]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (query, rollout) in batch {
        if rollout.origin != Origin::OnPolicy {
            continue;
        }
        for ctx in contexts_for(query, &rollout.tokens) {
            total += context_entropy(params, ctx)?;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Policy("batch has no on-policy token positions".into()));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;

    fn query_with_prompt(prompt: Vec<Token>) -> Query {
        Query { id: 0, prompt, ground_truth: vec![Token(0)], hard: false }
    }

    #[test]
    fn uniform_logprob_is_log_quarter() {
        let p = PolicyParams::zeros(4);
        for tok in 0..4 {
            let lp = token_logprob(&p, Context::Start, Token(tok), 1.0).unwrap();
            assert!((lp - (0.25f64).ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_softmax_case() {
        // logits (ln 3, 0, 0, 0): p(token 0) = 3 / (3 + 3) = 0.5
        let mut p = PolicyParams::zeros(4);
        *p.logit_mut(Context::Start, Token(0)) = 3f64.ln();
        let lp = token_logprob(&p, Context::Start, Token(0), 1.0).unwrap();
        assert!((lp - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_temperature_and_tokens() {
        let p = PolicyParams::zeros(4);
        assert!(token_logprob(&p, Context::Start, Token(0), 0.0).is_err());
        assert!(token_logprob(&p, Context::Start, Token(0), -1.0).is_err());
        assert!(token_logprob(&p, Context::Start, Token(4), 1.0).is_err());
        assert!(token_logprob(&p, Context::Prev(Token(9)), Token(0), 1.0).is_err());
    }

    #[test]
    fn deterministic_policy_samples_same_sequence() {
        let mut p = PolicyParams::zeros(4);
        // near-degenerate: token 2 everywhere, then eos = token 3 unreachable
        for ctx in 0..4 {
            *p.logit_mut(Context::Prev(Token(ctx)), Token(2)) = 1e6;
        }
        *p.logit_mut(Context::Start, Token(2)) = 1e6;
        let q = query_with_prompt(vec![Token(1)]);
        let r1 = sample_rollout(&p, &q, Token(3), 1.0, 5, &mut seed::rng(1));
        let r2 = sample_rollout(&p, &q, Token(3), 1.0, 5, &mut seed::rng(99));
        assert_eq!(r1.tokens, r2.tokens);
        assert_eq!(r1.tokens, vec![Token(2); 5]);
        for lp in &r1.gen_logprobs {
            assert!(lp.abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_seed_reproduces_rollout() {
        let mut rng = seed::rng(42);
        let p = PolicyParams::random(6, 1.0, &mut rng);
        let q = query_with_prompt(vec![Token(1), Token(2)]);
        let a = sample_rollout(&p, &q, Token(5), 0.9, 12, &mut seed::rng(7));
        let b = sample_rollout(&p, &q, Token(5), 0.9, 12, &mut seed::rng(7));
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_rollout_total_logprob() {
        let p = PolicyParams::zeros(4);
        let q = query_with_prompt(vec![Token(0)]);
        // find a seed whose 3-token rollout drew no EOS
        for s in 0..200 {
            let r = sample_rollout(&p, &q, Token(3), 1.0, 3, &mut seed::rng(s));
            if r.tokens.len() == 3 && !r.tokens.contains(&Token(3)) {
                let total: f64 = r.gen_logprobs.iter().sum();
                assert!((total - 3.0 * 0.25f64.ln()).abs() < 1e-12);
                return;
            }
        }
        panic!("no eos-free rollout found in 200 seeds");
    }

    #[test]
    fn rollout_ends_with_eos_or_max_len() {
        let mut rng = seed::rng(5);
        let p = PolicyParams::random(6, 2.0, &mut rng);
        let q = query_with_prompt(vec![Token(0)]);
        for s in 0..50 {
            let r = sample_rollout(&p, &q, Token(5), 1.0, 8, &mut seed::rng(s));
            assert!(r.tokens.last() == Some(&Token(5)) || r.tokens.len() == 8);
            assert_eq!(r.tokens.len(), r.gen_logprobs.len());
            assert!(r.gen_logprobs.iter().all(|&lp| lp <= 0.0));
        }
    }

    #[test]
    fn scoring_reproduces_gen_logprobs() {
        let mut rng = seed::rng(3);
        let p = PolicyParams::random(6, 1.5, &mut rng);
        let q = query_with_prompt(vec![Token(4), Token(0)]);
        for temp in [1.0, 0.7] {
            let r = sample_rollout(&p, &q, Token(5), temp, 10, &mut seed::rng(11));
            let scored = sequence_logprobs(&p, &q, &r.tokens, temp).unwrap();
            assert_eq!(scored, r.gen_logprobs, "temperature {temp}");
        }
    }

    #[test]
    fn uniform_scoring_is_constant() {
        let p = PolicyParams::zeros(5);
        let q = query_with_prompt(vec![Token(1)]);
        let toks = vec![Token(0), Token(3), Token(2), Token(4)];
        let lps = sequence_logprobs(&p, &q, &toks, 1.0).unwrap();
        for lp in lps {
            assert!((lp - 0.2f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn bigram_hand_chain() {
        // start -> uniform; after token 1 the policy prefers token 0 with
        // logit ln 2: p(0 | 1) = 2 / (2 + 3) = 0.4 over V = 4
        let mut p = PolicyParams::zeros(4);
        *p.logit_mut(Context::Prev(Token(1)), Token(0)) = 2f64.ln();
        let q = query_with_prompt(vec![Token(1)]);
        let toks = vec![Token(0), Token(1), Token(0)];
        let lps = sequence_logprobs(&p, &q, &toks, 1.0).unwrap();
        assert!((lps[0] - 0.4f64.ln()).abs() < 1e-15); // ctx 1 -> tok 0
        assert!((lps[1] - 0.25f64.ln()).abs() < 1e-15); // ctx 0 row untouched: uniform
        assert!((lps[2] - 0.4f64.ln()).abs() < 1e-15); // ctx 1 -> tok 0 again
    }

    #[test]
    fn empty_sequence_and_unknown_tokens_rejected() {
        let p = PolicyParams::zeros(4);
        let q = query_with_prompt(vec![Token(1)]);
        assert!(sequence_logprobs(&p, &q, &[], 1.0).is_err());
        assert!(sequence_logprobs(&p, &q, &[Token(7)], 1.0).is_err());
    }

    #[test]
    fn zero_weights_leave_accumulator_unchanged() {
        let mut rng = seed::rng(9);
        let p = PolicyParams::random(5, 1.0, &mut rng);
        let q = query_with_prompt(vec![Token(0)]);
        let mut g = Gradient::zeros(5);
        accumulate_weighted_logprob_grad(&p, &q, &[Token(1), Token(2)], &[0.0, 0.0], &mut g)
            .unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_token_gradient_is_onehot_minus_probs() {
        let p = PolicyParams::zeros(4);
        let q = query_with_prompt(vec![Token(2)]);
        let mut g = Gradient::zeros(4);
        accumulate_weighted_logprob_grad(&p, &q, &[Token(1)], &[1.0], &mut g).unwrap();
        for k in 0..4 {
            let expect = if k == 1 { 1.0 - 0.25 } else { -0.25 };
            assert!((g.at(Context::Prev(Token(2)), Token(k)) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = PolicyParams::zeros(4);
        let q = query_with_prompt(vec![Token(0)]);
        let mut g = Gradient::zeros(4);
        assert!(
            accumulate_weighted_logprob_grad(&p, &q, &[Token(1)], &[1.0, 2.0], &mut g).is_err()
        );
        let mut wrong = Gradient::zeros(5);
        assert!(
            accumulate_weighted_logprob_grad(&p, &q, &[Token(1)], &[1.0], &mut wrong).is_err()
        );
    }

    /// Central finite differences of the weighted log-likelihood.
    fn fd_gradient(
        params: &PolicyParams,
        query: &Query,
        tokens: &[Token],
        weights: &[f64],
        h: f64,
    ) -> Vec<f64> {
        let objective = |p: &PolicyParams| -> f64 {
            sequence_logprobs(p, query, tokens, 1.0)
                .unwrap()
                .iter()
                .zip(weights)
                .map(|(lp, w)| w * lp)
                .sum()
        };
        let mut out = Vec::with_capacity(params.raw().len());
        for i in 0..params.raw().len() {
            let mut plus = params.clone();
            plus.raw_mut()[i] += h;
            let mut minus = params.clone();
            minus.raw_mut()[i] -= h;
            out.push((objective(&plus) - objective(&minus)) / (2.0 * h));
        }
        out
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for s in 0..20u64 {
            let mut rng = seed::rng(1000 + s);
            let v = 5;
            let p = PolicyParams::random(v, 1.5, &mut rng);
            let q = query_with_prompt(vec![Token(rng.random_range(0..v))]);
            let len = rng.random_range(1..=6);
            let tokens: Vec<Token> = (0..len).map(|_| Token(rng.random_range(0..v))).collect();
            let weights: Vec<f64> = (0..len).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let mut g = Gradient::zeros(v);
            accumulate_weighted_logprob_grad(&p, &q, &tokens, &weights, &mut g).unwrap();
            let fd = fd_gradient(&p, &q, &tokens, &weights, 1e-5);
            for (i, (&a, &b)) in g.values().iter().zip(&fd).enumerate() {
                let denom = a.abs().max(b.abs());
                if denom < 1e-9 {
                    assert!((a - b).abs() < 1e-7, "entry {i}: {a} vs {b}");
                } else {
                    assert!((a - b).abs() / denom < 1e-6, "entry {i}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn entropy_of_uniform_and_deterministic() {
        let uniform = PolicyParams::zeros(8);
        let q = query_with_prompt(vec![Token(0)]);
        let r = Rollout {
            query_id: 0,
            tokens: vec![Token(1), Token(2), Token(3)],
            gen_logprobs: vec![0.0; 3],
            origin: Origin::OnPolicy,
            reward: None,
        };
        let h = mean_token_entropy(&uniform, &[(&q, &r)]).unwrap();
        assert!((h - 8f64.ln()).abs() < 1e-12);

        let mut det = PolicyParams::zeros(8);
        for ctx in 0..8 {
            *det.logit_mut(Context::Prev(Token(ctx)), Token(1)) = 1e6;
        }
        let h = mean_token_entropy(&det, &[(&q, &r)]).unwrap();
        assert!(h.abs() < 1e-9);
    }

    #[test]
    fn entropy_hand_mixed_batch() {
        // Two positions: ctx 0 has p = (0.5, 0.5, 0, 0) over the first two
        // tokens (others suppressed), ctx 1 is uniform over 4.
        let mut p = PolicyParams::zeros(4);
        *p.logit_mut(Context::Prev(Token(0)), Token(2)) = -1e9;
        *p.logit_mut(Context::Prev(Token(0)), Token(3)) = -1e9;
        let q = query_with_prompt(vec![Token(0)]);
        let r = Rollout {
            query_id: 0,
            tokens: vec![Token(1), Token(2)],
            gen_logprobs: vec![0.0; 2],
            origin: Origin::OnPolicy,
            reward: None,
        };
        // positions: ctx = prompt tail (token 0) then ctx = token 1
        let expect = (2f64.ln() + 4f64.ln()) / 2.0;
        let h = mean_token_entropy(&p, &[(&q, &r)]).unwrap();
        assert!((h - expect).abs() < 1e-12);
    }

    #[test]
    fn entropy_requires_on_policy_positions() {
        let p = PolicyParams::zeros(4);
        assert!(mean_token_entropy(&p, &[]).is_err());
        let q = query_with_prompt(vec![Token(0)]);
        let off = Rollout {
            query_id: 0,
            tokens: vec![Token(1)],
            gen_logprobs: vec![0.0],
            origin: Origin::OffPolicy(TeacherId(0)),
            reward: None,
        };
        assert!(mean_token_entropy(&p, &[(&q, &off)]).is_err());
    }

    proptest! {
        /// Every context row is a normalized distribution within 1e-12.
        #[test]
        fn rows_normalize(seed_val in 0u64..500, v in 2usize..12) {
            let mut rng = seed::rng(seed_val);
            let p = PolicyParams::random(v, 3.0, &mut rng);
            for ctx in (0..v).map(|t| Context::Prev(Token(t))).chain([Context::Start]) {
                let (probs, _) = distribution(&p, ctx, 1.0).unwrap();
                let total: f64 = probs.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }

        /// The most likely token is independent of temperature.
        #[test]
        fn argmax_is_temperature_invariant(seed_val in 0u64..200, t in 0.05f64..8.0) {
            let mut rng = seed::rng(seed_val);
            let p = PolicyParams::random(6, 2.0, &mut rng);
            for ctx in (0..6).map(|k| Context::Prev(Token(k))).chain([Context::Start]) {
                let (p1, _) = distribution(&p, ctx, 1.0).unwrap();
                let (pt, _) = distribution(&p, ctx, t).unwrap();
                let argmax = |xs: &[f64]| {
                    xs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
                };
                prop_assert_eq!(argmax(&p1), argmax(&pt));
            }
        }
    }
}
