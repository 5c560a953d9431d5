//! Teacher policies that supply off-policy guidance.
//!
//! A teacher is either another tabular policy or a scripted program. Both
//! report an exact per-token log-probability for every token they emit:
//! tabular teachers record their sampling log-probs, scripted teachers
//! factorize their generative process autoregressively (deterministic
//! steps report log-prob 0, stochastic steps the exact branch
//! probability).

use crate::policy::{sample_rollout, Origin, PolicyParams, Rollout};
use crate::task::Query;
use crate::vocab::{Token, Vocabulary};
use rand::Rng;

/// Identifier of a teacher within a roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TeacherId(pub u32);

impl std::fmt::Display for TeacherId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A scripted emission program.
///
/// Emits: a filler run of uniformly drawn length, optionally an echo of
/// the prompt, then `<answer> digits </answer> <eos>`. The answer is the
/// ground truth with probability `accuracy_easy` / `accuracy_hard`
/// (depending on the query), otherwise the ground truth with its first
/// digit shifted, so the correct and incorrect branches diverge at
/// exactly one token and every per-token probability is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedTeacher {
    /// Inclusive range of the leading filler-run length.
    pub filler_run: (usize, usize),
    /// Echo the prompt tokens as the reasoning body.
    pub echo_prompt: bool,
    pub accuracy_easy: f64,
    pub accuracy_hard: f64,
}

impl ScriptedTeacher {
    fn sample<R: Rng>(
        &self,
        vocab: &Vocabulary,
        query: &Query,
        max_len: usize,
        rng: &mut R,
    ) -> (Vec<Token>, Vec<f64>) {
        let (a, b) = self.filler_run;
        debug_assert!(a <= b);
        let run_len = rng.random_range(a..=b);
        let accuracy = if query.hard { self.accuracy_hard } else { self.accuracy_easy };
        let correct = accuracy >= 1.0 || (accuracy > 0.0 && rng.random::<f64>() < accuracy);

        let mut tokens = Vec::new();
        let mut logprobs = Vec::new();
        let filler = vocab.fillers()[0];
        for j in 0..run_len {
            tokens.push(filler);
            // continuing past j fillers has probability (b-j)/(b-j+1) once
            // stopping is possible (j >= a), else probability 1
            let lp = if j < a { 0.0 } else { ((b - j) as f64 / (b - j + 1) as f64).ln() };
            logprobs.push(lp);
        }
        // the first token after the run carries the stop probability
        let stop_lp = if run_len < a { 0.0 } else { -((b - run_len + 1) as f64).ln() };

        let mut rest: Vec<(Token, f64)> = Vec::new();
        if self.echo_prompt {
            for &t in &query.prompt {
                rest.push((t, 0.0));
            }
        }
        rest.push((vocab.open_tag(), 0.0));
        let branch_lp = if accuracy >= 1.0 || accuracy <= 0.0 {
            0.0
        } else if correct {
            accuracy.ln()
        } else {
            (1.0 - accuracy).ln()
        };
        let first_digit = query.ground_truth[0];
        let emitted_first = if correct {
            first_digit
        } else {
            let d = vocab.digit_value(first_digit).expect("ground truth is digits");
            vocab.digit((d + 1) % 10)
        };
        rest.push((emitted_first, branch_lp));
        for &t in &query.ground_truth[1..] {
            rest.push((t, 0.0));
        }
        rest.push((vocab.close_tag(), 0.0));
        rest.push((vocab.eos(), 0.0));

        // stop probability sits on the first post-run token
        if let Some(first) = rest.first_mut() {
            first.1 += stop_lp;
        }
        for (t, lp) in rest {
            tokens.push(t);
            logprobs.push(lp);
        }
        tokens.truncate(max_len);
        logprobs.truncate(max_len);
        (tokens, logprobs)
    }
}

/// What kind of program backs a teacher.
#[derive(Debug, Clone, PartialEq)]
pub enum TeacherKind {
    Tabular(PolicyParams),
    Scripted(ScriptedTeacher),
}

/// A teacher in the roster.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherPolicy {
    pub id: TeacherId,
    pub kind: TeacherKind,
    /// Free-form competence descriptor, for bookkeeping and file headers.
    pub competence: String,
}

impl TeacherPolicy {
    /// Always correct, fixed-shape output; fully deterministic.
    pub fn oracle(id: TeacherId) -> Self {
        Self {
            id,
            kind: TeacherKind::Scripted(ScriptedTeacher {
                filler_run: (2, 2),
                echo_prompt: false,
                accuracy_easy: 1.0,
                accuracy_hard: 1.0,
            }),
            competence: "oracle".into(),
        }
    }

    /// Never correct on any query.
    pub fn always_wrong(id: TeacherId) -> Self {
        Self {
            id,
            kind: TeacherKind::Scripted(ScriptedTeacher {
                filler_run: (1, 3),
                echo_prompt: false,
                accuracy_easy: 0.0,
                accuracy_hard: 0.0,
            }),
            competence: "always-wrong".into(),
        }
    }

    pub fn scripted(id: TeacherId, program: ScriptedTeacher, competence: impl Into<String>) -> Self {
        Self { id, kind: TeacherKind::Scripted(program), competence: competence.into() }
    }

    pub fn tabular(id: TeacherId, params: PolicyParams, competence: impl Into<String>) -> Self {
        Self { id, kind: TeacherKind::Tabular(params), competence: competence.into() }
    }

    /// Draw one response to `query` with exact per-token log-probs.
    ///
    /// Tabular teachers sample at temperature 1 so their recorded
    /// log-probs coincide with rescoring under their own parameters.
    pub fn sample_response<R: Rng>(
        &self,
        vocab: &Vocabulary,
        query: &Query,
        max_len: usize,
        rng: &mut R,
    ) -> Rollout {
        match &self.kind {
            TeacherKind::Tabular(params) => {
                let mut r = sample_rollout(params, query, vocab.eos(), 1.0, max_len, rng);
                r.origin = Origin::OffPolicy(self.id);
                r
            }
            TeacherKind::Scripted(program) => {
                let (tokens, gen_logprobs) = program.sample(vocab, query, max_len, rng);
                Rollout {
                    query_id: query.id,
                    tokens,
                    gen_logprobs,
                    origin: Origin::OffPolicy(self.id),
                    reward: None,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::task::is_correct;
    use std::collections::HashMap;

    fn fixture() -> (Vocabulary, Query) {
        let v = Vocabulary::standard(1).unwrap();
        let prompt = v.parse("3 + 4 mod 5").unwrap();
        let truth = vec![v.digit(2)];
        (v.clone(), Query { id: 0, prompt, ground_truth: truth, hard: false })
    }

    #[test]
    fn oracle_is_deterministic_and_correct() {
        let (v, q) = fixture();
        let t = TeacherPolicy::oracle(TeacherId(0));
        let a = t.sample_response(&v, &q, 64, &mut seed::rng(1));
        let b = t.sample_response(&v, &q, 64, &mut seed::rng(2));
        assert_eq!(a.tokens, b.tokens);
        assert!(is_correct(&v, &a.tokens, &q));
        assert!(a.gen_logprobs.iter().all(|&lp| lp == 0.0));
        assert_eq!(a.tokens.last(), Some(&v.eos()));
    }

    #[test]
    fn always_wrong_never_verifies() {
        let (v, q) = fixture();
        let t = TeacherPolicy::always_wrong(TeacherId(1));
        for s in 0..32 {
            let r = t.sample_response(&v, &q, 64, &mut seed::rng(s));
            assert!(!is_correct(&v, &r.tokens, &q));
        }
    }

    #[test]
    fn echo_teacher_reproduces_prompt() {
        let (v, q) = fixture();
        let t = TeacherPolicy::scripted(
            TeacherId(2),
            ScriptedTeacher {
                filler_run: (0, 0),
                echo_prompt: true,
                accuracy_easy: 1.0,
                accuracy_hard: 1.0,
            },
            "echo",
        );
        let r = t.sample_response(&v, &q, 64, &mut seed::rng(3));
        let expect = "3 + 4 mod 5 <answer> 2 </answer> <eos>";
        assert_eq!(v.render(&r.tokens), expect);
        assert!(r.gen_logprobs.iter().all(|&lp| lp == 0.0));
    }

    /// The recorded log-probs are an exact factorization: grouping many
    /// samples by emitted sequence, exp(sum of log-probs) must match the
    /// empirical frequency, and the distinct sequences' probabilities sum
    /// to one.
    #[test]
    fn scripted_logprobs_match_emission_frequencies() {
        let (v, q) = fixture();
        let t = TeacherPolicy::scripted(
            TeacherId(3),
            ScriptedTeacher {
                filler_run: (1, 3),
                echo_prompt: false,
                accuracy_easy: 0.5,
                accuracy_hard: 0.5,
            },
            "coin",
        );
        let n = 40_000;
        let mut rng = seed::rng(99);
        let mut groups: HashMap<Vec<Token>, (f64, usize)> = HashMap::new();
        for _ in 0..n {
            let r = t.sample_response(&v, &q, 64, &mut rng);
            let p = r.gen_logprobs.iter().sum::<f64>().exp();
            let entry = groups.entry(r.tokens).or_insert((p, 0));
            assert!((entry.0 - p).abs() < 1e-12, "log-probs consistent per sequence");
            entry.1 += 1;
        }
        assert_eq!(groups.len(), 6); // 3 run lengths x 2 branches
        let mut total_p = 0.0;
        for (p, count) in groups.values() {
            total_p += p;
            let freq = *count as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * se + 1e-3, "freq {freq} vs prob {p}");
        }
        assert!((total_p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hard_specialist_solves_only_hard_queries() {
        let (v, easy) = fixture();
        let hard = Query { hard: true, ..easy.clone() };
        let t = TeacherPolicy::scripted(
            TeacherId(4),
            ScriptedTeacher {
                filler_run: (0, 2),
                echo_prompt: true,
                accuracy_easy: 0.0,
                accuracy_hard: 1.0,
            },
            "hard-specialist",
        );
        for s in 0..16 {
            let r_easy = t.sample_response(&v, &easy, 64, &mut seed::rng(s));
            let r_hard = t.sample_response(&v, &hard, 64, &mut seed::rng(s));
            assert!(!is_correct(&v, &r_easy.tokens, &easy));
            assert!(is_correct(&v, &r_hard.tokens, &hard));
        }
    }

    #[test]
    fn truncation_respects_max_len() {
        let (v, q) = fixture();
        let t = TeacherPolicy::oracle(TeacherId(0));
        let r = t.sample_response(&v, &q, 3, &mut seed::rng(1));
        assert_eq!(r.tokens.len(), 3);
        assert_eq!(r.gen_logprobs.len(), 3);
    }
}
