//! The multi-guidance pool and comprehension-based selection.
//!
//! Curation draws a fixed number of samples per (teacher, query), keeps
//! only verified-correct responses, and retains each teacher's shortest
//! correct one. At training time the student ranks a query's entries by
//! the comprehension score
//!
//! `r_p = clip(exp(mean_t log pi_student(y*_t | ...)), 0, 1)`
//!
//! the geometric-mean probability the student assigns to the ground-truth
//! answer tokens conditioned on the teacher's reasoning prefix, and the
//! top-k entries are selected (shorter responses win ties).

use crate::policy::{sequence_logprobs, PolicyParams};
use crate::seed;
use crate::task::{extract_answer, is_correct, AnswerSpan, Query, TaskSet};
use crate::teacher::{TeacherId, TeacherPolicy};
use crate::vocab::Token;
use crate::{Error, Result};
use std::collections::BTreeMap;

/// One verified-correct teacher response for a query.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceEntry {
    pub query_id: u64,
    pub teacher_id: TeacherId,
    /// Full response tokens (reasoning, tags, answer, eos).
    pub tokens: Vec<Token>,
    /// Tokens before the answer open tag: `0..reasoning_end`.
    pub reasoning_end: usize,
    /// Token range strictly inside the answer tags.
    pub answer_span: AnswerSpan,
    /// Exact per-token log-probs under the emitting teacher.
    pub teacher_logprobs: Vec<f64>,
}

impl GuidanceEntry {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Per-teacher coverage bookkeeping, reported after curation.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherStat {
    pub teacher_id: TeacherId,
    pub competence: String,
    pub entries: usize,
    pub mean_length: f64,
}

/// Verified teacher solutions, at most one per (query, teacher).
#[derive(Debug, Clone, PartialEq)]
pub struct GuidancePool {
    vocab_hash: u64,
    entries: BTreeMap<u64, Vec<GuidanceEntry>>,
    roster: Vec<(TeacherId, String)>,
}

impl GuidancePool {
    pub fn empty(vocab_hash: u64) -> Self {
        Self { vocab_hash, entries: BTreeMap::new(), roster: Vec::new() }
    }

    pub fn vocab_hash(&self) -> u64 {
        self.vocab_hash
    }

    pub fn roster(&self) -> &[(TeacherId, String)] {
        &self.roster
    }

    pub fn set_roster(&mut self, roster: Vec<(TeacherId, String)>) {
        self.roster = roster;
    }

    /// Number of available entries for a query.
    pub fn n_g(&self, query_id: u64) -> usize {
        self.entries.get(&query_id).map_or(0, |v| v.len())
    }

    pub fn entries_for(&self, query_id: u64) -> &[GuidanceEntry] {
        self.entries.get(&query_id).map_or(&[], |v| v.as_slice())
    }

    pub fn insert(&mut self, entry: GuidanceEntry) {
        self.entries.entry(entry.query_id).or_default().push(entry);
    }

    pub fn total_entries(&self) -> usize {
        self.entries.values().map(|v| v.len()).sum()
    }

    pub fn covered_queries(&self) -> usize {
        self.entries.values().filter(|v| !v.is_empty()).count()
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = &GuidanceEntry> {
        self.entries.values().flatten()
    }

    /// Entries-per-teacher and mean response length, in roster order.
    pub fn teacher_stats(&self) -> Vec<TeacherStat> {
        self.roster
            .iter()
            .map(|(id, competence)| {
                let lens: Vec<usize> = self
                    .iter_entries()
                    .filter(|e| e.teacher_id == *id)
                    .map(|e| e.len())
                    .collect();
                let mean_length = if lens.is_empty() {
                    0.0
                } else {
                    lens.iter().sum::<usize>() as f64 / lens.len() as f64
                };
                TeacherStat {
                    teacher_id: *id,
                    competence: competence.clone(),
                    entries: lens.len(),
                    mean_length,
                }
            })
            .collect()
    }
}

fn entry_from_response(
    query: &Query,
    teacher_id: TeacherId,
    tokens: Vec<Token>,
    teacher_logprobs: Vec<f64>,
    span: AnswerSpan,
) -> GuidanceEntry {
    GuidanceEntry {
        query_id: query.id,
        teacher_id,
        reasoning_end: span.start - 1,
        answer_span: span,
        tokens,
        teacher_logprobs,
    }
}

/// Build the pool: per (teacher, query), draw `samples_per_teacher`
/// responses, discard unverified ones, and keep the shortest correct
/// response (ties resolved by draw order). Cells are seeded from
/// `(curation_seed, teacher id, query id)` so curation order is
/// irrelevant.
pub fn curate_pool(
    teachers: &[TeacherPolicy],
    taskset: &TaskSet,
    samples_per_teacher: usize,
    max_len: usize,
    curation_seed: u64,
) -> Result<GuidancePool> {
    if samples_per_teacher == 0 {
        return Err(Error::Config("samples_per_teacher must be >= 1".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for t in teachers {
        if !seen.insert(t.id) {
            return Err(Error::Config(format!("duplicate teacher id {}", t.id)));
        }
    }
    let mut pool = GuidancePool::empty(taskset.vocab.hash());
    pool.set_roster(teachers.iter().map(|t| (t.id, t.competence.clone())).collect());
    for query in &taskset.queries {
        for teacher in teachers {
            let mut rng = seed::rng(seed::derive(
                curation_seed,
                &[seed::stream::CURATE, teacher.id.0 as u64, query.id],
            ));
            let mut best: Option<(Vec<Token>, Vec<f64>)> = None;
            for _ in 0..samples_per_teacher {
                let r = teacher.sample_response(&taskset.vocab, query, max_len, &mut rng);
                if !is_correct(&taskset.vocab, &r.tokens, query) {
                    continue;
                }
                let shorter = best.as_ref().map_or(true, |(t, _)| r.tokens.len() < t.len());
                if shorter {
                    best = Some((r.tokens, r.gen_logprobs));
                }
            }
            if let Some((tokens, logprobs)) = best {
                let span = extract_answer(&taskset.vocab, &tokens)
                    .expect("verified responses have an answer span");
                pool.insert(entry_from_response(query, teacher.id, tokens, logprobs, span));
            }
        }
    }
    Ok(pool)
}

/// Sub-taskset of queries covered by every pool, original order kept.
pub fn intersect_tasksets(pools: &[GuidancePool], taskset: &TaskSet) -> TaskSet {
    assert!(!pools.is_empty(), "need at least one pool");
    TaskSet {
        vocab: taskset.vocab.clone(),
        queries: taskset
            .queries
            .iter()
            .filter(|q| pools.iter().all(|p| p.n_g(q.id) >= 1))
            .cloned()
            .collect(),
    }
}

/// Comprehension score: geometric-mean probability the student assigns to
/// the ground-truth answer tokens, conditioned on the teacher's reasoning.
///
/// The entry's answer span is replaced by the query's ground truth (tags
/// kept) and the student scores exactly those positions at temperature 1.
pub fn comprehension_score(
    student: &PolicyParams,
    entry: &GuidanceEntry,
    query: &Query,
) -> Result<f64> {
    if entry.query_id != query.id {
        return Err(Error::Guidance(format!(
            "entry belongs to query {}, not {}",
            entry.query_id, query.id
        )));
    }
    let mut corrected = Vec::with_capacity(entry.tokens.len());
    corrected.extend_from_slice(&entry.tokens[..entry.answer_span.start]);
    corrected.extend_from_slice(&query.ground_truth);
    corrected.extend_from_slice(&entry.tokens[entry.answer_span.end..]);
    let logprobs = sequence_logprobs(student, query, &corrected, 1.0)?;
    let start = entry.answer_span.start;
    let end = start + query.ground_truth.len();
    let mean = logprobs[start..end].iter().sum::<f64>() / query.ground_truth.len() as f64;
    Ok(mean.exp().clamp(0.0, 1.0))
}

/// Top-k guidance for a query: `min(k, N_g)` entries ordered by
/// (comprehension score desc, length asc, teacher id asc).
pub fn select_top_k<'p>(
    pool: &'p GuidancePool,
    query: &Query,
    k: usize,
    student: &PolicyParams,
) -> Result<Vec<&'p GuidanceEntry>> {
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let mut scored: Vec<(f64, &GuidanceEntry)> = pool
        .entries_for(query.id)
        .iter()
        .map(|e| comprehension_score(student, e, query).map(|s| (s, e)))
        .collect::<Result<_>>()?;
    scored.sort_by(|(sa, ea), (sb, eb)| {
        sb.total_cmp(sa)
            .then_with(|| ea.len().cmp(&eb.len()))
            .then_with(|| ea.teacher_id.cmp(&eb.teacher_id))
    });
    Ok(scored.into_iter().take(k).map(|(_, e)| e).collect())
}
