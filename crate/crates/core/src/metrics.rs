//! Corpus-level BLEU-4 and CIDEr, and boundary precision/recall.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const MAX_N: usize = 4;

/// One candidate with its references.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalEntry {
    pub video_id: String,
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalCorpus {
    pub entries: Vec<EvalEntry>,
}

impl EvalCorpus {
    pub fn push(&mut self, video_id: &str, candidate: Vec<String>, references: Vec<Vec<String>>) {
        self.entries.push(EvalEntry {
            video_id: video_id.into(),
            candidate,
            references,
        });
    }
}

type Counts<'a> = BTreeMap<&'a [String], usize>;

fn ngrams(tokens: &[String], n: usize) -> Counts<'_> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuStats {
    /// Clipped matches and candidate n-gram totals for n = 1..4.
    pub matches: [usize; MAX_N],
    pub totals: [usize; MAX_N],
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuStats {
    pub fn precisions(&self) -> [f64; MAX_N] {
        let mut p = [0.0; MAX_N];
        for n in 0..MAX_N {
            if self.totals[n] > 0 {
                p[n] = self.matches[n] as f64 / self.totals[n] as f64;
            }
        }
        p
    }

    pub fn brevity_penalty(&self) -> f64 {
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        if c == 0.0 {
            0.0
        } else if c > r {
            1.0
        } else {
            libm::exp(1.0 - r / c)
        }
    }

    /// Unsmoothed: any zero precision gives 0.
    pub fn bleu(&self) -> f64 {
        let p = self.precisions();
        if p.iter().any(|&x| x == 0.0) {
            return 0.0;
        }
        let log_mean = p.iter().map(|&x| libm::log(x)).sum::<f64>() / MAX_N as f64;
        self.brevity_penalty() * libm::exp(log_mean)
    }
}

/// Corpus statistics with per-reference max-count clipping and the closest
/// reference length (shorter on ties) for the brevity penalty.
pub fn bleu_stats(corpus: &EvalCorpus) -> BleuStats {
    let mut stats = BleuStats {
        matches: [0; MAX_N],
        totals: [0; MAX_N],
        candidate_len: 0,
        reference_len: 0,
    };
    for e in &corpus.entries {
        let c = e.candidate.len();
        stats.candidate_len += c;
        let closest = e
            .references
            .iter()
            .map(Vec::len)
            .min_by_key(|&r| (r.abs_diff(c), r))
            .unwrap_or(0);
        stats.reference_len += closest;
        for n in 1..=MAX_N {
            let cand = ngrams(&e.candidate, n);
            let mut max_ref: Counts<'_> = BTreeMap::new();
            for r in &e.references {
                for (g, k) in ngrams(r, n) {
                    let slot = max_ref.entry(g).or_insert(0);
                    *slot = (*slot).max(k);
                }
            }
            for (g, k) in cand {
                stats.totals[n - 1] += k;
                stats.matches[n - 1] += k.min(max_ref.get(g).copied().unwrap_or(0));
            }
        }
    }
    stats
}

pub fn bleu4(corpus: &EvalCorpus) -> f64 {
    bleu_stats(corpus).bleu()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiderScore {
    /// Corpus mean of the per-video scores.
    pub score: f64,
    pub per_video: Vec<f64>,
}

/// TF-IDF n-gram vectors with document frequency over the reference sets.
fn tfidf<'a>(counts: &Counts<'a>, df: &BTreeMap<&[String], usize>, log_docs: f64) -> BTreeMap<&'a [String], f64> {
    counts
        .iter()
        .map(|(&g, &k)| {
            let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
            (g, k as f64 * (log_docs - libm::log(d)))
        })
        .collect()
}

fn cosine(a: &BTreeMap<&[String], f64>, b: &BTreeMap<&[String], f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    let na = libm::sqrt(a.values().map(|x| x * x).sum::<f64>());
    let nb = libm::sqrt(b.values().map(|x| x * x).sum::<f64>());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Plain CIDEr: for each n, cosine between TF-IDF vectors of the candidate
/// and each reference, averaged over references; then mean over n, ×10.
pub fn cider(corpus: &EvalCorpus) -> Result<CiderScore> {
    let docs = corpus.entries.len();
    if docs < 2 {
        return Err(Error::Config(
            "CIDEr needs at least two videos: document frequencies are degenerate otherwise".into(),
        ));
    }
    let log_docs = libm::log(docs as f64);
    let mut per_video = vec![0.0; docs];
    for n in 1..=MAX_N {
        let mut df: BTreeMap<&[String], usize> = BTreeMap::new();
        for e in &corpus.entries {
            let present: BTreeSet<&[String]> = e
                .references
                .iter()
                .flat_map(|r| ngrams(r, n).into_keys())
                .collect();
            for g in present {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        for (i, e) in corpus.entries.iter().enumerate() {
            if e.references.is_empty() {
                continue;
            }
            let cand = tfidf(&ngrams(&e.candidate, n), &df, log_docs);
            let sim: f64 = e
                .references
                .iter()
                .map(|r| cosine(&cand, &tfidf(&ngrams(r, n), &df, log_docs)))
                .sum::<f64>()
                / e.references.len() as f64;
            per_video[i] += sim / MAX_N as f64;
        }
    }
    per_video.iter_mut().for_each(|s| *s *= 10.0);
    let score = per_video.iter().sum::<f64>() / docs as f64;
    Ok(CiderScore { score, per_video })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryCounts {
    pub matched: usize,
    pub predicted: usize,
    pub truth: usize,
}

impl BoundaryCounts {
    /// Precision is 1 when nothing was predicted (no false positives);
    /// recall is 1 when there is nothing to find.
    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            1.0
        } else {
            self.matched as f64 / self.predicted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.truth == 0 {
            1.0
        } else {
            self.matched as f64 / self.truth as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn merge(&mut self, other: BoundaryCounts) {
        self.matched += other.matched;
        self.predicted += other.predicted;
        self.truth += other.truth;
    }
}

/// Greedy left-to-right matching: each predicted boundary takes the first
/// unmatched ground-truth boundary within `±tolerance`.
pub fn boundary_score(predicted: &[usize], truth: &[usize], tolerance: usize) -> BoundaryCounts {
    let mut pred = predicted.to_vec();
    pred.sort_unstable();
    pred.dedup();
    let mut gt = truth.to_vec();
    gt.sort_unstable();
    gt.dedup();
    let mut used = vec![false; gt.len()];
    let mut matched = 0;
    for &p in &pred {
        if let Some(j) = (0..gt.len()).find(|&j| !used[j] && p.abs_diff(gt[j]) <= tolerance) {
            used[j] = true;
            matched += 1;
        }
    }
    BoundaryCounts {
        matched,
        predicted: pred.len(),
        truth: gt.len(),
    }
}

/// Word positions that open a new phrase: `t + 1` for every step `t` whose
/// split signal is 0, excluding the caption's final word.
pub fn split_positions(signals: &[u8]) -> Vec<usize> {
    signals
        .iter()
        .enumerate()
        .filter(|&(t, &s)| s == 0 && t + 1 < signals.len())
        .map(|(t, _)| t + 1)
        .collect()
}

/// Frame positions where the boundary encoder fired.
pub fn beta_positions(trace: &[f64]) -> Vec<usize> {
    trace
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b > 0.5)
        .map(|(t, _)| t)
        .collect()
}
