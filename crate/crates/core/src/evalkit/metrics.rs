use std::collections::{HashMap, HashSet};

use super::EvalError;

pub const BLEU_MAX_N: usize = 4;
pub const BLEU_EPSILON: f64 = 1e-9;
pub const ROUGE_BETA: f64 = 1.2;
pub const METEOR_ALPHA_WEIGHT: f64 = 9.0;
pub const METEOR_GAMMA: f64 = 0.5;
pub const METEOR_BETA: f64 = 3.0;

// Exhaustive chunk minimization gives up after this many search nodes and
// keeps the best alignment found so far.
const METEOR_SEARCH_BUDGET: usize = 200_000;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU up to 4-grams with multi-reference clipping, add-epsilon
/// smoothing for zero precisions and the closest-reference brevity penalty.
///
/// Orders longer than the candidate have no n-grams at all; their precision
/// is undefined rather than zero, so they are left out of the mean.
pub fn bleu(candidate: &[String], references: &[Vec<String>]) -> Result<f64, EvalError> {
    if candidate.is_empty() {
        return Err(EvalError::EmptyInput("BLEU candidate"));
    }
    let refs: Vec<&Vec<String>> = references.iter().filter(|r| !r.is_empty()).collect();
    if refs.is_empty() {
        return Err(EvalError::EmptyInput("BLEU references"));
    }
    let orders = BLEU_MAX_N.min(candidate.len());
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let cand = ngram_counts(candidate, n);
        let total: usize = cand.values().sum();
        let ref_counts: Vec<HashMap<&[String], usize>> = refs.iter().map(|r| ngram_counts(r, n)).collect();
        let clipped: usize = cand
            .iter()
            .map(|(gram, &c)| {
                let max_ref = ref_counts.iter().map(|rc| rc.get(gram).copied().unwrap_or(0)).max().unwrap_or(0);
                c.min(max_ref)
            })
            .sum();
        let precision = if clipped == 0 { BLEU_EPSILON } else { clipped as f64 / total as f64 };
        log_sum += precision.ln();
    }
    let c = candidate.len();
    let r = refs.iter().map(|r| r.len()).min_by_key(|&len| (len.abs_diff(c), len)).expect("non-empty references");
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    Ok(bp * (log_sum / orders as f64).exp())
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F-measure with beta = 1.2.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> Result<f64, EvalError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(EvalError::EmptyInput("ROUGE-L input"));
    }
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return Ok(0.0);
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    Ok((1.0 + b2) * p * r / (r + b2 * p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub matches: usize,
    pub chunks: usize,
}

struct ChunkSearch<'a> {
    candidate: &'a [String],
    positions: Vec<Vec<usize>>,
    used: Vec<bool>,
    // remaining tokens of each type that may still go unaligned
    skips_left: HashMap<&'a str, usize>,
    best: usize,
    nodes: usize,
}

impl ChunkSearch<'_> {
    fn search(&mut self, i: usize, prev: Option<usize>, chunks: usize) {
        if chunks >= self.best || self.nodes >= METEOR_SEARCH_BUDGET {
            return;
        }
        self.nodes += 1;
        if i == self.candidate.len() {
            self.best = chunks;
            return;
        }
        let word = self.candidate[i].as_str();
        let continuation = prev.map(|j| j + 1);
        // Try the continuing position first so good alignments are found early.
        let mut options: Vec<usize> = self.positions[i].iter().copied().filter(|&j| !self.used[j]).collect();
        if let Some(cj) = continuation {
            if let Some(k) = options.iter().position(|&j| j == cj) {
                options.remove(k);
                options.insert(0, cj);
            }
        }
        for j in options {
            self.used[j] = true;
            let extra = usize::from(continuation != Some(j));
            self.search(i + 1, Some(j), chunks + extra);
            self.used[j] = false;
        }
        let left = self.skips_left.get(word).copied().unwrap_or(0);
        if left > 0 {
            self.skips_left.insert(self.candidate[i].as_str(), left - 1);
            self.search(i + 1, None, chunks);
            self.skips_left.insert(self.candidate[i].as_str(), left);
        }
    }
}

/// Exact-match unigram alignment with the maximum number of matches and,
/// among those, the fewest chunks.
pub fn meteor_alignment(candidate: &[String], reference: &[String]) -> Alignment {
    let mut ref_count: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *ref_count.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut cand_count: HashMap<&str, usize> = HashMap::new();
    for t in candidate {
        *cand_count.entry(t.as_str()).or_insert(0) += 1;
    }
    let matches: usize = cand_count.iter().map(|(w, &c)| c.min(ref_count.get(w).copied().unwrap_or(0))).sum();
    if matches == 0 {
        return Alignment { matches: 0, chunks: 0 };
    }
    let positions: Vec<Vec<usize>> = candidate
        .iter()
        .map(|t| reference.iter().enumerate().filter(|(_, r)| *r == t).map(|(j, _)| j).collect())
        .collect();
    let skips_left: HashMap<&str, usize> =
        cand_count.iter().map(|(w, &c)| (*w, c - c.min(ref_count.get(w).copied().unwrap_or(0)))).collect();
    let mut s = ChunkSearch {
        candidate,
        positions,
        used: vec![false; reference.len()],
        skips_left,
        best: usize::MAX,
        nodes: 0,
    };
    s.search(0, None, 0);
    Alignment { matches, chunks: s.best }
}

/// METEOR with exact matching only: Fmean = 10PR/(R+9P), fragmentation
/// penalty 0.5 * (chunks/matches)^3.
pub fn meteor_lite(candidate: &[String], reference: &[String]) -> Result<f64, EvalError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(EvalError::EmptyInput("METEOR input"));
    }
    let Alignment { matches, chunks } = meteor_alignment(candidate, reference);
    Ok(meteor_from_alignment(matches, chunks, candidate.len(), reference.len()))
}

pub fn meteor_from_alignment(matches: usize, chunks: usize, cand_len: usize, ref_len: usize) -> f64 {
    if matches == 0 {
        return 0.0;
    }
    let m = matches as f64;
    let p = m / cand_len as f64;
    let r = m / ref_len as f64;
    let fmean = (1.0 + METEOR_ALPHA_WEIGHT) * p * r / (r + METEOR_ALPHA_WEIGHT * p);
    let penalty = METEOR_GAMMA * (chunks as f64 / m).powf(METEOR_BETA);
    fmean * (1.0 - penalty)
}

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::EmptyInput("spearman needs at least two pairs"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(xs) || constant(ys) {
        return Err(EvalError::ConstantInput);
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diversity {
    pub distinct1: f64,
    pub distinct2: f64,
    pub type_count: usize,
}

/// Distinct-n ratios over all explanations (bigrams do not cross texts)
/// and the number of relationship types covered.
pub fn diversity<'a, I>(explanations: &[Vec<String>], relationship_types: I) -> Diversity
where
    I: IntoIterator<Item = &'a str>,
{
    let mut uni: HashSet<&str> = HashSet::new();
    let mut bi: HashSet<(&str, &str)> = HashSet::new();
    let (mut n_uni, mut n_bi) = (0usize, 0usize);
    for toks in explanations {
        for t in toks {
            uni.insert(t);
            n_uni += 1;
        }
        for w in toks.windows(2) {
            bi.insert((&w[0], &w[1]));
            n_bi += 1;
        }
    }
    let ratio = |d: usize, n: usize| if n == 0 { 0.0 } else { d as f64 / n as f64 };
    let types: HashSet<&str> = relationship_types.into_iter().collect();
    Diversity { distinct1: ratio(uni.len(), n_uni), distinct2: ratio(bi.len(), n_bi), type_count: types.len() }
}
