use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relex_core::evalkit::{
    bleu, diversity, meteor_alignment, meteor_lite, precision_recall_f1, rouge_l, spearman, GoldKey, GoldStandard,
};
use relex_core::kg::Iri;
use relex_core::pattern::ConnectionInstance;

const ALPHABET: [&str; 3] = ["a", "b", "c"];

fn tokens(ix: &[usize]) -> Vec<String> {
    ix.iter().map(|&i| ALPHABET[i].to_string()).collect()
}

/// Every sequence over the alphabet with length in `1..=max`.
fn all_sequences(max: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max {
        layer =
            layer.iter().flat_map(|s| (0..3).map(move |c| s.iter().copied().chain([c]).collect::<Vec<_>>())).collect();
        out.extend(layer.iter().map(|s| tokens(s)));
    }
    out
}

fn rouge_from_lcs(l: usize, a_len: usize, b_len: usize) -> f64 {
    if l == 0 {
        return 0.0;
    }
    let (p, r) = (l as f64 / a_len as f64, l as f64 / b_len as f64);
    let beta2 = 1.2f64 * 1.2;
    (1.0 + beta2) * p * r / (r + beta2 * p)
}

/// Checks one candidate against every reference, returning the pair count.
/// The DP table is grown one reference token at a time: a reference of
/// length L extends its prefix of length L-1, so each costs one new column.
fn rouge_against_all(a: &[String], a_sym: &[usize], seqs: &[Vec<String>]) -> usize {
    let h = a.len() + 1;
    // Columns of one layer, stored back to back.
    let mut parents = vec![0usize; h];
    let mut layer = Vec::new();
    let (mut offset, mut checked) = (0, 0);
    for width in (1..=8).map(|l| 3usize.pow(l)) {
        layer.clear();
        layer.resize(width * h, 0);
        for (k, b) in seqs[offset..offset + width].iter().enumerate() {
            let prev = &parents[(k / 3) * h..(k / 3 + 1) * h];
            let col = &mut layer[k * h..(k + 1) * h];
            for i in 1..h {
                col[i] = if a_sym[i - 1] == k % 3 { prev[i - 1] + 1 } else { prev[i].max(col[i - 1]) };
            }
            let want = rouge_from_lcs(col[h - 1], a.len(), b.len());
            let got = rouge_l(a, b).unwrap();
            assert!((got - want).abs() <= 1e-12, "{a:?} {b:?}: {got} vs {want}");
            checked += 1;
        }
        std::mem::swap(&mut parents, &mut layer);
        offset += width;
    }
    checked
}

/// Every ordered pair of sequences with lengths in `1..=8`.
#[test]
fn rouge_l_matches_dp_oracle_exhaustively() {
    let seqs = all_sequences(8);
    let symbols: Vec<Vec<usize>> =
        seqs.iter().map(|s| s.iter().map(|t| ALPHABET.iter().position(|x| x == t).unwrap()).collect()).collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = seqs.len().div_ceil(threads);
    let checked: usize = std::thread::scope(|scope| {
        let workers: Vec<_> = (0..seqs.len())
            .step_by(chunk)
            .map(|start| {
                let (seqs, symbols) = (&seqs, &symbols);
                scope.spawn(move || {
                    (start..(start + chunk).min(seqs.len()))
                        .map(|i| rouge_against_all(&seqs[i], &symbols[i], seqs))
                        .sum::<usize>()
                })
            })
            .collect();
        workers.into_iter().map(|w| w.join().unwrap()).sum()
    });
    assert_eq!(checked, 9840 * 9840);
}

#[test]
fn self_scores() {
    for c in all_sequences(8) {
        assert!((bleu(&c, std::slice::from_ref(&c)).unwrap() - 1.0).abs() <= 1e-9, "{c:?}");
        assert_eq!(rouge_l(&c, &c).unwrap(), 1.0);
        let m = c.len() as f64;
        assert_eq!(meteor_lite(&c, &c).unwrap(), 1.0 - 0.5 / (m * m * m), "{c:?}");
    }
}

/// Try every partial one-to-one alignment of equal tokens; keep those with
/// the most matches and return (matches, fewest chunks).
fn meteor_brute(c: &[String], r: &[String]) -> (usize, usize) {
    fn go(
        c: &[String],
        r: &[String],
        i: usize,
        used: &mut Vec<bool>,
        map: &mut Vec<Option<usize>>,
        best: &mut (usize, usize),
    ) {
        if i == c.len() {
            let matches = map.iter().flatten().count();
            let mut chunks = 0;
            for k in 0..map.len() {
                if let Some(j) = map[k] {
                    let continues = k > 0 && map[k - 1] == Some(j.wrapping_sub(1)) && j > 0;
                    if !continues {
                        chunks += 1;
                    }
                }
            }
            if matches > best.0 || (matches == best.0 && chunks < best.1) {
                *best = (matches, chunks);
            }
            return;
        }
        map.push(None);
        go(c, r, i + 1, used, map, best);
        map.pop();
        for j in 0..r.len() {
            if !used[j] && r[j] == c[i] {
                used[j] = true;
                map.push(Some(j));
                go(c, r, i + 1, used, map, best);
                map.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, usize::MAX);
    go(c, r, 0, &mut vec![false; r.len()], &mut Vec::new(), &mut best);
    if best.0 == 0 {
        (0, 0)
    } else {
        best
    }
}

fn meteor_formula(m: usize, chunks: usize, c: usize, r: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let (p, rr) = (m as f64 / c as f64, m as f64 / r as f64);
    let fmean = 10.0 * p * rr / (rr + 9.0 * p);
    let frag = chunks as f64 / m as f64;
    fmean * (1.0 - 0.5 * frag * frag * frag)
}

#[test]
fn meteor_matches_brute_force_alignment() {
    let cat = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
    let (c, r) = (cat("the cat the dog"), cat("the dog the cat"));
    assert_eq!(meteor_brute(&c, &r), (4, 2));
    let al = meteor_alignment(&c, &r);
    assert_eq!((al.matches, al.chunks), (4, 2));
    assert!((meteor_lite(&c, &r).unwrap() - 0.9375).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3000 {
        let c = tokens(&(0..rng.random_range(1..=6)).map(|_| rng.random_range(0..3)).collect::<Vec<_>>());
        let r = tokens(&(0..rng.random_range(1..=6)).map(|_| rng.random_range(0..3)).collect::<Vec<_>>());
        let (m, ch) = meteor_brute(&c, &r);
        let al = meteor_alignment(&c, &r);
        assert_eq!((al.matches, al.chunks), (m, ch), "{c:?} vs {r:?}");
        let want = meteor_formula(m, ch, c.len(), r.len());
        assert!((meteor_lite(&c, &r).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn bleu_by_hand() {
    let s = |x: &str| x.split(' ').map(String::from).collect::<Vec<_>>();
    // p1 = 5/6, p2 = 3/5, p3 = 2/4, p4 = 1/3; c = r = 6.
    let c = s("the cat sat on a mat");
    let r = s("the cat sat on the mat");
    let want = ((5.0f64 / 6.0).ln() + (3.0f64 / 5.0).ln() + (2.0f64 / 4.0).ln() + (1.0f64 / 3.0).ln()) / 4.0;
    assert!((bleu(&c, std::slice::from_ref(&r)).unwrap() - want.exp()).abs() < 1e-12);
    // No shared bigram, so p2..p4 all take epsilon.
    let c = s("mat a on sat cat the");
    let want = (1.0f64.ln() + 3.0 * 1e-9f64.ln()) / 4.0;
    assert!((bleu(&c, &[s("the cat sat on a mat")]).unwrap() - want.exp()).abs() < 1e-12);
    // The closest reference sets the brevity penalty; the tie goes to the shorter one.
    let short = s("the cat sat on the mat today");
    let long = s("the cat sat on the mat today again now");
    let c = s("the cat sat on the mat today x");
    let p = [7.0f64 / 8.0, 6.0 / 7.0, 5.0 / 6.0, 4.0 / 5.0];
    let want: f64 = (p.iter().map(|x| x.ln()).sum::<f64>() / 4.0).exp();
    assert!((bleu(&c, &[long.clone(), short.clone()]).unwrap() - want).abs() < 1e-12);
    let c7 = s("the cat sat on the mat x");
    let p = [6.0f64 / 7.0, 5.0 / 6.0, 4.0 / 5.0, 3.0 / 4.0];
    let want: f64 = (1.0f64 - 9.0 / 7.0).exp() * (p.iter().map(|x| x.ln()).sum::<f64>() / 4.0).exp();
    assert!((bleu(&c7, std::slice::from_ref(&long)).unwrap() - want).abs() < 1e-12);
}

fn rank_oracle(xs: &[f64]) -> Vec<f64> {
    // Rank = 1 + (#smaller) + (#equal - 1)/2.
    xs.iter()
        .map(|x| {
            let smaller = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn spearman_closed_forms() {
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert!((spearman(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
    assert!((spearman(&xs, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    assert!((spearman(&xs, &[2.0, 1.0, 3.0, 4.0, 5.0]).unwrap() - 0.9).abs() < 1e-12);
    assert!(spearman(&xs, &[1.0; 5]).is_err());
    assert!(spearman(&xs, &xs[..4]).is_err());
    assert!(spearman(&[1.0], &[2.0]).is_err());
    assert!(spearman(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
}

fn distinct(len: usize) -> impl Strategy<Value = Vec<f64>> {
    Just((0..len).map(|i| i as f64).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn spearman_without_ties_is_the_d_squared_formula((xs, ys) in (2usize..30).prop_flat_map(|n| (distinct(n), distinct(n)))) {
        let n = xs.len() as f64;
        let d2: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - b).powi(2)).sum();
        let want = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        prop_assert!((spearman(&xs, &ys).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn spearman_with_ties_is_pearson_on_average_ranks(
        pairs in proptest::collection::vec((0u8..5, 0u8..5), 2..40)
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        prop_assume!(!constant(&xs) && !constant(&ys));
        let got = spearman(&xs, &ys).unwrap();
        let want = pearson_oracle(&rank_oracle(&xs), &rank_oracle(&ys));
        prop_assert!((got - want).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&got));
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..40)
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        prop_assume!(!constant(&xs) && !constant(&ys));
        let base = spearman(&xs, &ys).unwrap();
        let tx: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0 * x).collect();
        let ty: Vec<f64> = ys.iter().map(|y| (y / 10.0).exp()).collect();
        prop_assert!((spearman(&tx, &ty).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn text_metrics_stay_in_range(
        c in proptest::collection::vec(0usize..6, 1..15),
        r1 in proptest::collection::vec(0usize..6, 1..15),
        r2 in proptest::collection::vec(0usize..6, 0..15),
    ) {
        let word = |i: &usize| format!("w{i}");
        let (c, r1, r2): (Vec<String>, Vec<String>, Vec<String>) =
            (c.iter().map(word).collect(), r1.iter().map(word).collect(), r2.iter().map(word).collect());
        for v in [bleu(&c, &[r1.clone(), r2.clone()]).unwrap(), rouge_l(&c, &r1).unwrap(), meteor_lite(&c, &r1).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&v), "{v}");
        }
        let d = diversity(&[c.clone(), r1.clone()], ["x", "y", "x"]);
        prop_assert!((0.0..=1.0).contains(&d.distinct1) && (0.0..=1.0).contains(&d.distinct2));
        prop_assert_eq!(d.type_count, 2);
    }
}

fn conn(a: usize, b: usize, t: &str) -> ConnectionInstance {
    let iri = |i: usize| Iri::new(format!("http://example.org/e{i}")).unwrap();
    ConnectionInstance {
        entity1_id: iri(a),
        entity2_id: iri(b),
        relationship_type: t.to_string(),
        relevant_metadata: BTreeMap::new(),
        explanation_text: String::new(),
    }
}

proptest! {
    #[test]
    fn retrieval_scores_ignore_order_and_pair_direction(
        gold_pairs in proptest::collection::btree_set((0usize..6, 0usize..6, 0usize..2), 1..10),
        retrieved in proptest::collection::vec((0usize..6, 0usize..6, 0usize..2), 0..15),
        seed in any::<u64>(),
    ) {
        let types = ["p", "q"];
        let mut gold = GoldStandard::new();
        for &(a, b, t) in gold_pairs.iter().filter(|(a, b, _)| a != b) {
            let c = conn(a, b, types[t]);
            gold.insert(GoldKey::of(&c), None);
        }
        prop_assume!(!gold.is_empty());
        let retrieved: Vec<ConnectionInstance> =
            retrieved.iter().filter(|(a, b, _)| a != b).map(|&(a, b, t)| conn(a, b, types[t])).collect();
        let base = precision_recall_f1(&retrieved, &gold).unwrap();
        for v in [base.precision, base.recall, base.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }

        let mut shuffled = retrieved.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(precision_recall_f1(&shuffled, &gold).unwrap(), base);

        let swapped: Vec<ConnectionInstance> = retrieved
            .iter()
            .map(|c| ConnectionInstance { entity1_id: c.entity2_id.clone(), entity2_id: c.entity1_id.clone(), ..c.clone() })
            .collect();
        prop_assert_eq!(precision_recall_f1(&swapped, &gold).unwrap(), base);
    }
}

#[test]
fn perfect_and_empty_retrieval() {
    let mut gold = GoldStandard::new();
    let conns = [conn(0, 1, "p"), conn(2, 3, "q")];
    for c in &conns {
        gold.insert(GoldKey::of(c), None);
    }
    let perfect = precision_recall_f1(&conns, &gold).unwrap();
    assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
    let empty = precision_recall_f1(&[], &gold).unwrap();
    assert_eq!((empty.precision, empty.recall, empty.f1), (0.0, 0.0, 0.0));
}
