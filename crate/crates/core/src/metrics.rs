//! Caption metrics: BLEU-1..4, ROUGE-L and COM (intersection over union
//! of the objects two sentences mention).
//!
//! Text is compared as lowercase word tokens with surrounding punctuation
//! stripped. Sentence-level BLEU is available, but the corpus report pools
//! n-gram counts and lengths over all pairs before taking precisions, which
//! is how BLEU is defined for a test set; ROUGE-L and COM are averaged per
//! sentence.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::catalog::ObjectClass;
use crate::parser::{lexicon, tokens};
use crate::{Error, Result};

pub const ROUGE_BETA: f64 = 1.2;
pub const MAX_ORDER: usize = 4;

pub fn mentioned_objects(text: &str) -> BTreeSet<ObjectClass> {
    lexicon::find_objects(&tokens(text))
        .into_iter()
        .map(|m| m.class)
        .collect()
}

/// Intersection over union of the mentioned objects; 1 when neither text
/// mentions any.
pub fn com(prediction: &str, reference: &str) -> f64 {
    let (p, r) = (mentioned_objects(prediction), mentioned_objects(reference));
    let union = p.union(&r).count();
    if union == 0 {
        return 1.0;
    }
    p.intersection(&r).count() as f64 / union as f64
}

fn ngram_counts(toks: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    for g in toks.windows(n) {
        *out.entry(g).or_insert(0) += 1;
    }
    out
}

/// Clipped n-gram matches and total prediction n-grams of order `n`.
fn clipped(pred: &[String], reference: &[String], n: usize) -> (usize, usize) {
    if pred.len() < n {
        return (0, 0);
    }
    let r = ngram_counts(reference, n);
    let matched = ngram_counts(pred, n)
        .into_iter()
        .map(|(g, c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, pred.len() + 1 - n)
}

/// Pooled counts behind a BLEU score.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct BleuCounts {
    matched: [usize; MAX_ORDER],
    total: [usize; MAX_ORDER],
    pred_len: usize,
    ref_len: usize,
}

impl BleuCounts {
    fn of(pred: &[String], reference: &[String]) -> Self {
        let mut c = BleuCounts {
            pred_len: pred.len(),
            ref_len: reference.len(),
            ..BleuCounts::default()
        };
        for k in 0..MAX_ORDER {
            (c.matched[k], c.total[k]) = clipped(pred, reference, k + 1);
        }
        c
    }

    fn add(&mut self, other: &BleuCounts) {
        for k in 0..MAX_ORDER {
            self.matched[k] += other.matched[k];
            self.total[k] += other.total[k];
        }
        self.pred_len += other.pred_len;
        self.ref_len += other.ref_len;
    }

    fn brevity_penalty(&self) -> f64 {
        if self.pred_len == 0 {
            0.0
        } else if self.pred_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.pred_len as f64).exp()
        }
    }

    /// Brevity penalty times the geometric mean of precisions 1..=n. An
    /// order without any prediction n-gram has precision 0.
    fn score(&self, n: usize) -> f64 {
        let mut log_sum = 0.0;
        for k in 0..n {
            if self.matched[k] == 0 {
                return 0.0;
            }
            log_sum += (self.matched[k] as f64 / self.total[k] as f64).ln();
        }
        self.brevity_penalty() * (log_sum / n as f64).exp()
    }
}

fn check_order(n: usize) {
    assert!(
        (1..=MAX_ORDER).contains(&n),
        "BLEU order must be 1..=4, got {n}"
    );
}

/// Cumulative BLEU-n of one sentence against one reference.
pub fn bleu_n(prediction: &str, reference: &str, n: usize) -> f64 {
    check_order(n);
    BleuCounts::of(&tokens(prediction), &tokens(reference)).score(n)
}

pub fn bleu(prediction: &str, reference: &str) -> f64 {
    bleu_n(prediction, reference, MAX_ORDER)
}

/// BLEU-n over a corpus of (prediction, reference) pairs.
pub fn corpus_bleu_n<P: AsRef<str> + Sync, R: AsRef<str> + Sync>(
    pairs: &[(P, R)],
    n: usize,
) -> f64 {
    check_order(n);
    pooled(pairs).score(n)
}

fn pooled<P: AsRef<str> + Sync, R: AsRef<str> + Sync>(pairs: &[(P, R)]) -> BleuCounts {
    let mut total = BleuCounts::default();
    for c in crate::exec::map(pairs, |(p, r)| {
        BleuCounts::of(&tokens(p.as_ref()), &tokens(r.as_ref()))
    }) {
        total.add(&c);
    }
    total
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS-based F-measure with recall weighted by [`ROUGE_BETA`].
pub fn rouge_l(prediction: &str, reference: &str) -> f64 {
    let (p, r) = (tokens(prediction), tokens(reference));
    let l = lcs(&p, &r);
    if l == 0 {
        return 0.0;
    }
    let precision = l as f64 / p.len() as f64;
    let recall = l as f64 / r.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * precision * recall / (recall + b2 * precision)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Corpus BLEU-4.
    pub bleu: f64,
    /// Corpus BLEU-1 to BLEU-4.
    pub bleu_n: [f64; 4],
    pub rouge_l: f64,
    pub com: f64,
    pub n_examples: usize,
}

pub fn evaluate_corpus<P: AsRef<str> + Sync, R: AsRef<str> + Sync>(
    pairs: &[(P, R)],
) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::NoExamples);
    }
    let counts = pooled(pairs);
    let per_pair = crate::exec::map(pairs, |(p, r)| {
        (rouge_l(p.as_ref(), r.as_ref()), com(p.as_ref(), r.as_ref()))
    });
    let n = pairs.len() as f64;
    Ok(EvalReport {
        bleu: counts.score(4),
        bleu_n: std::array::from_fn(|k| counts.score(k + 1)),
        rouge_l: per_pair.iter().map(|x| x.0).sum::<f64>() / n,
        com: per_pair.iter().map(|x| x.1).sum::<f64>() / n,
        n_examples: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::describer::{realize, Event, EventKind, Magnitude};
    use proptest::prelude::*;

    const B2: f64 = ROUGE_BETA * ROUGE_BETA;

    fn f_measure(p: f64, r: f64) -> f64 {
        (1.0 + B2) * p * r / (r + B2 * p)
    }

    struct Golden {
        pred: &'static str,
        reference: &'static str,
        bleu: [f64; 4],
        rouge: f64,
        com: f64,
    }

    /// Values worked out by hand from clipped n-gram counts, brevity
    /// penalties and longest common subsequences.
    fn golden() -> Vec<Golden> {
        let e = std::f64::consts::E;
        vec![
            Golden {
                pred: "the foam is pushed by the screw driver",
                reference: "the foam is pushed by the screw driver",
                bleu: [1.0; 4],
                rouge: 1.0,
                com: 1.0,
            },
            Golden {
                pred: "nothing",
                reference: "nothing",
                bleu: [1.0, 0.0, 0.0, 0.0],
                rouge: 1.0,
                com: 1.0,
            },
            Golden {
                pred: "the the the the",
                reference: "the foam is pushed",
                bleu: [0.25, 0.0, 0.0, 0.0],
                rouge: 0.25,
                com: 0.0,
            },
            Golden {
                pred: "nothing",
                reference: "the banana falls off the table",
                bleu: [0.0; 4],
                rouge: 0.0,
                com: 0.0,
            },
            Golden {
                pred: "the foam is pushed by the mustard container",
                reference: "the foam is pushed by the screw driver",
                bleu: [
                    6.0 / 8.0,
                    (6.0 / 8.0 * 5.0 / 7.0f64).sqrt(),
                    (6.0 / 8.0 * 5.0 / 7.0 * 4.0 / 6.0f64).cbrt(),
                    (6.0 / 8.0 * 5.0 / 7.0 * 4.0 / 6.0 * 3.0 / 5.0f64).powf(0.25),
                ],
                rouge: 0.75,
                com: 1.0 / 3.0,
            },
            Golden {
                pred: "the cheese box is pushed a little by the baseball",
                reference: "the cheese box is pushed by the baseball",
                bleu: [
                    0.8,
                    (0.8 * 6.0 / 9.0f64).sqrt(),
                    (0.8 * 6.0 / 9.0 * 4.0 / 8.0f64).cbrt(),
                    (0.8 * 6.0 / 9.0 * 4.0 / 8.0 * 2.0 / 7.0f64).powf(0.25),
                ],
                rouge: f_measure(0.8, 1.0),
                com: 1.0,
            },
            Golden {
                pred: "the banana is pushed",
                reference: "the banana is pushed by the coffee can",
                bleu: [1.0 / e; 4],
                rouge: f_measure(1.0, 0.5),
                com: 0.5,
            },
            Golden {
                pred: "the coffee can falls off the table",
                reference: "the coffee can shakes a little from the impact",
                bleu: [
                    (-2.0 / 7.0f64).exp() * 4.0 / 7.0,
                    (-2.0 / 7.0f64).exp() * (4.0 / 7.0 * 2.0 / 6.0f64).sqrt(),
                    (-2.0 / 7.0f64).exp() * (4.0 / 7.0 * 2.0 / 6.0 * 1.0 / 5.0f64).cbrt(),
                    0.0,
                ],
                rouge: f_measure(4.0 / 7.0, 4.0 / 9.0),
                com: 1.0,
            },
            Golden {
                pred: "The  Foam is pushed by the Screw Driver.",
                reference: "the foam is pushed by the screw driver",
                bleu: [1.0; 4],
                rouge: 1.0,
                com: 1.0,
            },
            Golden {
                pred: "the screw driver is pushed by the screw driver",
                reference: "the foam is pushed by the screw driver",
                bleu: [
                    7.0 / 9.0,
                    (7.0 / 9.0 * 5.0 / 8.0f64).sqrt(),
                    (7.0 / 9.0 * 5.0 / 8.0 * 4.0 / 7.0f64).cbrt(),
                    (7.0 / 9.0 * 5.0 / 8.0 * 4.0 / 7.0 * 3.0 / 6.0f64).powf(0.25),
                ],
                rouge: f_measure(7.0 / 9.0, 7.0 / 8.0),
                com: 0.5,
            },
        ]
    }

    #[test]
    fn golden_fixture() {
        for g in golden() {
            for n in 1..=4 {
                let got = bleu_n(g.pred, g.reference, n);
                assert!(
                    (got - g.bleu[n - 1]).abs() < 1e-9,
                    "BLEU-{n} `{}`: {got}",
                    g.pred
                );
            }
            assert_eq!(bleu(g.pred, g.reference), bleu_n(g.pred, g.reference, 4));
            let r = rouge_l(g.pred, g.reference);
            assert!((r - g.rouge).abs() < 1e-9, "ROUGE-L `{}`: {r}", g.pred);
            let c = com(g.pred, g.reference);
            assert!((c - g.com).abs() < 1e-9, "COM `{}`: {c}", g.pred);
        }
    }

    /// The shipped fixture file carries the same values as [`golden`].
    #[test]
    fn golden_file_matches() {
        let file: Vec<serde_json::Value> =
            serde_json::from_str(include_str!("../tests/data/metrics_golden.json")).unwrap();
        let golden = golden();
        assert_eq!(file.len(), golden.len());
        for (f, g) in file.iter().zip(&golden) {
            assert_eq!(f["prediction"], g.pred);
            assert_eq!(f["reference"], g.reference);
            for n in 0..4 {
                assert!((f["bleu"][n].as_f64().unwrap() - g.bleu[n]).abs() < 1e-12);
            }
            assert!((f["rouge_l"].as_f64().unwrap() - g.rouge).abs() < 1e-12);
            assert!((f["com"].as_f64().unwrap() - g.com).abs() < 1e-12);
        }
    }

    #[test]
    fn mentions() {
        let set = |t: &str| mentioned_objects(t).into_iter().collect::<Vec<_>>();
        assert_eq!(
            set("the foam is pushed by the screw driver"),
            [ObjectClass::FoamBrick, ObjectClass::Screwdriver]
        );
        assert!(set("nothing").is_empty());
        assert_eq!(
            set("the cheese box is pushed by the cheese box"),
            [ObjectClass::CheezitBox]
        );
        assert_eq!(set("The  CHEESE   box"), [ObjectClass::CheezitBox]);
        assert_eq!(com("nothing", "nothing"), 1.0);
    }

    #[test]
    fn bleu_and_rouge_are_asymmetric() {
        let (a, b) = (
            "the banana is pushed",
            "the banana is pushed by the coffee can",
        );
        assert_ne!(bleu(a, b), bleu(b, a));
        assert_ne!(rouge_l(a, b), rouge_l(b, a));
        assert_eq!(com(a, b), com(b, a));
    }

    #[test]
    fn rouge_of_shifted_sequence() {
        let r = rouge_l("a b c d", "a c d e");
        assert!((r - f_measure(0.75, 0.75)).abs() < 1e-12);
        assert!((r - 0.75).abs() < 1e-12);
    }

    #[test]
    fn corpus_pools_counts() {
        let pairs = [
            (
                "the foam is pushed by the mustard container",
                "the foam is pushed by the screw driver",
            ),
            (
                "the banana is pushed",
                "the banana is pushed by the coffee can",
            ),
        ];
        let report = evaluate_corpus(&pairs).unwrap();
        // Matches 10/12, 8/10, 6/8, 4/6; lengths 12 against 16.
        let bp = (-1.0 / 3.0f64).exp();
        let expected = [
            bp * 10.0 / 12.0,
            bp * (10.0 / 12.0 * 8.0 / 10.0f64).sqrt(),
            bp * (10.0 / 12.0 * 8.0 / 10.0 * 6.0 / 8.0f64).cbrt(),
            bp * (1.0 / 3.0f64).powf(0.25),
        ];
        for k in 0..4 {
            assert!((report.bleu_n[k] - expected[k]).abs() < 1e-12);
        }
        assert_eq!(report.bleu, report.bleu_n[3]);
        assert!((report.rouge_l - (0.75 + f_measure(1.0, 0.5)) / 2.0).abs() < 1e-12);
        assert!((report.com - (1.0 / 3.0 + 0.5) / 2.0).abs() < 1e-12);
        assert_eq!(report.n_examples, 2);
    }

    #[test]
    fn identical_corpus_scores_one() {
        let pairs = [
            ("nothing", "nothing"),
            (
                "the banana falls off the table",
                "the banana falls off the table",
            ),
        ];
        let report = evaluate_corpus(&pairs).unwrap();
        assert_eq!(report.bleu_n, [1.0; 4]);
        assert_eq!((report.bleu, report.rouge_l, report.com), (1.0, 1.0, 1.0));
        let empty: [(&str, &str); 0] = [];
        assert!(matches!(evaluate_corpus(&empty), Err(Error::NoExamples)));
    }

    fn sentence() -> impl Strategy<Value = String> {
        let kinds = prop::sample::select(vec![
            EventKind::Nothing,
            EventKind::PushedBy,
            EventKind::HitByDropped,
            EventKind::FallsOffTable,
            EventKind::Moved,
        ]);
        (kinds, 0..8usize, 1..8usize, any::<bool>()).prop_map(|(kind, s, offset, slight)| {
            let subject = ObjectClass::ALL[s];
            let needs_agent = matches!(kind, EventKind::PushedBy | EventKind::HitByDropped);
            realize(&Event {
                kind,
                subject,
                agent: needs_agent.then(|| ObjectClass::ALL[(s + offset) % 8]),
                magnitude: if slight {
                    Magnitude::Slight
                } else {
                    Magnitude::Normal
                },
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn com_of_a_sentence_with_itself_is_one(s in sentence()) {
            prop_assert_eq!(com(&s, &s), 1.0);
            prop_assert_eq!(rouge_l(&s, &s), 1.0);
        }

        #[test]
        fn scores_are_bounded_and_com_is_symmetric(a in sentence(), b in sentence()) {
            for v in [bleu_n(&a, &b, 1), bleu_n(&a, &b, 2), bleu(&a, &b), rouge_l(&a, &b), com(&a, &b)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert_eq!(com(&a, &b), com(&b, &a));
            prop_assert_eq!(mentioned_objects(&a.to_uppercase()), mentioned_objects(&a));
        }
    }
}
