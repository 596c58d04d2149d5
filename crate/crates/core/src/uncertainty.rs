//! Sentence scoring: translation uncertainty (mean word entropy), its
//! unnormalized sum form, word rarity, and alignment coverage.
//!
//! Uncertainty is a bag-of-words quantity: the mean, over a sentence's
//! tokens, of the per-word translation entropy from the bilingual
//! dictionary. The mean (rather than the sum) avoids length bias.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::align::SentenceAlignment;
use crate::bidict::EntropyTable;
use crate::corpus::{read_raw_lines, Sentence, Vocab};
use crate::error::{Error, Result};

/// How to treat tokens missing from the entropy table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OovPolicy {
    /// Drop OOV tokens from both numerator and denominator (default).
    /// Assigning 0 instead would mark rare-word sentences as certain.
    Exclude,
    /// OOV tokens contribute a fixed entropy, denominator stays T_x.
    Constant(f64),
}

impl Default for OovPolicy {
    fn default() -> Self {
        OovPolicy::Exclude
    }
}

/// Per-line scoring record. `uncertainty` is `None` for unscorable lines
/// (empty, or all tokens OOV under the exclude policy).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSentence {
    pub line_index: usize,
    pub uncertainty: Option<f64>,
    pub token_count: usize,
    pub oov_count: usize,
    pub word_rarity: Option<f64>,
    pub coverage: Option<f64>,
}

/// Mean word entropy over the sentence, OOV tokens handled per policy.
/// Returns (uncertainty, oov_count); uncertainty is `None` when no token
/// contributes a denominator.
pub fn sentence_uncertainty(
    entropy: &EntropyTable,
    s: &Sentence,
    policy: OovPolicy,
) -> (Option<f64>, usize) {
    let (sum, t_eff, oov) = accumulate(entropy, s, policy);
    if t_eff == 0 {
        return (None, oov);
    }
    (Some(sum / t_eff as f64), oov)
}

/// Unnormalized sum of word entropies; equals mean uncertainty times the
/// effective token count. Empty sentences sum to 0.
pub fn sentence_uncertainty_sum(
    entropy: &EntropyTable,
    s: &Sentence,
    policy: OovPolicy,
) -> (Option<f64>, usize) {
    let (sum, t_eff, oov) = accumulate(entropy, s, policy);
    if s.is_empty() {
        return (Some(0.0), 0);
    }
    if t_eff == 0 {
        return (None, oov);
    }
    (Some(sum), oov)
}

fn accumulate(entropy: &EntropyTable, s: &Sentence, policy: OovPolicy) -> (f64, usize, usize) {
    // bag-of-words accumulation in sorted token order: the result depends
    // only on the token multiset, so permutations score bitwise-identically
    let mut bag: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for tok in &s.tokens {
        *bag.entry(tok.as_str()).or_insert(0) += 1;
    }
    let mut sum = 0.0;
    let mut t_eff = 0usize;
    let mut oov = 0usize;
    for (tok, count) in bag {
        match entropy.get(tok) {
            Some(h) => {
                sum += count as f64 * h;
                t_eff += count;
            }
            None => {
                oov += count;
                if let OovPolicy::Constant(c) = policy {
                    sum += count as f64 * c;
                    t_eff += count;
                }
            }
        }
    }
    (sum, t_eff, oov)
}

/// WR = -(1/T_x) sum ln p(x_t). Tokens unseen in the vocab get the floor
/// probability 1/(total_tokens+1). `None` for empty sentences.
pub fn word_rarity(vocab: &Vocab, s: &Sentence) -> Result<Option<f64>> {
    if vocab.total_tokens() == 0 {
        return Err(Error::EmptyInput {
            context: "word_rarity with empty vocab".into(),
        });
    }
    if s.is_empty() {
        return Ok(None);
    }
    let floor = 1.0 / (vocab.total_tokens() as f64 + 1.0);
    let sum: f64 = s
        .tokens
        .iter()
        .map(|tok| {
            let p = vocab.unigram_prob(tok).expect("non-empty vocab");
            if p > 0.0 { p.ln() } else { floor.ln() }
        })
        .sum();
    Ok(Some(-sum / s.len() as f64))
}

/// Fraction of source positions linked to at least one target position.
/// `None` for empty sentences.
pub fn coverage(s: &Sentence, a: &SentenceAlignment) -> Option<f64> {
    if s.is_empty() {
        return None;
    }
    let mut covered = vec![false; s.len()];
    for &(i, _) in a.links() {
        if i < covered.len() {
            covered[i] = true;
        }
    }
    let n = covered.iter().filter(|&&c| c).count();
    Some(n as f64 / s.len() as f64)
}

/// Aggregate statistics from a scoring pass.
#[derive(Debug, Clone, Default)]
pub struct ScoreSummary {
    pub lines: usize,
    pub unscorable: usize,
    pub mean_uncertainty: f64,
    pub total_tokens: usize,
    pub oov_tokens: usize,
}

impl ScoreSummary {
    pub fn oov_rate(&self) -> f64 {
        if self.total_tokens == 0 {
            0.0
        } else {
            self.oov_tokens as f64 / self.total_tokens as f64
        }
    }
}

/// Options for a corpus scoring pass.
#[derive(Debug, Clone, Default)]
pub struct ScoreOptions {
    pub oov_policy: OovPolicy,
    /// compute word rarity (requires a vocab)
    pub rarity: bool,
    /// compute coverage (requires alignments, one per line)
    pub coverage: bool,
}

/// Score every sentence. Parallel over lines but emitted in line order, so
/// output is independent of thread count.
pub fn score_sentences(
    sentences: &[Sentence],
    entropy: &EntropyTable,
    vocab: Option<&Vocab>,
    alignments: Option<&[SentenceAlignment]>,
    options: &ScoreOptions,
) -> Result<Vec<ScoredSentence>> {
    if options.rarity && vocab.is_none() {
        return Err(Error::Usage("rarity scoring requires a vocabulary".into()));
    }
    if options.coverage {
        let als = alignments.ok_or_else(|| {
            Error::Usage("coverage scoring requires alignments".into())
        })?;
        if als.len() != sentences.len() {
            return Err(Error::LineCountMismatch {
                src_lines: sentences.len(),
                tgt_lines: als.len(),
            });
        }
    }
    sentences
        .par_iter()
        .enumerate()
        .map(|(idx, s)| {
            let (u, oov) = sentence_uncertainty(entropy, s, options.oov_policy);
            let wr = if options.rarity {
                word_rarity(vocab.unwrap(), s)?
            } else {
                None
            };
            let cov = if options.coverage {
                coverage(s, &alignments.unwrap()[idx])
            } else {
                None
            };
            Ok(ScoredSentence {
                line_index: s.line_index,
                uncertainty: u,
                token_count: s.len(),
                oov_count: oov,
                word_rarity: wr,
                coverage: cov,
            })
        })
        .collect()
}

pub fn summarize(scores: &[ScoredSentence]) -> ScoreSummary {
    let mut summary = ScoreSummary {
        lines: scores.len(),
        ..Default::default()
    };
    let mut sum_u = 0.0;
    let mut scored = 0usize;
    for s in scores {
        summary.total_tokens += s.token_count;
        summary.oov_tokens += s.oov_count;
        match s.uncertainty {
            Some(u) => {
                sum_u += u;
                scored += 1;
            }
            None => summary.unscorable += 1,
        }
    }
    summary.mean_uncertainty = if scored > 0 { sum_u / scored as f64 } else { 0.0 };
    summary
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "NA".to_owned(),
    }
}

/// Score TSV: `line_index<TAB>U<TAB>T_x<TAB>oov_count[<TAB>WR][<TAB>coverage]`;
/// unscorable lines carry `NA` in the U column.
pub fn write_scores(path: impl AsRef<Path>, scores: &[ScoredSentence]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    // column layout is uniform across the file: the optional WR and
    // coverage columns appear iff any line carries them
    let with_rarity = scores.iter().any(|s| s.word_rarity.is_some());
    let with_coverage = scores.iter().any(|s| s.coverage.is_some());
    for s in scores {
        let mut line = format!(
            "{}\t{}\t{}\t{}",
            s.line_index,
            fmt_opt(s.uncertainty),
            s.token_count,
            s.oov_count
        );
        if with_rarity || with_coverage {
            line.push('\t');
            line.push_str(&fmt_opt(s.word_rarity));
        }
        if with_coverage {
            line.push('\t');
            line.push_str(&fmt_opt(s.coverage));
        }
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoredSentence>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (idx, line) in read_raw_lines(path)?.into_iter().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(Error::MalformedRecord {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected >= 4 fields, got {}", fields.len()),
            });
        }
        let bad = |message: String| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let parse_opt = |f: &str| -> Result<Option<f64>> {
            if f == "NA" {
                Ok(None)
            } else {
                f.parse::<f64>()
                    .map(Some)
                    .map_err(|_| bad(format!("bad float '{f}'")))
            }
        };
        out.push(ScoredSentence {
            line_index: fields[0]
                .parse()
                .map_err(|_| bad(format!("bad line index '{}'", fields[0])))?,
            uncertainty: parse_opt(fields[1])?,
            token_count: fields[2]
                .parse()
                .map_err(|_| bad(format!("bad token count '{}'", fields[2])))?,
            oov_count: fields[3]
                .parse()
                .map_err(|_| bad(format!("bad oov count '{}'", fields[3])))?,
            word_rarity: if fields.len() > 4 {
                parse_opt(fields[4])?
            } else {
                None
            },
            coverage: if fields.len() > 5 {
                parse_opt(fields[5])?
            } else {
                None
            },
        });
    }
    Ok(out)
}
