//! Analysis reports: per-bin linguistic properties of the uncertainty bins,
//! and word F-measure bucketed by training-corpus frequency.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Vocab};
use crate::error::{Error, Result};
use crate::uncertainty::ScoredSentence;

/// Aggregate properties of one uncertainty bin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinRow {
    pub bin: usize,
    pub size: usize,
    pub mean_uncertainty: f64,
    pub median_uncertainty: f64,
    pub mean_length: f64,
    pub mean_word_rarity: Option<f64>,
    pub mean_coverage: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinReport {
    pub rows: Vec<BinRow>,
}

/// Per-bin arithmetic means of uncertainty, length, word rarity, and
/// coverage. Optional columns are omitted when no line carries them.
pub fn bin_property_report(
    bins: &[Vec<usize>],
    scores: &[ScoredSentence],
) -> Result<BinReport> {
    let by_index: HashMap<usize, &ScoredSentence> =
        scores.iter().map(|s| (s.line_index, s)).collect();
    let mut rows = Vec::with_capacity(bins.len());
    for (bin_no, bin) in bins.iter().enumerate() {
        if bin.is_empty() {
            return Err(Error::EmptyInput {
                context: format!("bin {} has no members", bin_no + 1),
            });
        }
        let mut us = Vec::with_capacity(bin.len());
        let mut len_sum = 0usize;
        let mut wr_sum = 0.0;
        let mut wr_n = 0usize;
        let mut cov_sum = 0.0;
        let mut cov_n = 0usize;
        for idx in bin {
            let s = by_index.get(idx).ok_or_else(|| Error::EmptyInput {
                context: format!("line {idx} referenced by bin but not scored"),
            })?;
            if let Some(u) = s.uncertainty {
                us.push(u);
            }
            len_sum += s.token_count;
            if let Some(wr) = s.word_rarity {
                wr_sum += wr;
                wr_n += 1;
            }
            if let Some(c) = s.coverage {
                cov_sum += c;
                cov_n += 1;
            }
        }
        us.sort_by(f64::total_cmp);
        let mean_u = us.iter().sum::<f64>() / us.len().max(1) as f64;
        let median_u = if us.is_empty() {
            0.0
        } else if us.len() % 2 == 1 {
            us[us.len() / 2]
        } else {
            (us[us.len() / 2 - 1] + us[us.len() / 2]) / 2.0
        };
        rows.push(BinRow {
            bin: bin_no + 1,
            size: bin.len(),
            mean_uncertainty: mean_u,
            median_uncertainty: median_u,
            mean_length: len_sum as f64 / bin.len() as f64,
            mean_word_rarity: (wr_n > 0).then(|| wr_sum / wr_n as f64),
            mean_coverage: (cov_n > 0).then(|| cov_sum / cov_n as f64),
        });
    }
    Ok(BinReport { rows })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "NA".to_owned(),
    }
}

pub fn write_bin_report(path: impl AsRef<Path>, report: &BinReport) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# bin\tsize\tmean_U\tmedian_U\tmean_len\tmean_WR\tmean_cov")
        .map_err(|e| Error::io(path, e))?;
    for r in &report.rows {
        writeln!(
            w,
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}",
            r.bin,
            r.size,
            r.mean_uncertainty,
            r.median_uncertainty,
            r.mean_length,
            fmt_opt(r.mean_word_rarity),
            fmt_opt(r.mean_coverage),
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Frequency bucket boundaries over the training-vocabulary ranking:
/// ranks 1..=high are High, high+1..=med are Medium, the rest (including
/// words unseen in training) are Low.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BucketBounds {
    pub high: usize,
    pub med: usize,
}

impl Default for BucketBounds {
    fn default() -> Self {
        BucketBounds {
            high: 3000,
            med: 12000,
        }
    }
}

pub const BUCKET_LABELS: [&str; 3] = ["High", "Medium", "Low"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreqBucketRow {
    pub bucket: String,
    pub matched: u64,
    pub hyp_total: u64,
    pub ref_total: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreqBucketReport {
    pub rows: Vec<FreqBucketRow>,
}

fn bucket_of(rank: Option<usize>, bounds: &BucketBounds) -> usize {
    match rank {
        Some(r) if r <= bounds.high => 0,
        Some(r) if r <= bounds.med => 1,
        _ => 2,
    }
}

fn f_measure(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Corpus-aggregated bag-of-words word accuracy per frequency bucket:
/// matched(w) = min(c_hyp(w), c_ref(w)) summed over the corpus, with
/// precision over hypothesis mass and recall over reference mass.
pub fn word_fmeasure_by_freq(
    hyp: &[Sentence],
    reference: &[Sentence],
    train_vocab: &Vocab,
    bounds: &BucketBounds,
) -> Result<FreqBucketReport> {
    if hyp.len() != reference.len() {
        return Err(Error::LineCountMismatch {
            src_lines: hyp.len(),
            tgt_lines: reference.len(),
        });
    }
    let rank_of: HashMap<&str, usize> = train_vocab
        .by_frequency()
        .into_iter()
        .enumerate()
        .map(|(i, tok)| (tok, i + 1))
        .collect();

    let mut hyp_counts: HashMap<&str, u64> = HashMap::new();
    let mut ref_counts: HashMap<&str, u64> = HashMap::new();
    for s in hyp {
        for tok in &s.tokens {
            *hyp_counts.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    for s in reference {
        for tok in &s.tokens {
            *ref_counts.entry(tok.as_str()).or_insert(0) += 1;
        }
    }

    let mut matched = [0u64; 3];
    let mut hyp_total = [0u64; 3];
    let mut ref_total = [0u64; 3];
    let mut all_words: Vec<&str> = hyp_counts.keys().chain(ref_counts.keys()).copied().collect();
    all_words.sort_unstable();
    all_words.dedup();
    for w in all_words {
        let b = bucket_of(rank_of.get(w).copied(), bounds);
        let ch = hyp_counts.get(w).copied().unwrap_or(0);
        let cr = ref_counts.get(w).copied().unwrap_or(0);
        matched[b] += ch.min(cr);
        hyp_total[b] += ch;
        ref_total[b] += cr;
    }

    let rows = BUCKET_LABELS
        .iter()
        .enumerate()
        .map(|(b, label)| {
            let p = if hyp_total[b] > 0 {
                matched[b] as f64 / hyp_total[b] as f64
            } else {
                0.0
            };
            let r = if ref_total[b] > 0 {
                matched[b] as f64 / ref_total[b] as f64
            } else {
                0.0
            };
            FreqBucketRow {
                bucket: label.to_string(),
                matched: matched[b],
                hyp_total: hyp_total[b],
                ref_total: ref_total[b],
                precision: p,
                recall: r,
                f_measure: f_measure(p, r),
            }
        })
        .collect();
    Ok(FreqBucketReport { rows })
}

/// Per-sentence macro-averaged variant: F is computed per line (single
/// bucketed bag per line) and averaged over lines with reference mass in
/// the bucket.
pub fn word_fmeasure_by_freq_macro(
    hyp: &[Sentence],
    reference: &[Sentence],
    train_vocab: &Vocab,
    bounds: &BucketBounds,
) -> Result<FreqBucketReport> {
    if hyp.len() != reference.len() {
        return Err(Error::LineCountMismatch {
            src_lines: hyp.len(),
            tgt_lines: reference.len(),
        });
    }
    let mut f_sums = [0.0f64; 3];
    let mut f_ns = [0usize; 3];
    let mut agg = [(0u64, 0u64, 0u64); 3];
    for (h, r) in hyp.iter().zip(reference) {
        let row = word_fmeasure_by_freq(
            std::slice::from_ref(h),
            std::slice::from_ref(r),
            train_vocab,
            bounds,
        )?;
        for (b, sent_row) in row.rows.iter().enumerate() {
            agg[b].0 += sent_row.matched;
            agg[b].1 += sent_row.hyp_total;
            agg[b].2 += sent_row.ref_total;
            if sent_row.hyp_total + sent_row.ref_total > 0 {
                f_sums[b] += sent_row.f_measure;
                f_ns[b] += 1;
            }
        }
    }
    let rows = BUCKET_LABELS
        .iter()
        .enumerate()
        .map(|(b, label)| {
            let (m, ht, rt) = agg[b];
            let p = if ht > 0 { m as f64 / ht as f64 } else { 0.0 };
            let r = if rt > 0 { m as f64 / rt as f64 } else { 0.0 };
            FreqBucketRow {
                bucket: label.to_string(),
                matched: m,
                hyp_total: ht,
                ref_total: rt,
                precision: p,
                recall: r,
                f_measure: if f_ns[b] > 0 {
                    f_sums[b] / f_ns[b] as f64
                } else {
                    0.0
                },
            }
        })
        .collect();
    Ok(FreqBucketReport { rows })
}

pub fn write_freq_report(path: impl AsRef<Path>, report: &FreqBucketReport) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# bucket\tmatched\thyp_total\tref_total\tprecision\trecall\tf_measure")
        .map_err(|e| Error::io(path, e))?;
    for r in &report.rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            r.bucket, r.matched, r.hyp_total, r.ref_total, r.precision, r.recall, r.f_measure
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
