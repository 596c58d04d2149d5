//! Synthetic parallel data: pairing selected monolingual sentences with
//! externally produced teacher translations, filtering the pairs, and
//! combining synthetic with authentic data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{read_raw_lines, ParallelCorpus, Sentence};
use crate::error::{Error, Result};

/// A monolingual sentence paired with its teacher translation.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub source: Sentence,
    pub target: Sentence,
    /// strategy name plus run id of the sampling pass that selected the source
    pub provenance: String,
}

/// Why a pair was dropped by [`filter_pairs`].
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct DropReport {
    pub input_pairs: usize,
    pub kept: usize,
    pub dropped_source_too_long: usize,
    pub dropped_target_too_long: usize,
    pub dropped_ratio: usize,
    pub dropped_empty_target: usize,
}

/// Filtering thresholds for synthetic pairs.
#[derive(Debug, Clone, Copy)]
pub struct PairFilter {
    pub max_len: usize,
    pub max_ratio: f64,
    /// symmetric ratio test max/min by default; one-sided uses src/tgt only
    pub one_sided_ratio: bool,
}

impl Default for PairFilter {
    fn default() -> Self {
        PairFilter {
            max_len: 250,
            max_ratio: 1.5,
            one_sided_ratio: false,
        }
    }
}

/// Pair selected monolingual sentences 1:1 with a translations file.
/// Counts must match exactly.
pub fn pair_translations(
    selected: &[Sentence],
    translations: &[Sentence],
    provenance: &str,
) -> Result<Vec<SyntheticPair>> {
    if selected.len() != translations.len() {
        return Err(Error::LineCountMismatch {
            src_lines: selected.len(),
            tgt_lines: translations.len(),
        });
    }
    Ok(selected
        .iter()
        .zip(translations)
        .map(|(s, t)| SyntheticPair {
            source: s.clone(),
            target: t.clone(),
            provenance: provenance.to_owned(),
        })
        .collect())
}

/// Drop pairs with an over-long side, an extreme length ratio, or an empty
/// target. Idempotent. Returns survivors (input order) plus a drop report.
pub fn filter_pairs(
    pairs: &[SyntheticPair],
    filter: &PairFilter,
) -> (Vec<SyntheticPair>, DropReport) {
    let mut report = DropReport {
        input_pairs: pairs.len(),
        ..Default::default()
    };
    let mut kept = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (src_len, tgt_len) = (p.source.len(), p.target.len());
        if tgt_len == 0 {
            report.dropped_empty_target += 1;
            continue;
        }
        if src_len > filter.max_len {
            report.dropped_source_too_long += 1;
            continue;
        }
        if tgt_len > filter.max_len {
            report.dropped_target_too_long += 1;
            continue;
        }
        let ratio = if filter.one_sided_ratio {
            src_len as f64 / tgt_len as f64
        } else {
            src_len.max(tgt_len) as f64 / src_len.min(tgt_len).max(1) as f64
        };
        if ratio > filter.max_ratio {
            report.dropped_ratio += 1;
            continue;
        }
        kept.push(p.clone());
    }
    report.kept = kept.len();
    (kept, report)
}

/// Concatenate bitext then synthetic pairs into src/tgt files, with a
/// sidecar of per-line origin tags (`B` or `S`). Returns (bitext, synthetic)
/// pair counts.
pub fn combine_corpora(
    bitext: &ParallelCorpus,
    synthetic: &[SyntheticPair],
    out_src: impl AsRef<Path>,
    out_tgt: impl AsRef<Path>,
    out_tags: impl AsRef<Path>,
) -> Result<(usize, usize)> {
    let out_src = out_src.as_ref();
    let out_tgt = out_tgt.as_ref();
    let out_tags = out_tags.as_ref();
    let mut src_w =
        BufWriter::new(File::create(out_src).map_err(|e| Error::io(out_src, e))?);
    let mut tgt_w =
        BufWriter::new(File::create(out_tgt).map_err(|e| Error::io(out_tgt, e))?);
    let mut tag_w =
        BufWriter::new(File::create(out_tags).map_err(|e| Error::io(out_tags, e))?);

    for (s, t) in &bitext.pairs {
        writeln!(src_w, "{}", s.tokens.join(" ")).map_err(|e| Error::io(out_src, e))?;
        writeln!(tgt_w, "{}", t.tokens.join(" ")).map_err(|e| Error::io(out_tgt, e))?;
        writeln!(tag_w, "B").map_err(|e| Error::io(out_tags, e))?;
    }
    for p in synthetic {
        writeln!(src_w, "{}", p.source.tokens.join(" ")).map_err(|e| Error::io(out_src, e))?;
        writeln!(tgt_w, "{}", p.target.tokens.join(" ")).map_err(|e| Error::io(out_tgt, e))?;
        writeln!(tag_w, "S").map_err(|e| Error::io(out_tags, e))?;
    }
    src_w.flush().map_err(|e| Error::io(out_src, e))?;
    tgt_w.flush().map_err(|e| Error::io(out_tgt, e))?;
    tag_w.flush().map_err(|e| Error::io(out_tags, e))?;
    Ok((bitext.len(), synthetic.len()))
}

/// Pairs TSV: `src<TAB>tgt<TAB>provenance<TAB>origin_line`.
pub fn write_pairs(path: impl AsRef<Path>, pairs: &[SyntheticPair]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in pairs {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            p.source.tokens.join(" "),
            p.target.tokens.join(" "),
            p.provenance,
            p.source.line_index
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<SyntheticPair>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (idx, line) in read_raw_lines(path)?.into_iter().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 {
            return Err(Error::MalformedRecord {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "expected at least src<TAB>tgt".into(),
            });
        }
        let origin_line = if fields.len() > 3 {
            fields[3].parse().unwrap_or(idx)
        } else {
            idx
        };
        out.push(SyntheticPair {
            source: Sentence::from_line(origin_line, fields[0]),
            target: Sentence::from_line(origin_line, fields[1]),
            provenance: fields.get(2).unwrap_or(&"").to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(src_len: usize, tgt_len: usize) -> SyntheticPair {
        let src = vec!["w"; src_len].join(" ");
        let tgt = vec!["v"; tgt_len].join(" ");
        SyntheticPair {
            source: Sentence::from_line(0, &src),
            target: Sentence::from_line(0, &tgt),
            provenance: "test".into(),
        }
    }

    #[test]
    fn pairing_matches_counts() {
        let selected: Vec<Sentence> = (0..3).map(|i| Sentence::from_line(i, "a b")).collect();
        let translations: Vec<Sentence> = (0..3).map(|i| Sentence::from_line(i, "x")).collect();
        let pairs = pair_translations(&selected, &translations, "uncsamp:run1").unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].provenance, "uncsamp:run1");
    }

    #[test]
    fn pairing_mismatch_fatal() {
        let selected: Vec<Sentence> = (0..3).map(|i| Sentence::from_line(i, "a")).collect();
        let translations: Vec<Sentence> = (0..2).map(|i| Sentence::from_line(i, "x")).collect();
        let err = pair_translations(&selected, &translations, "t").unwrap_err();
        assert!(matches!(
            err,
            Error::LineCountMismatch {
                src_lines: 3,
                tgt_lines: 2
            }
        ));
    }

    #[test]
    fn filter_keeps_normal_pairs() {
        let (kept, report) = filter_pairs(&[pair(10, 10)], &PairFilter::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(report.kept, 1);
    }

    #[test]
    fn filter_drops_long_source() {
        let (kept, report) = filter_pairs(&[pair(251, 10)], &PairFilter::default());
        assert!(kept.is_empty());
        assert_eq!(report.dropped_source_too_long, 1);
    }

    #[test]
    fn filter_drops_extreme_ratio() {
        let (kept, report) = filter_pairs(&[pair(10, 16)], &PairFilter::default());
        assert!(kept.is_empty());
        assert_eq!(report.dropped_ratio, 1);
        // 10/15 = 1.5 exactly is allowed
        let (kept, _) = filter_pairs(&[pair(10, 15)], &PairFilter::default());
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn ratio_is_symmetric() {
        let (a, _) = filter_pairs(&[pair(10, 16)], &PairFilter::default());
        let (b, _) = filter_pairs(&[pair(16, 10)], &PairFilter::default());
        assert_eq!(a.len(), b.len());
    }

    #[test]
    fn one_sided_ratio_flag() {
        let f = PairFilter {
            one_sided_ratio: true,
            ..Default::default()
        };
        // src/tgt = 10/16 = 0.625 passes one-sided; 16/10 = 1.6 fails
        let (a, _) = filter_pairs(&[pair(10, 16)], &f);
        assert_eq!(a.len(), 1);
        let (b, _) = filter_pairs(&[pair(16, 10)], &f);
        assert!(b.is_empty());
    }

    #[test]
    fn empty_target_always_dropped() {
        let (kept, report) = filter_pairs(&[pair(5, 0)], &PairFilter::default());
        assert!(kept.is_empty());
        assert_eq!(report.dropped_empty_target, 1);
    }

    #[test]
    fn filter_idempotent() {
        let pairs: Vec<SyntheticPair> = vec![pair(10, 10), pair(300, 10), pair(10, 16), pair(3, 3)];
        let (once, _) = filter_pairs(&pairs, &PairFilter::default());
        let (twice, report) = filter_pairs(&once, &PairFilter::default());
        assert_eq!(once, twice);
        assert_eq!(report.kept, report.input_pairs);
    }

    #[test]
    fn combine_tags_and_counts() {
        let bitext = ParallelCorpus {
            pairs: vec![
                (Sentence::from_line(0, "a"), Sentence::from_line(0, "x")),
                (Sentence::from_line(1, "b"), Sentence::from_line(1, "y")),
            ],
        };
        let synthetic = vec![pair(2, 2), pair(3, 3), pair(1, 1)];
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.txt");
        let tgt = dir.path().join("tgt.txt");
        let tags = dir.path().join("tags.txt");
        let (nb, ns) = combine_corpora(&bitext, &synthetic, &src, &tgt, &tags).unwrap();
        assert_eq!((nb, ns), (2, 3));
        let tag_lines = std::fs::read_to_string(&tags).unwrap();
        assert_eq!(tag_lines, "B\nB\nS\nS\nS\n");
        let src_lines = std::fs::read_to_string(&src).unwrap();
        assert_eq!(src_lines.lines().count(), 5);
    }

    #[test]
    fn combine_empty_synthetic_is_identity() {
        let bitext = ParallelCorpus {
            pairs: vec![(Sentence::from_line(0, "a b"), Sentence::from_line(0, "x"))],
        };
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.txt");
        let tgt = dir.path().join("tgt.txt");
        let tags = dir.path().join("tags.txt");
        combine_corpora(&bitext, &[], &src, &tgt, &tags).unwrap();
        assert_eq!(std::fs::read_to_string(&src).unwrap(), "a b\n");
        assert_eq!(std::fs::read_to_string(&tags).unwrap(), "B\n");
    }

    #[test]
    fn pairs_tsv_round_trip() {
        let pairs = vec![pair(2, 3), pair(1, 1)];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_pairs(f.path(), &pairs).unwrap();
        let back = read_pairs(f.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].source.tokens, pairs[0].source.tokens);
        assert_eq!(back[0].provenance, "test");
    }
}
