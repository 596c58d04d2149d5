//! Bilingual dictionary extraction from word alignments, and per-source-word
//! translation entropy.
//!
//! The dictionary maps each source word to a normalized distribution over
//! the target words it was aligned to. The entropy of that distribution is
//! the word-level translation uncertainty; entropies are in nats.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::align::SentenceAlignment;
use crate::corpus::{read_raw_lines, ParallelCorpus};
use crate::error::{Error, Result};

/// One translation candidate for a source word.
#[derive(Debug, Clone, PartialEq)]
pub struct DictEntry {
    pub target: String,
    pub prob: f64,
    pub count: u64,
}

/// Source word -> normalized distribution over aligned target words.
///
/// Entries are sorted by source token, candidates by descending probability
/// (ties by target token), so serialized output is deterministic.
#[derive(Debug, Clone, Default)]
pub struct TranslationTable {
    entries: BTreeMap<String, Vec<DictEntry>>,
}

impl TranslationTable {
    pub fn get(&self, src: &str) -> Option<&[DictEntry]> {
        self.entries.get(src).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[DictEntry])> {
        self.entries.iter().map(|(s, v)| (s.as_str(), v.as_slice()))
    }

    /// Build directly from candidate lists; normalizes probabilities.
    /// Intended for tests and small hand-built tables.
    pub fn from_counts(counts: impl IntoIterator<Item = (String, Vec<(String, u64)>)>) -> Self {
        let mut entries = BTreeMap::new();
        for (src, cands) in counts {
            let total: u64 = cands.iter().map(|(_, c)| c).sum();
            if total == 0 {
                continue;
            }
            let mut list: Vec<DictEntry> = cands
                .into_iter()
                .filter(|(_, c)| *c > 0)
                .map(|(target, count)| DictEntry {
                    prob: count as f64 / total as f64,
                    target,
                    count,
                })
                .collect();
            sort_candidates(&mut list);
            entries.insert(src, list);
        }
        TranslationTable { entries }
    }
}

fn sort_candidates(list: &mut [DictEntry]) {
    list.sort_by(|a, b| {
        b.prob
            .partial_cmp(&a.prob)
            .unwrap()
            .then_with(|| a.target.cmp(&b.target))
    });
}

/// Count aligned (source, target) pairs and normalize per source word.
/// Entries below `min_count` or `min_prob` are pruned, survivors
/// renormalized. Sources with no surviving candidates are dropped.
pub fn build_dictionary(
    corpus: &ParallelCorpus,
    alignments: &[SentenceAlignment],
    min_count: u64,
    min_prob: f64,
) -> Result<TranslationTable> {
    if corpus.len() != alignments.len() {
        return Err(Error::LineCountMismatch {
            src_lines: corpus.len(),
            tgt_lines: alignments.len(),
        });
    }
    let mut counts: HashMap<String, HashMap<String, u64>> = HashMap::new();
    for (idx, ((src, tgt), a)) in corpus.pairs.iter().zip(alignments).enumerate() {
        for &(i, j) in a.links() {
            if i >= src.len() || j >= tgt.len() {
                return Err(Error::AlignmentOutOfRange {
                    line: idx + 1,
                    i,
                    j,
                    src_len: src.len(),
                    tgt_len: tgt.len(),
                });
            }
            *counts
                .entry(src.tokens[i].clone())
                .or_default()
                .entry(tgt.tokens[j].clone())
                .or_insert(0) += 1;
        }
    }

    let mut entries = BTreeMap::new();
    for (src, cands) in counts {
        let total: u64 = cands.values().sum();
        let mut kept: Vec<DictEntry> = cands
            .into_iter()
            .filter(|&(_, c)| c >= min_count.max(1))
            .map(|(target, count)| DictEntry {
                prob: count as f64 / total as f64,
                target,
                count,
            })
            .filter(|e| e.prob >= min_prob)
            .collect();
        if kept.is_empty() {
            continue;
        }
        // sort before summing: the mass accumulates in a fixed order, so
        // renormalized probabilities are bitwise reproducible run to run
        sort_candidates(&mut kept);
        let kept_mass: f64 = kept.iter().map(|e| e.prob).sum();
        for e in &mut kept {
            e.prob /= kept_mass;
        }
        entries.insert(src, kept);
    }
    Ok(TranslationTable { entries })
}

/// H(y|x) = -sum_j p(y_j|x) ln p(y_j|x); `None` when x is not in the table.
pub fn word_entropy(table: &TranslationTable, src: &str) -> Option<f64> {
    table.get(src).map(|cands| entropy_of(cands))
}

fn entropy_of(cands: &[DictEntry]) -> f64 {
    -cands
        .iter()
        .filter(|e| e.prob > 0.0)
        .map(|e| e.prob * e.prob.ln())
        .sum::<f64>()
}

/// Source word -> translation entropy in nats.
#[derive(Debug, Clone, Default)]
pub struct EntropyTable {
    entries: HashMap<String, f64>,
}

impl EntropyTable {
    pub fn get(&self, src: &str) -> Option<f64> {
        self.entries.get(src).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (String, f64)>) -> Self {
        EntropyTable {
            entries: entries.into_iter().collect(),
        }
    }

    /// Entries sorted by source token.
    pub fn sorted(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.entries.iter().map(|(s, &h)| (s.as_str(), h)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }
}

pub fn build_entropy_table(table: &TranslationTable) -> EntropyTable {
    EntropyTable {
        entries: table
            .iter()
            .map(|(src, cands)| (src.to_owned(), entropy_of(cands)))
            .collect(),
    }
}

/// Dictionary TSV: `# key=value ...` header, then `src<TAB>tgt<TAB>prob<TAB>count`.
pub fn write_dictionary(
    path: impl AsRef<Path>,
    table: &TranslationTable,
    header_meta: &[(&str, String)],
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let meta = header_meta
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ");
    writeln!(w, "# dictionary {meta}").map_err(|e| Error::io(path, e))?;
    for (src, cands) in table.iter() {
        for e in cands {
            writeln!(w, "{src}\t{}\t{}\t{}", e.target, e.prob, e.count)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dictionary(path: impl AsRef<Path>) -> Result<TranslationTable> {
    let path = path.as_ref();
    let mut entries: BTreeMap<String, Vec<DictEntry>> = BTreeMap::new();
    for (idx, line) in read_raw_lines(path)?.into_iter().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedRecord {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let prob: f64 = fields[2].parse().map_err(|_| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            message: format!("bad probability '{}'", fields[2]),
        })?;
        let count: u64 = fields[3].parse().map_err(|_| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            message: format!("bad count '{}'", fields[3]),
        })?;
        entries.entry(fields[0].to_owned()).or_default().push(DictEntry {
            target: fields[1].to_owned(),
            prob,
            count,
        });
    }
    Ok(TranslationTable { entries })
}

/// Entropy TSV: `src<TAB>H`, sorted by source token.
pub fn write_entropy_table(path: impl AsRef<Path>, table: &EntropyTable) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (src, h) in table.sorted() {
        writeln!(w, "{src}\t{h}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_entropy_table(path: impl AsRef<Path>) -> Result<EntropyTable> {
    let path = path.as_ref();
    let mut entries = HashMap::new();
    for (idx, line) in read_raw_lines(path)?.into_iter().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (src, h) = line.split_once('\t').ok_or_else(|| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            message: "expected src<TAB>H".into(),
        })?;
        let h: f64 = h.parse().map_err(|_| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            message: format!("bad entropy '{h}'"),
        })?;
        entries.insert(src.to_owned(), h);
    }
    Ok(EntropyTable { entries })
}
