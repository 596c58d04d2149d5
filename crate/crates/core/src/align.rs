//! IBM Model 1 lexical alignment trained by EM, plus Pharaoh-format
//! alignment import/export for interoperability with external aligners.
//!
//! Model 1 is deliberately simple: its only job here is to supply the word
//! alignments the bilingual dictionary is built from. Alignments produced
//! by any external toolkit can be imported instead.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{read_raw_lines, ParallelCorpus, Sentence};
use crate::error::{Error, Result};

/// Source id 0 is reserved for the null token.
const NULL_ID: u32 = 0;

/// Prior probability mass of aligning a target word to the null token;
/// real source positions share the remainder uniformly.
const NULL_WEIGHT: f64 = 0.08;

const MODEL1_VERSION: u32 = 1;

/// Lexical translation probabilities t(target | source) from EM.
///
/// Per-source distributions sum to 1. The null source token participates in
/// training and Viterbi but its links are dropped from emitted alignments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model1Params {
    version: u32,
    /// index 0 is the null token
    src_tokens: Vec<String>,
    tgt_tokens: Vec<String>,
    /// t[src_id] = map target_id -> probability
    table: Vec<BTreeMap<u32, f64>>,
    pub iterations_run: usize,
    /// training-data perplexity after each EM iteration
    pub perplexity_per_iteration: Vec<f64>,
    #[serde(skip)]
    src_ids: HashMap<String, u32>,
    #[serde(skip)]
    tgt_index: HashMap<String, u32>,
}

impl Model1Params {
    fn rebuild_index(&mut self) {
        self.src_ids = self
            .src_tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    fn rebuild_tgt_index(&mut self) {
        self.tgt_index = self
            .tgt_tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    /// t(tgt | src); 0 for unseen pairs.
    pub fn prob(&self, src: &str, tgt: &str) -> f64 {
        let Some(&sid) = self.src_ids.get(src) else {
            return 0.0;
        };
        let Some(tid) = self.tgt_id(tgt) else {
            return 0.0;
        };
        self.table[sid as usize].get(&tid).copied().unwrap_or(0.0)
    }

    fn tgt_id(&self, tgt: &str) -> Option<u32> {
        // linear probe avoided: tgt ids are positional in tgt_tokens
        self.tgt_index.get(tgt).copied()
    }

    /// Iterate (source token, target token, probability) rows in
    /// deterministic order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.table.iter().enumerate().flat_map(move |(sid, dist)| {
            dist.iter().map(move |(&tid, &p)| {
                (
                    self.src_tokens[sid].as_str(),
                    self.tgt_tokens[tid as usize].as_str(),
                    p,
                )
            })
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        bincode::serialize_into(BufWriter::new(file), self).map_err(|e| Error::BadModelFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut params: Model1Params =
            bincode::deserialize_from(std::io::BufReader::new(file)).map_err(|e| {
                Error::BadModelFile {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                }
            })?;
        if params.version != MODEL1_VERSION {
            return Err(Error::BadModelFile {
                path: path.to_path_buf(),
                message: format!("unsupported model version {}", params.version),
            });
        }
        params.rebuild_index();
        params.rebuild_tgt_index();
        Ok(params)
    }
}

/// Word alignment for one sentence pair: links (source pos, target pos),
/// sorted, no duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SentenceAlignment {
    links: Vec<(usize, usize)>,
}

impl SentenceAlignment {
    pub fn new(mut links: Vec<(usize, usize)>) -> Self {
        links.sort_unstable();
        links.dedup();
        SentenceAlignment { links }
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }
}

/// Train IBM Model 1 by EM. Deterministic: fixed iteration and summation
/// order, so two runs produce bit-identical parameters.
pub fn train_ibm1(corpus: &ParallelCorpus, iterations: usize) -> Result<Model1Params> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus {
            context: "train_ibm1".into(),
        });
    }
    if iterations == 0 {
        return Err(Error::Usage("iterations must be >= 1".into()));
    }

    // intern vocabularies; src id 0 = null
    let mut src_ids: HashMap<String, u32> = HashMap::new();
    let mut src_tokens: Vec<String> = vec!["<null>".to_owned()];
    src_ids.insert("<null>".to_owned(), NULL_ID);
    let mut tgt_ids: HashMap<String, u32> = HashMap::new();
    let mut tgt_tokens: Vec<String> = Vec::new();

    let intern_src = |tok: &str, ids: &mut HashMap<String, u32>, toks: &mut Vec<String>| {
        *ids.entry(tok.to_owned()).or_insert_with(|| {
            toks.push(tok.to_owned());
            (toks.len() - 1) as u32
        })
    };

    let mut pairs_ids: Vec<(Vec<u32>, Vec<u32>)> = Vec::with_capacity(corpus.len());
    for (src, tgt) in &corpus.pairs {
        let s: Vec<u32> = src
            .tokens
            .iter()
            .map(|t| intern_src(t, &mut src_ids, &mut src_tokens))
            .collect();
        let t: Vec<u32> = tgt
            .tokens
            .iter()
            .map(|tok| {
                *tgt_ids.entry(tok.clone()).or_insert_with(|| {
                    tgt_tokens.push(tok.clone());
                    (tgt_tokens.len() - 1) as u32
                })
            })
            .collect();
        pairs_ids.push((s, t));
    }

    // init: uniform over targets co-occurring with each source (incl. null)
    let mut table: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); src_tokens.len()];
    for (s, t) in &pairs_ids {
        for &tid in t {
            table[NULL_ID as usize].insert(tid, 0.0);
            for &sid in s {
                table[sid as usize].insert(tid, 0.0);
            }
        }
    }
    for dist in &mut table {
        let k = dist.len() as f64;
        for p in dist.values_mut() {
            *p = 1.0 / k;
        }
    }

    let total_tgt_tokens: usize = pairs_ids.iter().map(|(_, t)| t.len()).sum();
    let mut perplexities = Vec::with_capacity(iterations);

    for _ in 0..iterations {
        let mut counts: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); src_tokens.len()];
        let mut log_lik = 0.0f64;

        for (s, t) in &pairs_ids {
            let src_share = if s.is_empty() {
                0.0
            } else {
                (1.0 - NULL_WEIGHT) / s.len() as f64
            };
            for &tid in t {
                let w_null =
                    NULL_WEIGHT * table[NULL_ID as usize].get(&tid).copied().unwrap_or(0.0);
                let mut denom = w_null;
                for &sid in s {
                    denom += src_share * table[sid as usize].get(&tid).copied().unwrap_or(0.0);
                }
                if denom <= 0.0 {
                    continue;
                }
                log_lik += denom.ln();
                *counts[NULL_ID as usize].entry(tid).or_insert(0.0) += w_null / denom;
                for &sid in s {
                    let w = src_share * table[sid as usize].get(&tid).copied().unwrap_or(0.0);
                    *counts[sid as usize].entry(tid).or_insert(0.0) += w / denom;
                }
            }
        }

        for (sid, dist) in counts.iter().enumerate() {
            let total: f64 = dist.values().sum();
            if total > 0.0 {
                let new_dist: BTreeMap<u32, f64> =
                    dist.iter().map(|(&tid, &c)| (tid, c / total)).collect();
                table[sid] = new_dist;
            }
        }

        perplexities.push((-log_lik / total_tgt_tokens.max(1) as f64).exp());
    }

    let tgt_index = tgt_ids;
    Ok(Model1Params {
        version: MODEL1_VERSION,
        src_tokens,
        tgt_tokens,
        table,
        iterations_run: iterations,
        perplexity_per_iteration: perplexities,
        src_ids,
        tgt_index,
    })
}

/// Align each target position to the source position maximizing the
/// alignment posterior, competing against the null token under its prior
/// weight. Null links are dropped. Ties between source positions go to
/// the smallest index.
pub fn viterbi_align(params: &Model1Params, src: &Sentence, tgt: &Sentence) -> SentenceAlignment {
    let mut links = Vec::new();
    let src_share = if src.is_empty() {
        0.0
    } else {
        (1.0 - NULL_WEIGHT) / src.len() as f64
    };
    for (j, f) in tgt.tokens.iter().enumerate() {
        let null_score = NULL_WEIGHT * params.prob("<null>", f);
        let mut best_i = usize::MAX;
        let mut best_p = 0.0;
        for (i, e) in src.tokens.iter().enumerate() {
            let p = src_share * params.prob(e, f);
            if p > best_p {
                best_p = p;
                best_i = i;
            }
        }
        if best_p > 0.0 && best_p >= null_score {
            links.push((best_i, j));
        }
    }
    SentenceAlignment::new(links)
}

/// Parse Pharaoh-format alignments: space-separated `i-j` pairs, one line
/// per sentence pair, blank line = empty alignment.
pub fn import_pharaoh(path: impl AsRef<Path>) -> Result<Vec<SentenceAlignment>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (idx, line) in read_raw_lines(path)?.into_iter().enumerate() {
        let mut links = Vec::new();
        for tok in line.split_ascii_whitespace() {
            let parsed = tok.split_once('-').and_then(|(i, j)| {
                Some((i.parse::<usize>().ok()?, j.parse::<usize>().ok()?))
            });
            match parsed {
                Some(link) => links.push(link),
                None => {
                    return Err(Error::MalformedAlignment {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        token: tok.to_owned(),
                    })
                }
            }
        }
        out.push(SentenceAlignment::new(links));
    }
    Ok(out)
}

/// Write alignments in Pharaoh format, links in canonical (i,j) order.
pub fn export_pharaoh<'a>(
    path: impl AsRef<Path>,
    alignments: impl IntoIterator<Item = &'a SentenceAlignment>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for a in alignments {
        let line = a
            .links()
            .iter()
            .map(|(i, j)| format!("{i}-{j}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Check every link index against the corpus sentence lengths.
pub fn validate_alignments(
    corpus: &ParallelCorpus,
    alignments: &[SentenceAlignment],
) -> Result<()> {
    if corpus.len() != alignments.len() {
        return Err(Error::LineCountMismatch {
            src_lines: corpus.len(),
            tgt_lines: alignments.len(),
        });
    }
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
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;

    fn corpus_of(pairs: &[(&str, &str)]) -> ParallelCorpus {
        ParallelCorpus {
            pairs: pairs
                .iter()
                .enumerate()
                .map(|(i, (s, t))| (Sentence::from_line(i, s), Sentence::from_line(i, t)))
                .collect(),
        }
    }

    #[test]
    fn single_candidate_converges_to_one() {
        let pairs: Vec<(&str, &str)> = std::iter::repeat(("a", "x")).take(10).collect();
        let params = train_ibm1(&corpus_of(&pairs), 5).unwrap();
        assert!((params.prob("a", "x") - 1.0).abs() < 1e-9);
    }

    #[test]
    fn toy_corpus_disambiguates() {
        // "a b"/"x y" x50 plus "a"/"x" x50 pins t(x|a) high
        let mut pairs = vec![("a b", "x y"); 50];
        pairs.extend(vec![("a", "x"); 50]);
        let params = train_ibm1(&corpus_of(&pairs), 5).unwrap();
        assert!(params.prob("a", "x") > 0.9, "t(x|a) = {}", params.prob("a", "x"));
    }

    #[test]
    fn perplexity_non_increasing() {
        let mut pairs = vec![("a b", "x y"); 20];
        pairs.extend(vec![("a c", "x z"); 20]);
        pairs.extend(vec![("b", "y"); 10]);
        let params = train_ibm1(&corpus_of(&pairs), 8).unwrap();
        let pp = &params.perplexity_per_iteration;
        for w in pp.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "perplexity increased: {pp:?}");
        }
    }

    #[test]
    fn distributions_normalized() {
        let pairs = vec![("a b c", "x y"), ("b c", "y z"), ("a", "x")];
        let params = train_ibm1(&corpus_of(&pairs), 5).unwrap();
        for sid in 0..params.src_tokens.len() {
            let total: f64 = params.table[sid].values().sum();
            assert!((total - 1.0).abs() < 1e-9, "source {sid} sums to {total}");
        }
    }

    #[test]
    fn training_deterministic() {
        let pairs = vec![("a b", "x y"), ("b c", "y z"), ("a c", "x z")];
        let p1 = train_ibm1(&corpus_of(&pairs), 4).unwrap();
        let p2 = train_ibm1(&corpus_of(&pairs), 4).unwrap();
        for ((s1, t1, v1), (s2, t2, v2)) in p1.iter().zip(p2.iter()) {
            assert_eq!((s1, t1), (s2, t2));
            assert_eq!(v1.to_bits(), v2.to_bits());
        }
    }

    #[test]
    fn empty_corpus_errors() {
        let err = train_ibm1(&ParallelCorpus { pairs: vec![] }, 5).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus { .. }));
    }

    #[test]
    fn viterbi_simple() {
        let pairs = vec![("a", "x"); 10];
        let params = train_ibm1(&corpus_of(&pairs), 5).unwrap();
        let a = viterbi_align(
            &params,
            &Sentence::from_line(0, "a"),
            &Sentence::from_line(0, "x"),
        );
        assert_eq!(a.links(), &[(0, 0)]);
    }

    #[test]
    fn viterbi_argmax() {
        // heavily skew towards t(x|a) over t(x|b)
        let mut pairs = vec![("a", "x"); 90];
        pairs.extend(vec![("b", "x"); 5]);
        pairs.extend(vec![("b", "y"); 50]);
        let params = train_ibm1(&corpus_of(&pairs), 5).unwrap();
        assert!(params.prob("a", "x") > params.prob("b", "x"));
        let a = viterbi_align(
            &params,
            &Sentence::from_line(0, "a b"),
            &Sentence::from_line(0, "x"),
        );
        assert_eq!(a.links(), &[(0, 0)]);
    }

    #[test]
    fn viterbi_oov_unlinked() {
        let pairs = vec![("a", "x"); 5];
        let params = train_ibm1(&corpus_of(&pairs), 3).unwrap();
        let a = viterbi_align(
            &params,
            &Sentence::from_line(0, "q"),
            &Sentence::from_line(0, "zz"),
        );
        assert!(a.is_empty());
    }

    #[test]
    fn viterbi_indices_in_bounds() {
        let pairs = vec![("a b c", "x y"), ("b a", "y x"), ("c", "z")];
        let params = train_ibm1(&corpus_of(&pairs), 3).unwrap();
        for (src, tgt) in &corpus_of(&pairs).pairs {
            let a = viterbi_align(&params, src, tgt);
            for &(i, j) in a.links() {
                assert!(i < src.len() && j < tgt.len());
            }
        }
    }

    #[test]
    fn pharaoh_parse() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        use std::io::Write as _;
        f.write_all(b"0-0 1-2\n\n2-1\n").unwrap();
        let als = import_pharaoh(f.path()).unwrap();
        assert_eq!(als.len(), 3);
        assert_eq!(als[0].links(), &[(0, 0), (1, 2)]);
        assert!(als[1].is_empty());
        assert_eq!(als[2].links(), &[(2, 1)]);
    }

    #[test]
    fn pharaoh_malformed() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        use std::io::Write as _;
        f.write_all(b"0-0\n1_2\n").unwrap();
        let err = import_pharaoh(f.path()).unwrap_err();
        match err {
            Error::MalformedAlignment { line, token, .. } => {
                assert_eq!(line, 2);
                assert_eq!(token, "1_2");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn pharaoh_round_trip() {
        let als = vec![
            SentenceAlignment::new(vec![(1, 2), (0, 0)]),
            SentenceAlignment::new(vec![]),
            SentenceAlignment::new(vec![(3, 3)]),
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        export_pharaoh(f.path(), &als).unwrap();
        let back = import_pharaoh(f.path()).unwrap();
        assert_eq!(back, als);
    }

    #[test]
    fn validation_catches_out_of_range() {
        let corpus = corpus_of(&[("a b", "x")]);
        let als = vec![SentenceAlignment::new(vec![(0, 1)])];
        let err = validate_alignments(&corpus, &als).unwrap_err();
        assert!(matches!(err, Error::AlignmentOutOfRange { .. }));
    }

    #[test]
    fn params_round_trip() {
        let pairs = vec![("a b", "x y"), ("a", "x")];
        let params = train_ibm1(&corpus_of(&pairs), 3).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        params.save(f.path()).unwrap();
        let back = Model1Params::load(f.path()).unwrap();
        assert_eq!(back.prob("a", "x").to_bits(), params.prob("a", "x").to_bits());
        assert_eq!(back.iterations_run, 3);
    }
}
