//! Streaming text I/O, vocabulary construction, and unigram statistics.
//!
//! Corpora are plain UTF-8 text, one sentence per line, tokens separated by
//! ASCII spaces. Tokenization (BPE or otherwise) is the caller's business;
//! tokens are treated as atoms. Empty lines are kept so line indices stay
//! aligned across files; downstream scoring flags them instead.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One line of a corpus, split into tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    /// 0-based ordinal in the source file.
    pub line_index: usize,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(line_index: usize, tokens: Vec<String>) -> Self {
        Sentence { line_index, tokens }
    }

    pub fn from_line(line_index: usize, line: &str) -> Self {
        let tokens = line.split_ascii_whitespace().map(str::to_owned).collect();
        Sentence { line_index, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Iterator over the sentences of a monolingual corpus file.
///
/// One pass, constant memory in the number of lines. Invalid UTF-8 is
/// reported with the offending line number.
pub struct MonoReader {
    path: PathBuf,
    reader: BufReader<File>,
    next_index: usize,
    buf: Vec<u8>,
}

impl MonoReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(MonoReader {
            path,
            reader: BufReader::new(file),
            next_index: 0,
            buf: Vec::new(),
        })
    }
}

impl Iterator for MonoReader {
    type Item = Result<Sentence>;

    fn next(&mut self) -> Option<Self::Item> {
        self.buf.clear();
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => None,
            Ok(_) => {
                if self.buf.last() == Some(&b'\n') {
                    self.buf.pop();
                    if self.buf.last() == Some(&b'\r') {
                        self.buf.pop();
                    }
                }
                let index = self.next_index;
                self.next_index += 1;
                match std::str::from_utf8(&self.buf) {
                    Ok(line) => Some(Ok(Sentence::from_line(index, line))),
                    Err(_) => Some(Err(Error::InvalidUtf8 {
                        path: self.path.clone(),
                        line: index + 1,
                    })),
                }
            }
            Err(e) => Some(Err(Error::io(&self.path, e))),
        }
    }
}

/// Read a whole monolingual corpus into memory. For the large mono side
/// prefer [`MonoReader`] and stream.
pub fn read_mono(path: impl AsRef<Path>) -> Result<Vec<Sentence>> {
    MonoReader::open(path)?.collect()
}

/// A loaded parallel corpus of (source, target) sentence pairs.
#[derive(Debug, Clone)]
pub struct ParallelCorpus {
    pub pairs: Vec<(Sentence, Sentence)>,
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Read from two line-aligned files. Counts must match exactly.
    pub fn read(src: impl AsRef<Path>, tgt: impl AsRef<Path>) -> Result<Self> {
        let src_sents = read_mono(src)?;
        let tgt_sents = read_mono(tgt)?;
        if src_sents.len() != tgt_sents.len() {
            return Err(Error::LineCountMismatch {
                src_lines: src_sents.len(),
                tgt_lines: tgt_sents.len(),
            });
        }
        Ok(ParallelCorpus {
            pairs: src_sents.into_iter().zip(tgt_sents).collect(),
        })
    }

    /// Read from a single TSV file with `src<TAB>tgt` per line.
    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut pairs = Vec::new();
        for (line_index, line) in read_raw_lines(path)?.into_iter().enumerate() {
            let (src, tgt) = line.split_once('\t').unwrap_or((line.as_str(), ""));
            pairs.push((
                Sentence::from_line(line_index, src),
                Sentence::from_line(line_index, tgt),
            ));
        }
        Ok(ParallelCorpus { pairs })
    }
}

/// Read raw lines without tokenizing, validating UTF-8 per line.
pub fn read_raw_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut lines = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
            if buf.last() == Some(&b'\r') {
                buf.pop();
            }
        }
        let line = std::str::from_utf8(&buf).map_err(|_| Error::InvalidUtf8 {
            path: path.to_path_buf(),
            line: lines.len() + 1,
        })?;
        lines.push(line.to_owned());
    }
    Ok(lines)
}

/// Write sentences one per line, single-space delimited.
pub fn write_corpus<'a>(
    path: impl AsRef<Path>,
    sentences: impl IntoIterator<Item = &'a Sentence>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in sentences {
        writeln!(w, "{}", s.tokens.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Token vocabulary with dense ids (first-occurrence order) and raw counts.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
    counts: Vec<u64>,
    total_tokens: u64,
}

impl Vocab {
    pub fn new() -> Self {
        Vocab::default()
    }

    pub fn add(&mut self, token: &str) {
        self.add_count(token, 1);
    }

    pub fn add_count(&mut self, token: &str, n: u64) {
        match self.ids.get(token) {
            Some(&id) => self.counts[id as usize] += n,
            None => {
                let id = self.tokens.len() as u32;
                self.ids.insert(token.to_owned(), id);
                self.tokens.push(token.to_owned());
                self.counts.push(n);
            }
        }
        self.total_tokens += n;
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn count(&self, token: &str) -> u64 {
        self.id(token).map_or(0, |id| self.counts[id as usize])
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Tokens in first-occurrence order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.tokens
            .iter()
            .zip(&self.counts)
            .map(|(t, &c)| (t.as_str(), c))
    }

    /// count(token) / total_tokens. Unseen tokens get probability 0; the
    /// rarity OOV floor is applied by the caller.
    pub fn unigram_prob(&self, token: &str) -> Result<f64> {
        if self.total_tokens == 0 {
            return Err(Error::EmptyInput {
                context: "unigram_prob on empty vocab".into(),
            });
        }
        Ok(self.count(token) as f64 / self.total_tokens as f64)
    }

    /// Token types sorted by descending count, ties by first occurrence.
    /// Rank 1 is the most frequent type.
    pub fn by_frequency(&self) -> Vec<&str> {
        let mut order: Vec<usize> = (0..self.tokens.len()).collect();
        order.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        order.into_iter().map(|i| self.tokens[i].as_str()).collect()
    }
}

/// Count every token occurrence in a stream of sentences.
pub fn build_vocab<I>(sentences: I) -> Result<Vocab>
where
    I: IntoIterator<Item = Result<Sentence>>,
{
    let mut vocab = Vocab::new();
    for sent in sentences {
        let sent = sent?;
        for tok in &sent.tokens {
            vocab.add(tok);
        }
    }
    Ok(vocab)
}

/// Build a vocabulary from already-loaded sentences.
pub fn build_vocab_from(sentences: &[Sentence]) -> Vocab {
    let mut vocab = Vocab::new();
    for sent in sentences {
        for tok in &sent.tokens {
            vocab.add(tok);
        }
    }
    vocab
}

/// Vocab TSV: `token<TAB>count`, first-occurrence order.
pub fn write_vocab(path: impl AsRef<Path>, vocab: &Vocab) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (tok, count) in vocab.iter() {
        writeln!(w, "{tok}\t{count}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_vocab(path: impl AsRef<Path>) -> Result<Vocab> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut vocab = Vocab::new();
    let mut content = String::new();
    BufReader::new(file)
        .read_to_string(&mut content)
        .map_err(|e| Error::io(path, e))?;
    for (idx, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (tok, count) = line.split_once('\t').ok_or_else(|| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            message: "expected token<TAB>count".into(),
        })?;
        let count: u64 = count.parse().map_err(|_| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            message: format!("bad count '{count}'"),
        })?;
        vocab.add_count(tok, count);
    }
    Ok(vocab)
}
