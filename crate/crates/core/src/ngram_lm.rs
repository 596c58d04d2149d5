//! N-gram language model with interpolated Kneser-Ney smoothing (fixed
//! discount), for the source-LM baseline selector and target-side
//! synthetic filtering.
//!
//! Sentences are padded with n-1 `<s>` and one `</s>`. The highest order
//! uses raw counts; lower orders use continuation counts, except n-grams
//! starting with `<s>`, which cannot be preceded and keep raw counts.
//! The order-0 base is uniform over the predictable set (observed types,
//! `</s>`, `<unk>`), so every conditional distribution sums to 1 and every
//! probability is strictly positive.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
pub const UNK: u32 = 2;

const MODEL_VERSION: u32 = 1;

/// Probabilities are floored in log domain; nothing below e^-700.
const MIN_LOG_PROB: f64 = -700.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NGramModel {
    version: u32,
    pub order: usize,
    pub discount: f64,
    /// id-indexed token list; 0=<s>, 1=</s>, 2=<unk>
    tokens: Vec<String>,
    /// per order k (index k-1): smoothed count tables keyed by k-gram
    grams: Vec<HashMap<Vec<u32>, u64>>,
    /// per order k: context -> (total count, distinct continuations)
    contexts: Vec<HashMap<Vec<u32>, (u64, u64)>>,
    /// uniform order-0 probability, 1 / |predictable set|
    base: f64,
    #[serde(skip)]
    ids: HashMap<String, u32>,
}

impl NGramModel {
    fn rebuild_index(&mut self) {
        self.ids = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    fn token_id(&self, tok: &str) -> u32 {
        self.ids.get(tok).copied().unwrap_or(UNK)
    }

    /// All predictable ids: word types, `</s>`, `<unk>` (everything but `<s>`).
    pub fn predictable_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.tokens.len() as u32).filter(|&id| id != BOS)
    }

    /// p(w | h) with h the full (order-1)-token context, recursively
    /// interpolated down to the uniform base.
    fn prob_ids(&self, context: &[u32], w: u32) -> f64 {
        let k = context.len() + 1;
        if k == 0 || self.order == 0 {
            return self.base;
        }
        self.prob_order(k.min(self.order), context, w)
    }

    fn prob_order(&self, k: usize, context: &[u32], w: u32) -> f64 {
        if k == 0 {
            return self.base;
        }
        let h = &context[context.len() - (k - 1)..];
        let lower = |model: &Self| model.prob_order(k - 1, h, w);
        let Some(&(total, distinct)) = self.contexts[k - 1].get(h) else {
            return lower(self);
        };
        if total == 0 {
            return lower(self);
        }
        let mut key = Vec::with_capacity(k);
        key.extend_from_slice(h);
        key.push(w);
        let count = self.grams[k - 1].get(&key).copied().unwrap_or(0) as f64;
        let total = total as f64;
        let discounted = (count - self.discount).max(0.0) / total;
        let backoff_mass = self.discount * distinct as f64 / total;
        discounted + backoff_mass * lower(self)
    }

    /// p(token | history tokens); OOV tokens map to `<unk>`.
    pub fn prob(&self, history: &[&str], token: &str) -> f64 {
        let w = self.token_id(token);
        let ctx = self.context_ids(history);
        self.prob_ids(&ctx, w)
    }

    fn context_ids(&self, history: &[&str]) -> Vec<u32> {
        let n_ctx = self.order.saturating_sub(1);
        let mut ctx = vec![BOS; n_ctx];
        for (slot, tok) in ctx
            .iter_mut()
            .rev()
            .zip(history.iter().rev())
        {
            *slot = self.token_id(tok);
        }
        ctx
    }

    /// Per-token cross-entropy in nats: -(1/(T_x+1)) sum ln p, the sum
    /// running over the sentence's tokens plus `</s>`.
    pub fn cross_entropy(&self, s: &Sentence) -> f64 {
        let n_ctx = self.order.saturating_sub(1);
        let mut seq = vec![BOS; n_ctx];
        seq.extend(s.tokens.iter().map(|t| self.token_id(t)));
        seq.push(EOS);
        let mut total = 0.0;
        for pos in n_ctx..seq.len() {
            let p = self.prob_ids(&seq[pos - n_ctx..pos], seq[pos]);
            total += p.ln().max(MIN_LOG_PROB);
        }
        -total / (s.len() + 1) as f64
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
        let mut model: NGramModel = bincode::deserialize_from(BufReader::new(file))
            .map_err(|e| Error::BadModelFile {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        if model.version != MODEL_VERSION {
            return Err(Error::BadModelFile {
                path: path.to_path_buf(),
                message: format!("unsupported model version {}", model.version),
            });
        }
        model.rebuild_index();
        Ok(model)
    }
}

/// Train an interpolated Kneser-Ney model of the given order.
pub fn train_lm(sentences: &[Sentence], order: usize, discount: f64) -> Result<NGramModel> {
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus {
            context: "train_lm".into(),
        });
    }
    if order == 0 {
        return Err(Error::Usage("order must be >= 1".into()));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(Error::Usage(format!(
            "discount must be in (0,1), got {discount}"
        )));
    }
    Ok(train_lm_inner(sentences, order, discount))
}

fn train_lm_inner(sentences: &[Sentence], order: usize, discount: f64) -> NGramModel {
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut tokens: Vec<String> = vec!["<s>".into(), "</s>".into(), "<unk>".into()];
    ids.insert("<s>".into(), BOS);
    ids.insert("</s>".into(), EOS);
    ids.insert("<unk>".into(), UNK);

    // raw window counts per order; windows ending in <s> are padding
    // artifacts and skipped
    let mut raw: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
    for s in sentences {
        let mut seq = vec![BOS; order - 1];
        for tok in &s.tokens {
            let id = *ids.entry(tok.clone()).or_insert_with(|| {
                tokens.push(tok.clone());
                (tokens.len() - 1) as u32
            });
            seq.push(id);
        }
        seq.push(EOS);
        for k in 1..=order {
            for win in seq.windows(k) {
                if *win.last().unwrap() == BOS {
                    continue;
                }
                *raw[k - 1].entry(win.to_vec()).or_insert(0) += 1;
            }
        }
    }

    // smoothed count tables: raw at the top order, continuation counts
    // below (raw for <s>-initial grams, which have no predecessors)
    let mut grams: Vec<HashMap<Vec<u32>, u64>> = Vec::with_capacity(order);
    for k in 1..=order {
        if k == order {
            grams.push(raw[k - 1].clone());
            continue;
        }
        let mut table: HashMap<Vec<u32>, u64> = HashMap::new();
        for key in raw[k].keys() {
            *table.entry(key[1..].to_vec()).or_insert(0) += 1;
        }
        for (key, &count) in &raw[k - 1] {
            if key[0] == BOS {
                table.insert(key.clone(), count);
            }
        }
        grams.push(table);
    }

    let mut contexts: Vec<HashMap<Vec<u32>, (u64, u64)>> = Vec::with_capacity(order);
    for table in &grams {
        let mut ctx: HashMap<Vec<u32>, (u64, u64)> = HashMap::new();
        for (key, &count) in table {
            let entry = ctx.entry(key[..key.len() - 1].to_vec()).or_insert((0, 0));
            entry.0 += count;
            entry.1 += 1;
        }
        contexts.push(ctx);
    }

    // predictable set = everything except <s>
    let base = 1.0 / (tokens.len() - 1) as f64;

    let mut model = NGramModel {
        version: MODEL_VERSION,
        order,
        discount,
        tokens,
        grams,
        contexts,
        base,
        ids: HashMap::new(),
    };
    model.rebuild_index();
    model
}

/// Score target sentences and return the indices (into `targets`) that
/// survive dropping the floor(f*n) highest-cross-entropy lines. Ties keep
/// the earlier line. Survivor order matches input order.
pub fn filter_by_lm(targets: &[Sentence], lm: &NGramModel, drop_fraction: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&drop_fraction) {
        return Err(Error::Usage(format!(
            "drop fraction must be in [0,1), got {drop_fraction}"
        )));
    }
    let n = targets.len();
    let drop = (drop_fraction * n as f64).floor() as usize;
    let mut ranked: Vec<(usize, f64)> = targets
        .iter()
        .enumerate()
        .map(|(i, s)| (i, lm.cross_entropy(s)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    ranked.truncate(n - drop);
    let mut kept: Vec<usize> = ranked.into_iter().map(|(i, _)| i).collect();
    kept.sort_unstable();
    Ok(kept)
}
