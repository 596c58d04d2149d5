//! Command-line interface and pipeline orchestration.
//!
//! Every pipeline stage is a standalone subcommand working through files;
//! `run` chains them from a flat key-value JSON config and writes a
//! manifest of input/output hashes for reproducibility.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::align::{
    export_pharaoh, import_pharaoh, train_ibm1, validate_alignments, viterbi_align, Model1Params,
};
use crate::bidict::{
    build_dictionary, build_entropy_table, read_entropy_table, write_dictionary,
    write_entropy_table,
};
use crate::corpus::{
    build_vocab_from, read_mono, read_vocab, write_corpus, write_vocab,
    ParallelCorpus, Sentence,
};
use crate::error::{Error, Result};
use crate::ngram_lm::{filter_by_lm, train_lm, NGramModel};
use crate::report::{
    bin_property_report, word_fmeasure_by_freq, word_fmeasure_by_freq_macro, write_bin_report,
    write_freq_report, BucketBounds,
};
use crate::sampling::{compute_umax, rank_bins, strategy_by_name, SampleResult, SamplerConfig};
use crate::synth::{
    combine_corpora, filter_pairs, pair_translations, read_pairs, write_pairs, PairFilter,
};
use crate::uncertainty::{
    read_scores, score_sentences, summarize, write_scores, OovPolicy, ScoreOptions,
};

#[derive(Parser)]
#[command(
    name = "dataselect",
    version,
    about = "Uncertainty-based monolingual data selection for NMT self-training"
)]
pub struct Cli {
    /// Worker threads (0 = library default). Results are identical for any
    /// thread count.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train the lexical aligner on parallel data
    AlignTrain {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long, default_value_t = 5)]
        iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce Pharaoh alignments for a parallel corpus
    Align {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the bilingual dictionary (and entropy table) from alignments
    DictBuild {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        /// Pharaoh alignment file, one line per pair
        #[arg(long)]
        align: PathBuf,
        #[arg(long, default_value_t = 0)]
        min_count: u64,
        #[arg(long, default_value_t = 0.0)]
        min_prob: f64,
        #[arg(long)]
        out: PathBuf,
        /// also write the per-source-word entropy TSV
        #[arg(long)]
        entropy_out: Option<PathBuf>,
    },
    /// Score monolingual sentences by translation uncertainty
    ScoreUncertainty {
        #[arg(long)]
        mono: PathBuf,
        #[arg(long)]
        entropy: PathBuf,
        /// add the word-rarity column (needs --vocab)
        #[arg(long)]
        rarity: bool,
        /// vocab TSV (token<TAB>count) from the bitext source side
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// add the coverage column (needs --align)
        #[arg(long)]
        coverage: bool,
        #[arg(long)]
        align: Option<PathBuf>,
        /// OOV policy: exclude | constant
        #[arg(long, default_value = "exclude")]
        oov_policy: String,
        #[arg(long, default_value_t = 0.0)]
        oov_constant: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nearest-rank percentile threshold over bitext scores
    Umax {
        #[arg(long)]
        bitext_scores: PathBuf,
        #[arg(long, default_value_t = 90.0)]
        r: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select a budgeted subset of monolingual lines
    Sample {
        #[arg(long)]
        scores: PathBuf,
        /// uncsamp | random | dwf | srclm
        #[arg(long, default_value = "uncsamp")]
        strategy: String,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 90.0)]
        r: f64,
        #[arg(long)]
        bitext_scores: Option<PathBuf>,
        #[arg(long)]
        u_max: Option<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// selected line indices, one per line; metadata in <out>.meta.json
        #[arg(long)]
        out: PathBuf,
        /// also extract the selected sentences from --mono
        #[arg(long)]
        emit_text: bool,
        #[arg(long)]
        mono: Option<PathBuf>,
        #[arg(long)]
        text_out: Option<PathBuf>,
    },
    /// Assign scorable lines to k equal-sized uncertainty bins
    Bin {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// TSV line_index<TAB>bin (1-based, 1 = lowest uncertainty)
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-bin property report (size, mean/median U, length, WR, coverage)
    AnalyzeBins {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// also write a JSON mirror next to the TSV
        #[arg(long)]
        json: bool,
    },
    /// Train the n-gram language model
    LmTrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long, default_value_t = 0.75)]
        discount: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-line cross-entropy under a trained model (score TSV)
    LmScore {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop the worst fraction of synthetic pairs by target-side LM score
    FilterLm {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        drop: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair selected sentences with external teacher translations
    Pair {
        #[arg(long)]
        selected: PathBuf,
        #[arg(long)]
        translations: PathBuf,
        #[arg(long, default_value = "unknown")]
        provenance: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Length/ratio filtering of synthetic pairs
    FilterSynth {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 250)]
        max_len: usize,
        #[arg(long, default_value_t = 1.5)]
        max_ratio: f64,
        /// use src/tgt ratio only instead of the symmetric max/min form
        #[arg(long)]
        one_sided: bool,
        #[arg(long)]
        out: PathBuf,
        /// drop report JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Concatenate bitext and synthetic pairs with an origin-tag sidecar
    Combine {
        #[arg(long)]
        bitext_src: PathBuf,
        #[arg(long)]
        bitext_tgt: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out_src: PathBuf,
        #[arg(long)]
        out_tgt: PathBuf,
        #[arg(long)]
        out_tags: PathBuf,
    },
    /// Frequency-bucketed word F-measure of hypothesis vs reference
    Fmeasure {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// corpus whose vocabulary defines the frequency ranking
        #[arg(long)]
        train_corpus: PathBuf,
        #[arg(long, default_value_t = 3000)]
        high: usize,
        #[arg(long, default_value_t = 12000)]
        med: usize,
        /// per-sentence macro-averaged F instead of corpus-aggregated
        #[arg(long)]
        macro_avg: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the full pipeline from a flat JSON config
    Run {
        #[arg(long)]
        config: PathBuf,
        /// override a config key, e.g. --set seed=7 (repeatable)
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
}

fn parse_oov_policy(name: &str, constant: f64) -> Result<OovPolicy> {
    match name {
        "exclude" => Ok(OovPolicy::Exclude),
        "constant" => Ok(OovPolicy::Constant(constant)),
        other => Err(Error::Usage(format!(
            "unknown OOV policy '{other}', expected exclude|constant"
        ))),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_indices(path: &Path, result: &SampleResult) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in &result.selected {
        writeln!(w, "{}", item.line_index).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn extract_lines(mono: &Path, indices: &[usize]) -> Result<Vec<Sentence>> {
    let wanted: std::collections::HashSet<usize> = indices.iter().copied().collect();
    let mut picked = Vec::with_capacity(indices.len());
    for sent in crate::corpus::MonoReader::open(mono)? {
        let sent = sent?;
        if wanted.contains(&sent.line_index) {
            picked.push(sent);
        }
    }
    if picked.len() != wanted.len() {
        return Err(Error::Usage(format!(
            "{} selected indices not present in {}",
            wanted.len() - picked.len(),
            mono.display()
        )));
    }
    Ok(picked)
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::AlignTrain {
            src,
            tgt,
            iters,
            out,
        } => {
            let corpus = ParallelCorpus::read(&src, &tgt)?;
            let params = train_ibm1(&corpus, iters)?;
            params.save(&out)?;
            println!(
                "trained on {} pairs, {} iterations, final perplexity {:.4}",
                corpus.len(),
                iters,
                params.perplexity_per_iteration.last().unwrap_or(&f64::NAN)
            );
            Ok(())
        }
        Command::Align {
            params,
            src,
            tgt,
            out,
        } => {
            let params = Model1Params::load(&params)?;
            let corpus = ParallelCorpus::read(&src, &tgt)?;
            let alignments: Vec<_> = corpus
                .pairs
                .iter()
                .map(|(s, t)| viterbi_align(&params, s, t))
                .collect();
            export_pharaoh(&out, &alignments)?;
            println!("aligned {} pairs", corpus.len());
            Ok(())
        }
        Command::DictBuild {
            src,
            tgt,
            align,
            min_count,
            min_prob,
            out,
            entropy_out,
        } => {
            let corpus = ParallelCorpus::read(&src, &tgt)?;
            let alignments = import_pharaoh(&align)?;
            validate_alignments(&corpus, &alignments)?;
            let table = build_dictionary(&corpus, &alignments, min_count, min_prob)?;
            write_dictionary(
                &out,
                &table,
                &[
                    ("pairs", corpus.len().to_string()),
                    ("min_count", min_count.to_string()),
                    ("min_prob", min_prob.to_string()),
                ],
            )?;
            if let Some(epath) = entropy_out {
                write_entropy_table(&epath, &build_entropy_table(&table))?;
            }
            println!("dictionary with {} source words", table.len());
            Ok(())
        }
        Command::ScoreUncertainty {
            mono,
            entropy,
            rarity,
            vocab,
            coverage,
            align,
            oov_policy,
            oov_constant,
            out,
        } => {
            let entropy = read_entropy_table(&entropy)?;
            let sentences = read_mono(&mono)?;
            let vocab = vocab.map(|p| read_vocab(&p)).transpose()?;
            let alignments = align.map(|p| import_pharaoh(&p)).transpose()?;
            let options = ScoreOptions {
                oov_policy: parse_oov_policy(&oov_policy, oov_constant)?,
                rarity,
                coverage,
            };
            let scores = score_sentences(
                &sentences,
                &entropy,
                vocab.as_ref(),
                alignments.as_deref(),
                &options,
            )?;
            write_scores(&out, &scores)?;
            let summary = summarize(&scores);
            println!(
                "scored {} lines: mean U {:.4}, OOV rate {:.2}%, {} unscorable",
                summary.lines,
                summary.mean_uncertainty,
                100.0 * summary.oov_rate(),
                summary.unscorable
            );
            Ok(())
        }
        Command::Umax {
            bitext_scores,
            r,
            out,
        } => {
            let scores = read_scores(&bitext_scores)?;
            let us: Vec<f64> = scores.iter().filter_map(|s| s.uncertainty).collect();
            let u_max = compute_umax(&us, r)?;
            println!("{u_max}");
            if let Some(path) = out {
                std::fs::write(&path, format!("{u_max}\n")).map_err(|e| Error::io(&path, e))?;
            }
            Ok(())
        }
        Command::Sample {
            scores,
            strategy,
            budget,
            beta,
            r,
            bitext_scores,
            u_max,
            seed,
            out,
            emit_text,
            mono,
            text_out,
        } => {
            let strat = strategy_by_name(&strategy)?;
            let records = read_scores(&scores)?;
            let resolved_umax = if strat.name() == "uncsamp" {
                match (u_max, &bitext_scores) {
                    (Some(u), _) => Some(u),
                    (None, Some(bpath)) => {
                        let bs = read_scores(bpath)?;
                        let us: Vec<f64> = bs.iter().filter_map(|s| s.uncertainty).collect();
                        Some(compute_umax(&us, r)?)
                    }
                    (None, None) => {
                        return Err(Error::Usage(
                            "uncsamp needs --u-max or --bitext-scores".into(),
                        ))
                    }
                }
            } else {
                None
            };
            let config = SamplerConfig::new(budget, beta, resolved_umax, seed);
            let result = strat.select(&records, &config)?;
            if result.exhausted {
                eprintln!(
                    "warning: only {} eligible lines for budget {}",
                    result.eligible_lines, budget
                );
            }
            write_indices(&out, &result)?;
            let meta_path = out.with_extension("meta.json");
            write_json(&meta_path, &result_meta(&result, budget, beta, r))?;
            if emit_text {
                let mono = mono.ok_or_else(|| Error::Usage("--emit-text needs --mono".into()))?;
                let text_path = text_out.unwrap_or_else(|| out.with_extension("txt"));
                let picked = extract_lines(&mono, &result.indices())?;
                write_corpus(&text_path, &picked)?;
            }
            println!(
                "selected {} of {} lines with {}",
                result.selected.len(),
                result.total_lines,
                result.strategy
            );
            Ok(())
        }
        Command::Bin { scores, k, out } => {
            let records = read_scores(&scores)?;
            let bins = rank_bins(&records, k)?;
            let file = File::create(&out).map_err(|e| Error::io(&out, e))?;
            let mut w = BufWriter::new(file);
            for (bin_no, bin) in bins.iter().enumerate() {
                for idx in bin {
                    writeln!(w, "{idx}\t{}", bin_no + 1).map_err(|e| Error::io(&out, e))?;
                }
            }
            w.flush().map_err(|e| Error::io(&out, e))?;
            println!("{} lines into {} bins", records.len(), k);
            Ok(())
        }
        Command::AnalyzeBins {
            scores,
            k,
            out,
            json,
        } => {
            let records = read_scores(&scores)?;
            let bins = rank_bins(&records, k)?;
            let report = bin_property_report(&bins, &records)?;
            write_bin_report(&out, &report)?;
            if json {
                write_json(&out.with_extension("json"), &report)?;
            }
            Ok(())
        }
        Command::LmTrain {
            corpus,
            order,
            discount,
            out,
        } => {
            let sentences = read_mono(&corpus)?;
            let model = train_lm(&sentences, order, discount)?;
            model.save(&out)?;
            println!(
                "order-{order} model, vocab {} (with specials)",
                model.vocab_size()
            );
            Ok(())
        }
        Command::LmScore { model, corpus, out } => {
            let model = NGramModel::load(&model)?;
            let sentences = read_mono(&corpus)?;
            let scores: Vec<_> = sentences
                .iter()
                .map(|s| crate::uncertainty::ScoredSentence {
                    line_index: s.line_index,
                    uncertainty: Some(model.cross_entropy(s)),
                    token_count: s.len(),
                    oov_count: 0,
                    word_rarity: None,
                    coverage: None,
                })
                .collect();
            write_scores(&out, &scores)?;
            println!("scored {} lines", scores.len());
            Ok(())
        }
        Command::FilterLm {
            pairs,
            model,
            drop,
            out,
        } => {
            let all = read_pairs(&pairs)?;
            let model = NGramModel::load(&model)?;
            let targets: Vec<Sentence> = all.iter().map(|p| p.target.clone()).collect();
            let kept = filter_by_lm(&targets, &model, drop)?;
            let survivors: Vec<_> = kept.iter().map(|&i| all[i].clone()).collect();
            write_pairs(&out, &survivors)?;
            println!("kept {} of {} pairs", survivors.len(), all.len());
            Ok(())
        }
        Command::Pair {
            selected,
            translations,
            provenance,
            out,
        } => {
            let selected = read_mono(&selected)?;
            let translations = read_mono(&translations)?;
            let pairs = pair_translations(&selected, &translations, &provenance)?;
            write_pairs(&out, &pairs)?;
            println!("paired {} sentences", pairs.len());
            Ok(())
        }
        Command::FilterSynth {
            pairs,
            max_len,
            max_ratio,
            one_sided,
            out,
            report,
        } => {
            let all = read_pairs(&pairs)?;
            let filter = PairFilter {
                max_len,
                max_ratio,
                one_sided_ratio: one_sided,
            };
            let (kept, drop_report) = filter_pairs(&all, &filter);
            write_pairs(&out, &kept)?;
            if let Some(rpath) = report {
                write_json(&rpath, &drop_report)?;
            }
            println!("kept {} of {} pairs", drop_report.kept, drop_report.input_pairs);
            Ok(())
        }
        Command::Combine {
            bitext_src,
            bitext_tgt,
            pairs,
            out_src,
            out_tgt,
            out_tags,
        } => {
            let bitext = ParallelCorpus::read(&bitext_src, &bitext_tgt)?;
            let synthetic = read_pairs(&pairs)?;
            let (nb, ns) = combine_corpora(&bitext, &synthetic, &out_src, &out_tgt, &out_tags)?;
            println!("combined {nb} bitext + {ns} synthetic pairs");
            Ok(())
        }
        Command::Fmeasure {
            hyp,
            reference,
            train_corpus,
            high,
            med,
            macro_avg,
            out,
            json,
        } => {
            let hyp = read_mono(&hyp)?;
            let reference = read_mono(&reference)?;
            let vocab = build_vocab_from(&read_mono(&train_corpus)?);
            let bounds = BucketBounds { high, med };
            let report = if macro_avg {
                word_fmeasure_by_freq_macro(&hyp, &reference, &vocab, &bounds)?
            } else {
                word_fmeasure_by_freq(&hyp, &reference, &vocab, &bounds)?
            };
            write_freq_report(&out, &report)?;
            if json {
                write_json(&out.with_extension("json"), &report)?;
            }
            Ok(())
        }
        Command::Run { config, overrides } => run_pipeline(&config, &overrides),
    }
}

fn result_meta(result: &SampleResult, budget: usize, beta: f64, r: f64) -> BTreeMap<String, serde_json::Value> {
    let mut meta = BTreeMap::new();
    meta.insert("strategy".into(), result.strategy.clone().into());
    meta.insert("budget".into(), budget.into());
    meta.insert("beta".into(), beta.into());
    meta.insert("r".into(), r.into());
    meta.insert("seed".into(), result.seed.into());
    meta.insert("selected".into(), result.selected.len().into());
    meta.insert("total_lines".into(), result.total_lines.into());
    meta.insert("eligible_lines".into(), result.eligible_lines.into());
    meta.insert("exhausted".into(), result.exhausted.into());
    meta.insert(
        "u_max".into(),
        match result.effective_umax {
            Some(u) => u.into(),
            None => serde_json::Value::Null,
        },
    );
    meta
}

// ---------------------------------------------------------------------
// pipeline runner

type Config = BTreeMap<String, serde_json::Value>;

fn cfg_str<'a>(cfg: &'a Config, key: &str) -> Result<&'a str> {
    cfg.get(key)
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Usage(format!("config key '{key}' missing or not a string")))
}

fn cfg_str_or<'a>(cfg: &'a Config, key: &str, default: &'a str) -> &'a str {
    cfg.get(key).and_then(|v| v.as_str()).unwrap_or(default)
}

fn cfg_f64(cfg: &Config, key: &str, default: f64) -> f64 {
    cfg.get(key).and_then(|v| v.as_f64()).unwrap_or(default)
}

fn cfg_u64(cfg: &Config, key: &str, default: u64) -> u64 {
    cfg.get(key).and_then(|v| v.as_u64()).unwrap_or(default)
}

fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| Error::Stage {
        stage: name.to_owned(),
        source: Box::new(e),
    })
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Run align-train, dict-build, scoring, threshold, sampling, pairing,
/// filtering, and combination end to end from a flat JSON config, writing
/// every artifact plus a manifest of hashes under the configured workdir.
pub fn run_pipeline(config_path: &Path, overrides: &[String]) -> Result<()> {
    let raw = std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let mut cfg: Config = serde_json::from_str(&raw).map_err(|e| {
        Error::MalformedRecord {
            path: config_path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        }
    })?;
    for ov in overrides {
        let (key, value) = ov.split_once('=').ok_or_else(|| {
            Error::Usage(format!("override '{ov}' must look like key=value"))
        })?;
        let parsed = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_owned()));
        cfg.insert(key.to_owned(), parsed);
    }

    let workdir = PathBuf::from(cfg_str(&cfg, "workdir")?);
    std::fs::create_dir_all(&workdir).map_err(|e| Error::io(&workdir, e))?;
    let src = PathBuf::from(cfg_str(&cfg, "src")?);
    let tgt = PathBuf::from(cfg_str(&cfg, "tgt")?);
    let mono = PathBuf::from(cfg_str(&cfg, "mono")?);
    let seed = cfg_u64(&cfg, "seed", 42);
    let out = |name: &str| workdir.join(name);

    // 1. aligner
    let corpus = stage("align-train", ParallelCorpus::read(&src, &tgt))?;
    let iters = cfg_u64(&cfg, "iters", 5) as usize;
    let params = stage("align-train", train_ibm1(&corpus, iters))?;
    stage("align-train", params.save(out("model1.bin")))?;

    // 2. alignments + dictionary + entropy
    let alignments: Vec<_> = corpus
        .pairs
        .iter()
        .map(|(s, t)| viterbi_align(&params, s, t))
        .collect();
    stage("align", export_pharaoh(out("bitext.align"), &alignments))?;
    let min_count = cfg_u64(&cfg, "min_count", 0);
    let min_prob = cfg_f64(&cfg, "min_prob", 0.0);
    let table = stage(
        "dict-build",
        build_dictionary(&corpus, &alignments, min_count, min_prob),
    )?;
    stage(
        "dict-build",
        write_dictionary(
            &out("dict.tsv"),
            &table,
            &[
                ("pairs", corpus.len().to_string()),
                ("min_count", min_count.to_string()),
                ("min_prob", min_prob.to_string()),
            ],
        ),
    )?;
    let entropy = build_entropy_table(&table);
    stage("dict-build", write_entropy_table(out("entropy.tsv"), &entropy))?;

    // 3. scoring: bitext source side (for U_max) and the mono corpus
    let oov_policy = parse_oov_policy(
        cfg_str_or(&cfg, "oov_policy", "exclude"),
        cfg_f64(&cfg, "oov_constant", 0.0),
    )?;
    let bitext_src: Vec<Sentence> = corpus.pairs.iter().map(|(s, _)| s.clone()).collect();
    let src_vocab = build_vocab_from(&bitext_src);
    stage("score", write_vocab(out("src_vocab.tsv"), &src_vocab))?;
    let options = ScoreOptions {
        oov_policy,
        rarity: true,
        coverage: false,
    };
    let bitext_scores = stage(
        "score",
        score_sentences(&bitext_src, &entropy, Some(&src_vocab), None, &options),
    )?;
    stage("score", write_scores(out("bitext_scores.tsv"), &bitext_scores))?;

    let mono_sents = stage("score", read_mono(&mono))?;
    let mono_scores = stage(
        "score",
        score_sentences(&mono_sents, &entropy, Some(&src_vocab), None, &options),
    )?;
    stage("score", write_scores(out("mono_scores.tsv"), &mono_scores))?;

    // 4. threshold
    let r = cfg_f64(&cfg, "r", 90.0);
    let us: Vec<f64> = bitext_scores.iter().filter_map(|s| s.uncertainty).collect();
    let u_max = stage("umax", compute_umax(&us, r))?;
    std::fs::write(out("umax.txt"), format!("{u_max}\n"))
        .map_err(|e| Error::io(out("umax.txt"), e))?;

    // 5. sampling
    let strategy_name = cfg_str_or(&cfg, "strategy", "uncsamp");
    let strat = stage("sample", strategy_by_name(strategy_name))?;
    let budget = cfg_u64(&cfg, "budget", 1000) as usize;
    let beta = cfg_f64(&cfg, "beta", 2.0);
    let sampler_cfg = SamplerConfig::new(budget, beta, Some(u_max), seed);
    let result = stage("sample", strat.select(&mono_scores, &sampler_cfg))?;
    stage("sample", write_indices(&out("sample.idx"), &result))?;
    stage(
        "sample",
        write_json(&out("sample.meta.json"), &result_meta(&result, budget, beta, r)),
    )?;
    let selected = stage("sample", extract_lines(&mono, &result.indices()))?;
    stage("sample", write_corpus(out("selected.txt"), &selected))?;

    // 6. translations: external file, or identity copy for dry runs
    let translations_cfg = cfg_str_or(&cfg, "translations", "identity");
    let translations = if translations_cfg == "identity" {
        stage("pair", write_corpus(out("translations.txt"), &selected))?;
        selected.clone()
    } else {
        stage("pair", read_mono(PathBuf::from(translations_cfg)))?
    };
    let provenance = format!("{strategy_name}:seed{seed}");
    let pairs = stage(
        "pair",
        pair_translations(&selected, &translations, &provenance),
    )?;
    stage("pair", write_pairs(out("pairs.tsv"), &pairs))?;

    // 7. synthetic filtering
    let filter = PairFilter {
        max_len: cfg_u64(&cfg, "max_len", 250) as usize,
        max_ratio: cfg_f64(&cfg, "max_ratio", 1.5),
        one_sided_ratio: cfg.get("one_sided_ratio").and_then(|v| v.as_bool()).unwrap_or(false),
    };
    let (mut kept, drop_report) = filter_pairs(&pairs, &filter);
    stage("filter-synth", write_json(&out("drop_report.json"), &drop_report))?;

    // optional target-side LM filtering
    let lm_drop = cfg_f64(&cfg, "lm_filter_drop", 0.0);
    if lm_drop > 0.0 {
        let bitext_tgt: Vec<Sentence> = corpus.pairs.iter().map(|(_, t)| t.clone()).collect();
        let order = cfg_u64(&cfg, "lm_order", 4) as usize;
        let discount = cfg_f64(&cfg, "lm_discount", 0.75);
        let lm = stage("filter-lm", train_lm(&bitext_tgt, order, discount))?;
        stage("filter-lm", lm.save(out("target_lm.bin")))?;
        let targets: Vec<Sentence> = kept.iter().map(|p| p.target.clone()).collect();
        let surviving = stage("filter-lm", filter_by_lm(&targets, &lm, lm_drop))?;
        kept = surviving.into_iter().map(|i| kept[i].clone()).collect();
    }
    stage("filter-synth", write_pairs(out("pairs_filtered.tsv"), &kept))?;

    // 8. combine
    stage(
        "combine",
        combine_corpora(
            &corpus,
            &kept,
            out("combined.src"),
            out("combined.tgt"),
            out("combined.tags"),
        )
        .map(|_| ()),
    )?;

    // manifest: config, input hashes, output hashes
    let mut manifest: Config = BTreeMap::new();
    manifest.insert("tool_version".into(), env!("CARGO_PKG_VERSION").into());
    manifest.insert("seed".into(), seed.into());
    manifest.insert("u_max".into(), u_max.into());
    manifest.insert("config".into(), serde_json::to_value(&cfg).unwrap());
    let mut inputs = BTreeMap::new();
    for path in [&src, &tgt, &mono] {
        inputs.insert(path.display().to_string(), sha256_file(path)?);
    }
    manifest.insert("inputs".into(), serde_json::to_value(inputs).unwrap());
    let mut outputs = BTreeMap::new();
    for name in [
        "model1.bin",
        "bitext.align",
        "dict.tsv",
        "entropy.tsv",
        "src_vocab.tsv",
        "bitext_scores.tsv",
        "mono_scores.tsv",
        "umax.txt",
        "sample.idx",
        "selected.txt",
        "pairs.tsv",
        "pairs_filtered.tsv",
        "combined.src",
        "combined.tgt",
        "combined.tags",
    ] {
        outputs.insert(name.to_owned(), sha256_file(&out(name))?);
    }
    manifest.insert("outputs".into(), serde_json::to_value(outputs).unwrap());
    write_json(&out("manifest.json"), &manifest)?;
    println!(
        "pipeline complete: {} selected, {} synthetic pairs kept, artifacts in {}",
        result.selected.len(),
        kept.len(),
        workdir.display()
    );
    Ok(())
}
