use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context as _};
use ngcf::compare::{CompareConfig, CompareError};
use ngcf::corpus::{merge_word_counts, tokenize_bytes, word_counts};
use ngcf::models::{load_model, save_model, AnyModel, UniformLm};
use ngcf::synth::{generate_text, SynthConfig};
use ngcf::*;

use crate::{
    BuildArgs, ClusterArgs, CompareArgs, CountArgs, EvalArgs, ExchangeArgs, ModelKind, SynthArgs,
    VocabArgs,
};

const USAGE: u8 = 2;
const CONSISTENCY: u8 = 3;
const NUMERIC: u8 = 4;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Result<T> = std::result::Result<T, Failure>;

fn fail(code: u8, error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code,
        error: error.into(),
    }
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    fail(USAGE, error)
}

fn criterion_code(e: &CriterionError) -> u8 {
    match e {
        CriterionError::SingletonMarginal { .. } | CriterionError::Degenerate { .. } => NUMERIC,
        _ => USAGE,
    }
}

fn model_failure(e: ModelError) -> Failure {
    let code = match &e {
        ModelError::ZeroProbability { .. } | ModelError::UnreachableRow(_) => NUMERIC,
        ModelError::Criterion(c) => criterion_code(c),
        _ => USAGE,
    };
    fail(code, e)
}

fn exchange_failure(e: ExchangeError) -> Failure {
    let code = match &e {
        ExchangeError::Criterion(c) => criterion_code(c),
        _ => USAGE,
    };
    fail(code, e)
}

fn read_words(paths: &[PathBuf]) -> Result<Vec<Vec<String>>> {
    paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()));
            let bytes = bytes.map_err(usage)?;
            tokenize_bytes(&bytes, false)
                .with_context(|| format!("decoding {}", p.display()))
                .map_err(usage)
        })
        .collect()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(usage)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(usage)
}

fn finish(mut out: BufWriter<File>, path: &Path) -> Result<()> {
    out.flush()
        .with_context(|| format!("writing {}", path.display()))
        .map_err(usage)
}

fn read_vocab(path: &Path) -> Result<Vocabulary> {
    Vocabulary::read_tsv(open(path)?)
        .with_context(|| format!("reading vocabulary {}", path.display()))
        .map_err(usage)
}

fn read_counts(path: &Path, vocab: &Vocabulary, order: usize) -> Result<CountTable> {
    CountTable::read_tsv(open(path)?, vocab, order)
        .with_context(|| format!("reading counts {}", path.display()))
        .map_err(usage)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn parse_discount(s: &str) -> Result<Discount> {
    match s {
        "adaptive" => Ok(Discount::Adaptive),
        "none" => Ok(Discount::None),
        v => match v.parse::<f64>() {
            Ok(b) if b > 0.0 && b < 1.0 => Ok(Discount::Fixed(b)),
            _ => Err(usage(anyhow!(
                "--discount must be adaptive, none, or a value in (0, 1); got {v:?}"
            ))),
        },
    }
}

fn exchange_setup(a: &ExchangeArgs) -> Result<(ExchangeConfig, Option<HeuristicParams>)> {
    let config = ExchangeConfig {
        c1: a.c1,
        c2: a.c2,
        min_count: a.min_count,
        max_iterations: a.iterations,
        b: a.b,
        max_rows_clustered: a.max_rows,
        seed: a.seed,
        threads: threads_from_env(),
        ..ExchangeConfig::default()
    };
    config.validate().map_err(usage)?;
    if !a.heuristic {
        return Ok((config, None));
    }
    if a.t > a.c1.max(a.c2) {
        return Err(usage(anyhow!(
            "--t {} exceeds the number of clusters (--c1 {}, --c2 {})",
            a.t,
            a.c1,
            a.c2
        )));
    }
    if a.t == 0 || a.u == 0 {
        return Err(usage(anyhow!("--t and --u must be at least 1")));
    }
    Ok((config, Some(HeuristicParams { h: a.h, t: a.t, u: a.u })))
}

pub fn vocab(a: VocabArgs) -> Result<()> {
    let shards = read_words(&a.corpus)?;
    let counts = shards
        .iter()
        .map(|w| word_counts(w))
        .fold(Default::default(), merge_word_counts);
    let vocab = Vocabulary::from_counts(&counts, a.min_count, a.max_size.unwrap_or(usize::MAX));
    let mut out = create(&a.out)?;
    vocab.write_tsv(&mut out).map_err(usage)?;
    finish(out, &a.out)?;

    let tokens: u64 = counts.values().sum();
    let unknown: u64 = counts
        .iter()
        .filter(|(w, _)| vocab.id(w).is_none())
        .map(|(_, &c)| c)
        .sum();
    if vocab.len() == 1 {
        log::warn!("--min-count {} leaves only the unknown token", a.min_count);
    }
    println!("vocabulary\t{}", vocab.len());
    println!("tokens\t{tokens}");
    let share = if tokens == 0 { 0.0 } else { 100.0 * unknown as f64 / tokens as f64 };
    println!("unknown\t{unknown}\t{share:.2}%");
    Ok(())
}

pub fn count(a: CountArgs) -> Result<()> {
    let vocab = read_vocab(&a.vocab)?;
    let tables = read_words(&a.corpus)?
        .iter()
        .map(|w| count_ngrams(&vocab.encode(w), a.order))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(usage)?;
    let table = merge_counts(&tables).map_err(usage)?;
    let mut out = create(&a.out)?;
    table.write_tsv(&mut out, &vocab).map_err(usage)?;
    finish(out, &a.out)?;
    println!("events\t{}", table.total());
    println!("distinct\t{}", table.len());
    Ok(())
}

pub fn cluster(a: ClusterArgs) -> Result<()> {
    let (config, heuristic) = exchange_setup(&a.exchange)?;
    let vocab = read_vocab(&a.vocab)?;
    let counts = read_counts(&a.counts, &vocab, a.order)?;
    let outcome: Outcome =
        ngcf::cluster(&counts, vocab.len(), &config, heuristic).map_err(exchange_failure)?;

    for (side, suffix) in [(Side::Row, ".rows"), (Side::Column, ".cols")] {
        let path = with_suffix(&a.out, suffix);
        let mut out = create(&path)?;
        outcome
            .clustering
            .write_side(side, &mut out, &vocab)
            .map_err(usage)?;
        finish(out, &path)?;
    }
    let path = with_suffix(&a.out, ".trace");
    let mut out = create(&path)?;
    if a.timing {
        outcome.trace.write_tsv(&mut out).map_err(usage)?;
    } else {
        for r in &outcome.trace.records {
            writeln!(out, "{}\t{}\t{}", r.iteration, r.criterion, r.moves).map_err(usage)?;
        }
    }
    finish(out, &path)?;

    let last = outcome.trace.last();
    println!("iterations\t{}", last.iteration);
    println!("stop\t{:?}", outcome.trace.stop);
    println!("criterion\t{}", last.criterion);
    println!("delta_evaluations\t{}", outcome.work.delta_evaluations);
    Ok(())
}

pub fn build(a: BuildArgs) -> Result<()> {
    let vocab = read_vocab(&a.vocab)?;
    let counts = || {
        let path = a
            .counts
            .as_ref()
            .ok_or_else(|| usage(anyhow!("--counts is required for this model kind")))?;
        read_counts(path, &vocab, a.order)
    };
    let model: AnyModel<f64> = match a.kind {
        ModelKind::Uniform => AnyModel::Uniform(UniformLm::new(vocab.len(), a.order)),
        ModelKind::Backoff => AnyModel::Backoff(
            BackoffModel::build(&counts()?, a.cutoff, vocab.len()).map_err(model_failure)?,
        ),
        ModelKind::Clustered => {
            let (Some(rows), Some(cols)) = (&a.rows, &a.cols) else {
                return Err(usage(anyhow!("clustered models need --rows and --cols")));
            };
            let clustering = Clustering::read_files(open(rows)?, open(cols)?, &vocab)
                .context("reading clustering files")
                .map_err(usage)?;
            let discount = parse_discount(&a.discount)?;
            AnyModel::Clustered(
                ClusteredModel::build(&counts()?, &clustering, vocab.len(), discount)
                    .map_err(model_failure)?,
            )
        }
    };
    let mut out = create(&a.out)?;
    save_model(&mut out, &model, &vocab.fingerprint()).map_err(usage)?;
    finish(out, &a.out)?;
    println!("model\t{}\torder {}\tvocabulary {}", model.kind(), model.order(), model.vocab_size());
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let (header, model) = load_model::<f64, _>(open(&a.model)?)
        .with_context(|| format!("loading model {}", a.model.display()))
        .map_err(usage)?;
    let vocab = read_vocab(&a.vocab)?;
    if header.vocab_hash != vocab.fingerprint() || header.vocab_size != vocab.len() {
        return Err(fail(
            CONSISTENCY,
            anyhow!(
                "model {} was built with a different vocabulary than {}",
                a.model.display(),
                a.vocab.display()
            ),
        ));
    }
    let words: Vec<String> = read_words(std::slice::from_ref(&a.test))?.concat();
    let report: Report = perplexity(&model, &vocab.encode(&words), a.skip_unknown).map_err(model_failure)?;
    println!("{report}");
    Ok(())
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let (exchange, heuristic) = exchange_setup(&a.exchange)?;
    if !(a.held_out > 0.0 && a.held_out < 1.0) {
        return Err(usage(anyhow!("--held-out must lie in (0, 1)")));
    }
    let config = CompareConfig {
        sizes: a.sizes,
        cutoffs: a.cutoff,
        order: a.order,
        exchange,
        heuristic,
        discount: parse_discount(&a.discount)?,
        skip_unknown: a.skip_unknown,
        vocab_min_count: a.vocab_min_count,
        vocab_max_size: a.max_size.unwrap_or(usize::MAX),
        held_out_fraction: a.held_out,
    };
    let words: Vec<String> = read_words(&a.corpus)?.concat();
    let table = ngcf::compare::compare::<f64, _>(&words, &config).map_err(|e| match e {
        CompareError::Exchange(e) => exchange_failure(e),
        CompareError::Model(e) => model_failure(e),
        e => usage(e),
    })?;
    match &a.out {
        Some(path) => {
            let mut out = create(path)?;
            table.write_tsv(&mut out).map_err(usage)?;
            finish(out, path)
        }
        None => table.write_tsv(std::io::stdout().lock()).map_err(usage),
    }
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let text = generate_text(&SynthConfig {
        tokens: a.tokens,
        seed: a.seed,
        ..SynthConfig::default()
    });
    std::fs::write(&a.out, text)
        .with_context(|| format!("writing {}", a.out.display()))
        .map_err(usage)
}
