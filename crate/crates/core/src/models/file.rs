//! Text model files.
//!
//! Files store integer statistics plus the build-time discount; probabilities are
//! re-derived on load, so a reloaded model scores bit-identically.
//!
//! ```text
//! ngcf-model  1
//! kind        clustered | backoff | uniform
//! order       2
//! vocab_size  1000
//! vocab_hash  <hex>
//! ...kind-specific header keys...
//! [section]
//! records, TAB-separated
//! [end]
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::corpus::WordId;
use crate::criterion::{ClusterId, Clustering};
use crate::models::backoff::History;
use crate::models::{BackoffLm, ClusteredLm, LanguageModel, ModelError, UniformLm};
use crate::scalar::Real;

const MAGIC: &str = "ngcf-model";
const VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel<F> {
    Clustered(ClusteredLm<F>),
    Backoff(BackoffLm<F>),
    Uniform(UniformLm),
}

impl<F: Real> AnyModel<F> {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Clustered(_) => "clustered",
            AnyModel::Backoff(_) => "backoff",
            AnyModel::Uniform(_) => "uniform",
        }
    }
}

impl<F: Real> LanguageModel<F> for AnyModel<F> {
    fn order(&self) -> usize {
        match self {
            AnyModel::Clustered(m) => m.order(),
            AnyModel::Backoff(m) => m.order(),
            AnyModel::Uniform(m) => LanguageModel::<F>::order(m),
        }
    }

    fn vocab_size(&self) -> usize {
        match self {
            AnyModel::Clustered(m) => m.vocab_size(),
            AnyModel::Backoff(m) => m.vocab_size(),
            AnyModel::Uniform(m) => LanguageModel::<F>::vocab_size(m),
        }
    }

    fn prob(&self, context: &[WordId], word: WordId) -> Result<F, ModelError> {
        match self {
            AnyModel::Clustered(m) => m.prob(context, word),
            AnyModel::Backoff(m) => m.prob(context, word),
            AnyModel::Uniform(m) => m.prob(context, word),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelHeader {
    pub kind: String,
    pub order: usize,
    pub vocab_size: usize,
    /// Fingerprint of the vocabulary the model was trained with.
    pub vocab_hash: String,
}

pub fn save_model<F: Real, W: Write>(
    mut out: W,
    model: &AnyModel<F>,
    vocab_hash: &str,
) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}\t{VERSION}")?;
    writeln!(out, "kind\t{}", model.kind())?;
    writeln!(out, "order\t{}", model.order())?;
    writeln!(out, "vocab_size\t{}", model.vocab_size())?;
    writeln!(out, "vocab_hash\t{vocab_hash}")?;
    match model {
        AnyModel::Clustered(m) => write_clustered(&mut out, m)?,
        AnyModel::Backoff(m) => write_backoff(&mut out, m)?,
        AnyModel::Uniform(_) => {}
    }
    writeln!(out, "[end]")?;
    out.flush()
}

fn residual(r: Option<ClusterId>) -> String {
    r.map_or_else(|| "-".to_string(), |g| g.to_string())
}

fn write_clustered<F: Real, W: Write>(out: &mut W, m: &ClusteredLm<F>) -> std::io::Result<()> {
    let g = m.clustering();
    writeln!(out, "c1\t{}", g.c1())?;
    writeln!(out, "c2\t{}", g.c2())?;
    writeln!(out, "b_final\t{:?}", m.b_final().to_f64_lossy())?;
    writeln!(out, "row_residual\t{}", residual(g.row_residual()))?;
    writeln!(out, "col_residual\t{}", residual(g.col_residual()))?;
    writeln!(out, "[rows]")?;
    for (ctx, k) in g.row_assignments() {
        let key: Vec<String> = ctx.iter().map(|w| w.to_string()).collect();
        writeln!(out, "{}\t{k}", key.join(" "))?;
    }
    writeln!(out, "[cols]")?;
    for (w, k) in g.col_assignments() {
        writeln!(out, "{w}\t{k}")?;
    }
    writeln!(out, "[pairs]")?;
    for &(g1, g2, n) in m.pairs() {
        writeln!(out, "{g1}\t{g2}\t{n}")?;
    }
    writeln!(out, "[words]")?;
    for (w, &n) in m.word_counts().iter().enumerate() {
        if n > 0 {
            writeln!(out, "{w}\t{n}")?;
        }
    }
    Ok(())
}

fn write_backoff<F: Real, W: Write>(out: &mut W, m: &BackoffLm<F>) -> std::io::Result<()> {
    writeln!(out, "cutoff\t{}", m.cutoff())?;
    writeln!(out, "[unigram]")?;
    for (w, &n) in m.unigram_counts().iter().enumerate() {
        if n > 0 {
            writeln!(out, "{w}\t{n}")?;
        }
    }
    writeln!(out, "[histories]")?;
    for (v, h) in m.histories() {
        writeln!(out, "{v}\t{}\t{}\t{}", h.total, h.discarded, h.effective_cutoff)?;
    }
    writeln!(out, "[kept]")?;
    for (v, h) in m.histories() {
        for &(w, n) in &h.kept {
            writeln!(out, "{v}\t{w}\t{n}")?;
        }
    }
    Ok(())
}

struct Reader<R> {
    input: R,
    line_no: usize,
    buf: String,
    tag: String,
}

impl<R: BufRead> Reader<R> {
    fn next_line(&mut self) -> Result<Option<&str>, ModelError> {
        self.buf.clear();
        if self.input.read_line(&mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        Ok(Some(self.buf.trim_end_matches(['\n', '\r'])))
    }

    fn error(&self, message: impl Into<String>) -> ModelError {
        ModelError::Format {
            line: self.line_no,
            message: message.into(),
        }
    }

    fn expect_line(&mut self) -> Result<String, ModelError> {
        match self.next_line()? {
            Some(l) => Ok(l.to_string()),
            None => Err(self.error("unexpected end of file")),
        }
    }

    fn key(&mut self, key: &str) -> Result<String, ModelError> {
        let line = self.expect_line()?;
        match line.split_once('\t') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(self.error(format!("expected `{key}`"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&self, field: &str) -> Result<T, ModelError> {
        field
            .parse()
            .map_err(|_| self.error(format!("bad number `{field}`")))
    }

    fn key_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ModelError> {
        let v = self.key(key)?;
        self.parsed(&v)
    }

    fn section(&mut self, name: &str) -> Result<(), ModelError> {
        let line = self.expect_line()?;
        if line == format!("[{name}]") {
            Ok(())
        } else {
            Err(self.error(format!("expected section [{name}]")))
        }
    }

    /// Next record of the current section; `None` once a section tag is read, which is
    /// then kept in `tag`.
    fn record(&mut self, fields: usize) -> Result<Option<Vec<String>>, ModelError> {
        let line = self.expect_line()?;
        if line.starts_with('[') {
            self.tag = line;
            return Ok(None);
        }
        let rec: Vec<String> = line.split('\t').map(str::to_string).collect();
        if rec.len() != fields {
            return Err(self.error(format!("expected {fields} fields, got {}", rec.len())));
        }
        Ok(Some(rec))
    }

    fn expect_tag(&self, name: &str) -> Result<(), ModelError> {
        if self.tag == format!("[{name}]") {
            Ok(())
        } else {
            Err(self.error(format!("expected section [{name}], found {}", self.tag)))
        }
    }

    fn ids<T: std::str::FromStr>(&self, rec: &[String]) -> Result<Vec<T>, ModelError> {
        rec.iter().map(|f| self.parsed(f)).collect()
    }
}

pub fn load_model<F: Real, R: BufRead>(input: R) -> Result<(ModelHeader, AnyModel<F>), ModelError> {
    let mut r = Reader {
        input,
        line_no: 0,
        buf: String::new(),
        tag: String::new(),
    };
    let version = r.key(MAGIC)?;
    if version != VERSION {
        return Err(r.error(format!("unsupported version {version}")));
    }
    let header = ModelHeader {
        kind: r.key("kind")?,
        order: r.key_parsed("order")?,
        vocab_size: r.key_parsed("vocab_size")?,
        vocab_hash: r.key("vocab_hash")?,
    };
    let model = match header.kind.as_str() {
        "clustered" => read_clustered(&mut r, &header)?,
        "backoff" => read_backoff(&mut r, &header)?,
        "uniform" => {
            r.tag = r.expect_line()?;
            AnyModel::Uniform(UniformLm::new(header.vocab_size, header.order))
        }
        other => return Err(r.error(format!("unknown model kind `{other}`"))),
    };
    r.expect_tag("end")?;
    Ok((header, model))
}

fn read_residual<R: BufRead>(r: &mut Reader<R>, key: &str) -> Result<Option<ClusterId>, ModelError> {
    let v = r.key(key)?;
    if v == "-" {
        Ok(None)
    } else {
        r.parsed(&v).map(Some)
    }
}

fn read_clustered<F: Real, R: BufRead>(
    r: &mut Reader<R>,
    header: &ModelHeader,
) -> Result<AnyModel<F>, ModelError> {
    let c1: usize = r.key_parsed("c1")?;
    let c2: usize = r.key_parsed("c2")?;
    let b_final: f64 = r.key_parsed("b_final")?;
    let row_residual = read_residual(r, "row_residual")?;
    let col_residual = read_residual(r, "col_residual")?;
    let mut g = Clustering::new(c1, c2);
    g.set_residuals(row_residual, col_residual)?;

    r.section("rows")?;
    while let Some(rec) = r.record(2)? {
        let ctx: Vec<WordId> = r.ids(&rec[0].split(' ').map(str::to_string).collect::<Vec<_>>())?;
        if ctx.len() + 1 != header.order {
            return Err(r.error("context length does not match order"));
        }
        g.set_row(ctx, r.parsed(&rec[1])?)?;
    }
    r.expect_tag("cols")?;
    while let Some(rec) = r.record(2)? {
        let [w, k] = r.ids::<u32>(&rec)?[..] else { unreachable!() };
        g.set_col(w, k)?;
    }
    r.expect_tag("pairs")?;
    let mut pairs = Vec::new();
    while let Some(rec) = r.record(3)? {
        let [g1, g2, n] = r.ids::<u64>(&rec)?[..] else { unreachable!() };
        if g1 as usize >= c1 || g2 as usize >= c2 {
            return Err(r.error("cluster id out of range"));
        }
        pairs.push((g1 as ClusterId, g2 as ClusterId, n));
    }
    r.expect_tag("words")?;
    let mut word_counts = vec![0u64; header.vocab_size];
    while let Some(rec) = r.record(2)? {
        let [w, n] = r.ids::<u64>(&rec)?[..] else { unreachable!() };
        *word_counts
            .get_mut(w as usize)
            .ok_or_else(|| r.error("word id outside vocabulary"))? = n;
    }
    let lm = ClusteredLm::from_parts(
        header.order,
        header.vocab_size,
        g,
        pairs,
        word_counts,
        F::of(b_final),
    )?;
    Ok(AnyModel::Clustered(lm))
}

fn read_backoff<F: Real, R: BufRead>(
    r: &mut Reader<R>,
    header: &ModelHeader,
) -> Result<AnyModel<F>, ModelError> {
    if header.order != 2 {
        return Err(r.error("back-off models are bigrams"));
    }
    let cutoff: u64 = r.key_parsed("cutoff")?;
    r.section("unigram")?;
    let mut unigram = vec![0u64; header.vocab_size];
    while let Some(rec) = r.record(2)? {
        let [w, n] = r.ids::<u64>(&rec)?[..] else { unreachable!() };
        *unigram
            .get_mut(w as usize)
            .ok_or_else(|| r.error("word id outside vocabulary"))? = n;
    }
    r.expect_tag("histories")?;
    let mut histories = BTreeMap::new();
    while let Some(rec) = r.record(4)? {
        let [v, total, discarded, effective_cutoff] = r.ids::<u64>(&rec)?[..] else {
            unreachable!()
        };
        histories.insert(
            v as WordId,
            History {
                total,
                discarded,
                effective_cutoff,
                kept: Vec::new(),
            },
        );
    }
    r.expect_tag("kept")?;
    while let Some(rec) = r.record(3)? {
        let [v, w, n] = r.ids::<u64>(&rec)?[..] else { unreachable!() };
        let h = histories
            .get_mut(&(v as WordId))
            .ok_or_else(|| r.error("kept bigram for unknown history"))?;
        h.kept.push((w as WordId, n));
    }
    let lm = BackoffLm::from_parts(header.vocab_size, cutoff, unigram, histories)?;
    Ok(AnyModel::Backoff(lm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{count_ngrams, TokenStream};
    use crate::models::{perplexity, Discount};

    fn stream() -> TokenStream {
        TokenStream::new(vec![1, 2, 1, 2, 3, 1, 2, 1, 3, 3, 1, 4, 4, 1, 2])
    }

    fn roundtrip(model: AnyModel<f64>) {
        let mut buf = Vec::new();
        save_model(&mut buf, &model, "abc").unwrap();
        let (header, back) = load_model::<f64, _>(&buf[..]).unwrap();
        assert_eq!(header.vocab_hash, "abc");
        assert_eq!(back, model);
        let test = TokenStream::new(vec![2, 1, 3, 0, 4, 2, 2]);
        let a = perplexity(&model, &test, true).unwrap();
        let b = perplexity(&back, &test, true).unwrap();
        assert_eq!(a.perplexity.to_bits(), b.perplexity.to_bits());
        let mut again = Vec::new();
        save_model(&mut again, &back, "abc").unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn clustered_roundtrip() {
        let t = count_ngrams(&stream(), 2).unwrap();
        let mut g = Clustering::new(3, 2);
        for (w, k) in [(1, 0), (2, 1), (3, 1)] {
            g.set_row(vec![w], k).unwrap();
            g.set_col(w, k).unwrap();
        }
        g.set_residuals(Some(2), Some(1)).unwrap();
        let lm = ClusteredLm::build(&t, &g, 5, Discount::Adaptive).unwrap();
        roundtrip(AnyModel::Clustered(lm));
    }

    #[test]
    fn backoff_and_uniform_roundtrip() {
        let t = count_ngrams(&stream(), 2).unwrap();
        roundtrip(AnyModel::Backoff(BackoffLm::build(&t, 1, 5).unwrap()));
        roundtrip(AnyModel::Uniform(UniformLm::new(5, 2)));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bad = "ngcf-model\t1\nkind\tbackoff\norder\t2\nvocab_size\t3\nvocab_hash\tx\ncutoff\t2\n[unigram]\n9\t1\n[histories]\n[kept]\n[end]\n";
        assert!(matches!(
            load_model::<f64, _>(bad.as_bytes()),
            Err(ModelError::Format { line: 8, .. })
        ));
        let truncated = "ngcf-model\t1\nkind\tuniform\n";
        assert!(load_model::<f64, _>(truncated.as_bytes()).is_err());
    }
}
