//! Tokenisation, vocabularies, token streams and sparse n-gram count tables.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub type WordId = u32;

/// The `M` words preceding a predicted word, oldest first.
pub type Context = Vec<WordId>;

pub const UNK_ID: WordId = 0;
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Encoding { offset: usize },
    #[error("n-gram order must be at least 2, got {0}")]
    BadOrder(usize),
    #[error("stream of {len} tokens is shorter than order {order}")]
    TooShort { len: usize, order: usize },
    #[error("cannot merge count tables of order {left} and {right}")]
    OrderMismatch { left: usize, right: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        line,
        message: message.into(),
    }
}

/// Splits text on Unicode whitespace.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    text.split_whitespace()
        .map(|w| if lowercase { w.to_lowercase() } else { w.to_string() })
        .collect()
}

/// Like [`tokenize`], but validates the encoding first.
pub fn tokenize_bytes(bytes: &[u8], lowercase: bool) -> Result<Vec<String>, CorpusError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CorpusError::Encoding {
        offset: e.valid_up_to(),
    })?;
    Ok(tokenize(text, lowercase))
}

/// Raw word frequencies; shards are combined with [`merge_word_counts`].
pub fn word_counts<S: AsRef<str>>(words: &[S]) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    for w in words {
        *counts.entry(w.as_ref().to_string()).or_insert(0) += 1;
    }
    counts
}

pub fn merge_word_counts(
    mut into: HashMap<String, u64>,
    other: HashMap<String, u64>,
) -> HashMap<String, u64> {
    for (w, c) in other {
        *into.entry(w).or_insert(0) += c;
    }
    into
}

/// Bidirectional word/id map. Id 0 is always the unknown-word token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, WordId>,
}

impl Vocabulary {
    /// Keeps the `max_size - 1` most frequent words with count `>= min_count`.
    pub fn from_counts(counts: &HashMap<String, u64>, min_count: u64, max_size: usize) -> Self {
        let min_count = min_count.max(1);
        let mut entries: Vec<(&str, u64)> = counts
            .iter()
            .filter(|(w, &c)| c >= min_count && w.as_str() != UNK_TOKEN)
            .map(|(w, &c)| (w.as_str(), c))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        entries.truncate(max_size.saturating_sub(1));

        let kept: u64 = entries.iter().map(|e| e.1).sum();
        let all: u64 = counts.values().sum();
        let mut vocab = Vocabulary::unk_only();
        vocab.counts[0] = all - kept;
        for (w, c) in entries {
            vocab.push(w.to_string(), c);
        }
        vocab
    }

    fn unk_only() -> Self {
        let mut index = HashMap::new();
        index.insert(UNK_TOKEN.to_string(), UNK_ID);
        Vocabulary {
            words: vec![UNK_TOKEN.to_string()],
            counts: vec![0],
            index,
        }
    }

    fn push(&mut self, word: String, count: u64) {
        self.index.insert(word.clone(), self.words.len() as WordId);
        self.words.push(word);
        self.counts.push(count);
    }

    /// Number of ids, including the unknown token.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 1
    }

    pub fn unk_id(&self) -> WordId {
        UNK_ID
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn id_or_unk(&self, word: &str) -> WordId {
        self.id(word).unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: WordId) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    /// In-vocabulary entries in id order, unknown token excluded.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.words
            .iter()
            .zip(&self.counts)
            .skip(1)
            .map(|(w, &c)| (w.as_str(), c))
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> TokenStream {
        let ids: Vec<WordId> = words.iter().map(|w| self.id_or_unk(w.as_ref())).collect();
        TokenStream::new(ids)
    }

    pub fn decode(&self, stream: &TokenStream) -> Vec<&str> {
        stream
            .ids()
            .iter()
            .map(|&id| self.word(id).unwrap_or(UNK_TOKEN))
            .collect()
    }

    /// Hex SHA-256 over the id-ordered word list; identifies the id mapping.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for w in &self.words {
            hasher.update(w.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }

    /// `word<TAB>count` per entry, unknown token omitted.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        for (w, c) in self.entries() {
            writeln!(out, "{w}\t{c}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self, CorpusError> {
        let mut vocab = Vocabulary::unk_only();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(n + 1, "expected word<TAB>count"))?;
            let count: u64 = count
                .parse()
                .map_err(|_| parse_err(n + 1, format!("bad count {count:?}")))?;
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(parse_err(n + 1, "word must be non-empty and whitespace-free"));
            }
            if vocab.index.contains_key(word) {
                return Err(parse_err(n + 1, format!("duplicate word {word:?}")));
            }
            vocab.push(word.to_string(), count);
        }
        Ok(vocab)
    }
}

/// Convenience wrapper: count `words` and build a vocabulary in one step.
pub fn build_vocabulary<S: AsRef<str>>(words: &[S], min_count: u64, max_size: usize) -> Vocabulary {
    Vocabulary::from_counts(&word_counts(words), min_count, max_size)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenStream {
    ids: Vec<WordId>,
    n_unknown: usize,
}

impl TokenStream {
    pub fn new(ids: Vec<WordId>) -> Self {
        let n_unknown = ids.iter().filter(|&&id| id == UNK_ID).count();
        TokenStream { ids, n_unknown }
    }

    pub fn ids(&self) -> &[WordId] {
        &self.ids
    }

    pub fn n_tokens(&self) -> usize {
        self.ids.len()
    }

    pub fn n_unknown(&self) -> usize {
        self.n_unknown
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> TokenStream {
        TokenStream::new(self.ids[range].to_vec())
    }
}

/// Sparse `(context, word) -> count` table with row and column marginals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    order: usize,
    events: BTreeMap<(Context, WordId), u64>,
    row_marginal: BTreeMap<Context, u64>,
    col_marginal: BTreeMap<WordId, u64>,
    total: u64,
}

impl CountTable {
    pub fn new(order: usize) -> Result<Self, CorpusError> {
        if order < 2 {
            return Err(CorpusError::BadOrder(order));
        }
        Ok(CountTable {
            order,
            events: BTreeMap::new(),
            row_marginal: BTreeMap::new(),
            col_marginal: BTreeMap::new(),
            total: 0,
        })
    }

    /// Adds `count` occurrences of `word` after `context`. Zero counts are ignored.
    pub fn add(&mut self, context: &[WordId], word: WordId, count: u64) {
        assert_eq!(context.len() + 1, self.order, "context length must be order - 1");
        if count == 0 {
            return;
        }
        *self.events.entry((context.to_vec(), word)).or_insert(0) += count;
        *self.row_marginal.entry(context.to_vec()).or_insert(0) += count;
        *self.col_marginal.entry(word).or_insert(0) += count;
        self.total += count;
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of events `N_T`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct `(context, word)` pairs.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, context: &[WordId], word: WordId) -> u64 {
        self.events
            .get(&(context.to_vec(), word))
            .copied()
            .unwrap_or(0)
    }

    /// Events in `(context, word)` order.
    pub fn events(&self) -> impl Iterator<Item = (&[WordId], WordId, u64)> + '_ {
        self.events.iter().map(|((c, w), &n)| (c.as_slice(), *w, n))
    }

    pub fn row_marginal(&self, context: &[WordId]) -> u64 {
        self.row_marginal.get(context).copied().unwrap_or(0)
    }

    pub fn col_marginal(&self, word: WordId) -> u64 {
        self.col_marginal.get(&word).copied().unwrap_or(0)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[WordId], u64)> + '_ {
        self.row_marginal.iter().map(|(c, &n)| (c.as_slice(), n))
    }

    pub fn cols(&self) -> impl Iterator<Item = (WordId, u64)> + '_ {
        self.col_marginal.iter().map(|(&w, &n)| (w, n))
    }

    /// Largest word id mentioned anywhere in the table, if any.
    pub fn max_word_id(&self) -> Option<WordId> {
        let from_rows = self.row_marginal.keys().flat_map(|c| c.iter().copied()).max();
        let from_cols = self.col_marginal.keys().next_back().copied();
        from_rows.max(from_cols)
    }

    /// `w_{i-M} ... w_{i-1}<TAB>w_i<TAB>count` lines in table order.
    pub fn write_tsv<W: Write>(&self, mut out: W, vocab: &Vocabulary) -> Result<(), CorpusError> {
        for (ctx, w, n) in self.events() {
            let ctx: Vec<&str> = ctx
                .iter()
                .map(|&id| vocab.word(id).unwrap_or(UNK_TOKEN))
                .collect();
            let word = vocab.word(w).unwrap_or(UNK_TOKEN);
            writeln!(out, "{}\t{}\t{}", ctx.join(" "), word, n)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`CountTable::write_tsv`]; unknown words map to id 0.
    pub fn read_tsv<R: BufRead>(
        input: R,
        vocab: &Vocabulary,
        order: usize,
    ) -> Result<Self, CorpusError> {
        let mut table = CountTable::new(order)?;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (ctx, word, count) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(c), Some(w), Some(n), None) => (c, w, n),
                _ => return Err(parse_err(n + 1, "expected context<TAB>word<TAB>count")),
            };
            let ctx: Context = ctx.split(' ').map(|w| vocab.id_or_unk(w)).collect();
            if ctx.len() + 1 != order {
                return Err(parse_err(
                    n + 1,
                    format!("context has {} words, order {order} needs {}", ctx.len(), order - 1),
                ));
            }
            let count: u64 = count
                .parse()
                .map_err(|_| parse_err(n + 1, format!("bad count {count:?}")))?;
            table.add(&ctx, vocab.id_or_unk(word), count);
        }
        Ok(table)
    }
}

/// One event per position `i >= order - 1`; the stream is treated as a single run of text.
pub fn count_ngrams(stream: &TokenStream, order: usize) -> Result<CountTable, CorpusError> {
    if order < 2 {
        return Err(CorpusError::BadOrder(order));
    }
    let ids = stream.ids();
    if ids.len() < order {
        return Err(CorpusError::TooShort {
            len: ids.len(),
            order,
        });
    }
    let mut raw: HashMap<&[WordId], u64> = HashMap::new();
    for window in ids.windows(order) {
        *raw.entry(window).or_insert(0) += 1;
    }
    let mut table = CountTable::new(order)?;
    for (window, n) in raw {
        let (ctx, w) = window.split_at(order - 1);
        table.add(ctx, w[0], n);
    }
    Ok(table)
}

/// Pointwise sum of tables of equal order.
pub fn merge_counts(tables: &[CountTable]) -> Result<CountTable, CorpusError> {
    let Some(first) = tables.first() else {
        return Err(CorpusError::BadOrder(0));
    };
    let mut merged = CountTable::new(first.order)?;
    for t in tables {
        if t.order != first.order {
            return Err(CorpusError::OrderMismatch {
                left: first.order,
                right: t.order,
            });
        }
        for (ctx, w, n) in t.events() {
            merged.add(ctx, w, n);
        }
    }
    Ok(merged)
}
