use crate::corpus::WordId;
use crate::models::{check_query, LanguageModel, ModelError};
use crate::scalar::Real;

/// `p(w | ctx) = 1 / V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformLm {
    vocab_size: usize,
    order: usize,
}

impl UniformLm {
    pub fn new(vocab_size: usize, order: usize) -> Self {
        UniformLm { vocab_size, order }
    }
}

impl<F: Real> LanguageModel<F> for UniformLm {
    fn order(&self) -> usize {
        self.order
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn prob(&self, context: &[WordId], word: WordId) -> Result<F, ModelError> {
        check_query(self.order, self.vocab_size, context, word)?;
        Ok(F::one() / F::count(self.vocab_size as u64))
    }
}
