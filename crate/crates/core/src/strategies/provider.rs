use crate::error::Result;
use crate::logits::{LogitVector, TokenId, Vocabulary};

/// Source of next-token logits for a prompt and the tokens generated so far.
///
/// Each call to [`LogitProvider::logits`] counts as one forward pass.
pub trait LogitProvider {
    fn vocab(&self) -> &Vocabulary;

    /// End-of-sequence token; decoding stops once it is emitted.
    fn eos(&self) -> Option<TokenId> {
        None
    }

    fn logits(&mut self, prompt: &str, history: &[TokenId]) -> Result<LogitVector>;
}

impl<P: LogitProvider + ?Sized> LogitProvider for &mut P {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }

    fn eos(&self) -> Option<TokenId> {
        (**self).eos()
    }

    fn logits(&mut self, prompt: &str, history: &[TokenId]) -> Result<LogitVector> {
        (**self).logits(prompt, history)
    }
}

impl<P: LogitProvider + ?Sized> LogitProvider for Box<P> {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }

    fn eos(&self) -> Option<TokenId> {
        (**self).eos()
    }

    fn logits(&mut self, prompt: &str, history: &[TokenId]) -> Result<LogitVector> {
        (**self).logits(prompt, history)
    }
}

/// Wraps a provider and counts forward passes.
pub struct CountingProvider<P> {
    inner: P,
    calls: u64,
}

impl<P> CountingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, calls: 0 }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn into_inner(self) -> P {
        self.inner
    }
}

impl<P: LogitProvider> LogitProvider for CountingProvider<P> {
    fn vocab(&self) -> &Vocabulary {
        self.inner.vocab()
    }

    fn eos(&self) -> Option<TokenId> {
        self.inner.eos()
    }

    fn logits(&mut self, prompt: &str, history: &[TokenId]) -> Result<LogitVector> {
        self.calls += 1;
        self.inner.logits(prompt, history)
    }
}
