use crate::corpus::{ApplicationId, Query, BOS, EOS};

/// Flat storage of `(history window, target, application)` triples.
///
/// A window holds at most `context_limit` words; `<s>` is prepended only
/// when the window reaches back to the start of the query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExampleSet {
    offsets: Vec<usize>,
    tokens: Vec<u32>,
    targets: Vec<u32>,
    apps: Vec<ApplicationId>,
}

impl ExampleSet {
    pub fn new() -> Self {
        ExampleSet {
            offsets: vec![0],
            ..Default::default()
        }
    }

    /// One example per word plus one for `</s>`, for every query.
    pub fn from_queries(queries: &[Query], context_limit: Option<usize>) -> Self {
        let mut set = ExampleSet::new();
        for q in queries {
            set.extend_query(&q.tokens, q.application, context_limit);
        }
        set
    }

    pub fn extend_query(&mut self, tokens: &[u32], app: ApplicationId, context_limit: Option<usize>) {
        let limit = context_limit.unwrap_or(usize::MAX);
        for i in 0..=tokens.len() {
            let target = tokens.get(i).copied().unwrap_or(EOS);
            let start = i.saturating_sub(limit);
            if start == 0 {
                self.tokens.push(BOS);
            }
            self.tokens.extend_from_slice(&tokens[start..i]);
            self.offsets.push(self.tokens.len());
            self.targets.push(target);
            self.apps.push(app);
        }
    }

    pub fn push(&mut self, history: &[u32], target: u32, app: ApplicationId) {
        self.tokens.extend_from_slice(history);
        self.offsets.push(self.tokens.len());
        self.targets.push(target);
        self.apps.push(app);
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn history(&self, i: usize) -> &[u32] {
        &self.tokens[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn target(&self, i: usize) -> u32 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[u32] {
        &self.targets
    }

    pub fn app(&self, i: usize) -> ApplicationId {
        self.apps[i]
    }

    pub fn apps(&self) -> &[ApplicationId] {
        &self.apps
    }

    /// Largest token id referenced anywhere in the set.
    pub fn max_id(&self) -> Option<u32> {
        self.tokens.iter().chain(&self.targets).copied().max()
    }
}
