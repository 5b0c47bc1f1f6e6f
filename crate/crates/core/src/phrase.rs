//! Leftmost-longest multi-token phrase matching over token sequences.

use std::collections::HashMap;

use crate::text::{match_key, tokenize, Token};

/// Maps token-key sequences to payloads.
#[derive(Debug, Clone)]
pub(crate) struct PhraseTable<V> {
    entries: HashMap<Vec<String>, V>,
    max_tokens: usize,
}

impl<V> Default for PhraseTable<V> {
    fn default() -> Self {
        Self {
            entries: HashMap::new(),
            max_tokens: 0,
        }
    }
}

/// Token keys of a phrase, using the same tokenizer as the texts it will be
/// matched against.
pub(crate) fn phrase_key(phrase: &str) -> Vec<String> {
    tokenize(phrase)
        .iter()
        .map(|t| match_key(&t.surface))
        .collect()
}

impl<V> PhraseTable<V> {
    pub(crate) fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    pub(crate) fn get_mut(&mut self, key: &[String]) -> Option<&mut V> {
        self.entries.get_mut(key)
    }

    pub(crate) fn insert(&mut self, key: Vec<String>, value: V) {
        self.max_tokens = self.max_tokens.max(key.len());
        self.entries.insert(key, value);
    }

    /// Scans left to right; at each position the longest phrase wins and the
    /// scan resumes after it. Returns `(first_token, token_count, payload)`.
    pub(crate) fn find<'a>(&'a self, tokens: &[Token]) -> Vec<(usize, usize, &'a V)> {
        let keys: Vec<String> = tokens.iter().map(|t| match_key(&t.surface)).collect();
        let mut found = Vec::new();
        let mut i = 0;
        while i < keys.len() {
            let longest = self.max_tokens.min(keys.len() - i);
            let hit = (1..=longest)
                .rev()
                .find_map(|n| self.entries.get(&keys[i..i + n]).map(|v| (n, v)));
            match hit {
                Some((n, v)) => {
                    found.push((i, n, v));
                    i += n;
                }
                None => i += 1,
            }
        }
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_match_wins_and_no_overlap() {
        let mut table = PhraseTable::default();
        table.insert(phrase_key("pain"), 1);
        table.insert(phrase_key("no pain"), 2);
        table.insert(phrase_key("pain no"), 3);
        let tokens = tokenize("No pain no inflammation");
        let found = table.find(&tokens);
        assert_eq!(found, vec![(0, 2, &2)]);
        assert_eq!(table.max_tokens(), 2);
    }

    #[test]
    fn keys_fold_case_and_hashtags() {
        assert_eq!(phrase_key("There’s NO way"), ["there's", "no", "way"]);
        assert_eq!(phrase_key("#RestlessLegs"), ["restlesslegs"]);
    }
}
