//! Byte trie for prefix matching of piece surfaces.

use std::collections::BTreeMap;

/// Immutable byte trie in compressed-row form. Node 0 is the root.
#[derive(Debug, Clone, Default)]
pub struct Trie<V: Copy> {
    // children of node n are edges[first[n]..first[n + 1]], sorted by byte
    first: Vec<u32>,
    edges: Vec<(u8, u32)>,
    values: Vec<Option<V>>,
}

#[derive(Default)]
struct BuildNode<V> {
    children: BTreeMap<u8, usize>,
    value: Option<V>,
}

pub struct TrieBuilder<V> {
    nodes: Vec<BuildNode<V>>,
}

impl<V: Copy> Default for TrieBuilder<V> {
    fn default() -> Self {
        Self {
            nodes: vec![BuildNode {
                children: BTreeMap::new(),
                value: None,
            }],
        }
    }
}

impl<V: Copy> TrieBuilder<V> {
    /// Inserts `key`; a later insert of the same key overwrites.
    pub fn insert(&mut self, key: &[u8], value: V) {
        let mut node = 0;
        for &b in key {
            let next = self.nodes.len();
            node = *self.nodes[node].children.entry(b).or_insert(next);
            if node == next {
                self.nodes.push(BuildNode {
                    children: BTreeMap::new(),
                    value: None,
                });
            }
        }
        self.nodes[node].value = Some(value);
    }

    pub fn build(self) -> Trie<V> {
        let mut first = Vec::with_capacity(self.nodes.len() + 1);
        let mut edges = Vec::with_capacity(self.nodes.len());
        let mut values = Vec::with_capacity(self.nodes.len());
        for node in self.nodes {
            first.push(edges.len() as u32);
            edges.extend(node.children.into_iter().map(|(b, n)| (b, n as u32)));
            values.push(node.value);
        }
        first.push(edges.len() as u32);
        Trie {
            first,
            edges,
            values,
        }
    }
}

impl<V: Copy> Trie<V> {
    fn child(&self, node: u32, byte: u8) -> Option<u32> {
        let lo = self.first[node as usize] as usize;
        let hi = self.first[node as usize + 1] as usize;
        let slice = &self.edges[lo..hi];
        slice
            .binary_search_by_key(&byte, |&(b, _)| b)
            .ok()
            .map(|i| slice[i].1)
    }

    /// Calls `f(len, value)` for every stored key that is a prefix of `text`,
    /// shortest first.
    pub fn for_each_prefix(&self, text: &[u8], mut f: impl FnMut(usize, V)) {
        if self.values.is_empty() {
            return;
        }
        let mut node = 0u32;
        for (i, &b) in text.iter().enumerate() {
            match self.child(node, b) {
                Some(next) => node = next,
                None => return,
            }
            if let Some(v) = self.values[node as usize] {
                f(i + 1, v);
            }
        }
    }

    pub fn longest_prefix(&self, text: &[u8]) -> Option<(usize, V)> {
        let mut best = None;
        self.for_each_prefix(text, |len, v| best = Some((len, v)));
        best
    }

    #[cfg(test)]
    fn get(&self, key: &[u8]) -> Option<V> {
        let mut found = None;
        self.for_each_prefix(key, |len, v| {
            if len == key.len() {
                found = Some(v)
            }
        });
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixes_shortest_first() {
        let mut b = TrieBuilder::default();
        b.insert(b"a", 1);
        b.insert(b"ab", 2);
        b.insert(b"abc", 3);
        b.insert(b"b", 4);
        let t = b.build();
        let mut seen = vec![];
        t.for_each_prefix(b"abd", |l, v| seen.push((l, v)));
        assert_eq!(seen, vec![(1, 1), (2, 2)]);
        assert_eq!(t.longest_prefix(b"abcz"), Some((3, 3)));
        assert_eq!(t.get(b"ab"), Some(2));
        assert_eq!(t.get(b"abx"), None);
        assert_eq!(t.longest_prefix(b"z"), None);
    }

    #[test]
    fn empty_trie() {
        let t: Trie<u32> = TrieBuilder::default().build();
        assert_eq!(t.longest_prefix(b"abc"), None);
    }
}
