//! Probabilistic suffix tree over observer response-time symbols.
//!
//! Every node stands for a context `S` (oldest symbol first, most recent
//! last) and stores the next-symbol distribution
//!
//! ```text
//! P(a | S) = N(S·a) / N(S)
//! ```
//!
//! where `N(S)` counts overlapping occurrences of `S` in the training sequence
//! and `N(S·a)` counts those immediately followed by `a`. A child extends its
//! parent's context by one older symbol, so prediction walks from the root
//! along the most recent symbols and uses the deepest node it reaches.
//!
//! Counting is a single pass over the sequence that descends the tree once
//! per end position (`O(σ·L)` map updates).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::taskmodel::Time;

/// A response time used as an alphabet member.
pub type Symbol = Time;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PstError {
    #[error("training sequence needs at least 2 symbols, got {0}")]
    SequenceTooShort(usize),
    #[error("maximum depth must be at least 1")]
    InvalidDepth,
    #[error("p_min must lie in [0, 1), got {0}")]
    InvalidPMin(f64),
    #[error("context does not occur in the sequence")]
    UndefinedContext,
    #[error("malformed tree record: {0}")]
    MalformedRecord(&'static str),
}

/// N(S): overlapping occurrences of `suffix` in `seq`. The empty context
/// occurs once per symbol.
pub fn count_suffix(seq: &[Symbol], suffix: &[Symbol]) -> u64 {
    if suffix.is_empty() {
        return seq.len() as u64;
    }
    seq.windows(suffix.len()).filter(|w| *w == suffix).count() as u64
}

/// N(S·a): occurrences of `suffix` immediately followed by `next`.
pub fn count_followed(seq: &[Symbol], suffix: &[Symbol], next: Symbol) -> u64 {
    let k = suffix.len();
    seq.windows(k + 1)
        .filter(|w| w[k] == next && &w[..k] == suffix)
        .count() as u64
}

/// P(a | S) straight from the counts.
pub fn cond_prob(seq: &[Symbol], suffix: &[Symbol], next: Symbol) -> Result<f64, PstError> {
    let n = count_suffix(seq, suffix);
    if n == 0 {
        return Err(PstError::UndefinedContext);
    }
    Ok(count_followed(seq, suffix, next) as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PstNode {
    suffix: Vec<Symbol>,
    count: u64,
    successor_counts: BTreeMap<Symbol, u64>,
    successor_probs: BTreeMap<Symbol, f64>,
    children: BTreeMap<Symbol, PstNode>,
}

impl PstNode {
    /// Context of this node, oldest symbol first.
    pub fn suffix(&self) -> &[Symbol] {
        &self.suffix
    }

    /// N(S).
    pub fn count(&self) -> u64 {
        self.count
    }

    /// N(S·a) for the retained successors.
    pub fn successor_counts(&self) -> &BTreeMap<Symbol, u64> {
        &self.successor_counts
    }

    /// P(a | S) for the retained successors.
    pub fn successor_probs(&self) -> &BTreeMap<Symbol, f64> {
        &self.successor_probs
    }

    /// Children keyed by the older symbol they prepend.
    pub fn children(&self) -> &BTreeMap<Symbol, PstNode> {
        &self.children
    }

    pub fn child(&self, older: Symbol) -> Option<&PstNode> {
        self.children.get(&older)
    }

    /// Most probable successor, smallest symbol on ties.
    pub fn argmax(&self) -> Option<Symbol> {
        let mut best: Option<(Symbol, f64)> = None;
        for (&a, &p) in &self.successor_probs {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((a, p));
            }
        }
        best.map(|(a, _)| a)
    }

    fn child_mut(&mut self, older: Symbol) -> &mut PstNode {
        let depth_suffix = &self.suffix;
        self.children.entry(older).or_insert_with(|| {
            let mut suffix = Vec::with_capacity(depth_suffix.len() + 1);
            suffix.push(older);
            suffix.extend_from_slice(depth_suffix);
            PstNode { suffix, ..PstNode::default() }
        })
    }

    /// Keep successors with P > p_min; drop subtrees with nothing admitted.
    /// Returns whether the node should stay in the tree.
    fn prune(&mut self, p_min: f64) -> bool {
        let n = self.count as f64;
        self.successor_counts.retain(|_, c| *c as f64 / n > p_min);
        self.successor_probs = self
            .successor_counts
            .iter()
            .map(|(&a, &c)| (a, c as f64 / n))
            .collect();
        self.children.retain(|_, child| child.prune(p_min));
        !self.successor_probs.is_empty() || !self.children.is_empty()
    }

    fn visit<'a>(&'a self, out: &mut Vec<&'a PstNode>) {
        out.push(self);
        for child in self.children.values() {
            child.visit(out);
        }
    }
}

/// Raw suffix and successor counts for every context up to `max_len`, before
/// any thresholding.
#[derive(Debug, Clone)]
pub struct SuffixCounts {
    root: PstNode,
    max_len: usize,
}

impl SuffixCounts {
    pub fn new(seq: &[Symbol], max_len: usize) -> Self {
        let mut root = PstNode { count: seq.len() as u64, ..PstNode::default() };
        for &a in seq {
            *root.successor_counts.entry(a).or_default() += 1;
        }
        // every context ending just before position `end`
        for end in 1..=seq.len() {
            let next = seq.get(end).copied();
            let mut node = &mut root;
            for l in 1..=max_len.min(end) {
                node = node.child_mut(seq[end - l]);
                node.count += 1;
                if let Some(a) = next {
                    *node.successor_counts.entry(a).or_default() += 1;
                }
            }
        }
        SuffixCounts { root, max_len }
    }

    fn lookup(&self, suffix: &[Symbol]) -> Option<&PstNode> {
        if suffix.len() > self.max_len {
            return None;
        }
        suffix
            .iter()
            .rev()
            .try_fold(&self.root, |node, s| node.children.get(s))
    }

    /// N(S); zero for absent contexts. Panics if `suffix` is longer than the
    /// counted depth.
    pub fn count(&self, suffix: &[Symbol]) -> u64 {
        assert!(suffix.len() <= self.max_len, "context longer than counted depth");
        self.lookup(suffix).map_or(0, |n| n.count)
    }

    /// N(S·a); zero for absent contexts.
    pub fn followed(&self, suffix: &[Symbol], next: Symbol) -> u64 {
        assert!(suffix.len() <= self.max_len, "context longer than counted depth");
        self.lookup(suffix)
            .and_then(|n| n.successor_counts.get(&next).copied())
            .unwrap_or(0)
    }
}

/// Flat, serialisable form of one tree node.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PstNodeRecord {
    pub suffix: Vec<Symbol>,
    pub count: u64,
    pub successors: BTreeMap<Symbol, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pst {
    root: PstNode,
    max_depth: usize,
    p_min: f64,
    alphabet: Vec<Symbol>,
    training_length: usize,
    fallback: Symbol,
}

impl Pst {
    /// Build a tree of depth at most `max_depth`, keeping successors whose
    /// probability exceeds `p_min`.
    pub fn build(seq: &[Symbol], max_depth: usize, p_min: f64) -> Result<Pst, PstError> {
        if seq.len() < 2 {
            return Err(PstError::SequenceTooShort(seq.len()));
        }
        if max_depth == 0 {
            return Err(PstError::InvalidDepth);
        }
        if !(0.0..1.0).contains(&p_min) {
            return Err(PstError::InvalidPMin(p_min));
        }
        let SuffixCounts { mut root, .. } = SuffixCounts::new(seq, max_depth);
        let fallback = most_frequent(&root.successor_counts);
        root.prune(p_min);
        let mut alphabet: Vec<Symbol> = seq.to_vec();
        alphabet.sort_unstable();
        alphabet.dedup();
        Ok(Pst {
            root,
            max_depth,
            p_min,
            alphabet,
            training_length: seq.len(),
            fallback,
        })
    }

    pub fn root(&self) -> &PstNode {
        &self.root
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn alphabet(&self) -> &[Symbol] {
        &self.alphabet
    }

    pub fn training_length(&self) -> usize {
        self.training_length
    }

    /// Node for `suffix` (oldest symbol first), if it is in the tree.
    pub fn node(&self, suffix: &[Symbol]) -> Option<&PstNode> {
        suffix
            .iter()
            .rev()
            .try_fold(&self.root, |node, s| node.children.get(s))
    }

    /// Stored P(a | S), if both the node and the successor were retained.
    pub fn probability(&self, suffix: &[Symbol], next: Symbol) -> Option<f64> {
        self.node(suffix)?.successor_probs.get(&next).copied()
    }

    /// All nodes in depth-first order, root first.
    pub fn nodes(&self) -> Vec<&PstNode> {
        let mut out = Vec::new();
        self.root.visit(&mut out);
        out
    }

    /// The context actually used to predict after `recent`: the deepest node
    /// matching a suffix of `recent` (symbols outside the alphabet removed),
    /// backed off toward the root until a node with successors is found.
    pub fn context_for(&self, recent: &[Symbol]) -> &PstNode {
        let mut path: Vec<&PstNode> = Vec::with_capacity(self.max_depth + 1);
        path.push(&self.root);
        let known = recent
            .iter()
            .rev()
            .filter(|s| self.alphabet.binary_search(s).is_ok())
            .take(self.max_depth);
        for s in known {
            match path.last().unwrap().children.get(s) {
                Some(child) => path.push(child),
                None => break,
            }
        }
        path.iter()
            .rev()
            .find(|n| !n.successor_probs.is_empty())
            .copied()
            .unwrap_or(&self.root)
    }

    /// Most probable next symbol after `recent`.
    pub fn predict(&self, recent: &[Symbol]) -> Symbol {
        self.context_for(recent).argmax().unwrap_or(self.fallback)
    }

    /// Repeated one-step prediction, feeding each predicted symbol back in.
    pub fn predict_ahead(&self, recent: &[Symbol], steps: usize) -> Vec<Symbol> {
        let keep = self.max_depth.min(recent.len());
        let mut window: Vec<Symbol> = recent[recent.len() - keep..].to_vec();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let next = self.predict(&window);
            out.push(next);
            window.push(next);
            if window.len() > self.max_depth {
                window.remove(0);
            }
        }
        out
    }

    pub fn to_records(&self) -> Vec<PstNodeRecord> {
        self.nodes()
            .into_iter()
            .map(|n| PstNodeRecord {
                suffix: n.suffix.clone(),
                count: n.count,
                successors: n.successor_probs.clone(),
            })
            .collect()
    }

    /// Rebuild a tree from records produced by [`Pst::to_records`].
    pub fn from_records(
        records: &[PstNodeRecord],
        max_depth: usize,
        p_min: f64,
        alphabet: Vec<Symbol>,
        training_length: usize,
    ) -> Result<Pst, PstError> {
        let mut root: Option<PstNode> = None;
        let mut sorted: Vec<&PstNodeRecord> = records.iter().collect();
        sorted.sort_by_key(|r| r.suffix.len());
        for rec in sorted {
            if rec.suffix.len() > max_depth {
                return Err(PstError::MalformedRecord("node deeper than max_depth"));
            }
            if rec.count == 0 && !rec.successors.is_empty() {
                return Err(PstError::MalformedRecord("successors on a zero-count node"));
            }
            let node = PstNode {
                suffix: rec.suffix.clone(),
                count: rec.count,
                successor_counts: rec
                    .successors
                    .iter()
                    .map(|(&a, &p)| (a, libm::round(p * rec.count as f64) as u64))
                    .collect(),
                successor_probs: rec.successors.clone(),
                children: BTreeMap::new(),
            };
            if rec.suffix.is_empty() {
                if root.is_some() {
                    return Err(PstError::MalformedRecord("duplicate root"));
                }
                root = Some(node);
                continue;
            }
            let mut parent = root.as_mut().ok_or(PstError::MalformedRecord("missing root"))?;
            for s in rec.suffix[1..].iter().rev() {
                parent = parent
                    .children
                    .get_mut(s)
                    .ok_or(PstError::MalformedRecord("node without parent"))?;
            }
            parent.children.insert(rec.suffix[0], node);
        }
        let root = root.ok_or(PstError::MalformedRecord("missing root"))?;
        let fallback = root
            .argmax()
            .or_else(|| alphabet.first().copied())
            .ok_or(PstError::MalformedRecord("empty alphabet"))?;
        Ok(Pst { root, max_depth, p_min, alphabet, training_length, fallback })
    }
}

fn most_frequent(counts: &BTreeMap<Symbol, u64>) -> Symbol {
    let mut best = (0, 0);
    for (&a, &c) in counts {
        if c > best.1 {
            best = (a, c);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const R1: Symbol = 1;
    const R2: Symbol = 2;
    const R3: Symbol = 3;

    pub(crate) fn example_sequence() -> Vec<Symbol> {
        let base = [R1, R2, R1, R3, R1, R2, R2, R3, R1];
        base.iter().copied().cycle().take(1200).collect()
    }

    #[test]
    fn example_counts() {
        let seq = example_sequence();
        assert_eq!(count_suffix(&seq, &[R1, R2]), 267);
        assert_eq!(count_followed(&seq, &[R1, R2], R1), 134);
        assert_eq!(count_followed(&seq, &[R1, R2], R2), 133);
        assert_eq!(cond_prob(&seq, &[R1, R2], R1).unwrap(), 134.0 / 267.0);
        assert_eq!(count_followed(&seq, &[R1, R2], R3), 0);
    }

    #[test]
    fn count_edge_cases() {
        assert_eq!(count_suffix(&[1, 1, 1, 1], &[1, 1]), 3);
        assert_eq!(count_suffix(&[1, 2], &[1, 2, 3]), 0);
        assert_eq!(cond_prob(&[1, 2], &[3], 1), Err(PstError::UndefinedContext));
        let seq = vec![5; 10];
        // the last occurrence has no successor
        assert_eq!(cond_prob(&seq, &[5], 5).unwrap(), 9.0 / 10.0);
        assert_eq!(cond_prob(&seq, &[5, 5], 5).unwrap(), 8.0 / 9.0);
    }

    #[test]
    fn build_matches_example_tree() {
        let pst = Pst::build(&example_sequence(), 3, 0.001).unwrap();
        let root = pst.root().successor_probs();
        assert!((root[&R1] - 0.44).abs() <= 0.01);
        assert!((root[&R2] - 0.33).abs() <= 0.01);
        assert!((root[&R3] - 0.22).abs() <= 0.01);
        assert_eq!(pst.probability(&[R3], R1), Some(1.0));
        assert_eq!(pst.probability(&[R1, R2], R1), Some(134.0 / 267.0));
        assert_eq!(pst.probability(&[R1, R2], R2), Some(133.0 / 267.0));
        assert!(pst.nodes().iter().all(|n| n.suffix().len() <= 3));
        assert_eq!(pst.root().count(), 1200);
    }

    #[test]
    fn prediction_examples() {
        let pst = Pst::build(&example_sequence(), 3, 0.001).unwrap();
        assert_eq!(pst.predict(&[R2, R2, R3]), R1);
        assert_eq!(pst.predict(&[R1, R3]), R1);
        // 134 vs 133: the deeper contexts disambiguate, the depth-2 one says r1
        assert_eq!(pst.node(&[R1, R2]).unwrap().argmax(), Some(R1));
    }

    #[test]
    fn constant_sequence_is_a_chain() {
        let pst = Pst::build(&[7; 50], 4, 0.001).unwrap();
        let mut node = pst.root();
        for depth in 1..=4 {
            node = node.child(7).unwrap();
            assert_eq!(node.suffix().len(), depth);
            assert!(node.successor_probs()[&7] > 0.9);
            assert_eq!(node.children().len(), usize::from(depth < 4));
        }
        assert_eq!(pst.predict(&[7, 7]), 7);
        assert_eq!(pst.predict(&[]), 7);
    }

    #[test]
    fn unknown_symbols_are_stripped() {
        let pst = Pst::build(&example_sequence(), 3, 0.001).unwrap();
        assert_eq!(pst.predict(&[R3, 99]), pst.predict(&[R3]));
        assert_eq!(pst.predict(&[42, 99]), pst.root().argmax().unwrap());
    }

    #[test]
    fn back_off_from_terminal_context() {
        // "9" only appears last, so its node has no successors
        let seq = [1, 2, 1, 2, 1, 9];
        let pst = Pst::build(&seq, 2, 0.0).unwrap();
        assert!(pst.node(&[9]).is_none());
        assert_eq!(pst.predict(&[1, 9]), pst.root().argmax().unwrap());
    }

    #[test]
    fn threshold_drops_rare_successors() {
        let mut seq = vec![1; 200];
        seq.extend([2, 1]);
        let pst = Pst::build(&seq, 1, 0.05).unwrap();
        let node = pst.node(&[1]).unwrap();
        assert!(!node.successor_probs().contains_key(&2));
        assert!(node.successor_probs().values().all(|&p| p > 0.05));
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(Pst::build(&[], 3, 0.001), Err(PstError::SequenceTooShort(0)));
        assert_eq!(Pst::build(&[1], 3, 0.001), Err(PstError::SequenceTooShort(1)));
        assert_eq!(Pst::build(&[1, 2], 0, 0.001), Err(PstError::InvalidDepth));
        assert_eq!(Pst::build(&[1, 2], 2, 1.0), Err(PstError::InvalidPMin(1.0)));
    }

    #[test]
    fn records_round_trip() {
        let pst = Pst::build(&example_sequence(), 3, 0.001).unwrap();
        let back = Pst::from_records(
            &pst.to_records(),
            3,
            0.001,
            pst.alphabet().to_vec(),
            pst.training_length(),
        )
        .unwrap();
        assert_eq!(back, pst);
    }

    #[test]
    fn predict_ahead_follows_cycle() {
        let seq: Vec<Symbol> = [4, 5, 6].iter().copied().cycle().take(60).collect();
        let pst = Pst::build(&seq, 2, 0.001).unwrap();
        assert_eq!(pst.predict_ahead(&[4, 5], 4), vec![6, 4, 5, 6]);
    }
}
