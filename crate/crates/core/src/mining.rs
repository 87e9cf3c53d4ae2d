//! Sequential pattern mining under a gap constraint.
//!
//! A pattern occurs in a sequence when its symbols appear at increasing
//! positions with at most `gap` other symbols between consecutive matches.
//! A pattern is frequent when it occurs in at least `min_support` (a fraction)
//! of the corpus sequences. Mining runs a depth-first prefix projection: each
//! projection carries, per supporting sequence, the sorted list of positions
//! where an occurrence of the current prefix can end, which makes the gap
//! check local and prunes by anti-monotonicity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A frequent pattern with its stable vocabulary index.
///
/// Ids are assigned in lexicographic order of the symbol lists, so the same
/// corpus and parameters always produce the same vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapPattern {
    pub id: u32,
    pub symbols: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningParams {
    /// Minimum fraction of sequences that must contain the pattern, in (0, 1].
    pub min_support: f64,
    /// Maximum number of symbols allowed between consecutive pattern symbols.
    pub gap: u32,
    pub max_len: usize,
}

impl MiningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_support > 0.0 && self.min_support <= 1.0) {
            return Err(Error::Config(format!(
                "min_support must be in (0, 1], got {}",
                self.min_support
            )));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_pattern_length must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            min_support: 0.05,
            gap: 4,
            max_len: 8,
        }
    }
}

/// The mined vocabulary plus, for every input sequence, the sorted ids of the
/// patterns it contains. A sequence may contain no pattern at all; its id list
/// is then empty.
#[derive(Debug, Clone, PartialEq)]
pub struct MinedPatterns {
    pub patterns: Vec<GapPattern>,
    pub per_sequence: Vec<Vec<u32>>,
    pub gap: u32,
}

/// A prefix projection: for each supporting sequence, where occurrences of the
/// current prefix can end.
struct Projection {
    seq: usize,
    ends: Vec<usize>,
}

pub fn mine_patterns(corpus: &[Vec<u32>], params: &MiningParams) -> Result<MinedPatterns> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(Error::Data("pattern mining requires a non-empty corpus".into()));
    }
    let threshold = params.min_support * corpus.len() as f64;

    // Seed projections: positions of every symbol, children visited in
    // ascending symbol order so ids come out lexicographic.
    let mut roots: std::collections::BTreeMap<u32, Vec<Projection>> =
        std::collections::BTreeMap::new();
    for (seq_idx, seq) in corpus.iter().enumerate() {
        let mut positions: std::collections::BTreeMap<u32, Vec<usize>> =
            std::collections::BTreeMap::new();
        for (pos, sym) in seq.iter().enumerate() {
            positions.entry(*sym).or_default().push(pos);
        }
        for (sym, ends) in positions {
            roots.entry(sym).or_default().push(Projection {
                seq: seq_idx,
                ends,
            });
        }
    }

    let mut miner = Miner {
        corpus,
        gap: params.gap as usize,
        max_len: params.max_len,
        threshold,
        patterns: Vec::new(),
        per_sequence: vec![Vec::new(); corpus.len()],
    };
    let mut prefix = Vec::new();
    for (sym, projections) in roots {
        miner.grow(&mut prefix, sym, projections);
    }

    Ok(MinedPatterns {
        patterns: miner.patterns,
        per_sequence: miner.per_sequence,
        gap: params.gap,
    })
}

struct Miner<'a> {
    corpus: &'a [Vec<u32>],
    gap: usize,
    max_len: usize,
    threshold: f64,
    patterns: Vec<GapPattern>,
    per_sequence: Vec<Vec<u32>>,
}

impl Miner<'_> {
    fn grow(&mut self, prefix: &mut Vec<u32>, sym: u32, projections: Vec<Projection>) {
        if (projections.len() as f64) < self.threshold {
            return;
        }
        prefix.push(sym);
        let id = self.patterns.len() as u32;
        self.patterns.push(GapPattern {
            id,
            symbols: prefix.clone(),
        });
        for p in &projections {
            self.per_sequence[p.seq].push(id);
        }

        if prefix.len() < self.max_len {
            let mut children: std::collections::BTreeMap<u32, Vec<Projection>> =
                std::collections::BTreeMap::new();
            for p in &projections {
                let seq = &self.corpus[p.seq];
                let mut next_by_symbol: std::collections::BTreeMap<u32, Vec<usize>> =
                    std::collections::BTreeMap::new();
                // The feasible next positions are the union of (end, end+gap+1]
                // windows; `covered` avoids rescanning overlap.
                let mut covered = 0usize;
                for &end in &p.ends {
                    let lo = (end + 1).max(covered);
                    let hi = (end + self.gap + 2).min(seq.len());
                    for pos in lo..hi {
                        next_by_symbol.entry(seq[pos]).or_default().push(pos);
                    }
                    covered = covered.max(hi);
                }
                for (next_sym, ends) in next_by_symbol {
                    children.entry(next_sym).or_default().push(Projection {
                        seq: p.seq,
                        ends,
                    });
                }
            }
            for (next_sym, child) in children {
                self.grow(prefix, next_sym, child);
            }
        }
        prefix.pop();
    }
}

/// True when `pattern` has at least one gap-feasible occurrence in `sequence`.
pub fn contains_pattern(sequence: &[u32], pattern: &[u32], gap: u32) -> bool {
    if pattern.is_empty() || pattern.len() > sequence.len() {
        return pattern.is_empty();
    }
    let gap = gap as usize;
    let mut ends: Vec<usize> = sequence
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == pattern[0])
        .map(|(i, _)| i)
        .collect();
    for sym in &pattern[1..] {
        if ends.is_empty() {
            return false;
        }
        let mut next = Vec::new();
        let mut covered = 0usize;
        for &end in &ends {
            let lo = (end + 1).max(covered);
            let hi = (end + gap + 2).min(sequence.len());
            for pos in lo..hi {
                if sequence[pos] == *sym {
                    next.push(pos);
                }
            }
            covered = covered.max(hi);
        }
        ends = next;
    }
    !ends.is_empty()
}

/// Annotates a sequence against an existing vocabulary, returning the sorted
/// ids of all patterns it contains. Used when inferring vectors for sequences
/// unseen at mining time.
pub fn annotate_sequence(sequence: &[u32], patterns: &[GapPattern], gap: u32) -> Vec<u32> {
    // Cheap superset prefilter: a pattern over symbols the sequence lacks
    // cannot match. Symbols above 63 share one mask bit, which only weakens
    // the filter, never the answer.
    let mask_of = |syms: &[u32]| -> u64 {
        syms.iter().fold(0u64, |m, s| m | 1u64 << (*s).min(63))
    };
    let seq_mask = mask_of(sequence);
    patterns
        .iter()
        .filter(|p| {
            let pm = mask_of(&p.symbols);
            pm & seq_mask == pm && contains_pattern(sequence, &p.symbols, gap)
        })
        .map(|p| p.id)
        .collect()
}
