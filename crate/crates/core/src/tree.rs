//! Level-order (BFS) indexing of the complete d-ary tree.
//!
//! The root has index 0 and the children of node `i` are `d*i + 1 ..= d*i + d`.
//! With this layout every level, and every level of every subtree, is a
//! contiguous index range, so supports of the sibling-subtree eigenvectors are
//! described by two ranges per level.

use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeGeometry {
    d: usize,
    h: usize,
    n: usize,
    /// Start index of each level `0..=h`, followed by `n`.
    level_offsets: Vec<usize>,
}

/// Tree edges as `(parent, child)` pairs ordered by child index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    pub edges: Vec<(usize, usize)>,
}

impl TreeGeometry {
    pub fn new(d: usize, h: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Sizing(format!(
                "branching factor d = {d} must be >= 2"
            )));
        }
        if h < 1 {
            return Err(Error::Sizing(format!("height h = {h} must be >= 1")));
        }
        let overflow = || Error::Sizing(format!("node count for d = {d}, h = {h} overflows"));
        let mut level_offsets = Vec::with_capacity(h + 2);
        let mut start = 0usize;
        let mut width = 1usize;
        for level in 0..=h {
            level_offsets.push(start);
            start = start.checked_add(width).ok_or_else(overflow)?;
            if level < h {
                width = width.checked_mul(d).ok_or_else(overflow)?;
            }
        }
        // children indices d*i + d of the last internal node must fit as well
        start.checked_mul(d).ok_or_else(overflow)?;
        level_offsets.push(start);
        Ok(Self {
            d,
            h,
            n: start,
            level_offsets,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn h(&self) -> usize {
        self.h
    }

    /// Number of nodes, `(d^(h+1) - 1) / (d - 1)`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Start index of each level `0..=h`.
    pub fn level_offsets(&self) -> &[usize] {
        &self.level_offsets[..=self.h]
    }

    pub fn level_range(&self, level: usize) -> Range<usize> {
        self.level_offsets[level]..self.level_offsets[level + 1]
    }

    pub fn level_size(&self, level: usize) -> usize {
        self.level_offsets[level + 1] - self.level_offsets[level]
    }

    /// Distance from the root.
    pub fn level(&self, v: usize) -> usize {
        debug_assert!(v < self.n);
        self.level_offsets.partition_point(|&start| start <= v) - 1
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v > 0).then(|| (v - 1) / self.d)
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v >= self.level_offsets[self.h]
    }

    /// Children of `v`; empty for leaves.
    pub fn children(&self, v: usize) -> Range<usize> {
        if self.is_leaf(v) {
            return 0..0;
        }
        let first = self.d * v + 1;
        first..first + self.d
    }

    /// The `c`-th child (1-based, `1..=d`) of a non-leaf node.
    pub fn child(&self, v: usize, c: usize) -> usize {
        debug_assert!(!self.is_leaf(v) && (1..=self.d).contains(&c));
        self.d * v + c
    }

    /// Nodes of the subtree rooted at `v` lying `depth_below` levels under `v`.
    pub fn subtree_level_slice(&self, v: usize, depth_below: usize) -> Result<Range<usize>> {
        if v >= self.n {
            return Err(Error::OutOfRange(format!(
                "node {v} not in tree of {} nodes",
                self.n
            )));
        }
        let level = self.level(v);
        if depth_below > self.h - level {
            return Err(Error::OutOfRange(format!(
                "depth {depth_below} below node {v} at level {level} exceeds height {}",
                self.h
            )));
        }
        let mut lo = v;
        let mut width = 1;
        for _ in 0..depth_below {
            lo = self.d * lo + 1;
            width *= self.d;
        }
        Ok(lo..lo + width)
    }

    pub fn edge_list(&self) -> EdgeList {
        EdgeList {
            edges: (1..self.n).map(|c| ((c - 1) / self.d, c)).collect(),
        }
    }

    /// Number of neighbours of `v` in the tree.
    pub fn degree(&self, v: usize) -> usize {
        let up = usize::from(v > 0);
        let down = if self.is_leaf(v) { 0 } else { self.d };
        up + down
    }
}

impl EdgeList {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}
