//! Shared-prefix paths.
//!
//! A [`Path`] at level `n` is an immutable last block plus a handle on its
//! length-`n-1` prefix. Extending a path never copies the prefix, so the
//! reservoirs of successive levels share storage. A *detached* path keeps
//! its level and last block but has dropped the prefix; this is how
//! marginal-only storage is represented.

use std::fmt;
use std::sync::Arc;

pub struct Path<B>(Arc<Node<B>>);

struct Node<B> {
    block: B,
    level: usize,
    prefix: Option<Path<B>>,
}

impl<B> Clone for Path<B> {
    fn clone(&self) -> Self {
        Path(Arc::clone(&self.0))
    }
}

impl<B> Path<B> {
    /// A level-1 path.
    pub fn root(block: B) -> Self {
        Path(Arc::new(Node {
            block,
            level: 1,
            prefix: None,
        }))
    }

    /// A path at `level` that only remembers its last block.
    pub fn detached(block: B, level: usize) -> Self {
        assert!(level >= 1, "paths start at level 1");
        Path(Arc::new(Node {
            block,
            level,
            prefix: None,
        }))
    }

    pub fn extend(&self, block: B) -> Self {
        Path(Arc::new(Node {
            block,
            level: self.0.level + 1,
            prefix: Some(self.clone()),
        }))
    }

    pub fn level(&self) -> usize {
        self.0.level
    }

    pub fn last(&self) -> &B {
        &self.0.block
    }

    pub fn prefix(&self) -> Option<&Path<B>> {
        self.0.prefix.as_ref()
    }

    /// True when every block back to level 1 is still reachable.
    pub fn is_complete(&self) -> bool {
        let mut node = self;
        loop {
            if node.level() == 1 {
                return true;
            }
            match node.prefix() {
                Some(p) => node = p,
                None => return false,
            }
        }
    }

    /// Blocks from the last one backwards, as far as they are stored.
    pub fn iter_rev(&self) -> impl Iterator<Item = &B> {
        let mut cursor = Some(self);
        std::iter::from_fn(move || {
            let node = cursor?;
            cursor = node.prefix();
            Some(node.last())
        })
    }

    /// Block `k` (1-based) if it is still stored.
    pub fn block(&self, k: usize) -> Option<&B> {
        if k == 0 || k > self.level() {
            return None;
        }
        let mut node = self;
        while node.level() > k {
            node = node.prefix()?;
        }
        Some(node.last())
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl<B: Clone> Path<B> {
    pub fn from_blocks<I: IntoIterator<Item = B>>(blocks: I) -> Option<Self> {
        let mut iter = blocks.into_iter();
        let mut path = Path::root(iter.next()?);
        for b in iter {
            path = path.extend(b);
        }
        Some(path)
    }

    /// Same level and last block, prefix dropped.
    pub fn detach(&self) -> Self {
        if self.prefix().is_none() {
            return self.clone();
        }
        Path::detached(self.last().clone(), self.level())
    }

    /// All blocks in order, or `None` for a detached path.
    pub fn to_vec(&self) -> Option<Vec<B>> {
        if !self.is_complete() {
            return None;
        }
        let mut out: Vec<B> = self.iter_rev().cloned().collect();
        out.reverse();
        Some(out)
    }

    /// The stored blocks in order (only the last one for detached paths).
    pub fn stored_blocks(&self) -> Vec<B> {
        let mut out: Vec<B> = self.iter_rev().cloned().collect();
        out.reverse();
        out
    }
}

impl<B: PartialEq> PartialEq for Path<B> {
    fn eq(&self, other: &Self) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        self.level() == other.level()
            && self.last() == other.last()
            && match (self.prefix(), other.prefix()) {
                (None, None) => true,
                (Some(a), Some(b)) => a == b,
                _ => false,
            }
    }
}

impl<B: fmt::Debug> fmt::Debug for Path<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut blocks: Vec<&B> = self.iter_rev().collect();
        blocks.reverse();
        f.debug_struct("Path")
            .field("level", &self.level())
            .field("blocks", &blocks)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extend_shares_prefix() {
        let a = Path::root(1u8);
        let b = a.extend(2);
        let c = b.extend(3);
        assert_eq!(c.level(), 3);
        assert!(c.prefix().unwrap().ptr_eq(&b));
        assert_eq!(c.to_vec(), Some(vec![1, 2, 3]));
        assert_eq!(c.block(1), Some(&1));
        assert_eq!(c.block(4), None);
    }

    #[test]
    fn detached_keeps_level_only() {
        let c = Path::from_blocks([1, 2, 3]).unwrap();
        let d = c.detach();
        assert_eq!(d.level(), 3);
        assert_eq!(*d.last(), 3);
        assert!(!d.is_complete());
        assert_eq!(d.to_vec(), None);
        assert_eq!(d.stored_blocks(), vec![3]);
        assert_eq!(d.block(2), None);
        let e = d.extend(4);
        assert_eq!(e.level(), 4);
        assert_eq!(e.stored_blocks(), vec![3, 4]);
    }

    #[test]
    fn structural_equality() {
        let a = Path::from_blocks([0usize, 1]).unwrap();
        let b = Path::from_blocks([0usize, 1]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, b.detach());
    }
}
