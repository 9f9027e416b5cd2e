//! Deterministic seed hierarchy.
//!
//! Every random stream in a run is derived from a single master seed through
//! a stable 64-bit hash of `(master, label, index)`. Streams are addressed by
//! name instead of being split off a shared generator, so adding a worker or
//! a new consumer never shifts the values another stream produces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every random stream in the crate.
pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// splitmix64 finalizer; spreads FNV's weak low bits over the whole word.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the child seed for `(master, label, index)`.
///
/// The byte layout is `master (LE) | label (UTF-8) | 0xFF | index (LE)`,
/// hashed with FNV-1a and finalized with splitmix64. `0xFF` never occurs in
/// UTF-8, so distinct labels cannot collide by concatenation.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &master.to_le_bytes());
    h = fnv1a(h, label.as_bytes());
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, &index.to_le_bytes());
    mix(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn child(&self, label: &str, index: u64) -> u64 {
        derive_seed(self.master, label, index)
    }

    /// A nested tree rooted at the child seed `(label, index)`.
    pub fn subtree(&self, label: &str, index: u64) -> SeedTree {
        SeedTree::new(self.child(label, index))
    }

    pub fn rng(&self, label: &str, index: u64) -> Rng {
        Rng::seed_from_u64(self.child(label, index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn same_inputs_same_seed() {
        let a = SeedTree::new(42);
        let b = SeedTree::new(42);
        assert_eq!(a.child("train", 3), b.child("train", 3));
        assert_eq!(a.subtree("iteration", 1), b.subtree("iteration", 1));
    }

    #[test]
    fn labels_indices_and_masters_separate_streams() {
        let tree = SeedTree::new(7);
        let mut seen = HashSet::new();
        for label in ["a", "b", "ab", "train", "acquire"] {
            for index in 0..64 {
                assert!(seen.insert(tree.child(label, index)));
            }
        }
        assert_ne!(SeedTree::new(1).child("x", 0), SeedTree::new(2).child("x", 0));
    }

    #[test]
    fn derivation_is_pinned() {
        // Values from an independent implementation of the byte layout above.
        assert_eq!(derive_seed(0, "", 0), 0xa1d2_bcdf_05d0_0af6);
        assert_eq!(derive_seed(42, "train", 3), 0xd971_7d74_6f2f_e5ab);
        assert_eq!(derive_seed(7, "acq-nsga", 9), 0x6b4f_34b7_ece6_b34c);
    }
}
