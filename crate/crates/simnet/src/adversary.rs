//! Choice of the corrupted set.

use snowfrost_core::sampling::{Domain, SampleStream};

use crate::config::Corruption;

/// Sorted ids of the `f` corrupted processors, fixed before slot 0.
pub fn corrupted_set(n: u32, f: u32, how: Corruption, seed: u64) -> Vec<u32> {
    let mut ids: Vec<u32> = match how {
        Corruption::First => (0..f).collect(),
        Corruption::Last => (n - f..n).collect(),
        Corruption::Random => {
            let mut all: Vec<u32> = (0..n).collect();
            let mut s = SampleStream::new(seed, Domain::Corruption, 0, 0);
            for i in 0..f as usize {
                let j = i + s.below(n - i as u32) as usize;
                all.swap(i, j);
            }
            all.truncate(f as usize);
            all
        }
    };
    ids.sort_unstable();
    ids
}

/// `correct[i]` for every processor.
pub fn correct_mask(n: u32, corrupt: &[u32]) -> Vec<bool> {
    let mut mask = vec![true; n as usize];
    for &c in corrupt {
        mask[c as usize] = false;
    }
    mask
}
