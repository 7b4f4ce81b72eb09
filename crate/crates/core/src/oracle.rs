//! Brute-force reference matcher.
//!
//! Repeatedly scans every available (center, pixel) pair and matches the one
//! with the globally minimum key. Quadratic per step and only usable on
//! small grids, but independent of every other algorithm in the crate, which
//! makes it the ground truth they are all tested against: any matcher that
//! only ever adds closest available pairs must produce exactly this output.

use crate::assignment::Assignment;
use crate::instance::Instance;
use crate::metric::DistKey;

pub fn greedy_oracle(instance: &Instance) -> Assignment {
    let pixels = instance.grid().pixel_count();
    let k = instance.k();
    let mut map = vec![u32::MAX; pixels];
    let mut remaining = instance.quotas();
    let mut unmatched = pixels;

    while unmatched > 0 {
        let mut best: Option<DistKey> = None;
        for c in 0..k as u32 {
            if remaining[c as usize] == 0 {
                continue;
            }
            for p in 0..pixels as u32 {
                if map[p as usize] != u32::MAX {
                    continue;
                }
                let key = instance.dist_key(c, p);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
        }
        let best = best.expect("available pair must exist while pixels remain");
        map[best.pixel as usize] = best.center;
        remaining[best.center as usize] -= 1;
        unmatched -= 1;
    }

    Assignment::from_map(instance.n(), k, map).expect("oracle output is complete")
}
