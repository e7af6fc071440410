//! Parallel MSD radix sort of quantized points by Morton key.
//!
//! The top digit is distributed in one parallel pass: chunks are
//! histogrammed in parallel, the histograms become per-(digit, chunk)
//! output offsets, and every chunk scatters into its disjoint slots. Each
//! bucket is then sorted independently on the next digit down, until it is
//! small enough for a comparison sort. Buckets at depth two already fit in
//! cache, so the cost per point barely grows with n. Digits that are
//! constant across a bucket are skipped.

use rayon::prelude::*;

use crate::morton::QuantizedPoint;

const DIGIT_BITS: u32 = 11;
const CHUNK: usize = 1 << 16;
/// Below this size a comparison sort is cheaper than setting up histograms.
const SMALL: usize = 1 << 10;

/// Sorts `points` by `(morton key, id)`, examining the low `key_bits` of each key.
pub fn sort_by_morton(points: &mut [QuantizedPoint], key_bits: u32) {
    if points.len() <= SMALL {
        points.sort_unstable();
        return;
    }
    let mut scratch = points.to_vec();
    msd(points, &mut scratch, key_bits);
}

/// Sorts `data` on key bits below `hi`, using `buf` (same length) as scratch.
fn msd(data: &mut [QuantizedPoint], buf: &mut [QuantizedPoint], mut hi: u32) {
    loop {
        if data.len() <= SMALL || hi == 0 {
            data.sort_unstable();
            return;
        }
        let width = hi.min(DIGIT_BITS);
        let shift = hi - width;
        hi = shift;
        if let Some(counts) = radix_pass(data, buf, shift, width) {
            let mut rest_d = &mut *data;
            let mut rest_b = &mut *buf;
            let mut parts = Vec::with_capacity(counts.len());
            for c in counts.into_iter().filter(|&c| c > 0) {
                let (d, rd) = std::mem::take(&mut rest_d).split_at_mut(c);
                let (b, rb) = std::mem::take(&mut rest_b).split_at_mut(c);
                parts.push((d, b));
                rest_d = rd;
                rest_b = rb;
            }
            // The pass left the buckets in `buf`; sort each there, with the
            // matching stretch of `data` as scratch, then copy back.
            parts.into_par_iter().for_each(|(d, b)| {
                msd(b, d, hi);
                d.copy_from_slice(b);
            });
            return;
        }
    }
}

#[inline]
fn digit(p: &QuantizedPoint, shift: u32, mask: usize) -> usize {
    ((p.key.0 >> shift) as usize) & mask
}

struct SyncPtr(*mut QuantizedPoint);
// SAFETY: every chunk writes only to the slots reserved for it by the offset
// table, so concurrent writes never alias.
unsafe impl Sync for SyncPtr {}
unsafe impl Send for SyncPtr {}

/// One counting pass on the `width`-bit digit at `shift`. Returns the bucket
/// sizes, or `None` (leaving `dst` untouched) when every element shares the
/// same digit.
fn radix_pass(src: &[QuantizedPoint], dst: &mut [QuantizedPoint], shift: u32, width: u32) -> Option<Vec<usize>> {
    let buckets = 1usize << width;
    let mask = buckets - 1;
    let hists: Vec<Vec<usize>> = src
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut h = vec![0usize; buckets];
            for p in chunk {
                h[digit(p, shift, mask)] += 1;
            }
            h
        })
        .collect();

    let mut totals = vec![0usize; buckets];
    for h in &hists {
        for (t, c) in totals.iter_mut().zip(h) {
            *t += c;
        }
    }
    if totals.contains(&src.len()) {
        return None;
    }

    // offsets[c][d]: first output slot for digit d coming from chunk c.
    let mut offsets = vec![vec![0usize; buckets]; hists.len()];
    let mut base = 0;
    for d in 0..buckets {
        for (c, h) in hists.iter().enumerate() {
            offsets[c][d] = base;
            base += h[d];
        }
    }

    let out = SyncPtr(dst.as_mut_ptr());
    let out = &out;
    src.par_chunks(CHUNK)
        .zip(offsets.into_par_iter())
        .for_each(|(chunk, mut off)| {
            for p in chunk {
                let d = digit(p, shift, mask);
                // SAFETY: `off[d]` stays inside this chunk's reserved range,
                // which lies within `dst` because the offsets sum to src.len().
                unsafe { out.0.add(off[d]).write(*p) };
                off[d] += 1;
            }
        });
    Some(totals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morton::QuantizedPoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, dim: usize, bits: u32, seed: u64) -> Vec<QuantizedPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut g = [0u32; 3];
                for a in g.iter_mut().take(dim) {
                    *a = rng.random_range(0..1u32 << bits);
                }
                QuantizedPoint::new((n - i) as u32, g, dim)
            })
            .collect()
    }

    #[test]
    fn empty_and_sorted_inputs() {
        let mut v: Vec<QuantizedPoint> = Vec::new();
        sort_by_morton(&mut v, 60);
        assert!(v.is_empty());

        let mut v = random_points(20_000, 3, 20, 1);
        v.sort();
        let expected = v.clone();
        sort_by_morton(&mut v, 60);
        assert_eq!(v, expected);
    }

    #[test]
    fn matches_comparison_sort() {
        for (dim, bits) in [(2, 31), (3, 20)] {
            let mut v = random_points(10_000, dim, bits, 7);
            let mut oracle = v.clone();
            oracle.sort_by(|a, b| (a.key, a.id).cmp(&(b.key, b.id)));
            sort_by_morton(&mut v, bits * dim as u32);
            assert!(v.iter().zip(&oracle).all(|(a, b)| a.id == b.id && a.key == b.key));
        }
    }

    #[test]
    fn large_and_clustered_inputs() {
        // Enough points for two digit levels; the clustered half shares its
        // top digits, so those passes are skipped.
        let mut v = random_points(300_000, 3, 20, 9);
        v.extend(random_points(100_000, 3, 6, 10).into_iter().map(|mut p| {
            p.id += 300_000;
            p
        }));
        let mut oracle = v.clone();
        oracle.sort_by(|a, b| (a.key, a.id).cmp(&(b.key, b.id)));
        sort_by_morton(&mut v, 60);
        assert!(v.iter().zip(&oracle).all(|(a, b)| a.id == b.id && a.key == b.key));
    }

    #[test]
    fn duplicate_keys_tie_break_by_id() {
        // Only 4 distinct positions, so almost every key repeats.
        let mut v = random_points(50_000, 2, 1, 3);
        let mut oracle = v.clone();
        oracle.sort_by(|a, b| (a.key, a.id).cmp(&(b.key, b.id)));
        sort_by_morton(&mut v, 2);
        assert!(v.iter().zip(&oracle).all(|(a, b)| a.id == b.id));
    }
}
