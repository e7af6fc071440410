//! Coordinate quantization, Morton (z-order) keys and grid-box geometry.
//!
//! Real coordinates are mapped onto an integer grid of `2^B` cells per axis.
//! A per-axis random shift is added after scaling, and the shifted grid
//! coordinates are bit-interleaved into a single 64-bit [`MortonKey`].
//!
//! Interleave layout: the key is read as groups of `d` bits, most significant
//! group first. Group `l` holds bit `l` of `grid[0]`, then bit `l` of
//! `grid[1]` (and `grid[2]` in 3D), so dimension 0 is the most significant
//! bit inside each group. Key bit `b` therefore belongs to axis
//! `d - 1 - (b % d)` and carries coordinate bit `b / d`.
//!
//! All distances are squared integer distances on the grid.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Stable identifier of a point within a dataset.
pub type PointId = u32;

/// Maximum number of interleaved key bits.
pub const MAX_KEY_BITS: u32 = 62;

/// Default bits per axis: the largest budget that fits [`MAX_KEY_BITS`].
pub fn default_bits(dim: usize) -> u32 {
    match dim {
        2 => 31,
        _ => 20,
    }
}

/// A point in dataset units. Axes beyond the dataset dimension are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPoint {
    pub id: PointId,
    pub coords: [f64; 3],
}

impl RawPoint {
    /// Builds a point from a 2- or 3-element coordinate slice.
    pub fn new(id: PointId, coords: &[f64]) -> Result<Self> {
        if !(2..=3).contains(&coords.len()) {
            return Err(Error::Dimension(coords.len()));
        }
        let mut c = [0.0; 3];
        c[..coords.len()].copy_from_slice(coords);
        if let Some(axis) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { id, axis });
        }
        Ok(RawPoint { id, coords: c })
    }
}

/// A 64-bit Morton key holding at most [`MAX_KEY_BITS`] significant bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MortonKey(pub u64);

impl MortonKey {
    #[inline]
    pub fn bit(self, b: u32) -> bool {
        (self.0 >> b) & 1 == 1
    }
}

/// Grid coordinates of a point after quantization and shift.
///
/// Equality and ordering follow the Morton order with ties broken by id.
#[derive(Debug, Clone, Copy)]
pub struct QuantizedPoint {
    pub key: MortonKey,
    pub grid: [u32; 3],
    pub id: PointId,
}

impl QuantizedPoint {
    /// Builds a point directly from grid coordinates. Unused axes must be zero.
    pub fn new(id: PointId, grid: [u32; 3], dim: usize) -> Self {
        QuantizedPoint {
            key: morton_key(&grid, dim),
            grid,
            id,
        }
    }
}

impl PartialEq for QuantizedPoint {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.id == other.id
    }
}

impl Eq for QuantizedPoint {}

impl PartialOrd for QuantizedPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QuantizedPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        morton_compare(self, other)
    }
}

/// Total order on quantized points: Morton key, then id.
#[inline]
pub fn morton_compare(a: &QuantizedPoint, b: &QuantizedPoint) -> Ordering {
    (a.key, a.id).cmp(&(b.key, b.id))
}

/// Maps real coordinates inside a fixed universe box onto the shifted grid.
///
/// The shift is drawn once and kept for the lifetime of every tree built with
/// this quantizer. When shifted, coordinates are scaled into the lower half of
/// each axis (`2^(B-1)` cells) and the shift is drawn from `[0, 2^(B-1))`, so
/// the shifted value never wraps and grid distances stay faithful to the
/// dataset geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    dim: usize,
    box_lo: [f64; 3],
    box_hi: [f64; 3],
    bits_per_dim: u32,
    shift: [u32; 3],
    rng_seed: u64,
    max_coord: u32,
}

impl Quantizer {
    /// Creates a quantizer with a random per-axis shift drawn from `rng_seed`.
    pub fn new(
        dim: usize,
        box_lo: &[f64],
        box_hi: &[f64],
        bits_per_dim: u32,
        rng_seed: u64,
    ) -> Result<Self> {
        let mut q = Self::unshifted(dim, box_lo, box_hi, bits_per_dim)?;
        let half = 1u64 << (bits_per_dim - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        for axis in 0..dim {
            q.shift[axis] = rng.random_range(0..half) as u32;
        }
        q.rng_seed = rng_seed;
        q.max_coord = (half - 1) as u32;
        Ok(q)
    }

    /// Creates a quantizer that uses the full grid range and no shift.
    pub fn unshifted(dim: usize, box_lo: &[f64], box_hi: &[f64], bits_per_dim: u32) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        if bits_per_dim == 0 || bits_per_dim * dim as u32 > MAX_KEY_BITS {
            return Err(Error::BitBudget {
                dim,
                bits_per_dim,
                max: MAX_KEY_BITS,
            });
        }
        if box_lo.len() != dim || box_hi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: box_lo.len().min(box_hi.len()),
            });
        }
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for axis in 0..dim {
            let (l, h) = (box_lo[axis], box_hi[axis]);
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::DegenerateBox { axis, lo: l, hi: h });
            }
            lo[axis] = l;
            hi[axis] = h;
        }
        Ok(Quantizer {
            dim,
            box_lo: lo,
            box_hi: hi,
            bits_per_dim,
            shift: [0; 3],
            rng_seed: 0,
            max_coord: ((1u64 << bits_per_dim) - 1) as u32,
        })
    }

    /// Unit-cube universe `[0, 1]^dim` with the default bit budget.
    pub fn unit_cube(dim: usize, rng_seed: u64) -> Result<Self> {
        Self::new(dim, &vec![0.0; dim], &vec![1.0; dim], default_bits(dim), rng_seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits_per_dim(&self) -> u32 {
        self.bits_per_dim
    }

    /// Total number of significant key bits, `B * d`.
    pub fn key_bits(&self) -> u32 {
        self.bits_per_dim * self.dim as u32
    }

    pub fn shift(&self) -> &[u32] {
        &self.shift[..self.dim]
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn box_lo(&self) -> &[f64] {
        &self.box_lo[..self.dim]
    }

    pub fn box_hi(&self) -> &[f64] {
        &self.box_hi[..self.dim]
    }

    /// The box covering the whole grid, `[0, 2^B)^d`.
    pub fn universe(&self) -> GridBox {
        GridBox::cell(&[0; 3], self.key_bits(), self.dim)
    }

    /// Maps a raw point to the grid, rejecting points outside the universe box.
    pub fn quantize(&self, p: &RawPoint) -> Result<QuantizedPoint> {
        let mut grid = [0u32; 3];
        for (axis, g) in grid.iter_mut().enumerate().take(self.dim) {
            let c = p.coords[axis];
            if !c.is_finite() {
                return Err(Error::NonFinite { id: p.id, axis });
            }
            let (lo, hi) = (self.box_lo[axis], self.box_hi[axis]);
            if c < lo || c > hi {
                return Err(Error::OutOfBox {
                    id: p.id,
                    axis,
                    value: c,
                });
            }
            let t = (c - lo) / (hi - lo);
            let cell = (t * self.max_coord as f64).floor().min(self.max_coord as f64) as u32;
            *g = cell + self.shift[axis];
        }
        Ok(QuantizedPoint::new(p.id, grid, self.dim))
    }

    /// Quantizes a whole slice; fails on the first invalid point.
    pub fn quantize_all(&self, points: &[RawPoint]) -> Result<Vec<QuantizedPoint>> {
        use rayon::prelude::*;
        points.par_iter().map(|p| self.quantize(p)).collect()
    }
}

/// Spreads the low 32 bits of `v` onto the even bit positions.
#[inline]
fn spread2(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

#[inline]
fn compact2(v: u64) -> u32 {
    let mut x = v & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x >> 4)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x >> 8)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x >> 16)) & 0x0000_0000_FFFF_FFFF;
    x as u32
}

/// Spreads the low 21 bits of `v` onto every third bit position.
#[inline]
fn spread3(v: u32) -> u64 {
    let mut x = (v as u64) & 0x1F_FFFF;
    x = (x | (x << 32)) & 0x001F_0000_0000_FFFF;
    x = (x | (x << 16)) & 0x001F_0000_FF00_00FF;
    x = (x | (x << 8)) & 0x100F_00F0_0F00_F00F;
    x = (x | (x << 4)) & 0x10C3_0C30_C30C_30C3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

#[inline]
fn compact3(v: u64) -> u32 {
    let mut x = v & 0x1249_2492_4924_9249;
    x = (x | (x >> 2)) & 0x10C3_0C30_C30C_30C3;
    x = (x | (x >> 4)) & 0x100F_00F0_0F00_F00F;
    x = (x | (x >> 8)) & 0x001F_0000_FF00_00FF;
    x = (x | (x >> 16)) & 0x001F_0000_0000_FFFF;
    x = (x | (x >> 32)) & 0x1F_FFFF;
    x as u32
}

/// Interleaves grid coordinates into a Morton key (dimension 0 most significant).
#[inline]
pub fn morton_key(grid: &[u32; 3], dim: usize) -> MortonKey {
    match dim {
        2 => MortonKey((spread2(grid[0]) << 1) | spread2(grid[1])),
        _ => MortonKey((spread3(grid[0]) << 2) | (spread3(grid[1]) << 1) | spread3(grid[2])),
    }
}

/// Inverse of [`morton_key`].
pub fn morton_decode(key: MortonKey, dim: usize) -> [u32; 3] {
    match dim {
        2 => [compact2(key.0 >> 1), compact2(key.0), 0],
        _ => [compact3(key.0 >> 2), compact3(key.0 >> 1), compact3(key.0)],
    }
}

/// Axis that owns key bit `b`.
#[inline]
pub fn bit_axis(b: u32, dim: usize) -> usize {
    dim - 1 - (b as usize % dim)
}

/// Squared Euclidean grid distance between two points.
#[inline]
pub fn grid_sqdist(a: &[u32; 3], b: &[u32; 3]) -> u64 {
    let mut s = 0u64;
    for axis in 0..3 {
        let d = a[axis].abs_diff(b[axis]) as u64;
        s += d * d;
    }
    s
}

/// An inclusive axis-aligned box on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridBox {
    pub lo: [u32; 3],
    pub hi: [u32; 3],
    pub dim: u8,
}

impl GridBox {
    pub fn new(lo: [u32; 3], hi: [u32; 3], dim: usize) -> Self {
        GridBox {
            lo,
            hi,
            dim: dim as u8,
        }
    }

    /// The Morton-aligned cell containing `grid` whose key bits at or above
    /// `level` are fixed and whose lower `level` bits are free.
    pub fn cell(grid: &[u32; 3], level: u32, dim: usize) -> Self {
        let mut lo = [0u32; 3];
        let mut hi = [0u32; 3];
        for axis in 0..dim {
            let free = (level as usize + axis) / dim;
            let mask = ((1u64 << free) - 1) as u32;
            lo[axis] = grid[axis] & !mask;
            hi[axis] = lo[axis] | mask;
        }
        GridBox::new(lo, hi, dim)
    }

    #[inline]
    pub fn contains(&self, grid: &[u32; 3]) -> bool {
        (0..self.dim as usize).all(|a| self.lo[a] <= grid[a] && grid[a] <= self.hi[a])
    }

    /// True when `other` lies entirely inside `self`.
    pub fn encloses(&self, other: &GridBox) -> bool {
        (0..self.dim as usize).all(|a| self.lo[a] <= other.lo[a] && other.hi[a] <= self.hi[a])
    }

    pub fn intersects(&self, other: &GridBox) -> bool {
        (0..self.dim as usize).all(|a| self.lo[a] <= other.hi[a] && other.lo[a] <= self.hi[a])
    }

    /// Squared distance from `grid` to the nearest point of the box.
    #[inline]
    pub fn sqdist(&self, grid: &[u32; 3]) -> u64 {
        let mut s = 0u64;
        for axis in 0..3 {
            let x = grid[axis];
            let d = if x < self.lo[axis] {
                self.lo[axis] - x
            } else if x > self.hi[axis] {
                x - self.hi[axis]
            } else {
                0
            } as u64;
            s += d * d;
        }
        s
    }

    /// Squared distance from an interior `grid` position to the nearest face.
    /// Positions outside the box give 0.
    #[inline]
    pub(crate) fn interior_sqdist_unchecked(&self, grid: &[u32; 3]) -> u64 {
        let mut m = u32::MAX;
        for axis in 0..self.dim as usize {
            let x = grid[axis];
            m = m.min(x.saturating_sub(self.lo[axis])).min(self.hi[axis].saturating_sub(x));
        }
        let m = m as u64;
        m * m
    }
}

/// Squared distance from `p` to `bx`; zero iff `p` lies inside or on the box.
#[inline]
pub fn box_sqdist(p: &QuantizedPoint, bx: &GridBox) -> u64 {
    bx.sqdist(&p.grid)
}

/// Squared distance from `p` to the nearest face of `bx`.
pub fn box_interior_sqdist(p: &QuantizedPoint, bx: &GridBox) -> Result<u64> {
    if !bx.contains(&p.grid) {
        return Err(Error::QueryOutsideNode);
    }
    Ok(bx.interior_sqdist_unchecked(&p.grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn qp(id: PointId, grid: [u32; 3], dim: usize) -> QuantizedPoint {
        QuantizedPoint::new(id, grid, dim)
    }

    /// Bit-by-bit interleave, straight from the layout definition.
    fn naive_key(grid: &[u32; 3], dim: usize, bits: u32) -> u64 {
        let mut key = 0u64;
        for level in (0..bits).rev() {
            for g in grid.iter().take(dim) {
                key = (key << 1) | ((*g >> level) & 1) as u64;
            }
        }
        key
    }

    #[test]
    fn quantizer_is_reproducible() {
        let a = Quantizer::new(2, &[0.0, 0.0], &[1.0, 1.0], 16, 0).unwrap();
        let b = Quantizer::new(2, &[0.0, 0.0], &[1.0, 1.0], 16, 0).unwrap();
        assert_eq!(a, b);
        assert!(a.shift().iter().all(|&s| s < 65536));
        let c = Quantizer::new(2, &[0.0, 0.0], &[1.0, 1.0], 16, 1).unwrap();
        assert_ne!(a.shift(), c.shift());
    }

    #[test]
    fn quantizer_bit_budget() {
        let lo = [0.0; 3];
        let hi = [1.0; 3];
        assert!(matches!(
            Quantizer::new(3, &lo, &hi, 21, 0),
            Err(Error::BitBudget { .. })
        ));
        assert!(Quantizer::new(3, &lo, &hi, 20, 0).is_ok());
        assert!(Quantizer::new(2, &lo[..2], &hi[..2], 31, 0).is_ok());
        assert!(matches!(
            Quantizer::new(4, &[0.0; 4], &[1.0; 4], 10, 0),
            Err(Error::Dimension(4))
        ));
        assert!(matches!(
            Quantizer::new(2, &[0.0, 1.0], &[1.0, 1.0], 16, 0),
            Err(Error::DegenerateBox { axis: 1, .. })
        ));
    }

    #[test]
    fn quantize_endpoints() {
        let q = Quantizer::unshifted(2, &[0.0, 0.0], &[1.0, 1.0], 16).unwrap();
        let p = q.quantize(&RawPoint::new(4, &[0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(p.grid, [0, 65535, 0]);
        assert_eq!(p.id, 4);
        let p = q.quantize(&RawPoint::new(0, &[0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(p.grid[0], 32767);
        assert!(matches!(
            q.quantize(&RawPoint::new(9, &[1.5, 0.0]).unwrap()),
            Err(Error::OutOfBox { id: 9, axis: 0, .. })
        ));
    }

    #[test]
    fn shifted_quantizer_never_wraps() {
        let q = Quantizer::new(3, &[0.0; 3], &[1.0; 3], 20, 99).unwrap();
        let top = q.quantize(&RawPoint::new(0, &[1.0, 1.0, 1.0]).unwrap()).unwrap();
        let bottom = q.quantize(&RawPoint::new(1, &[0.0, 0.0, 0.0]).unwrap()).unwrap();
        for axis in 0..3 {
            assert!(top.grid[axis] < 1 << 20);
            assert_eq!(bottom.grid[axis], q.shift()[axis]);
            assert!(top.grid[axis] > bottom.grid[axis]);
        }
    }

    #[test]
    fn raw_point_validation() {
        assert!(matches!(RawPoint::new(0, &[1.0]), Err(Error::Dimension(1))));
        assert!(matches!(
            RawPoint::new(3, &[0.0, f64::NAN]),
            Err(Error::NonFinite { id: 3, axis: 1 })
        ));
    }

    #[test]
    fn key_examples() {
        assert_eq!(morton_key(&[0, 0, 0], 2).0, 0);
        assert_eq!(morton_key(&[0b10, 0b11, 0], 2).0, 0b1101);
        assert_eq!(morton_key(&[1, 1, 1], 3).0, 0b111);
    }

    #[test]
    fn compare_examples() {
        let a = qp(1, [5, 5, 0], 2);
        let b = qp(2, [5, 5, 0], 2);
        assert_eq!(morton_compare(&a, &b), Ordering::Less);
        let x = qp(0, [2, 3, 0], 2);
        let y = qp(1, [3, 0, 0], 2);
        assert_eq!(morton_compare(&y, &x), Ordering::Less);
    }

    #[test]
    fn box_distance_examples() {
        let b2 = GridBox::new([2, 2, 0], [5, 5, 0], 2);
        assert_eq!(box_sqdist(&qp(0, [0, 0, 0], 2), &b2), 8);
        assert_eq!(box_sqdist(&qp(0, [3, 4, 0], 2), &b2), 0);
        let b3 = GridBox::new([0, 0, 0], [4, 4, 4], 3);
        assert_eq!(box_sqdist(&qp(0, [1, 9, 1], 3), &b3), 25);
    }

    #[test]
    fn interior_distance_examples() {
        let b2 = GridBox::new([0, 0, 0], [10, 10, 0], 2);
        assert_eq!(box_interior_sqdist(&qp(0, [3, 3, 0], 2), &b2).unwrap(), 9);
        assert_eq!(box_interior_sqdist(&qp(0, [0, 7, 0], 2), &b2).unwrap(), 0);
        let b3 = GridBox::new([0, 0, 0], [10, 10, 10], 3);
        assert_eq!(box_interior_sqdist(&qp(0, [5, 5, 5], 3), &b3).unwrap(), 25);
        assert!(matches!(
            box_interior_sqdist(&qp(0, [11, 5, 0], 2), &b2),
            Err(Error::QueryOutsideNode)
        ));
    }

    #[test]
    fn cell_boxes() {
        // Key bit 0 is y, bit 1 is x, bit 2 is y again.
        let c = GridBox::cell(&[6, 5, 0], 1, 2);
        assert_eq!((c.lo, c.hi), ([6, 4, 0], [6, 5, 0]));
        let c = GridBox::cell(&[6, 5, 0], 3, 2);
        assert_eq!((c.lo, c.hi), ([6, 4, 0], [7, 7, 0]));
        let root = GridBox::cell(&[0; 3], 60, 3);
        assert_eq!(root.hi, [(1 << 20) - 1; 3]);
    }

    fn grid_strategy(dim: usize, bits: u32) -> impl Strategy<Value = [u32; 3]> {
        let max = (1u64 << bits) as u32 - 1;
        prop::array::uniform3(0..=max).prop_map(move |mut g| {
            if dim == 2 {
                g[2] = 0;
            }
            g
        })
    }

    proptest! {
        #[test]
        fn key_matches_naive_interleave_2d(g in grid_strategy(2, 31)) {
            prop_assert_eq!(morton_key(&g, 2).0, naive_key(&g, 2, 31));
            prop_assert_eq!(morton_decode(morton_key(&g, 2), 2), g);
        }

        #[test]
        fn key_matches_naive_interleave_3d(g in grid_strategy(3, 20)) {
            prop_assert_eq!(morton_key(&g, 3).0, naive_key(&g, 3, 20));
            prop_assert_eq!(morton_decode(morton_key(&g, 3), 3), g);
        }

        #[test]
        fn key_monotone_per_axis(g in grid_strategy(3, 20), axis in 0usize..3, step in 1u32..1000) {
            let mut h = g;
            h[axis] = (g[axis] + step).min((1 << 20) - 1);
            prop_assert!(morton_key(&h, 3) >= morton_key(&g, 3));
        }

        #[test]
        fn cell_contains_its_generator(g in grid_strategy(3, 20), level in 0u32..=60) {
            let c = GridBox::cell(&g, level, 3);
            prop_assert!(c.contains(&g));
            // Every corner shares the key bits at or above `level`.
            let k = morton_key(&g, 3).0 >> level;
            prop_assert_eq!(morton_key(&c.lo, 3).0 >> level, k);
            prop_assert_eq!(morton_key(&c.hi, 3).0 >> level, k);
        }

        #[test]
        fn box_sqdist_zero_iff_inside(g in grid_strategy(2, 8), lo in grid_strategy(2, 8), ext in grid_strategy(2, 6)) {
            let hi = [lo[0] + ext[0], lo[1] + ext[1], 0];
            let b = GridBox::new(lo, hi, 2);
            prop_assert_eq!(b.sqdist(&g) == 0, b.contains(&g));
            // Growing the box never increases the distance.
            let grown = GridBox::new([lo[0].saturating_sub(3), lo[1], 0], [hi[0], hi[1] + 5, 0], 2);
            prop_assert!(grown.sqdist(&g) <= b.sqdist(&g));
        }

        #[test]
        fn quantize_is_order_preserving(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let q = Quantizer::unshifted(2, &[0.0, 0.0], &[1.0, 1.0], 31).unwrap();
            let pa = q.quantize(&RawPoint::new(0, &[a, 0.0]).unwrap()).unwrap();
            let pb = q.quantize(&RawPoint::new(1, &[b, 0.0]).unwrap()).unwrap();
            if a < b {
                prop_assert!(pa.grid[0] <= pb.grid[0]);
            }
        }
    }
}
