//! Synthetic point clouds inside the unit cube.
//!
//! Every generator is a pure function of `(n, seed)`. Points are produced in
//! fixed-size chunks; chunk `c` draws from a ChaCha8 generator seeded with
//! `seed` on stream `c`, so output is identical for any worker count.
//!
//! The two skewed distributions are truncated at a fixed model radius and
//! rescaled into `[0, 1]^d`; samples beyond the radius are redrawn.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::morton::{PointId, QuantizedPoint, Quantizer, RawPoint};

const CHUNK: usize = 1 << 14;

/// Truncation radius of the Plummer sphere, in units of its scale radius.
pub const PLUMMER_MAX_RADIUS: f64 = 100.0;
/// Truncation radius of the Kuzmin disk, in units of its scale length.
pub const KUZMIN_MAX_RADIUS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distribution {
    /// Uniform in the unit square.
    Cube2,
    /// Uniform in the unit cube.
    Cube3,
    /// Uniform on the surface of the sphere inscribed in the unit cube.
    Sphere,
    /// Plummer sphere: dense core, sparse halo.
    Plummer,
    /// Kuzmin disk, the 2D analogue of the Plummer sphere.
    Kuzmin,
}

impl Distribution {
    pub const ALL: [Distribution; 5] = [
        Distribution::Cube2,
        Distribution::Cube3,
        Distribution::Sphere,
        Distribution::Plummer,
        Distribution::Kuzmin,
    ];

    pub fn dim(self) -> usize {
        match self {
            Distribution::Cube2 | Distribution::Kuzmin => 2,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Distribution::Cube2 => "2d-cube",
            Distribution::Cube3 => "3d-cube",
            Distribution::Sphere => "3d-sphere",
            Distribution::Plummer => "3d-plummer",
            Distribution::Kuzmin => "2d-kuzmin",
        }
    }

    pub fn generate(self, n: usize, seed: u64) -> PointCloud {
        match self {
            Distribution::Cube2 => gen_uniform_cube(n, 2, seed).expect("valid dimension"),
            Distribution::Cube3 => gen_uniform_cube(n, 3, seed).expect("valid dimension"),
            Distribution::Sphere => gen_sphere_surface(n, seed),
            Distribution::Plummer => gen_plummer(n, seed),
            Distribution::Kuzmin => gen_kuzmin(n, seed),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let d = match s.to_ascii_lowercase().as_str() {
            "2d-cube" | "2dincube" => Distribution::Cube2,
            "3d-cube" | "3dincube" => Distribution::Cube3,
            "3d-sphere" | "3donsphere" => Distribution::Sphere,
            "3d-plummer" | "3dplummer" => Distribution::Plummer,
            "2d-kuzmin" | "2dkuzmin" => Distribution::Kuzmin,
            _ => return Err(Error::UnknownDistribution(s.to_string())),
        };
        Ok(d)
    }
}

/// An ordered point set; ids are `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub points: Vec<RawPoint>,
    /// Generating distribution, when known.
    pub distribution: Option<Distribution>,
    pub seed: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn quantize(&self, q: &Quantizer) -> Result<Vec<QuantizedPoint>> {
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: q.dim(),
                got: self.dim,
            });
        }
        q.quantize_all(&self.points)
    }
}

fn generate(
    n: usize,
    dim: usize,
    seed: u64,
    distribution: Distribution,
    sample: impl Fn(&mut ChaCha8Rng) -> [f64; 3] + Sync,
) -> PointCloud {
    let chunks = n.div_ceil(CHUNK);
    let mut points = Vec::with_capacity(n);
    points.par_extend((0..chunks).into_par_iter().flat_map_iter(|c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let start = c * CHUNK;
        let end = (start + CHUNK).min(n);
        let sample = &sample;
        (start..end).map(move |i| RawPoint {
            id: i as PointId,
            coords: sample(&mut rng),
        })
    }));
    PointCloud {
        dim,
        points,
        distribution: Some(distribution),
        seed,
    }
}

fn unit_direction3(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-12 {
            return [v[0] / norm, v[1] / norm, v[2] / norm];
        }
    }
}

/// Maps a model-space offset in `[-1, 1]` onto `[0, 1]`.
fn to_unit(x: f64) -> f64 {
    (0.5 + 0.5 * x).clamp(0.0, 1.0)
}

/// `n` i.i.d. uniform points in `[0, 1)^d`.
pub fn gen_uniform_cube(n: usize, dim: usize, seed: u64) -> Result<PointCloud> {
    let dist = match dim {
        2 => Distribution::Cube2,
        3 => Distribution::Cube3,
        _ => return Err(Error::Dimension(dim)),
    };
    Ok(generate(n, dim, seed, dist, move |rng| {
        let mut c = [0.0; 3];
        for v in c.iter_mut().take(dim) {
            *v = rng.random::<f64>();
        }
        c
    }))
}

/// `n` points uniform on the sphere of radius 0.5 centered in the unit cube.
pub fn gen_sphere_surface(n: usize, seed: u64) -> PointCloud {
    generate(n, 3, seed, Distribution::Sphere, |rng| {
        let v = unit_direction3(rng);
        [0.5 + 0.5 * v[0], 0.5 + 0.5 * v[1], 0.5 + 0.5 * v[2]]
    })
}

/// `n` points from a Plummer sphere truncated at [`PLUMMER_MAX_RADIUS`].
///
/// Radius by inverse transform of the cumulative mass `r^3 / (1 + r^2)^(3/2)`,
/// i.e. `r = (u^(-2/3) - 1)^(-1/2)`, with an isotropic direction.
pub fn gen_plummer(n: usize, seed: u64) -> PointCloud {
    generate(n, 3, seed, Distribution::Plummer, |rng| loop {
        let u: f64 = rng.random();
        if u <= 0.0 {
            continue;
        }
        let r = (u.powf(-2.0 / 3.0) - 1.0).powf(-0.5);
        if !(r <= PLUMMER_MAX_RADIUS) {
            continue;
        }
        let dir = unit_direction3(rng);
        let s = r / PLUMMER_MAX_RADIUS;
        return [to_unit(s * dir[0]), to_unit(s * dir[1]), to_unit(s * dir[2])];
    })
}

/// `n` points from a Kuzmin disk truncated at [`KUZMIN_MAX_RADIUS`].
///
/// Radius by inverse transform of the cumulative mass `1 - (1 + R^2)^(-1/2)`,
/// i.e. `R = sqrt((1 - u)^(-2) - 1)`, with a uniform angle.
pub fn gen_kuzmin(n: usize, seed: u64) -> PointCloud {
    generate(n, 2, seed, Distribution::Kuzmin, |rng| loop {
        let u: f64 = rng.random();
        let r = ((1.0 - u).powi(-2) - 1.0).sqrt();
        if !(r <= KUZMIN_MAX_RADIUS) {
            continue;
        }
        let theta = rng.random::<f64>() * TAU;
        let s = r / KUZMIN_MAX_RADIUS;
        return [to_unit(s * theta.cos()), to_unit(s * theta.sin()), 0.0];
    })
}
