//! Sobol sequences from Joe–Kuo direction numbers, optionally with
//! hash-based Owen scrambling.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const BITS: usize = 32;
const TABLE: &str = include_str!("../data/joe-kuo-d6.1111.txt");

/// Largest dimension covered by the bundled direction numbers.
pub const MAX_DIM: usize = 1111;

/// Direction numbers `v_1 … v_32` for the first `dim` coordinates.
fn direction_numbers(dim: usize) -> Result<Vec<[u32; BITS]>> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::SobolDimension {
            requested: dim,
            available: MAX_DIM,
        });
    }
    let mut out = Vec::with_capacity(dim);
    let mut first = [0u32; BITS];
    for (k, v) in first.iter_mut().enumerate() {
        *v = 1 << (BITS - 1 - k);
    }
    out.push(first);

    for (line_no, line) in TABLE.lines().enumerate().skip(1).take(dim - 1) {
        let bad = || Error::DirectionNumbers { line: line_no + 1 };
        let fields: Vec<u32> = line
            .split_whitespace()
            .map(|t| t.parse::<u32>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if fields.len() < 3 {
            return Err(bad());
        }
        let s = fields[1] as usize;
        let a = fields[2];
        let m = &fields[3..];
        if s == 0 || m.len() != s || s > BITS {
            return Err(bad());
        }
        let mut v = [0u32; BITS];
        for k in 0..s {
            v[k] = m[k] << (BITS - 1 - k);
        }
        for k in s..BITS {
            let mut x = v[k - s] ^ (v[k - s] >> s);
            for j in 1..s {
                if (a >> (s - 1 - j)) & 1 == 1 {
                    x ^= v[k - j];
                }
            }
            v[k] = x;
        }
        out.push(v);
    }
    if out.len() != dim {
        return Err(Error::DirectionNumbers { line: out.len() + 1 });
    }
    Ok(out)
}

/// Laine–Karras style permutation, applied to bit-reversed integers so that
/// each output bit depends only on the more significant input bits.
fn lk_hash(mut x: u32, seed: u32) -> u32 {
    x ^= x.wrapping_mul(0x3d20_adea);
    x = x.wrapping_add(seed);
    x = x.wrapping_mul((seed >> 16) | 1);
    x ^= x.wrapping_mul(0x0552_6c56);
    x ^= x.wrapping_mul(0x53a2_2864);
    x
}

fn owen_scramble(x: u32, seed: u32) -> u32 {
    lk_hash(x.reverse_bits(), seed).reverse_bits()
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct SobolGenerator {
    dim: usize,
    scramble_seed: Option<u64>,
    next_index: u64,
    directions: Vec<[u32; BITS]>,
    dim_seeds: Vec<u32>,
}

impl SobolGenerator {
    /// A scrambled generator starting at index 0.
    pub fn scrambled(dim: usize, seed: u64) -> Result<Self> {
        Self::new(dim, Some(seed))
    }

    /// The plain sequence. Index 0 (the origin) is skipped, so the first
    /// point is `(0.5, …, 0.5)`.
    pub fn unscrambled(dim: usize) -> Result<Self> {
        Self::new(dim, None)
    }

    pub fn new(dim: usize, scramble_seed: Option<u64>) -> Result<Self> {
        let directions = direction_numbers(dim)?;
        let dim_seeds = match scramble_seed {
            Some(s) => (0..dim as u64).map(|j| mix(mix(s) ^ j.wrapping_add(0x9e37_79b9_7f4a_7c15)) as u32).collect(),
            None => Vec::new(),
        };
        Ok(Self {
            dim,
            scramble_seed,
            next_index: if scramble_seed.is_some() { 0 } else { 1 },
            directions,
            dim_seeds,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scramble_seed(&self) -> Option<u64> {
        self.scramble_seed
    }

    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    /// The point at sequence position `index`, strictly inside `(0, 1)^dim`
    /// (for the unscrambled sequence, any index but 0).
    pub fn point(&self, index: u64) -> Vec<f64> {
        let gray = (index ^ (index >> 1)) as u32;
        let mut out = vec![0.0; self.dim];
        for (j, (o, v)) in out.iter_mut().zip(&self.directions).enumerate() {
            let mut x = 0u32;
            let mut g = gray;
            let mut k = 0;
            while g != 0 {
                if g & 1 == 1 {
                    x ^= v[k];
                }
                g >>= 1;
                k += 1;
            }
            *o = match self.dim_seeds.get(j) {
                Some(&seed) => (owen_scramble(x, seed) as f64 + 0.5) / 4_294_967_296.0,
                None => x as f64 / 4_294_967_296.0,
            };
        }
        out
    }

    /// The next `n` points.
    pub fn next_points(&mut self, n: usize) -> Vec<Vec<f64>> {
        let start = self.next_index;
        self.next_index += n as u64;
        (start..start + n as u64).map(|i| self.point(i)).collect()
    }

    pub fn skip(&mut self, n: u64) {
        self.next_index += n;
    }
}
