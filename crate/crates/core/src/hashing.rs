//! Counter-based, stateless randomness.
//!
//! Every random quantity in this crate is a pure function of a 64-bit master
//! seed and a packed counter. The counter layout is fixed so that independent
//! implementations can reproduce sketches bit for bit:
//!
//! ```text
//! key  = stream << 60 | g << 40 | h << 20 | u        (g, h, u < 2^20)
//! base = mix64(mix64(seed) ^ key)
//! word(base, j) = mix64(base ^ j * 0x9E3779B97F4A7C15)
//! ```
//!
//! `mix64` is the MurmurHash3 64-bit finalizer (fmix64), which is bijective
//! on 64-bit words, so `base` is injective in `key` for a fixed seed.

/// Golden-ratio increment used to derive word streams from a counter base.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Purpose tag mixed into the packed counter. Each logical stream of
/// randomness gets its own tag so streams never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Wiring = 0,
    Destinations = 1,
    Signs = 2,
    BlockRowNeighbors = 3,
    BlockRowPattern = 4,
    DataGaussian = 5,
    DataLowRankLeft = 6,
    DataLowRankRight = 7,
    DataNoise = 8,
    BaselineGaussian = 9,
    SubSeed = 10,
}

/// MurmurHash3 fmix64 finalizer. Bijective; maps 0 to 0.
#[inline(always)]
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^= x >> 33;
    x = x.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    x ^= x >> 33;
    x
}

/// Pack (stream, g, h, u) into the 64-bit counter key. Injective for
/// g, h, u < 2^20.
#[inline(always)]
fn pack(stream: Stream, g: u64, h: u64, u: u64) -> u64 {
    debug_assert!(g < 1 << 20 && h < 1 << 20 && u < 1 << 20);
    ((stream as u64) << 60) | (g << 40) | (h << 20) | u
}

/// Counter base for a (seed, stream, g, h, u) context.
#[inline(always)]
pub fn counter(seed: u64, stream: Stream, g: usize, h: usize, u: usize) -> u64 {
    mix64(mix64(seed) ^ pack(stream, g as u64, h as u64, u as u64))
}

/// j-th word of the stream rooted at `base`.
#[inline(always)]
pub fn word(base: u64, j: u64) -> u64 {
    mix64(base ^ j.wrapping_mul(GOLDEN_GAMMA))
}

/// Uniform double in (0, 1] from a 64-bit word (53 mantissa bits).
#[inline(always)]
pub fn unit_open_closed(w: u64) -> f64 {
    ((w >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
}

/// Uniform double in [0, 1).
#[inline(always)]
pub fn unit_closed_open(w: u64) -> f64 {
    (w >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Standard normal via Box-Muller on two counter words.
#[inline]
pub fn normal(base: u64, j: u64) -> f64 {
    let u1 = unit_open_closed(word(base, 2 * j));
    let u2 = unit_closed_open(word(base, 2 * j + 1));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniform integer in [0, n) by rejection, consuming words from the stream
/// at `base` starting at index `*j`. Free of modulo bias.
#[inline]
pub fn uniform_below(base: u64, j: &mut u64, n: u64) -> u64 {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let w = word(base, *j);
        *j += 1;
        if w < zone {
            return w % n;
        }
    }
}

/// Derived 64-bit sub-seed for labeled parallel trials.
pub fn sub_seed(seed: u64, label: usize, trial: usize) -> u64 {
    word(counter(seed, Stream::SubSeed, label, trial, 0), 0)
}

/// How destination rows are drawn inside one (g, h) block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum IntraMode {
    /// One destination per contiguous row chunk of height Br/s.
    RowPartitioned,
    /// s distinct destinations from a full-cycle affine map on [Br]
    /// (power-of-two Br only; falls back to chunking when Br mod s = 0).
    AffineUnique,
}

/// Destination rows and signs for one input column of one (g, h) block.
///
/// Appends `s` pairwise-distinct destinations in [0, br) and `s` signs in
/// {-1, +1} to the output buffers. Fully determined by (seed, g, h, u).
/// Callers must have validated `s <= br` and the mode divisibility rules
/// (see [`crate::layout::SketchParams`]).
pub fn intra_block_pattern(
    seed: u64,
    g: usize,
    h: usize,
    u: usize,
    br: usize,
    s: usize,
    mode: IntraMode,
    dests: &mut Vec<u32>,
    signs: &mut Vec<i8>,
) {
    debug_assert!(s >= 1 && s <= br);
    dests.clear();
    signs.clear();
    let base = counter(seed, Stream::Destinations, g, h, u);
    let affine = match mode {
        IntraMode::AffineUnique => br.is_power_of_two(),
        IntraMode::RowPartitioned => false,
    };
    if affine {
        let br64 = br as u64;
        // Full-period affine map on Z_{Br} for power-of-two Br:
        // a = 1 mod 4, b odd.
        let (a, b) = if br == 1 {
            (0u64, 0u64)
        } else if br == 2 {
            (1, word(base, 1) & 1)
        } else {
            let a = (word(base, 0) % (br64 / 4)) * 4 + 1;
            let b = word(base, 1) % br64 | 1;
            (a, b)
        };
        for i in 0..s as u64 {
            dests.push(((a.wrapping_mul(i).wrapping_add(b)) % br64.max(1)) as u32);
        }
    } else {
        debug_assert!(br % s == 0);
        let chunk = (br / s) as u64;
        for i in 0..s as u64 {
            let off = word(base, 2 + i) % chunk;
            dests.push((i * chunk + off) as u32);
        }
    }
    let sbase = counter(seed, Stream::Signs, g, h, u);
    for i in 0..s as u64 {
        signs.push(if word(sbase, i) & 1 == 1 { -1 } else { 1 });
    }
}
