//! Block-level wiring: kappa edge-disjoint permutations on [M] defining the
//! neighborhoods N(g) of input blocks feeding each output block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{counter, uniform_below, word, Stream};

/// Affine map x -> (a x + b) mod m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineMap {
    pub a: u64,
    pub b: u64,
    pub m: u64,
}

impl AffineMap {
    #[inline(always)]
    pub fn apply(&self, x: u64) -> u64 {
        if self.m == 1 {
            return 0;
        }
        (self.a.wrapping_mul(x).wrapping_add(self.b)) % self.m
    }
}

/// Full-period check: the orbit of any x0 under x -> (a x + b) mod m has
/// period exactly m iff
///   (a) gcd(b, m) = 1,
///   (b) a - 1 is divisible by every prime factor of m,
///   (c) if 4 | m then 4 | (a - 1).
pub fn validate_full_cycle(map: &AffineMap) -> bool {
    let m = map.m;
    if m == 1 {
        return true;
    }
    if gcd(map.b, m) != 1 {
        return false;
    }
    if map.a == 0 {
        return false; // a - 1 = -1 has no prime factors
    }
    let am1 = map.a - 1;
    let mut rest = m;
    let mut p = 2u64;
    while p * p <= rest {
        if rest % p == 0 {
            if am1 % p != 0 {
                return false;
            }
            while rest % p == 0 {
                rest /= p;
            }
        }
        p += 1;
    }
    if rest > 1 && am1 % rest != 0 {
        return false;
    }
    if m % 4 == 0 && am1 % 4 != 0 {
        return false;
    }
    true
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Deterministically derive a full-cycle affine map on [m] from a seed.
///
/// Candidates for `a` are drawn from the congruence class forced by the
/// full-period criterion (a = 1 mod lcm(rad(m), 4 if 4|m)); `b` is drawn
/// and retried until coprime to m.
pub fn derive_affine(seed: u64, m: usize) -> AffineMap {
    let m64 = m as u64;
    if m == 1 {
        return AffineMap { a: 0, b: 0, m: 1 };
    }
    // Radical of m, then lift to include the factor 4 when 4 | m.
    let mut q = 1u64;
    let mut rest = m64;
    let mut p = 2u64;
    while p * p <= rest {
        if rest % p == 0 {
            q *= p;
            while rest % p == 0 {
                rest /= p;
            }
        }
        p += 1;
    }
    if rest > 1 {
        q *= rest;
    }
    if m64 % 4 == 0 {
        q *= 2; // q had a single factor 2; lcm(q, 4) = 2q
    }
    let base = counter(seed, Stream::Wiring, 0, 0, 0);
    let num_a = m64 / q;
    let a = 1 + (word(base, 0) % num_a.max(1)) * q;
    let mut j = 1u64;
    let b = loop {
        let cand = uniform_below(base, &mut j, m64);
        if gcd(cand, m64) == 1 {
            break cand;
        }
    };
    let map = AffineMap { a: a % m64, b, m: m64 };
    debug_assert!(validate_full_cycle(&map));
    map
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WiringKind {
    /// pi_l(g) = f^l(g) for a full-cycle affine f.
    IteratedAffine(AffineMap),
    /// kappa explicit permutation tables of length m.
    ExplicitTables(Vec<Vec<u32>>),
}

/// kappa block-level permutations on [m]. Immutable and shareable;
/// serializable to JSON for experiment reproducibility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wiring {
    pub kind: WiringKind,
    pub kappa: usize,
    pub m: usize,
}

impl Wiring {
    /// Edge-disjoint wiring from the iterated full-cycle affine family.
    pub fn iterated_affine(seed: u64, m: usize, kappa: usize) -> Result<Wiring> {
        if kappa == 0 || kappa > m {
            return Err(Error::InvalidParams(format!(
                "kappa = {kappa} must be in [1, M = {m}]"
            )));
        }
        Ok(Wiring {
            kind: WiringKind::IteratedAffine(derive_affine(seed, m)),
            kappa,
            m,
        })
    }

    pub fn from_tables(tables: Vec<Vec<u32>>) -> Result<Wiring> {
        if tables.is_empty() {
            return Err(Error::InvalidParams("need at least one table".into()));
        }
        let m = tables[0].len();
        for t in &tables {
            if t.len() != m {
                return Err(Error::InvalidParams("table lengths differ".into()));
            }
            let mut seen = vec![false; m];
            for &v in t {
                if (v as usize) >= m || seen[v as usize] {
                    return Err(Error::InvalidParams("table is not a permutation".into()));
                }
                seen[v as usize] = true;
            }
        }
        Ok(Wiring {
            kappa: tables.len(),
            m,
            kind: WiringKind::ExplicitTables(tables),
        })
    }

    /// Neighborhood (pi_1(g), ..., pi_kappa(g)) in wiring order.
    pub fn neighborhood(&self, g: usize) -> Result<Vec<u32>> {
        if g >= self.m {
            return Err(Error::BlockOutOfRange(g, self.m));
        }
        let mut out = Vec::with_capacity(self.kappa);
        self.neighborhood_into(g, &mut out);
        Ok(out)
    }

    /// Allocation-free variant for the kernel hot path. `g` must be < m.
    pub fn neighborhood_into(&self, g: usize, out: &mut Vec<u32>) {
        out.clear();
        match &self.kind {
            WiringKind::IteratedAffine(f) => {
                let mut x = g as u64;
                for _ in 0..self.kappa {
                    x = f.apply(x);
                    out.push(x as u32);
                }
            }
            WiringKind::ExplicitTables(tables) => {
                for t in tables {
                    out.push(t[g]);
                }
            }
        }
    }

    /// True iff the kappa neighbors of every g are pairwise distinct.
    pub fn is_edge_disjoint(&self) -> bool {
        let mut nbrs = Vec::new();
        for g in 0..self.m {
            self.neighborhood_into(g, &mut nbrs);
            for i in 0..nbrs.len() {
                for j in i + 1..nbrs.len() {
                    if nbrs[i] == nbrs[j] {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// kappa independent uniformly random permutations (Fisher-Yates with
/// rejection-sampled indices). Not necessarily edge-disjoint; this is the
/// i.i.d. model used by the coherence smoothing experiment.
pub fn sample_uniform_wiring(seed: u64, m: usize, kappa: usize) -> Wiring {
    let mut tables = Vec::with_capacity(kappa);
    for l in 0..kappa {
        let base = counter(seed, Stream::Wiring, l + 1, 0, 0);
        let mut j = 0u64;
        let mut perm: Vec<u32> = (0..m as u32).collect();
        for i in (1..m).rev() {
            let pick = uniform_below(base, &mut j, (i + 1) as u64) as usize;
            perm.swap(i, pick);
        }
        tables.push(perm);
    }
    Wiring {
        kind: WiringKind::ExplicitTables(tables),
        kappa,
        m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force orbit period of x -> (a x + b) mod m starting at 0.
    fn orbit_period(a: u64, b: u64, m: u64) -> u64 {
        let mut x = b % m; // f(0)
        let mut steps = 1;
        while x != 0 {
            x = (a * x + b) % m;
            steps += 1;
            if steps > m {
                return steps;
            }
        }
        steps
    }

    #[test]
    fn full_cycle_examples() {
        assert!(validate_full_cycle(&AffineMap { a: 5, b: 3, m: 8 }));
        assert_eq!(orbit_period(5, 3, 8), 8);
        assert!(!validate_full_cycle(&AffineMap { a: 2, b: 1, m: 8 }));
        assert!(validate_full_cycle(&AffineMap { a: 1, b: 1, m: 5 }));
    }

    #[test]
    fn validator_matches_brute_force_small() {
        for m in 2u64..=32 {
            for a in 0..m {
                for b in 0..m {
                    let pass = validate_full_cycle(&AffineMap { a, b, m });
                    let brute = orbit_period(a, b, m) == m;
                    assert_eq!(pass, brute, "a={a} b={b} m={m}");
                }
            }
        }
    }

    #[test]
    fn derive_affine_properties() {
        for m in 1usize..=64 {
            for seed in 0..8u64 {
                let f = derive_affine(seed, m);
                assert!(validate_full_cycle(&f), "m={m} seed={seed} map={f:?}");
            }
        }
        // power-of-two modulus: a = 1 mod 4, b odd
        let f = derive_affine(42, 8);
        assert_eq!(f.a % 4, 1);
        assert_eq!(f.b % 2, 1);
        // M = 12: (a - 1) divisible by 6 and by 4, gcd(b, 12) = 1
        let f = derive_affine(42, 12);
        assert_eq!((f.a - 1) % 6, 0);
        assert_eq!((f.a - 1) % 4, 0);
        assert_eq!(gcd(f.b, 12), 1);
        // M = 1 degenerate identity
        let f = derive_affine(42, 1);
        assert_eq!(f.apply(0), 0);
    }

    #[test]
    fn neighborhood_iterated_affine() {
        let w = Wiring {
            kind: WiringKind::IteratedAffine(AffineMap { a: 5, b: 3, m: 8 }),
            kappa: 3,
            m: 8,
        };
        // f(0)=3, f(3)=18 mod 8=2, f(2)=13 mod 8=5
        assert_eq!(w.neighborhood(0).unwrap(), vec![3, 2, 5]);
        let w = Wiring {
            kind: WiringKind::IteratedAffine(AffineMap { a: 1, b: 1, m: 5 }),
            kappa: 1,
            m: 5,
        };
        assert_eq!(w.neighborhood(4).unwrap(), vec![0]);
        assert!(w.neighborhood(5).is_err());
    }

    #[test]
    fn kappa_equals_m_covers_all_blocks() {
        let w = Wiring::iterated_affine(7, 12, 12).unwrap();
        let mut n = w.neighborhood(5).unwrap();
        n.sort_unstable();
        assert_eq!(n, (0..12).collect::<Vec<u32>>());
    }

    #[test]
    fn iterated_affine_edge_disjoint() {
        for m in [2usize, 3, 8, 12, 16, 30] {
            for kappa in 1..=m.min(6) {
                let w = Wiring::iterated_affine(99, m, kappa).unwrap();
                assert!(w.is_edge_disjoint(), "m={m} kappa={kappa}");
            }
        }
    }

    #[test]
    fn explicit_tables_edge_disjoint_checks() {
        let id: Vec<u32> = (0..4).collect();
        let w = Wiring::from_tables(vec![id.clone(), id.clone()]).unwrap();
        assert!(!w.is_edge_disjoint());
        // identity vs swap of the first two entries: agree on g = 2, 3
        let swap = vec![1u32, 0, 2, 3];
        let w = Wiring::from_tables(vec![id, swap]).unwrap();
        assert!(!w.is_edge_disjoint());
    }

    #[test]
    fn bi_regularity_of_edge_disjoint_wiring() {
        let w = Wiring::iterated_affine(3, 16, 5).unwrap();
        let mut counts = vec![0usize; 16];
        for g in 0..16 {
            for h in w.neighborhood(g).unwrap() {
                counts[h as usize] += 1;
            }
        }
        assert!(counts.iter().all(|&c| c == 5));
    }

    #[test]
    fn uniform_wiring_m1_is_identity() {
        let w = sample_uniform_wiring(1, 1, 3);
        for g in 0..1 {
            assert_eq!(w.neighborhood(g).unwrap(), vec![0, 0, 0]);
        }
    }

    #[test]
    fn uniform_wiring_deterministic_in_seed() {
        let a = sample_uniform_wiring(5, 20, 3);
        let b = sample_uniform_wiring(5, 20, 3);
        assert_eq!(a, b);
        let c = sample_uniform_wiring(6, 20, 3);
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_wiring_per_position_distribution() {
        // chi-square of pi(0) over many seeds, M = 52
        let m = 52usize;
        let trials = 10_000usize;
        let mut counts = vec![0u64; m];
        for seed in 0..trials as u64 {
            let w = sample_uniform_wiring(seed, m, 1);
            counts[w.neighborhood(0).unwrap()[0] as usize] += 1;
        }
        let expected = trials as f64 / m as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let diff = c as f64 - expected;
                diff * diff / expected
            })
            .sum();
        // 51 dof, 0.999 quantile ~ 89
        assert!(chi2 < 89.0, "chi2 = {chi2}");
    }

    #[test]
    fn uniform_wiring_collision_rate_matches_independence() {
        // For M = 4, two independent uniform permutations collide at a given
        // position with probability 1/4; expected fraction of g with a
        // collision is 1/4 of positions on average.
        let m = 4usize;
        let trials = 20_000usize;
        let mut collisions = 0u64;
        for seed in 0..trials as u64 {
            let w = sample_uniform_wiring(seed.wrapping_add(1000), m, 2);
            for g in 0..m {
                let n = w.neighborhood(g).unwrap();
                if n[0] == n[1] {
                    collisions += 1;
                }
            }
        }
        let rate = collisions as f64 / (trials * m) as f64;
        assert!((rate - 0.25).abs() < 0.01, "collision rate {rate}");
    }

    #[test]
    fn wiring_json_round_trip() {
        let w = Wiring::iterated_affine(11, 8, 3).unwrap();
        let js = serde_json::to_string(&w).unwrap();
        let back: Wiring = serde_json::from_str(&js).unwrap();
        assert_eq!(w, back);
        let w = sample_uniform_wiring(1, 6, 2);
        let js = serde_json::to_string(&w).unwrap();
        let back: Wiring = serde_json::from_str(&js).unwrap();
        assert_eq!(w, back);
    }
}
