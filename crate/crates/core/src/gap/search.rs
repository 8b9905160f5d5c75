//! Searching progressions that leave the least mass outside their
//! neighbourhood.
//!
//! All positions are rescaled to integers by the least common multiple of
//! their denominators (and of the tolerance) times `lcm(1..=depth)`, so every
//! candidate generator `|x|/k` or `|x − y|/k` is an integer and every test is
//! exact. Rank 1 uses the closed form for the nearest multiple; rank 2
//! tabulates, per atom, the smallest inner coefficient needed for each outer
//! coefficient, which scores every pair of limits at once. Ranks 3 and up
//! extend the best lower-rank witnesses by one generator (beam search).

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;

use super::{Error, Result, SymmetricGAP};
use crate::dist::AtomicMeasure;
use crate::num::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    /// Candidate generators are `|x|/k` and `|x − y|/k` for `k ≤ depth`.
    pub depth: u32,
    pub max_rank: usize,
    /// Rank-2 searches score every candidate pair when there are at most this
    /// many; otherwise pairs containing one of the best rank-1 generators,
    /// and pairs among the best rank-1 generators that cover distinct sets.
    pub pair_budget: usize,
    pub beam_width: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            depth: 6,
            max_rank: 4,
            pair_budget: 250_000,
            beam_width: 4,
        }
    }
}

/// The progressions searched over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Any limits with `Vol(K) ≤ volume_cap`.
    Capped { volume_cap: u64 },
    /// `K₁(u)`: every limit equal to 1.
    K1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Mass outside the closed neighbourhood of the witness.
    pub value: Rational,
    pub witness: SymmetricGAP,
    pub candidates: usize,
    /// Every progression of the family with generators from the candidate set
    /// was scored (always so for rank 1; for rank 2 when the pair budget
    /// allows; never above rank 2).
    pub exhaustive: bool,
    pub evaluated: u64,
}

/// `β_{r,m}(W, τ) = inf { W(R \ [K]_τ) : rank K ≤ r, Vol K ≤ m }` over the
/// candidate progressions.
pub fn beta(w: &AtomicMeasure, r: usize, m: u64, tau: &Rational, cfg: &SearchConfig) -> Result<SearchResult> {
    let positions = w.positions()?;
    search(&positions, w.masses(), tau, r, Family::Capped { volume_cap: m }, cfg)
}

/// Generators `u` of rank `≤ rank_cap` minimizing `W(R \ [K₁(u)]_δ)`.
pub fn k1_search(w: &AtomicMeasure, rank_cap: usize, delta: &Rational, cfg: &SearchConfig) -> Result<SearchResult> {
    let positions = w.positions()?;
    search(&positions, w.masses(), delta, rank_cap, Family::K1, cfg)
}

/// Minimizes the mass of `positions` (weighted by `masses`) outside the
/// closed `tau`-neighbourhood over the family. Ties go to the smaller rank,
/// then the smaller volume, then the lexicographically smaller generator list.
pub fn search(
    positions: &[Rational],
    masses: &[Rational],
    tau: &Rational,
    rank_cap: usize,
    family: Family,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    if tau.is_negative() {
        return Err(Error::NegativeTolerance(num::to_f64(tau)));
    }
    if rank_cap == 0 || matches!(family, Family::Capped { volume_cap: 0 }) || cfg.depth == 0 {
        return Err(Error::InvalidCaps);
    }
    if rank_cap > cfg.max_rank {
        return Err(Error::RankUnsupported {
            rank: rank_cap,
            max: cfg.max_rank,
        });
    }
    if positions.len() != masses.len() {
        return Err(Error::DimensionMismatch);
    }
    let engine = Engine::new(positions, masses, tau, family, cfg)?;
    let (best, exhaustive, evaluated) = engine.run(rank_cap, cfg);
    Ok(SearchResult {
        value: Rational::new(BigInt::from(best.outside), engine.mass_scale.clone()),
        witness: engine.to_gap(&best),
        candidates: engine.cands.len(),
        exhaustive,
        evaluated,
    })
}

const UNREACHABLE: u64 = u64::MAX;

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

fn clamp_u64(v: i128) -> u64 {
    v.min((u64::MAX - 1) as i128) as u64
}

/// Smallest `|k|` with `|x − k g| ≤ t`, for `g > 0`.
fn need(x: i128, g: i128, t: i128) -> u64 {
    let lo = ceil_div(x - t, g);
    let hi = floor_div(x + t, g);
    if lo > hi {
        UNREACHABLE
    } else if lo > 0 {
        clamp_u64(lo)
    } else if hi < 0 {
        clamp_u64(-hi)
    } else {
        0
    }
}

/// A scored progression. The field order is the tie-break order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Found {
    outside: i128,
    rank: usize,
    volume: u128,
    gens: Vec<i128>,
    limits: Vec<u64>,
}

impl Found {
    fn new(outside: i128, mut pairs: Vec<(i128, u64)>) -> Self {
        pairs.sort();
        Found {
            outside,
            rank: pairs.len(),
            volume: pairs
                .iter()
                .fold(1u128, |v, &(_, l)| v.saturating_mul(2 * l as u128 + 1)),
            gens: pairs.iter().map(|p| p.0).collect(),
            limits: pairs.iter().map(|p| p.1).collect(),
        }
    }

    fn pairs(&self) -> Vec<(i128, u64)> {
        self.gens.iter().copied().zip(self.limits.iter().copied()).collect()
    }
}

/// The `cap` best distinct progressions seen so far.
#[derive(Debug, Clone)]
struct Top {
    items: Vec<Found>,
    cap: usize,
    evaluated: u64,
}

impl Top {
    fn new(cap: usize) -> Self {
        Top {
            items: Vec::new(),
            cap: cap.max(1),
            evaluated: 0,
        }
    }

    fn admits(&self, outside: i128) -> bool {
        self.items.len() < self.cap || outside <= self.items[self.cap - 1].outside
    }

    fn offer(&mut self, f: Found) {
        self.evaluated += 1;
        self.insert(f);
    }

    fn insert(&mut self, f: Found) {
        if self.items.len() == self.cap && f >= self.items[self.cap - 1] {
            return;
        }
        if let Err(i) = self.items.binary_search(&f) {
            self.items.insert(i, f);
            self.items.truncate(self.cap);
        }
    }

    fn merge(mut self, other: Top) -> Top {
        self.evaluated += other.evaluated;
        for f in other.items {
            self.insert(f);
        }
        self
    }
}

struct Engine {
    pos: Vec<i128>,
    wt: Vec<i128>,
    total: i128,
    tau: i128,
    cands: Vec<i128>,
    scale: BigInt,
    mass_scale: BigInt,
    family: Family,
}

impl Engine {
    fn new(positions: &[Rational], masses: &[Rational], tau: &Rational, family: Family, cfg: &SearchConfig) -> Result<Self> {
        let den = num::lcm_of_denominators(positions.iter().chain(std::iter::once(tau)));
        let steps = (1..=cfg.depth as u64).fold(BigInt::from(1), |acc, k| num_integer::lcm(acc, BigInt::from(k)));
        let scale = den * steps;
        let to_int = |x: &Rational| -> Result<i128> {
            (x * Rational::from_integer(scale.clone()))
                .to_integer()
                .to_i128()
                .ok_or(Error::Overflow)
        };
        let mass_scale = num::lcm_of_denominators(masses);
        let ms = Rational::from_integer(mass_scale.clone());

        // coalesce equal positions
        let mut atoms: Vec<(i128, i128)> = Vec::with_capacity(positions.len());
        for (x, m) in positions.iter().zip(masses) {
            if m.is_negative() {
                return Err(Error::Dist(crate::dist::Error::NonPositiveMass(m.clone())));
            }
            let w = (m * &ms).to_integer().to_i128().ok_or(Error::Overflow)?;
            if w > 0 {
                atoms.push((to_int(x)?, w));
            }
        }
        atoms.sort();
        let mut pos: Vec<i128> = Vec::new();
        let mut wt: Vec<i128> = Vec::new();
        for (x, w) in atoms {
            if pos.last() == Some(&x) {
                *wt.last_mut().unwrap() += w;
            } else {
                pos.push(x);
                wt.push(w);
            }
        }
        let tau = to_int(tau)?;
        let reach = pos.iter().map(|x| x.abs()).max().unwrap_or(0) + tau;
        let lmax = match family {
            Family::Capped { volume_cap } => volume_cap as i128,
            Family::K1 => 1,
        };
        // generators are at most 2·reach and coefficients at most lmax
        reach
            .checked_mul(4)
            .and_then(|x| x.checked_mul(lmax + 2))
            .and_then(|x| x.checked_mul(cfg.max_rank as i128 + 2))
            .ok_or(Error::Overflow)?;

        let mut cands = BTreeSet::new();
        for (i, &x) in pos.iter().enumerate() {
            for &y in std::iter::once(&0).chain(&pos[i + 1..]) {
                let diff = (x - y).abs();
                for k in 1..=cfg.depth as i128 {
                    if diff != 0 && diff % k == 0 {
                        cands.insert(diff / k);
                    }
                }
            }
        }
        Ok(Engine {
            total: wt.iter().sum(),
            pos,
            wt,
            tau,
            cands: cands.into_iter().collect(),
            scale,
            mass_scale,
            family,
        })
    }

    fn to_gap(&self, f: &Found) -> SymmetricGAP {
        let s = Rational::from_integer(self.scale.clone());
        let gens = f
            .gens
            .iter()
            .map(|&g| vec![Rational::from_integer(BigInt::from(g)) / &s])
            .collect();
        let limits = f
            .limits
            .iter()
            .map(|&l| {
                if l == 0 {
                    Rational::new(1.into(), 2.into())
                } else {
                    Rational::from_integer(BigInt::from(l))
                }
            })
            .collect();
        SymmetricGAP::new(gens, limits).expect("search builds valid progressions")
    }

    fn volume_cap(&self) -> Option<u64> {
        match self.family {
            Family::Capped { volume_cap } => Some(volume_cap),
            Family::K1 => None,
        }
    }

    /// `K = {0}`, written with the zero generator.
    fn zero(&self) -> Found {
        let outside: i128 = self
            .pos
            .iter()
            .zip(&self.wt)
            .filter(|(x, _)| x.abs() > self.tau)
            .map(|(_, w)| w)
            .sum();
        let l = if self.volume_cap().is_some() { 0 } else { 1 };
        Found::new(outside, vec![(0, l)])
    }

    fn covered_hist(&self, needs: impl Iterator<Item = u64>, cap: u64) -> Vec<i128> {
        let mut hist = vec![0i128; cap as usize + 1];
        for (n, w) in needs.zip(&self.wt) {
            if n <= cap {
                hist[n as usize] += w;
            }
        }
        for i in 1..hist.len() {
            hist[i] += hist[i - 1];
        }
        hist
    }

    /// Best rank-1 progression with generator `g` (limit at least 1).
    fn rank1(&self, g: i128) -> Option<Found> {
        let needs: Vec<u64> = self.pos.iter().map(|&x| need(x, g, self.tau)).collect();
        let (lo, hi) = match self.volume_cap() {
            None => (1, 1),
            Some(m) => {
                let lmax = (m - 1) / 2;
                let finite = needs.iter().copied().filter(|&n| n != UNREACHABLE).max().unwrap_or(0);
                (1, lmax.min(finite.max(1)))
            }
        };
        if hi < lo {
            return None;
        }
        let hist = self.covered_hist(needs.into_iter(), hi);
        (lo..=hi)
            .map(|l| Found::new(self.total - hist[l as usize], vec![(g, l)]))
            .min()
    }

    /// Generators of `singles` (in order) whose covered sets differ from
    /// those of every earlier one, at most `cap` of them.
    fn distinct_singles(&self, singles: &[Found], cap: usize) -> Vec<i128> {
        let mut seen = std::collections::HashSet::new();
        let mut reps = Vec::new();
        for f in singles {
            if reps.len() == cap {
                break;
            }
            let (g, l) = (f.gens[0], f.limits[0]);
            let covered: Vec<bool> = self.pos.iter().map(|&x| need(x, g, self.tau) <= l).collect();
            if seen.insert(covered) {
                reps.push(g);
            }
        }
        reps
    }

    fn pair_limit(&self) -> Option<u64> {
        match self.volume_cap() {
            None => Some(1),
            Some(m) => {
                let l = (m / 3).saturating_sub(1) / 2;
                (l >= 1).then_some(l)
            }
        }
    }

    /// Scores every admissible pair of limits for generators `g1`, `g2`.
    fn rank2(&self, g1: i128, g2: i128, lmax: u64, top: &mut Top) {
        let n = self.pos.len();
        let l2max = lmax as usize;
        // h[i * l2max + (l2 - 1)] = min over |k2| ≤ l2 of the inner need
        let mut h = vec![0u64; n * l2max];
        for (i, &x) in self.pos.iter().enumerate() {
            let mut best = need(x, g1, self.tau);
            for l2 in 1..=l2max {
                let k = l2 as i128 * g2;
                best = best.min(need(x - k, g1, self.tau)).min(need(x + k, g1, self.tau));
                h[i * l2max + l2 - 1] = best;
            }
        }
        for l2 in 1..=lmax {
            let l1cap = match self.volume_cap() {
                None => 1,
                Some(m) => ((m / (2 * l2 + 1)).saturating_sub(1) / 2).min(lmax),
            };
            if l1cap < 1 {
                continue;
            }
            let hist = self.covered_hist((0..n).map(|i| h[i * l2max + l2 as usize - 1]), l1cap);
            for l1 in 1..=l1cap {
                let outside = self.total - hist[l1 as usize];
                if top.admits(outside) {
                    top.offer(Found::new(outside, vec![(g1, l1), (g2, l2)]));
                } else {
                    top.evaluated += 1;
                }
            }
        }
    }

    /// Sorted distinct points of a scored progression.
    fn points(f: &Found) -> Vec<i128> {
        let mut pts = vec![0i128];
        for (&g, &l) in f.gens.iter().zip(&f.limits) {
            let mut next = Vec::with_capacity(pts.len() * (2 * l as usize + 1));
            for p in &pts {
                for k in -(l as i128)..=l as i128 {
                    next.push(p + k * g);
                }
            }
            next.sort_unstable();
            next.dedup();
            pts = next;
        }
        pts
    }

    fn near(&self, pts: &[i128], y: i128) -> bool {
        let i = pts.partition_point(|&p| p < y - self.tau);
        i < pts.len() && pts[i] <= y + self.tau
    }

    /// Adds generator `g` to `base` with every admissible limit.
    fn extend(&self, base: &Found, pts: &[i128], g: i128, top: &mut Top) {
        if base.gens.contains(&g) {
            return;
        }
        let lcap = match self.volume_cap() {
            None => 1,
            Some(m) => ((m as u128 / base.volume).saturating_sub(1) / 2) as u64,
        };
        if lcap < 1 {
            return;
        }
        let needs = self.pos.iter().map(|&x| {
            if self.near(pts, x) {
                return 0;
            }
            (1..=lcap)
                .find(|&k| {
                    let step = k as i128 * g;
                    self.near(pts, x - step) || self.near(pts, x + step)
                })
                .unwrap_or(UNREACHABLE)
        });
        let hist = self.covered_hist(needs, lcap);
        for l in 1..=lcap {
            let outside = self.total - hist[l as usize];
            if top.admits(outside) {
                let mut pairs = base.pairs();
                pairs.push((g, l));
                top.offer(Found::new(outside, pairs));
            } else {
                top.evaluated += 1;
            }
        }
    }

    fn run(&self, rank_cap: usize, cfg: &SearchConfig) -> (Found, bool, u64) {
        let width = cfg.beam_width.max(1);
        let mut best = self.zero();
        let mut evaluated = 1u64;

        let mut singles: Vec<Found> = self.cands.par_iter().filter_map(|&g| self.rank1(g)).collect();
        singles.sort();
        evaluated += self.cands.len() as u64;
        if let Some(f) = singles.first() {
            best = best.min(f.clone());
        }
        if rank_cap == 1 {
            return (best, true, evaluated);
        }

        let c = self.cands.len();
        let exhaustive = c.saturating_sub(1).saturating_mul(c) / 2 <= cfg.pair_budget;
        let Some(lmax) = self.pair_limit() else {
            return (best, exhaustive && rank_cap == 2, evaluated);
        };
        let pairs: Vec<(i128, i128)> = if exhaustive {
            (0..c)
                .flat_map(|i| (i + 1..c).map(move |j| (i, j)))
                .map(|(i, j)| (self.cands[i], self.cands[j]))
                .collect()
        } else {
            let seeds: Vec<i128> = singles.iter().take(width).map(|f| f.gens[0]).collect();
            let mut set = BTreeSet::new();
            for &s in &seeds {
                for &g in &self.cands {
                    if g != s {
                        set.insert((s.min(g), s.max(g)));
                    }
                }
            }
            // plus every pair among the best generators with distinct
            // covered sets, as many as half the budget allows
            let reps = self.distinct_singles(&singles, pool_size(cfg.pair_budget / 2));
            for (i, &g1) in reps.iter().enumerate() {
                for &g2 in &reps[i + 1..] {
                    set.insert((g1.min(g2), g1.max(g2)));
                }
            }
            set.into_iter().collect()
        };
        let mut layer = pairs
            .par_iter()
            .fold(
                || Top::new(width),
                |mut top, &(g1, g2)| {
                    self.rank2(g1, g2, lmax, &mut top);
                    top
                },
            )
            .reduce(|| Top::new(width), Top::merge);
        evaluated += layer.evaluated;
        if let Some(f) = layer.items.first() {
            best = best.min(f.clone());
        }

        for _ in 3..=rank_cap {
            if layer.items.is_empty() {
                break;
            }
            let bases: Vec<(Found, Vec<i128>)> = layer
                .items
                .iter()
                .map(|f| (f.clone(), Self::points(f)))
                .collect();
            let jobs: Vec<(usize, i128)> = (0..bases.len())
                .flat_map(|b| self.cands.iter().map(move |&g| (b, g)))
                .collect();
            layer = jobs
                .par_iter()
                .fold(
                    || Top::new(width),
                    |mut top, &(b, g)| {
                        self.extend(&bases[b].0, &bases[b].1, g, &mut top);
                        top
                    },
                )
                .reduce(|| Top::new(width), Top::merge);
            evaluated += layer.evaluated;
            if let Some(f) = layer.items.first() {
                best = best.min(f.clone());
            }
        }
        (best, exhaustive && rank_cap <= 2, evaluated)
    }
}

/// Largest `t` with `t(t − 1)/2 ≤ budget`.
fn pool_size(budget: usize) -> usize {
    let mut t = ((2.0 * budget as f64).sqrt() as usize).max(1) + 1;
    while t > 1 && t * (t - 1) / 2 > budget {
        t -= 1;
    }
    t
}
