//! Exact counting of lattice points satisfying a pair of proximity
//! constraints, a shell-bucketed fast path that must agree bit for bit with
//! the brute-force scan, and the averaged count exponent across box sizes.

use crate::fit::{fit_line_spanning, DecayFit, FitError};
use crate::mapspec::{MapError, PhiFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DiophError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("dimension {0} unsupported (1..=3)")]
    BadDimension(usize),
    #[error("q must be >= 2, got {0}")]
    BadBoxSize(u32),
    #[error("exhaustive mode needs (q+1)^(3d) <= 1e9; q = {q} in d = {d} exceeds it")]
    ExhaustiveOverBudget { q: u32, d: usize },
    #[error("q ladder must span at least 3 octaves")]
    LadderTooShort,
    #[error("phi family {0} is not homogeneous in the sense this module needs")]
    BadFamily(String),
}

/// A lattice point of `[0, q]^d`.
pub type LatticePoint = [i64; 3];

/// Configuration of the two-constraint counting problem. The tolerance is
/// pinned to `q^(1 - d/s)` by the scaling of the problem, never free.
#[derive(Debug, Clone)]
pub struct LatticeConfig {
    pub d: usize,
    pub q: u32,
    pub s: f64,
    pub phi1: PhiFamily,
    pub phi2: PhiFamily,
    pub lambda: [f64; 2],
    /// When false the second constraint is dropped (single-shell baseline).
    pub both_constraints: bool,
}

impl LatticeConfig {
    /// Default radii `lambda = 0.75 * sqrt(d) * q` keep shells of diameter
    /// about `q` intersecting inside the box.
    pub fn new(d: usize, q: u32, s: f64, phi1: PhiFamily, phi2: PhiFamily) -> Result<Self, DiophError> {
        if d == 0 || d > 3 {
            return Err(DiophError::BadDimension(d));
        }
        if q < 2 {
            return Err(DiophError::BadBoxSize(q));
        }
        for phi in [&phi1, &phi2] {
            match phi {
                PhiFamily::Distance | PhiFamily::LmNorm(_) => phi.validate()?,
                other => return Err(DiophError::BadFamily(other.label())),
            }
        }
        let lambda = 0.75 * (d as f64).sqrt() * q as f64;
        Ok(LatticeConfig { d, q, s, phi1, phi2, lambda: [lambda, lambda], both_constraints: true })
    }

    /// The pinned tolerance `q^(-d/s + 1)`.
    pub fn delta(&self) -> f64 {
        (self.q as f64).powf(-(self.d as f64) / self.s + 1.0)
    }

    fn points(&self) -> Vec<LatticePoint> {
        let q = self.q as i64;
        let lim = |i: usize| if i < self.d { q } else { 0 };
        let mut out = Vec::with_capacity(((q + 1) as usize).pow(self.d as u32));
        for c in 0..=lim(2) {
            for b in 0..=lim(1) {
                for a in 0..=lim(0) {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }

    fn eval(&self, phi: &PhiFamily, a: LatticePoint, b: LatticePoint) -> f64 {
        let to_pt = |p: LatticePoint| [p[0] as f64, p[1] as f64, p[2] as f64];
        phi.eval(self.d, to_pt(a), to_pt(b))
    }
}

/// How the pair set is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairMode {
    Exhaustive,
    Sampled { n_pairs: usize, seed: u64 },
}

/// Per-pair counts plus the per-pair average.
#[derive(Debug, Clone)]
pub struct CountTable {
    pub mode: PairMode,
    /// `(n1, n2, count)` rows in generation order.
    pub entries: Vec<(LatticePoint, LatticePoint, u32)>,
    pub total: u64,
    /// Mean count per pair.
    pub aggregate: f64,
}

impl CountTable {
    fn from_entries(mode: PairMode, entries: Vec<(LatticePoint, LatticePoint, u32)>) -> CountTable {
        let total: u64 = entries.iter().map(|e| e.2 as u64).sum();
        let aggregate = total as f64 / entries.len().max(1) as f64;
        CountTable { mode, entries, total, aggregate }
    }
}

fn pair_list(cfg: &LatticeConfig, mode: PairMode) -> Result<Vec<(LatticePoint, LatticePoint)>, DiophError> {
    let points = cfg.points();
    match mode {
        PairMode::Exhaustive => {
            let budget = (points.len() as f64).powi(3);
            if budget > 1e9 {
                return Err(DiophError::ExhaustiveOverBudget { q: cfg.q, d: cfg.d });
            }
            let mut out = Vec::with_capacity(points.len() * points.len());
            for &a in &points {
                for &b in &points {
                    out.push((a, b));
                }
            }
            Ok(out)
        }
        PairMode::Sampled { n_pairs, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = cfg.q as i64;
            let mut out = Vec::with_capacity(n_pairs);
            for _ in 0..n_pairs {
                let mut draw = || {
                    let mut p = [0i64; 3];
                    for slot in p.iter_mut().take(cfg.d) {
                        *slot = rng.random_range(0..=q);
                    }
                    p
                };
                out.push((draw(), draw()));
            }
            Ok(out)
        }
    }
}

/// Ground-truth count: for each pair, scan every candidate point of the box
/// and test both constraints directly.
pub fn count_bruteforce(cfg: &LatticeConfig, mode: PairMode) -> Result<CountTable, DiophError> {
    let pairs = pair_list(cfg, mode)?;
    let points = cfg.points();
    let delta = cfg.delta();
    let entries: Vec<(LatticePoint, LatticePoint, u32)> = pairs
        .par_iter()
        .map(|&(n1, n2)| {
            let mut count = 0u32;
            for &n in &points {
                let ok1 = (cfg.eval(&cfg.phi1, n1, n) - cfg.lambda[0]).abs() <= delta;
                let ok2 = !cfg.both_constraints
                    || (cfg.eval(&cfg.phi2, n2, n) - cfg.lambda[1]).abs() <= delta;
                if ok1 && ok2 {
                    count += 1;
                }
            }
            (n1, n2, count)
        })
        .collect();
    Ok(CountTable::from_entries(mode, entries))
}

/// Fast path: for each distinct first point, bucket all candidates by their
/// `phi1` value in bins of width `2 delta`, pull the shell around `lambda_1`
/// once, and test only the shell members against the second constraint.
/// Produces counts identical to the brute force because the very same
/// comparisons decide membership.
pub fn count_fast(cfg: &LatticeConfig, mode: PairMode) -> Result<CountTable, DiophError> {
    let pairs = pair_list(cfg, mode)?;
    let points = cfg.points();
    let delta = cfg.delta();
    let width = 2.0 * delta;

    // group pair indices by first point so each shell is built once
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by_key(|&i| pairs[i].0);
    let mut counts = vec![0u32; pairs.len()];

    let mut start = 0;
    while start < order.len() {
        let n1 = pairs[order[start]].0;
        let mut end = start;
        while end < order.len() && pairs[order[end]].0 == n1 {
            end += 1;
        }
        // shell members around lambda_1, found through the buckets
        let mut buckets: std::collections::HashMap<i64, Vec<u32>> = std::collections::HashMap::new();
        for (i, &n) in points.iter().enumerate() {
            let v = cfg.eval(&cfg.phi1, n1, n);
            buckets.entry((v / width).floor() as i64).or_default().push(i as u32);
        }
        let lo = ((cfg.lambda[0] - delta) / width).floor() as i64;
        let hi = ((cfg.lambda[0] + delta) / width).floor() as i64;
        let mut shell: Vec<u32> = Vec::new();
        for b in lo..=hi {
            if let Some(ids) = buckets.get(&b) {
                for &i in ids {
                    let v = cfg.eval(&cfg.phi1, n1, points[i as usize]);
                    if (v - cfg.lambda[0]).abs() <= delta {
                        shell.push(i);
                    }
                }
            }
        }
        let shell_pts: Vec<LatticePoint> = shell.iter().map(|&i| points[i as usize]).collect();
        let slot_counts: Vec<(usize, u32)> = order[start..end]
            .par_iter()
            .map(|&pi| {
                let n2 = pairs[pi].1;
                let mut c = 0u32;
                if cfg.both_constraints {
                    for &n in &shell_pts {
                        if (cfg.eval(&cfg.phi2, n2, n) - cfg.lambda[1]).abs() <= delta {
                            c += 1;
                        }
                    }
                } else {
                    c = shell_pts.len() as u32;
                }
                (pi, c)
            })
            .collect();
        for (pi, c) in slot_counts {
            counts[pi] = c;
        }
        start = end;
    }
    let entries: Vec<(LatticePoint, LatticePoint, u32)> = pairs
        .into_iter()
        .zip(counts)
        .map(|((a, b), c)| (a, b, c))
        .collect();
    Ok(CountTable::from_entries(mode, entries))
}

/// Fit of `log2(mean count per pair)` against `log2 q`, with the verdict
/// `slope <= d - 2d/s + 0.25` (the extra quarter absorbs the `q^eps` slack
/// the averaged bound carries).
#[derive(Debug, Clone)]
pub struct CountSlope {
    pub fit: DecayFit,
    pub predicted: f64,
    pub bound_respected: bool,
    pub per_q: Vec<(u32, f64)>,
}

pub fn average_slope(
    d: usize,
    s: f64,
    q_list: &[u32],
    sampled_pairs: usize,
    seed: u64,
    phi: PhiFamily,
) -> Result<CountSlope, DiophError> {
    if q_list.len() < 2 {
        return Err(DiophError::LadderTooShort);
    }
    let (min_q, max_q) = q_list
        .iter()
        .fold((u32::MAX, 0u32), |(lo, hi), &q| (lo.min(q), hi.max(q)));
    if (max_q as f64 / min_q as f64).log2() < 3.0 - 1e-9 {
        return Err(DiophError::LadderTooShort);
    }
    let mut per_q = Vec::with_capacity(q_list.len());
    let mut pts = Vec::with_capacity(q_list.len());
    for &q in q_list {
        let cfg = LatticeConfig::new(d, q, s, phi.clone(), phi.clone())?;
        let budget = ((q as f64) + 1.0).powi(3 * d as i32);
        let mode = if budget <= 1e9 && sampled_pairs == 0 {
            PairMode::Exhaustive
        } else {
            let n_pairs = if sampled_pairs == 0 { 4096 } else { sampled_pairs };
            PairMode::Sampled { n_pairs, seed: seed.wrapping_add(q as u64) }
        };
        let table = count_fast(&cfg, mode)?;
        per_q.push((q, table.aggregate));
        pts.push(((q as f64).log2(), table.aggregate.max(f64::MIN_POSITIVE).log2()));
    }
    let fit = fit_line_spanning(&pts, 3.0)?;
    let predicted = d as f64 - 2.0 * d as f64 / s;
    let bound_respected = fit.slope <= predicted + 0.25;
    Ok(CountSlope { fit, predicted, bound_respected, per_q })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> LatticeConfig {
        LatticeConfig::new(2, 8, 1.5, PhiFamily::Distance, PhiFamily::Distance).unwrap()
    }

    #[test]
    fn delta_pinned_by_scaling() {
        let cfg = small_cfg();
        let want = 8f64.powf(-2.0 / 1.5 + 1.0);
        assert!((cfg.delta() - want).abs() < 1e-15);
    }

    #[test]
    fn fast_equals_bruteforce_exhaustive() {
        let cfg = small_cfg();
        let brute = count_bruteforce(&cfg, PairMode::Exhaustive).unwrap();
        let fast = count_fast(&cfg, PairMode::Exhaustive).unwrap();
        assert_eq!(brute.entries, fast.entries);
        assert_eq!(brute.total, fast.total);
    }

    #[test]
    fn fast_equals_bruteforce_sampled() {
        let mut cfg = LatticeConfig::new(2, 24, 1.6, PhiFamily::LmNorm(4), PhiFamily::Distance).unwrap();
        cfg.lambda = [20.0, 17.0];
        let mode = PairMode::Sampled { n_pairs: 400, seed: 9 };
        let brute = count_bruteforce(&cfg, mode).unwrap();
        let fast = count_fast(&cfg, mode).unwrap();
        assert_eq!(brute.entries, fast.entries);
    }

    #[test]
    fn zero_lambda_counts_coincidences() {
        let mut cfg = small_cfg();
        cfg.lambda = [0.0, 0.0];
        // delta < 1 so only n = n^j contributes when the pair coincides
        assert!(cfg.delta() < 1.0);
        let table = count_bruteforce(&cfg, PairMode::Exhaustive).unwrap();
        for (n1, n2, c) in &table.entries {
            let want = if n1 == n2 { 1 } else { 0 };
            assert_eq!(*c, want, "pair {n1:?} {n2:?}");
        }
    }

    #[test]
    fn huge_delta_counts_everything() {
        let mut cfg = LatticeConfig::new(2, 4, 1.5, PhiFamily::Distance, PhiFamily::Distance).unwrap();
        cfg.lambda = [0.0, 0.0];
        cfg.s = -1.0; // forces delta = q^(-d/s+1) = q^(2/1+1) > diameter
        let delta = cfg.delta();
        assert!(delta > 4.0 * 2f64.sqrt());
        let table = count_bruteforce(&cfg, PairMode::Exhaustive).unwrap();
        for (_, _, c) in &table.entries {
            assert_eq!(*c, 25);
        }
    }

    #[test]
    fn exhaustive_budget_enforced() {
        let cfg = LatticeConfig::new(2, 40, 1.5, PhiFamily::Distance, PhiFamily::Distance).unwrap();
        assert!(matches!(
            count_bruteforce(&cfg, PairMode::Exhaustive),
            Err(DiophError::ExhaustiveOverBudget { .. })
        ));
    }

    #[test]
    fn empty_shell_gives_zero_everywhere() {
        let mut cfg = small_cfg();
        cfg.lambda = [1000.0, 1000.0];
        let fast = count_fast(&cfg, PairMode::Sampled { n_pairs: 64, seed: 3 }).unwrap();
        assert_eq!(fast.total, 0);
    }

    #[test]
    fn symmetry_under_box_reflection() {
        let cfg = small_cfg();
        let table = count_bruteforce(&cfg, PairMode::Exhaustive).unwrap();
        let q = cfg.q as i64;
        // reflect the first coordinate of every player
        let reflect = |p: LatticePoint| [q - p[0], p[1], p[2]];
        let mut lookup = std::collections::HashMap::new();
        for (n1, n2, c) in &table.entries {
            lookup.insert((*n1, *n2), *c);
        }
        for (n1, n2, c) in &table.entries {
            assert_eq!(lookup[&(reflect(*n1), reflect(*n2))], *c);
        }
    }

    #[test]
    fn monotone_in_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let q = rng.random_range(4..=10u32);
            let mut cfg = LatticeConfig::new(2, q, 1.5, PhiFamily::Distance, PhiFamily::Distance).unwrap();
            cfg.lambda = [rng.random::<f64>() * q as f64, rng.random::<f64>() * q as f64];
            let mode = PairMode::Sampled { n_pairs: 50, seed: 1 };
            let base = count_bruteforce(&cfg, mode).unwrap();
            let mut wider = cfg.clone();
            wider.s = cfg.s * 1.3; // larger s means larger delta
            assert!(wider.delta() > cfg.delta());
            let more = count_bruteforce(&wider, mode).unwrap();
            for (a, b) in base.entries.iter().zip(&more.entries) {
                assert!(b.2 >= a.2);
            }
        }
    }

    #[test]
    fn single_constraint_matches_annulus_area() {
        // lattice points in a circular shell centered inside the box track
        // its area within a perimeter-sized error
        let mut cfg = LatticeConfig::new(2, 20, 1.5, PhiFamily::Distance, PhiFamily::Distance).unwrap();
        cfg.both_constraints = false;
        cfg.lambda = [8.0, 0.0];
        let delta = cfg.delta();
        let center: LatticePoint = [10, 10, 0];
        let mut count = 0u32;
        for &n in &cfg.points() {
            if (cfg.eval(&cfg.phi1, center, n) - cfg.lambda[0]).abs() <= delta {
                count += 1;
            }
        }
        let area = std::f64::consts::PI * ((8.0 + delta).powi(2) - (8.0 - delta).powi(2));
        let perimeter = 2.0 * std::f64::consts::PI * 8.0;
        assert!(
            (count as f64 - area).abs() <= perimeter + 8.0,
            "count {count} vs area {area:.1}"
        );
    }
}
