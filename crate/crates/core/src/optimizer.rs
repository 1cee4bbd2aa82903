//! Partition search under upload/download overhead budgets.
//!
//! For one scheme kind we enumerate every `(p0, p1, p2)` inside the caps,
//! keep those whose overheads fit the budgets (exact rational comparison),
//! and pick the one with the lowest simulated mean latency.
//!
//! `p1` needs no explicit cap: `delta_d >= p1 - 1` for every scheme, so any
//! `p1 > floor(budget_d) + 1` is infeasible anyway.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Mutex;

use serde::Serialize;
use thiserror::Error;

use crate::blockmat::PartitionScheme;
use crate::overheads::{compute_overheads, to_f64, OverheadReport, Rational};
use crate::schemes::SchemeKind;
use crate::straggler::{
    estimate_mean_latency, LatencyEstimate, SimConfig, SimError, StragglerModel,
};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no partition scheme satisfies the overhead budgets")]
    Infeasible,
    #[error("invalid search spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Upper bound on one overhead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Budget {
    Finite(Rational),
    Unbounded,
}

impl Budget {
    pub fn allows(&self, overhead: Rational) -> bool {
        match self {
            Budget::Finite(b) => overhead <= *b,
            Budget::Unbounded => true,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Budget::Finite(b) => to_f64(*b),
            Budget::Unbounded => f64::INFINITY,
        }
    }
}

impl PartialOrd for Budget {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Budget {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self, other) {
            (Budget::Finite(a), Budget::Finite(b)) => a.cmp(b),
            (Budget::Finite(_), Budget::Unbounded) => Less,
            (Budget::Unbounded, Budget::Finite(_)) => Greater,
            (Budget::Unbounded, Budget::Unbounded) => Equal,
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Finite(b) if b.is_integer() => write!(f, "{}", b.numer()),
            Budget::Finite(b) => write!(f, "{:?}", to_f64(*b)),
            Budget::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for Budget {
    type Err = SearchError;

    /// Accepts `inf`, a fraction `a/b` or a plain decimal like `0.25`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || SearchError::InvalidSpec(format!("bad budget {s:?}"));
        if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(Budget::Unbounded);
        }
        let value = if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Rational::new(n, d)
        } else {
            let (int, frac) = s.split_once('.').unwrap_or((s, ""));
            if int.starts_with('-') || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 12
            {
                return Err(bad());
            }
            let int: i64 = if int.is_empty() {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            let scale = 10i64.pow(frac.len() as u32);
            let frac: i64 = if frac.is_empty() {
                0
            } else {
                frac.parse().map_err(|_| bad())?
            };
            Rational::new(int * scale + frac, scale)
        };
        if value < Rational::from_integer(0) {
            return Err(bad());
        }
        Ok(Budget::Finite(value))
    }
}

/// Budgets on `(delta_u0, delta_u1, delta_d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Budgets {
    pub upload_left: Budget,
    pub upload_right: Budget,
    pub download: Budget,
}

impl Budgets {
    /// The same bound on all three overheads.
    pub fn equal(b: Budget) -> Self {
        Self {
            upload_left: b,
            upload_right: b,
            download: b,
        }
    }

    pub fn admits(&self, r: &OverheadReport) -> bool {
        self.upload_left.allows(r.delta_u0)
            && self.upload_right.allows(r.delta_u1)
            && self.download.allows(r.delta_d)
    }
}

/// Simulation parameters shared by every candidate partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimTemplate {
    pub workers: usize,
    /// Deterministic part of the full (unpartitioned) task.
    pub t0: f64,
    /// Rate of the exponential part of the full task.
    pub lambda: f64,
    pub trials: usize,
    pub seed: u64,
}

impl SimTemplate {
    pub fn config(&self, kind: SchemeKind, p: PartitionScheme) -> Result<SimConfig, SimError> {
        Ok(SimConfig {
            workers: self.workers,
            recovery_threshold: kind.recovery_threshold(p),
            model: StragglerModel::new(self.t0, self.lambda, p.level() as u64)?,
            trials: self.trials,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpec {
    pub kind: SchemeKind,
    pub budgets: Budgets,
    pub p0_cap: usize,
    pub p2_cap: usize,
    /// Optional explicit cap on `p1`. Required only when the download budget
    /// is unbounded.
    pub p1_cap: Option<usize>,
    /// Restrict the search to `p1 = 1`.
    pub force_p1_one: bool,
    pub sim: SimTemplate,
}

impl SearchSpec {
    /// Largest `p1` worth enumerating.
    pub fn effective_p1_cap(&self) -> Result<usize, SearchError> {
        if self.force_p1_one {
            return Ok(1);
        }
        let derived = match self.budgets.download {
            Budget::Finite(b) => Some(b.floor().to_integer().max(0) as usize + 1),
            Budget::Unbounded => None,
        };
        match (derived, self.p1_cap) {
            (Some(d), Some(c)) => Ok(d.min(c)),
            (Some(d), None) => Ok(d),
            (None, Some(c)) => Ok(c),
            (None, None) => Err(SearchError::InvalidSpec(
                "unbounded download budget needs an explicit p1 cap".into(),
            )),
        }
    }

    fn validate(&self) -> Result<(), SearchError> {
        if self.p0_cap == 0 || self.p2_cap == 0 || self.p1_cap == Some(0) {
            return Err(SearchError::InvalidSpec(
                "partition caps must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Every partition inside the caps whose overheads fit the budgets, in
/// lexicographic `(p0, p1, p2)` order.
pub fn feasible_partitions(spec: &SearchSpec) -> Result<Vec<PartitionScheme>, SearchError> {
    spec.validate()?;
    let p1_cap = spec.effective_p1_cap()?;
    let mut out = Vec::new();
    for p0 in 1..=spec.p0_cap {
        for p1 in 1..=p1_cap {
            for p2 in 1..=spec.p2_cap {
                let p = PartitionScheme { p0, p1, p2 };
                if spec.budgets.admits(&compute_overheads(spec.kind, p)) {
                    out.push(p);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    workers: usize,
    level: u64,
    recovery_threshold: usize,
    t0: u64,
    lambda: u64,
    trials: usize,
    seed: u64,
}

impl From<&SimConfig> for CacheKey {
    fn from(c: &SimConfig) -> Self {
        Self {
            workers: c.workers,
            level: c.model.level,
            recovery_threshold: c.recovery_threshold,
            t0: c.model.t0.to_bits(),
            lambda: c.model.lambda.to_bits(),
            trials: c.trials,
            seed: c.seed,
        }
    }
}

/// Memoized latency estimates. Configurations that differ only in scheme
/// kind or partition shape but agree on `(N, K, R_th)` share one estimate.
#[derive(Debug, Default)]
pub struct LatencyCache {
    entries: Mutex<HashMap<CacheKey, LatencyEstimate>>,
}

impl LatencyCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn estimate(&self, cfg: &SimConfig) -> Result<LatencyEstimate, SimError> {
        let key = CacheKey::from(cfg);
        if let Some(e) = self.entries.lock().unwrap().get(&key) {
            return Ok(*e);
        }
        // Estimates are deterministic in the key, so a racing duplicate
        // computation inserts the same value.
        let est = estimate_mean_latency(cfg)?;
        self.entries.lock().unwrap().insert(key, est);
        Ok(est)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: PartitionScheme,
    pub report: OverheadReport,
    pub latency: LatencyEstimate,
    pub feasible_count: usize,
}

/// Minimizes mean latency over the feasible set. Ties go to the smaller `K`,
/// then to the lexicographically smaller partition.
pub fn search_best_partition(
    spec: &SearchSpec,
    cache: &LatencyCache,
) -> Result<SearchResult, SearchError> {
    let feasible = feasible_partitions(spec)?;
    let mut best: Option<(PartitionScheme, LatencyEstimate)> = None;
    for &p in &feasible {
        let est = cache.estimate(&spec.sim.config(spec.kind, p)?)?;
        let better = match &best {
            None => true,
            Some((bp, be)) => (est.mean, p.level(), p) < (be.mean, bp.level(), *bp),
        };
        if better {
            best = Some((p, est));
        }
    }
    let (p, latency) = best.ok_or(SearchError::Infeasible)?;
    Ok(SearchResult {
        best: p,
        report: compute_overheads(spec.kind, p),
        latency,
        feasible_count: feasible.len(),
    })
}

/// Caps and simulation settings shared by every cell of a trade-off table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffTemplate {
    pub p0_cap: usize,
    pub p2_cap: usize,
    pub p1_cap: Option<usize>,
    pub sim: SimTemplate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffRow {
    pub kind: SchemeKind,
    pub budget: Budget,
    /// `None` when no partition fits the budget.
    pub result: Option<SearchResult>,
}

/// One search per `(kind, budget)` with the budget applied to all three
/// overheads. Rows come out kind-major, in the order given.
pub fn tradeoff_curve(
    kinds: &[SchemeKind],
    budgets: &[Budget],
    template: &TradeoffTemplate,
    force_p1_one: bool,
    cache: &LatencyCache,
) -> Result<Vec<TradeoffRow>, SearchError> {
    if kinds.is_empty() || budgets.is_empty() {
        return Err(SearchError::InvalidSpec(
            "need at least one scheme and one budget".into(),
        ));
    }
    let mut rows = Vec::with_capacity(kinds.len() * budgets.len());
    for &kind in kinds {
        for &budget in budgets {
            let spec = SearchSpec {
                kind,
                budgets: Budgets::equal(budget),
                p0_cap: template.p0_cap,
                p2_cap: template.p2_cap,
                p1_cap: template.p1_cap,
                force_p1_one,
                sim: template.sim,
            };
            let result = match search_best_partition(&spec, cache) {
                Ok(r) => Some(r),
                Err(SearchError::Infeasible) => None,
                Err(e) => return Err(e),
            };
            rows.push(TradeoffRow {
                kind,
                budget,
                result,
            });
        }
    }
    Ok(rows)
}

pub const TRADEOFF_CSV_HEADER: &str =
    "scheme,budget,p0,p1,p2,K,R_th,delta,delta_u0,delta_u1,delta_d,mean_latency,stderr,feasible";

/// Writes rows as CSV. Infeasible rows keep the scheme and budget and leave
/// every other column blank except `feasible=false`.
pub fn write_tradeoff_csv<W: Write>(rows: &[TradeoffRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TRADEOFF_CSV_HEADER}")?;
    for row in rows {
        match &row.result {
            Some(r) => {
                let p = r.best;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},true",
                    row.kind,
                    row.budget,
                    p.p0,
                    p.p1,
                    p.p2,
                    p.level(),
                    r.report.recovery_threshold,
                    to_f64(r.report.delta),
                    to_f64(r.report.delta_u0),
                    to_f64(r.report.delta_u1),
                    to_f64(r.report.delta_d),
                    r.latency.mean,
                    r.latency.stderr
                )?;
            }
            None => writeln!(w, "{},{},,,,,,,,,,,,false", row.kind, row.budget)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template() -> SimTemplate {
        SimTemplate {
            workers: 20,
            t0: 1.0,
            lambda: 0.1,
            trials: 200,
            seed: 3,
        }
    }

    fn spec(kind: SchemeKind, b: Budget) -> SearchSpec {
        SearchSpec {
            kind,
            budgets: Budgets::equal(b),
            p0_cap: 10,
            p2_cap: 10,
            p1_cap: None,
            force_p1_one: false,
            sim: template(),
        }
    }

    fn zero() -> Budget {
        Budget::Finite(Rational::from_integer(0))
    }

    #[test]
    fn budget_parsing() {
        assert_eq!(
            "0.5".parse::<Budget>().unwrap(),
            Budget::Finite(Rational::new(1, 2))
        );
        assert_eq!(
            "3/4".parse::<Budget>().unwrap(),
            Budget::Finite(Rational::new(3, 4))
        );
        assert_eq!(
            "8".parse::<Budget>().unwrap(),
            Budget::Finite(Rational::from_integer(8))
        );
        assert_eq!(
            ".25".parse::<Budget>().unwrap(),
            Budget::Finite(Rational::new(1, 4))
        );
        assert_eq!("inf".parse::<Budget>().unwrap(), Budget::Unbounded);
        for bad in ["-1", "x", "1/0", "1.2.3", "1e3"] {
            assert!(bad.parse::<Budget>().is_err(), "{bad}");
        }
        assert_eq!("0.5".parse::<Budget>().unwrap().to_string(), "0.5");
        assert_eq!("2".parse::<Budget>().unwrap().to_string(), "2");
        assert!(zero() < Budget::Unbounded);
    }

    #[test]
    fn zero_budget_feasible_sets() {
        assert_eq!(
            feasible_partitions(&spec(SchemeKind::Epc, zero())).unwrap(),
            vec![PartitionScheme {
                p0: 1,
                p1: 1,
                p2: 1
            }]
        );
        let tri = feasible_partitions(&spec(SchemeKind::Tri, zero())).unwrap();
        assert_eq!(tri.len(), 100);
        assert!(tri.iter().all(|p| p.p1 == 1));
    }

    #[test]
    fn unbounded_budget_needs_p1_cap() {
        let mut s = spec(SchemeKind::Bi0, Budget::Unbounded);
        assert!(matches!(
            feasible_partitions(&s),
            Err(SearchError::InvalidSpec(_))
        ));
        s.p1_cap = Some(3);
        s.p0_cap = 4;
        s.p2_cap = 5;
        assert_eq!(feasible_partitions(&s).unwrap().len(), 60);
    }

    #[test]
    fn derived_p1_cap_is_exact() {
        for kind in SchemeKind::ALL {
            for b in ["0", "0.5", "1", "2.75", "4"] {
                let mut s = spec(kind, b.parse().unwrap());
                s.p0_cap = 5;
                s.p2_cap = 5;
                let derived = feasible_partitions(&s).unwrap();
                s.budgets.download = b.parse().unwrap();
                s.p1_cap = Some(40);
                // Generous explicit cap; derived cap must not have cut anything.
                let Budget::Finite(r) = s.budgets.download else {
                    unreachable!()
                };
                let brute: Vec<_> = (1..=5)
                    .flat_map(|p0| {
                        (1..=40).flat_map(move |p1| {
                            (1..=5).map(move |p2| PartitionScheme { p0, p1, p2 })
                        })
                    })
                    .filter(|&p| {
                        let rep = compute_overheads(kind, p);
                        rep.delta_u0 <= r && rep.delta_u1 <= r && rep.delta_d <= r
                    })
                    .collect();
                assert_eq!(derived, brute, "{kind} {b}");
            }
        }
    }

    #[test]
    fn single_feasible_scheme_is_returned() {
        let cache = LatencyCache::new();
        let r = search_best_partition(&spec(SchemeKind::Epc, zero()), &cache).unwrap();
        assert_eq!(
            r.best,
            PartitionScheme {
                p0: 1,
                p1: 1,
                p2: 1
            }
        );
        assert_eq!(r.feasible_count, 1);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn infeasible_search() {
        let mut s = spec(SchemeKind::Epc, zero());
        s.budgets.upload_left = Budget::Finite(Rational::new(-1, 1));
        assert!(matches!(
            search_best_partition(&s, &LatencyCache::new()),
            Err(SearchError::Infeasible)
        ));
    }

    #[test]
    fn cache_is_shared_across_kinds() {
        let cache = LatencyCache::new();
        // At p1 = 1 every kind has R_th = K, so all four hit the same entries.
        let mut s = spec(SchemeKind::Tri, zero());
        s.p0_cap = 3;
        s.p2_cap = 3;
        search_best_partition(&s, &cache).unwrap();
        let n = cache.len();
        s.kind = SchemeKind::Bi0;
        s.force_p1_one = true;
        s.budgets = Budgets::equal(Budget::Finite(Rational::from_integer(10)));
        search_best_partition(&s, &cache).unwrap();
        assert_eq!(cache.len(), n);
    }

    #[test]
    fn csv_layout() {
        let cache = LatencyCache::new();
        let t = TradeoffTemplate {
            p0_cap: 2,
            p2_cap: 2,
            p1_cap: None,
            sim: template(),
        };
        let mut budgets_neg = vec![zero()];
        budgets_neg.push(Budget::Finite(Rational::new(-1, 2)));
        let rows = tradeoff_curve(&[SchemeKind::Tri], &budgets_neg, &t, false, &cache).unwrap();
        let mut out = Vec::new();
        write_tradeoff_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRADEOFF_CSV_HEADER);
        assert!(
            lines[1].starts_with("tri,0,2,1,2,4,4,0.0,0.0,0.0,0.0,"),
            "{}",
            lines[1]
        );
        assert!(lines[1].ends_with(",true"));
        assert_eq!(lines[2], "tri,-0.5,,,,,,,,,,,,false");
        assert_eq!(
            lines[2].split(',').count(),
            TRADEOFF_CSV_HEADER.split(',').count()
        );
    }
}
