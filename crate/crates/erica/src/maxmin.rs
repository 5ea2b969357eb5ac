//! Max-min fair allocation oracle.
//!
//! Progressive filling over an arbitrary topology: raise every unfrozen VC's
//! rate uniformly; whenever a link saturates (or a VC hits its source cap),
//! freeze the VCs bottlenecked there; repeat. The result is the unique
//! max-min fair allocation, used as ground truth by the fluid-model and
//! simulator tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub id: String,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcSpec {
    pub id: String,
    /// Links the VC crosses, in order.
    pub route: Vec<String>,
    /// Source bottleneck: the VC cannot use more than this, if set.
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaxMinProblem {
    pub links: Vec<LinkSpec>,
    pub vcs: Vec<VcSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bottleneck {
    Link(String),
    Source,
}

impl fmt::Display for Bottleneck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bottleneck::Link(id) => f.write_str(id),
            Bottleneck::Source => f.write_str("source"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub rates: BTreeMap<String, f64>,
    pub bottleneck: BTreeMap<String, Bottleneck>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemError {
    DuplicateId(String),
    NonPositiveCapacity { link: String, capacity: f64 },
    EmptyRoute { vc: String },
    UnknownLink { vc: String, link: String },
    RepeatedLink { vc: String, link: String },
    NonPositiveCap { vc: String, cap: f64 },
}

impl fmt::Display for ProblemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemError::DuplicateId(id) => write!(f, "duplicate id `{id}`"),
            ProblemError::NonPositiveCapacity { link, capacity } => {
                write!(f, "link `{link}` has non-positive capacity {capacity}")
            }
            ProblemError::EmptyRoute { vc } => write!(f, "vc `{vc}` has an empty route"),
            ProblemError::UnknownLink { vc, link } => {
                write!(f, "vc `{vc}` routes over undeclared link `{link}`")
            }
            ProblemError::RepeatedLink { vc, link } => {
                write!(f, "vc `{vc}` crosses link `{link}` more than once")
            }
            ProblemError::NonPositiveCap { vc, cap } => {
                write!(f, "vc `{vc}` has non-positive source cap {cap}")
            }
        }
    }
}

impl std::error::Error for ProblemError {}

impl MaxMinProblem {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let mut ids = BTreeSet::new();
        for l in &self.links {
            if !ids.insert(l.id.as_str()) {
                return Err(ProblemError::DuplicateId(l.id.clone()));
            }
            if !(l.capacity > 0.0) {
                return Err(ProblemError::NonPositiveCapacity {
                    link: l.id.clone(),
                    capacity: l.capacity,
                });
            }
        }
        let link_ids: BTreeSet<&str> = self.links.iter().map(|l| l.id.as_str()).collect();
        let mut vc_ids = BTreeSet::new();
        for vc in &self.vcs {
            if !vc_ids.insert(vc.id.as_str()) {
                return Err(ProblemError::DuplicateId(vc.id.clone()));
            }
            if vc.route.is_empty() {
                return Err(ProblemError::EmptyRoute { vc: vc.id.clone() });
            }
            let mut seen = BTreeSet::new();
            for link in &vc.route {
                if !link_ids.contains(link.as_str()) {
                    return Err(ProblemError::UnknownLink {
                        vc: vc.id.clone(),
                        link: link.clone(),
                    });
                }
                if !seen.insert(link.as_str()) {
                    return Err(ProblemError::RepeatedLink {
                        vc: vc.id.clone(),
                        link: link.clone(),
                    });
                }
            }
            if let Some(cap) = vc.cap {
                if !(cap > 0.0) {
                    return Err(ProblemError::NonPositiveCap { vc: vc.id.clone(), cap });
                }
            }
        }
        Ok(())
    }
}

/// Compute the max-min fair allocation by progressive filling.
pub fn solve(p: &MaxMinProblem) -> Result<Allocation, ProblemError> {
    p.validate()?;
    let mut rates: BTreeMap<String, f64> = BTreeMap::new();
    let mut bottleneck: BTreeMap<String, Bottleneck> = BTreeMap::new();
    let mut frozen: BTreeSet<usize> = BTreeSet::new();

    while frozen.len() < p.vcs.len() {
        // Fill level per link: capacity left over frozen VCs, split among the rest.
        let mut link_level: BTreeMap<&str, f64> = BTreeMap::new();
        for l in &p.links {
            let mut used = 0.0;
            let mut active = 0usize;
            for (i, vc) in p.vcs.iter().enumerate() {
                if !vc.route.iter().any(|r| r == &l.id) {
                    continue;
                }
                if frozen.contains(&i) {
                    used += rates[&vc.id];
                } else {
                    active += 1;
                }
            }
            if active > 0 {
                link_level.insert(l.id.as_str(), (l.capacity - used).max(0.0) / active as f64);
            }
        }
        let level = p
            .vcs
            .iter()
            .enumerate()
            .filter(|(i, _)| !frozen.contains(i))
            .flat_map(|(_, vc)| vc.cap)
            .chain(link_level.values().copied())
            .fold(f64::INFINITY, f64::min);
        debug_assert!(level.is_finite(), "every unfrozen VC crosses some link");

        let mut froze_any = false;
        for (i, vc) in p.vcs.iter().enumerate() {
            if frozen.contains(&i) {
                continue;
            }
            if let Some(cap) = vc.cap {
                if cap <= level {
                    rates.insert(vc.id.clone(), cap);
                    bottleneck.insert(vc.id.clone(), Bottleneck::Source);
                    frozen.insert(i);
                    froze_any = true;
                    continue;
                }
            }
            if let Some(link) = vc
                .route
                .iter()
                .find(|r| link_level.get(r.as_str()) == Some(&level))
            {
                rates.insert(vc.id.clone(), level);
                bottleneck.insert(vc.id.clone(), Bottleneck::Link(link.clone()));
                frozen.insert(i);
                froze_any = true;
            }
        }
        debug_assert!(froze_any, "progressive filling must freeze a VC per round");
        if !froze_any {
            // Defensive against float pathology: freeze everything at the level.
            for (i, vc) in p.vcs.iter().enumerate() {
                if frozen.insert(i) {
                    rates.insert(vc.id.clone(), level);
                    bottleneck.insert(vc.id.clone(), Bottleneck::Link(vc.route[0].clone()));
                }
            }
        }
    }
    Ok(Allocation { rates, bottleneck })
}

/// Check the bottleneck characterization: an allocation is max-min fair iff
/// it is feasible and every VC is at its source cap or crosses a saturated
/// link on which its rate is maximal.
pub fn is_maxmin(p: &MaxMinProblem, a: &Allocation, tol: f64) -> bool {
    if p.vcs.iter().any(|vc| !a.rates.contains_key(&vc.id)) {
        return false;
    }
    let mut load: BTreeMap<&str, f64> = BTreeMap::new();
    let mut max_on_link: BTreeMap<&str, f64> = BTreeMap::new();
    for vc in &p.vcs {
        let rate = a.rates[&vc.id];
        if rate < 0.0 {
            return false;
        }
        for link in &vc.route {
            *load.entry(link.as_str()).or_insert(0.0) += rate;
            let m = max_on_link.entry(link.as_str()).or_insert(0.0);
            *m = m.max(rate);
        }
    }
    for l in &p.links {
        if load.get(l.id.as_str()).copied().unwrap_or(0.0) > l.capacity * (1.0 + tol) {
            return false;
        }
    }
    p.vcs.iter().all(|vc| {
        let rate = a.rates[&vc.id];
        if let Some(cap) = vc.cap {
            if (rate - cap).abs() <= tol * cap {
                return true;
            }
        }
        vc.route.iter().any(|link| {
            let cap = p.links.iter().find(|l| &l.id == link).map(|l| l.capacity).unwrap();
            let saturated = load[link.as_str()] >= cap * (1.0 - tol);
            saturated && rate >= max_on_link[link.as_str()] * (1.0 - tol)
        })
    })
}

/// Summary fairness statistic: 1 for equal rates, approaching 1/n as one
/// rate dominates.
pub fn fairness_index(rates: &[f64]) -> Result<f64, &'static str> {
    if rates.is_empty() {
        return Err("fairness index of an empty rate list is undefined");
    }
    assert!(rates.iter().all(|&r| r >= 0.0), "rates must be nonnegative");
    let sum: f64 = rates.iter().sum();
    let sum_sq: f64 = rates.iter().map(|r| r * r).sum();
    if sum_sq == 0.0 {
        return Err("fairness index of all-zero rates is undefined");
    }
    Ok(sum * sum / (rates.len() as f64 * sum_sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn problem(links: &[(&str, f64)], vcs: &[(&str, &[&str], Option<f64>)]) -> MaxMinProblem {
        MaxMinProblem {
            links: links
                .iter()
                .map(|(id, c)| LinkSpec { id: id.to_string(), capacity: *c })
                .collect(),
            vcs: vcs
                .iter()
                .map(|(id, route, cap)| VcSpec {
                    id: id.to_string(),
                    route: route.iter().map(|r| r.to_string()).collect(),
                    cap: *cap,
                })
                .collect(),
        }
    }

    #[test]
    fn equal_split_on_single_link() {
        let p = problem(
            &[("l", 100.0)],
            &[("a", &["l"], None), ("b", &["l"], None), ("c", &["l"], None), ("d", &["l"], None)],
        );
        let a = solve(&p).unwrap();
        for vc in ["a", "b", "c", "d"] {
            assert_eq!(a.rates[vc], 25.0);
            assert_eq!(a.bottleneck[vc], Bottleneck::Link("l".into()));
        }
    }

    #[test]
    fn source_cap_redistributes_leftover() {
        let p = problem(
            &[("l", 100.0)],
            &[("a", &["l"], Some(10.0)), ("b", &["l"], None), ("c", &["l"], None)],
        );
        let a = solve(&p).unwrap();
        assert_eq!(a.rates["a"], 10.0);
        assert_eq!(a.bottleneck["a"], Bottleneck::Source);
        assert_eq!(a.rates["b"], 45.0);
        assert_eq!(a.rates["c"], 45.0);
    }

    #[test]
    fn parking_lot_chain() {
        let p = problem(
            &[("l1", 100.0), ("l2", 60.0), ("l3", 80.0)],
            &[
                ("thru", &["l1", "l2", "l3"], None),
                ("v1", &["l1"], None),
                ("v2", &["l2"], None),
                ("v3", &["l3"], None),
            ],
        );
        let a = solve(&p).unwrap();
        assert_eq!(a.rates["thru"], 30.0);
        assert_eq!(a.bottleneck["thru"], Bottleneck::Link("l2".into()));
        assert_eq!(a.rates["v2"], 30.0);
        assert_eq!(a.rates["v1"], 70.0);
        assert_eq!(a.rates["v3"], 50.0);
    }

    #[test]
    fn characterization_accepts_fair_rejects_unfair() {
        let p = problem(&[("l", 100.0)], &[("a", &["l"], None), ("b", &["l"], None)]);
        let fair = Allocation {
            rates: [("a".to_string(), 50.0), ("b".to_string(), 50.0)].into(),
            bottleneck: BTreeMap::new(),
        };
        assert!(is_maxmin(&p, &fair, 1e-9));
        let skewed = Allocation {
            rates: [("a".to_string(), 30.0), ("b".to_string(), 70.0)].into(),
            bottleneck: BTreeMap::new(),
        };
        assert!(!is_maxmin(&p, &skewed, 1e-9));
        // Feasible but wasteful: nothing saturates.
        let idle = Allocation {
            rates: [("a".to_string(), 10.0), ("b".to_string(), 10.0)].into(),
            bottleneck: BTreeMap::new(),
        };
        assert!(!is_maxmin(&p, &idle, 1e-9));
    }

    #[test]
    fn rejects_malformed_problems() {
        let p = problem(&[("l", 100.0)], &[("a", &[], None)]);
        assert_eq!(solve(&p).unwrap_err(), ProblemError::EmptyRoute { vc: "a".into() });
        let p = problem(&[("l", 100.0)], &[("a", &["ghost"], None)]);
        assert_eq!(
            solve(&p).unwrap_err(),
            ProblemError::UnknownLink { vc: "a".into(), link: "ghost".into() }
        );
        let p = problem(&[("l", 0.0)], &[("a", &["l"], None)]);
        assert!(matches!(solve(&p).unwrap_err(), ProblemError::NonPositiveCapacity { .. }));
    }

    #[test]
    fn fairness_index_examples() {
        assert_eq!(fairness_index(&[10.0, 10.0, 10.0]).unwrap(), 1.0);
        assert_eq!(fairness_index(&[10.0, 0.0]).unwrap(), 0.5);
        let idx = fairness_index(&[1.0, 2.0, 3.0]).unwrap();
        assert!((idx - 36.0 / 42.0).abs() < 1e-15);
        assert!(fairness_index(&[0.0, 0.0]).is_err());
        assert!(fairness_index(&[]).is_err());
    }

    /// Random problems: a handful of links, VCs routed over random subsets.
    fn arb_problem() -> impl Strategy<Value = MaxMinProblem> {
        let links = proptest::collection::vec(1.0f64..1000.0, 1..5);
        let vcs = proptest::collection::vec(
            (proptest::collection::vec(any::<bool>(), 5), proptest::option::of(1.0f64..500.0)),
            1..8,
        );
        (links, vcs).prop_map(|(caps, vc_specs)| {
            let links: Vec<LinkSpec> = caps
                .iter()
                .enumerate()
                .map(|(i, c)| LinkSpec { id: format!("l{i}"), capacity: *c })
                .collect();
            let n_links = links.len();
            let vcs = vc_specs
                .into_iter()
                .enumerate()
                .map(|(i, (mask, cap))| {
                    let mut route: Vec<String> = mask
                        .iter()
                        .take(n_links)
                        .enumerate()
                        .filter(|(_, &m)| m)
                        .map(|(j, _)| format!("l{j}"))
                        .collect();
                    if route.is_empty() {
                        route.push("l0".to_string());
                    }
                    VcSpec { id: format!("v{i}"), route, cap }
                })
                .collect();
            MaxMinProblem { links, vcs }
        })
    }

    proptest! {
        #[test]
        fn solve_passes_characterization(p in arb_problem()) {
            let a = solve(&p).unwrap();
            prop_assert!(is_maxmin(&p, &a, 1e-9));
        }

        #[test]
        fn declaration_order_is_irrelevant(p in arb_problem(), seed in any::<u64>()) {
            let a = solve(&p).unwrap();
            let mut q = p.clone();
            // Deterministic shuffle from the seed.
            let mut s = seed;
            let mut next = move || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 33) as usize };
            for i in (1..q.links.len()).rev() { q.links.swap(i, next() % (i + 1)); }
            for i in (1..q.vcs.len()).rev() { q.vcs.swap(i, next() % (i + 1)); }
            let b = solve(&q).unwrap();
            for vc in &p.vcs {
                prop_assert!((a.rates[&vc.id] - b.rates[&vc.id]).abs() <= 1e-9 * a.rates[&vc.id].max(1.0));
            }
        }

        #[test]
        fn capacity_scaling_scales_rates(p in arb_problem(), k in 0.01f64..100.0) {
            let a = solve(&p).unwrap();
            let mut q = p.clone();
            for l in &mut q.links { l.capacity *= k; }
            for vc in &mut q.vcs { if let Some(c) = &mut vc.cap { *c *= k; } }
            let b = solve(&q).unwrap();
            for vc in &p.vcs {
                let want = a.rates[&vc.id] * k;
                prop_assert!((b.rates[&vc.id] - want).abs() <= 1e-9 * want.max(1e-12));
            }
        }
    }
}
