//! Adaptive wider/deeper budget split and per-category deeper quotas.
//!
//! Each generation step has a fixed budget of `n` keywords. The share that
//! goes to brand-new categories (wider) is the wider group's share of the
//! KPI observed in the previous step; the rest (deeper) is apportioned over
//! existing categories in proportion to their cumulative KPI.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::domain::{selected_kpi, KpiMetric, Origin, StepOutcome};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest value for which every integer is exactly representable in f64.
const EXACT_INT_LIMIT: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyVariant {
    FullAdaptive,
    FixedGrowth { ratio: f64 },
    WideOnly,
    DeepOnly,
}

impl PolicyVariant {
    pub fn fixed(ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::InvalidInput(format!(
                "fixed growth ratio {ratio} must lie in [0, 1]"
            )));
        }
        Ok(PolicyVariant::FixedGrowth { ratio })
    }
}

impl fmt::Display for PolicyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyVariant::FullAdaptive => f.write_str("full_adaptive"),
            PolicyVariant::FixedGrowth { ratio } => write!(f, "fixed_growth({ratio})"),
            PolicyVariant::WideOnly => f.write_str("wide_only"),
            PolicyVariant::DeepOnly => f.write_str("deep_only"),
        }
    }
}

impl FromStr for PolicyVariant {
    type Err = Error;

    /// Accepts `full`, `full_adaptive`, `wide_only`, `deep_only`,
    /// `fixed:0.5`, `fixed_growth:0.5` and `fixed_growth(0.5)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "full" | "full_adaptive" => return Ok(PolicyVariant::FullAdaptive),
            "wide" | "wide_only" => return Ok(PolicyVariant::WideOnly),
            "deep" | "deep_only" => return Ok(PolicyVariant::DeepOnly),
            _ => {}
        }
        let ratio = s
            .strip_prefix("fixed_growth")
            .or_else(|| s.strip_prefix("fixed"))
            .map(|rest| rest.trim_start_matches(':').trim_matches(|c| c == '(' || c == ')'));
        match ratio {
            Some(r) => {
                let ratio: f64 = r
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad fixed growth ratio in {s:?}")))?;
                PolicyVariant::fixed(ratio)
            }
            None => Err(Error::InvalidInput(format!("unknown policy variant {s:?}"))),
        }
    }
}

/// Wider/deeper counts for one step before quotas are attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split<S> {
    pub n: usize,
    pub wider_count: usize,
    pub deeper_count: usize,
    pub p_wider: S,
    pub p_deeper: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub n: usize,
    pub wider_count: usize,
    pub deeper_count: usize,
    pub p_wider: f64,
    pub p_deeper: f64,
    pub deeper_quotas: IndexMap<String, usize>,
}

impl AllocationPlan {
    /// Attaches deeper quotas for the given category KPI totals to a split.
    pub fn build<S: Scalar>(split: Split<S>, categories: &IndexMap<String, f64>) -> Result<Self> {
        let deeper_quotas = assign_deeper_quotas(split.deeper_count, categories)?;
        Ok(AllocationPlan {
            n: split.n,
            wider_count: split.wider_count,
            deeper_count: split.deeper_count,
            p_wider: split.p_wider.as_f64(),
            p_deeper: split.p_deeper.as_f64(),
            deeper_quotas,
        })
    }

    pub fn check(&self) -> Result<()> {
        let quota_sum: usize = self.deeper_quotas.values().sum();
        if self.wider_count + self.deeper_count != self.n
            || quota_sum != self.deeper_count
            || (self.p_wider + self.p_deeper - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidInput(format!("inconsistent allocation plan {self:?}")));
        }
        Ok(())
    }

    pub fn quota(&self, category: &str) -> usize {
        self.deeper_quotas.get(category).copied().unwrap_or(0)
    }
}

/// Sums the selected KPI of the previous step's keywords by origin tag.
/// Initial keywords belong to neither group, so step 0 yields `(0, 0)`.
pub fn aggregate_group_kpi(previous: &StepOutcome, metric: KpiMetric) -> (f64, f64) {
    let mut wider = 0.0;
    let mut deeper = 0.0;
    for kw in previous.keyword_set.keywords() {
        let value = previous
            .observed_kpis
            .get(kw.normalized())
            .map_or(0.0, |r| selected_kpi(r, metric));
        match kw.origin() {
            Origin::Wider => wider += value,
            Origin::Deeper => deeper += value,
            Origin::Initial => {}
        }
    }
    (wider, deeper)
}

fn as_exact_int<S: Scalar>(v: S) -> Option<u128> {
    let f = v.as_f64();
    (f.fract() == 0.0 && f <= EXACT_INT_LIMIT).then_some(f as u128)
}

/// Splits a budget of `n` keywords between the wider and deeper directions.
///
/// For `FullAdaptive` the wider count is `floor(pW / (pW + pD) * n)`; when
/// both KPI groups are zero the split falls back to 50/50. Integral inputs
/// are evaluated in exact integer arithmetic.
pub fn compute_split<S: Scalar>(
    wider_kpi: S,
    deeper_kpi: S,
    n: usize,
    variant: PolicyVariant,
) -> Result<Split<S>> {
    for (name, v) in [("wider", wider_kpi), ("deeper", deeper_kpi)] {
        if !v.is_finite() || v < S::zero() {
            return Err(Error::InvalidKpi(format!("{name} group KPI {v} must be finite and >= 0")));
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput("per-step budget n must be >= 1".into()));
    }
    let n_s = S::from_usize(n).expect("usize fits a float");
    let half = S::from_f64_lossy(0.5);

    let (p_wider, wider_count) = match variant {
        PolicyVariant::FullAdaptive => {
            let total = wider_kpi + deeper_kpi;
            if total == S::zero() {
                (half, n / 2)
            } else {
                let p = wider_kpi / total;
                let count = match (as_exact_int(wider_kpi), as_exact_int(deeper_kpi)) {
                    (Some(w), Some(d)) => ((w * n as u128) / (w + d)) as usize,
                    _ => floor_count(p * n_s, n),
                };
                (p, count)
            }
        }
        PolicyVariant::FixedGrowth { ratio } => {
            if !(0.0..=1.0).contains(&ratio) {
                return Err(Error::InvalidInput(format!(
                    "fixed growth ratio {ratio} must lie in [0, 1]"
                )));
            }
            let p = S::from_f64_lossy(ratio);
            (p, floor_count(p * n_s, n))
        }
        PolicyVariant::WideOnly => (S::one(), n),
        PolicyVariant::DeepOnly => (S::zero(), 0),
    };
    Ok(Split {
        n,
        wider_count,
        deeper_count: n - wider_count,
        p_wider,
        p_deeper: S::one() - p_wider,
    })
}

fn floor_count<S: Scalar>(x: S, n: usize) -> usize {
    x.floor().to_usize().unwrap_or(0).min(n)
}

/// Apportions `deeper_count` keywords over categories in proportion to
/// their cumulative KPI using the largest-remainder method.
///
/// Remainder ties go to the lexicographically smaller category name. If
/// every category has zero KPI the split is as even as possible, with the
/// extra keywords going to the earliest-created categories (map order).
pub fn assign_deeper_quotas(
    deeper_count: usize,
    categories: &IndexMap<String, f64>,
) -> Result<IndexMap<String, usize>> {
    if let Some((name, v)) = categories.iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidKpi(format!("category {name:?} has KPI {v}")));
    }
    if categories.is_empty() {
        return if deeper_count == 0 {
            Ok(IndexMap::new())
        } else {
            Err(Error::NoCategories)
        };
    }

    let total: f64 = categories.values().sum();
    if total == 0.0 {
        let m = categories.len();
        let (base, extra) = (deeper_count / m, deeper_count % m);
        return Ok(categories
            .keys()
            .enumerate()
            .map(|(i, name)| (name.clone(), base + usize::from(i < extra)))
            .collect());
    }

    // (index, floor, remainder) with remainders comparable within one path.
    let exact: Option<Vec<u128>> = categories.values().map(|&v| as_exact_int(v)).collect();
    let mut parts: Vec<(usize, usize, Remainder)> = match exact {
        Some(ints) => {
            let denom: u128 = ints.iter().sum();
            ints.iter()
                .enumerate()
                .map(|(i, &k)| {
                    let num = k * deeper_count as u128;
                    (i, (num / denom) as usize, Remainder::Exact(num % denom))
                })
                .collect()
        }
        None => categories
            .values()
            .enumerate()
            .map(|(i, &k)| {
                let ideal = deeper_count as f64 * k / total;
                let fl = ideal.floor();
                (i, fl as usize, Remainder::Approx(ideal - fl))
            })
            .collect(),
    };

    let assigned: usize = parts.iter().map(|p| p.1).sum();
    let mut leftover = deeper_count.saturating_sub(assigned);
    let names: Vec<&String> = categories.keys().collect();
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&a, &b| {
        parts[b]
            .2
            .cmp_desc_key(&parts[a].2)
            .then_with(|| names[a].cmp(names[b]))
    });
    for idx in order {
        if leftover == 0 {
            break;
        }
        parts[idx].1 += 1;
        leftover -= 1;
    }

    Ok(parts
        .into_iter()
        .map(|(i, q, _)| (names[i].clone(), q))
        .collect())
}

#[derive(Debug, Clone, Copy)]
enum Remainder {
    Exact(u128),
    Approx(f64),
}

impl Remainder {
    fn cmp_desc_key(&self, other: &Remainder) -> Ordering {
        match (self, other) {
            (Remainder::Exact(a), Remainder::Exact(b)) => a.cmp(b),
            (Remainder::Approx(a), Remainder::Approx(b)) => a.total_cmp(b),
            _ => unreachable!("remainders from one apportionment share a representation"),
        }
    }
}
