//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

mod common;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kwgen_core::kpi::{load_dataset, normalize_kpi_table, ColumnMapping, KpiAggregate};
use kwgen_core::metrics::{bleu2, greedy_embed_f1, greedy_match, jaccard, rouge1_recall, set_cosine, set_cosine_vectors, tokenize};
use kwgen_core::tools::{hash_embed, FailingChatModel, ScriptedChatModel};
use kwgen_core::vector::normalize_in_place;
use kwgen_core::{
    assign_deeper_quotas, compute_split, init_keywords, run_campaign, run_step, seed_campaign, HashEmbedder,
    Keyword, KpiRecord, KpiSource, Memory, MemoryRecord, Oracle, Origin, PolicyVariant, ToolError,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed < Duration::from_secs(limit_secs), || {
        format!("took {:.2}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

// ---------------------------------------------------------------- 1

/// Largest w in 0..=n with w * (pw + pd) <= pw * n, by linear search.
fn floor_share(pw: u64, pd: u64, n: usize) -> usize {
    let (pw, total) = (pw as u128, (pw + pd) as u128);
    (0..=n).rev().find(|&w| w as u128 * total <= pw * n as u128).unwrap()
}

fn variant_of(idx: u8, ratio: f64) -> PolicyVariant {
    match idx {
        0 | 1 => PolicyVariant::FullAdaptive,
        2 => PolicyVariant::fixed(ratio).unwrap(),
        3 => PolicyVariant::WideOnly,
        _ => PolicyVariant::DeepOnly,
    }
}

fn allocation_law() -> Check {
    let start = Instant::now();
    let strategy = (
        prop_oneof![Just(0u64), 0u64..=1_000_000],
        prop_oneof![Just(0u64), 0u64..=1_000_000],
        1usize..=400,
        0u8..5,
        0.0f64..=1.0,
        1u64..=1000,
        prop::collection::vec(prop_oneof![Just(0u64), 0u64..=10_000], 1..8),
    );
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, |(pw, pd, n, vi, ratio, c, cats)| {
            let variant = variant_of(vi, ratio);
            let split = compute_split(pw as f64, pd as f64, n, variant).unwrap();
            prop_assert_eq!(split.wider_count + split.deeper_count, n);
            let expected = match variant {
                PolicyVariant::FullAdaptive if pw + pd == 0 => n / 2,
                PolicyVariant::FullAdaptive => floor_share(pw, pd, n),
                PolicyVariant::FixedGrowth { ratio } => (ratio * n as f64).floor() as usize,
                PolicyVariant::WideOnly => n,
                PolicyVariant::DeepOnly => 0,
            };
            prop_assert_eq!(split.wider_count, expected);

            let scaled = compute_split((pw * c) as f64, (pd * c) as f64, n, variant).unwrap();
            prop_assert_eq!(scaled.wider_count, split.wider_count);

            let named: IndexMap<String, f64> =
                cats.iter().enumerate().map(|(i, &k)| (format!("c{i}"), k as f64)).collect();
            let quotas = assign_deeper_quotas(split.deeper_count, &named).unwrap();
            prop_assert_eq!(quotas.values().sum::<usize>(), split.deeper_count);
            let total: u64 = cats.iter().sum();
            let d = split.deeper_count as u64;
            for (q, &k) in quotas.values().zip(&cats) {
                let low = (k * d).checked_div(total).unwrap_or(d / cats.len() as u64);
                prop_assert!(*q as u64 == low || *q as u64 == low + 1, "quota {} vs floor {}", q, low);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    within(start.elapsed(), 5)?;
    Ok(format!("10000 cases in {:.2}s", start.elapsed().as_secs_f64()))
}

// ---------------------------------------------------------------- 2

fn spot_values() -> Check {
    for (w, d, n, expected) in [(30.0, 70.0, 10, (3, 7)), (50.0, 50.0, 7, (3, 4)), (0.0, 0.0, 10, (5, 5))] {
        let s = compute_split(w, d, n, PolicyVariant::FullAdaptive).map_err(|e| e.to_string())?;
        ensure((s.wider_count, s.deeper_count) == expected, || {
            format!("({w},{d},{n}) gave ({}, {})", s.wider_count, s.deeper_count)
        })?;
    }
    Ok("(30,70,10)->(3,7) (50,50,7)->(3,4) (0,0,10)->(5,5)".into())
}

// ---------------------------------------------------------------- 3

const DEMO_CATEGORIES: [&str; 10] = [
    "Illness Coverage Domains",
    "Core Service",
    "Attribute",
    "Customer Service",
    "Insurance Benefits",
    "Insurance Procedures",
    "Payment Options",
    "Online Services",
    "Price Comparison",
    "Customer Review",
];

fn demo_replay() -> Check {
    let start = Instant::now();
    let run = |_| {
        run_campaign(common::demo_config(), &mut common::demo_tools(), PolicyVariant::FullAdaptive)
            .map_err(|e| e.to_string())
    };
    let (a, b) = (run(0)?, run(1)?);
    let counts = a.report.category_counts();
    ensure(counts == [3, 6, 8, 10], || format!("category counts {counts:?}"))?;
    let names: Vec<&str> = a.state.categories().keys().map(String::as_str).collect();
    ensure(names == DEMO_CATEGORIES, || format!("categories {names:?}"))?;
    ensure(a.report.to_json() == b.report.to_json(), || "reports differ between runs".into())?;
    within(start.elapsed(), 10)?;
    Ok(format!("3 -> 6 -> 8 -> 10, identical reports, {:.2}s", start.elapsed().as_secs_f64()))
}

// ---------------------------------------------------------------- 4

fn plain_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn kpi_matching() -> Check {
    let rows = load_dataset(&common::fixture("matching/dataset.csv"), None, &ColumnMapping::default())
        .map_err(|e| e.to_string())?;
    ensure(rows.len() == 50, || format!("{} rows", rows.len()))?;
    let probes = std::fs::read_to_string(common::fixture("matching/probes.txt")).map_err(|e| e.to_string())?;
    let probes: Vec<&str> = probes.lines().filter(|l| !l.trim().is_empty()).collect();
    ensure(probes.len() == 10, || format!("{} probes", probes.len()))?;

    let oracle = Oracle::new(rows.clone(), Arc::new(HashEmbedder::new(256))).map_err(|e| e.to_string())?;
    let row_vecs: Vec<Vec<f64>> = rows.iter().map(|r| hash_embed(&r.keyword, 256).unwrap()).collect();
    let (mut matched, mut unmatched) = (0, 0);
    for probe in &probes {
        let q: Vec<f64> = hash_embed(probe, 256).unwrap();
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, v) in row_vecs.iter().enumerate() {
            let c = plain_cosine(&q, v);
            if c > best.1 {
                best = (i, c);
            }
        }
        let expected = (best.1 > 0.6).then_some(best.0);
        let got = oracle.match_text(probe).map_err(|e| e.to_string())?.map(|m| m.index);
        ensure(got == expected, || format!("probe {probe:?}: got {got:?}, oracle {expected:?}"))?;
        if expected.is_some() {
            matched += 1;
        } else {
            unmatched += 1;
        }
    }
    ensure(matched > 0 && unmatched > 0, || format!("{matched} matched, {unmatched} unmatched"))?;
    for (i, row) in rows.iter().enumerate() {
        let m = oracle.match_text(&row.keyword).map_err(|e| e.to_string())?;
        ensure(m.is_some_and(|m| m.index == i && m.cosine == 1.0), || {
            format!("self-match of {:?} gave {m:?}", row.keyword)
        })?;
    }
    Ok(format!("10 probes ({matched} matched, {unmatched} below threshold), 50 exact self-matches"))
}

// ---------------------------------------------------------------- 5

const CORPUS: [(&str, &str); 20] = [
    ("sony bank mortgage rates", "sony bank mortgage rates"),
    ("camera lens", "insurance premium"),
    ("mortgage", "sony bank mortgage"),
    ("a a b", "a b b"),
    ("the cat sat on the mat", "the cat is on the mat"),
    ("cheap medical insurance online", "medical insurance cheap online quote"),
    ("life insurance life insurance", "life insurance for seniors"),
    ("bravia 4k television deals", "sony bravia 4k tv"),
    ("a b c d e f g", "a b"),
    ("x y", "y x"),
    ("loan loan loan", "loan"),
    ("cancer insurance sony cancer insurance", "sony cancer insurance plan"),
    ("travel insurance quote", "travel insurance quotes compare travel insurance"),
    ("neural network console", "sony neural network console free download"),
    ("a", "a a b"),
    ("prediction one pricing", "prediction one pricing plans and prediction one trial"),
    ("deposit foreign currency", "foreign currency deposit rates"),
    ("b c", "a b c d"),
    ("one two three four five six", "six five four three two one"),
    ("mirrorless camera body", "mirrorless camera body mirrorless camera lens"),
];

fn counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn clipped(c: &[&str], r: &[&str], n: usize) -> usize {
    let rc = counts(r, n);
    counts(c, n).iter().map(|(g, k)| (*k).min(rc.get(g).copied().unwrap_or(0))).sum()
}

fn bleu2_oracle(c: &[&str], r: &[&str]) -> f64 {
    let (lc, lr) = (c.len() as f64, r.len() as f64);
    let bp = if lc > lr { 1.0 } else { (1.0 - lr / lc).exp() };
    let p1 = clipped(c, r, 1) as f64 / lc;
    if c.len() == 1 {
        return bp * p1;
    }
    let m2 = clipped(c, r, 2) as f64;
    let p2 = if m2 == 0.0 { 1.0 / (lc - 1.0 + 1.0) } else { m2 / (lc - 1.0) };
    if p1 == 0.0 {
        return 0.0;
    }
    bp * (p1.ln() / 2.0 + p2.ln() / 2.0).exp()
}

fn rouge1_oracle(c: &[&str], r: &[&str]) -> f64 {
    let mut hits = 0;
    let mut used = vec![false; r.len()];
    for tok in c {
        if let Some(j) = (0..r.len()).find(|&j| !used[j] && r[j] == *tok) {
            used[j] = true;
            hits += 1;
        }
    }
    hits as f64 / r.len() as f64
}

fn metric_oracles() -> Check {
    for (cand, refr) in CORPUS {
        let (ct, rt) = (tokenize(cand), tokenize(refr));
        let c: Vec<&str> = cand.split_whitespace().collect();
        let r: Vec<&str> = refr.split_whitespace().collect();
        ensure(ct.tokens() == c && rt.tokens() == r, || format!("tokenization of {cand:?}"))?;
        let b = bleu2(&ct, &rt).map_err(|e| e.to_string())?;
        let bo = bleu2_oracle(&c, &r);
        ensure((b - bo).abs() <= 1e-6, || format!("bleu2 {cand:?}/{refr:?}: {b} vs {bo}"))?;
        let g = rouge1_recall(&ct, &rt).map_err(|e| e.to_string())?;
        let go = rouge1_oracle(&c, &r);
        ensure((g - go).abs() <= 1e-6, || format!("rouge1 {cand:?}/{refr:?}: {g} vs {go}"))?;
    }
    ensure(bleu2(&tokenize("x y z"), &tokenize("x y z")).unwrap() == 1.0, || "bleu identity".into())?;
    ensure(bleu2(&tokenize("p q"), &tokenize("x y z")).unwrap() == 0.0, || "bleu disjoint".into())?;
    ensure((rouge1_recall(&tokenize("a"), &tokenize("a a b")).unwrap() - 1.0 / 3.0).abs() < 1e-15, || {
        "rouge clipping".into()
    })?;

    let embedder = HashEmbedder::<f64>::new(256);
    let cands = ["sony", "bank", "mortgage", "rates", "online", "loan"];
    let refs = ["sony bank", "housing loan", "interest", "mortgage rate"];
    let score = greedy_embed_f1(&cands, &refs, &embedder).map_err(|e| e.to_string())?;
    let cv: Vec<Vec<f64>> = cands.iter().map(|t| hash_embed(t, 256).unwrap()).collect();
    let rv: Vec<Vec<f64>> = refs.iter().map(|t| hash_embed(t, 256).unwrap()).collect();
    let matrix: Vec<Vec<f64>> = cv.iter().map(|c| rv.iter().map(|r| plain_cosine(c, r)).collect()).collect();
    let p = matrix.iter().map(|row| row.iter().cloned().fold(f64::MIN, f64::max)).sum::<f64>() / 6.0;
    let r = (0..4).map(|j| matrix.iter().map(|row| row[j]).fold(f64::MIN, f64::max)).sum::<f64>() / 4.0;
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    ensure(
        (score.precision - p).abs() <= 1e-9 && (score.recall - r).abs() <= 1e-9 && (score.f1 - f).abs() <= 1e-9,
        || format!("greedy {score:?} vs oracle ({p}, {r}, {f})"),
    )?;
    let same = greedy_embed_f1(&cands, &cands, &embedder).unwrap();
    ensure((same.precision, same.recall, same.f1) == (1.0, 1.0, 1.0), || format!("greedy identity {same:?}"))?;
    let basis = |i: usize| {
        let mut v = vec![0.0f64; 4];
        v[i] = 1.0;
        v
    };
    let ortho = greedy_match(&[basis(0), basis(1)], &[basis(2), basis(3)]).unwrap();
    ensure(ortho.f1 == 0.0, || format!("orthogonal greedy {ortho:?}"))?;

    let abc = ["a", "b", "c"];
    ensure(jaccard(&abc, &abc) == 1.0, || "jaccard identity".into())?;
    ensure(jaccard(&abc, &["x", "y"]) == 0.0, || "jaccard disjoint".into())?;
    ensure(jaccard(&abc, &["b", "c", "d"]) == 0.5, || "jaccard 2/4".into())?;
    let kws = ["sony bank mortgage", "foreign currency deposit", "housing loan"];
    ensure(set_cosine(&kws, &kws, &embedder).unwrap() == 1.0, || "set cosine identity".into())?;
    let v: Vec<Vec<f64>> = kws.iter().map(|k| hash_embed(k, 256).unwrap()).collect();
    let neg: Vec<Vec<f64>> = v.iter().map(|x| x.iter().map(|y| -y).collect()).collect();
    ensure(set_cosine_vectors(&v, &neg).unwrap() == -1.0, || "set cosine antipodal".into())?;
    Ok("20-pair BLEU-2/ROUGE-1 oracle, 6x4 greedy matrix, identity and antipodal cases".into())
}

// ---------------------------------------------------------------- 6

fn normalization() -> Check {
    let group = (0.0f64..1e6, 0.0f64..1e6, 0.0f64..50.0, 0.0f64..100.0);
    let mut runner = TestRunner::new(Config {
        cases: 2_000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&prop::collection::vec(group, 1..10), |groups| {
            let table: IndexMap<String, KpiAggregate> = groups
                .iter()
                .enumerate()
                .map(|(i, &(clicks, search_volume, cpc, competitor_score))| {
                    (format!("m{i}"), KpiAggregate { clicks, search_volume, cpc, competitor_score })
                })
                .collect();
            let out = normalize_kpi_table(&table);
            for n in out.values() {
                prop_assert!((0.0..=100.0).contains(&n.clicks));
                prop_assert!((0.0..=100.0).contains(&n.search_volume));
                prop_assert!((0.0..=1.0).contains(&n.cpc));
            }
            let max = |f: fn(&kwgen_core::kpi::NormalizedKpi) -> f64| out.values().map(f).fold(0.0, f64::max);
            let any = |f: fn(&KpiAggregate) -> f64| table.values().any(|g| f(g) > 0.0);
            prop_assert_eq!(max(|n| n.clicks), if any(|g| g.clicks) { 100.0 } else { 0.0 });
            prop_assert_eq!(max(|n| n.search_volume), if any(|g| g.search_volume) { 100.0 } else { 0.0 });
            prop_assert_eq!(max(|n| n.cpc), if any(|g| g.cpc) { 1.0 } else { 0.0 });
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    // Raw means proportional to the published table recover its normalized values.
    let published = [
        ("adaptive", 100.0, 62.3, 0.38, 56.0),
        ("llm_a", 76.2, 100.0, 0.63, 78.0),
        ("llm_b", 69.1, 57.30, 0.62, 83.0),
        ("extractor_a", 71.8, 65.7, 0.76, 79.0),
        ("extractor_b", 69.8, 55.87, 0.87, 80.0),
        ("planner", 44.2, 43.0, 1.0, 67.0),
    ];
    let table: IndexMap<String, KpiAggregate> = published
        .iter()
        .map(|&(name, c, v, p, s)| {
            let agg = KpiAggregate { clicks: c * 3.7, search_volume: v * 41.0, cpc: p * 2.4, competitor_score: s };
            (name.to_string(), agg)
        })
        .collect();
    let out = normalize_kpi_table(&table);
    for &(name, c, v, p, s) in &published {
        let n = out[name];
        ensure(
            (n.clicks - c).abs() < 1e-9 && (n.search_volume - v).abs() < 1e-9 && (n.cpc - p).abs() < 1e-12 && n.competitor_score == s,
            || format!("{name}: {n:?}"),
        )?;
    }
    ensure(out["adaptive"].clicks == 100.0 && out["planner"].cpc == 1.0, || "scale anchors".into())?;
    Ok("2000 random tables; published clicks 100.0/76.2 and CPC 1.0 anchors recovered".into())
}

// ---------------------------------------------------------------- 7

fn ablation_ordering() -> Check {
    let start = Instant::now();
    let total = |v: PolicyVariant| {
        run_campaign(common::ablation_config(), &mut common::ablation_tools(), v)
            .map(|r| r.report.objective_total)
            .map_err(|e| e.to_string())
    };
    let full = total(PolicyVariant::FullAdaptive)?;
    let mut parts = Vec::new();
    for v in [PolicyVariant::fixed(0.5).unwrap(), PolicyVariant::WideOnly, PolicyVariant::DeepOnly] {
        let t = total(v)?;
        ensure(full > t, || format!("{v} reached {t}, full_adaptive {full}"))?;
        parts.push(format!("{v} {t}"));
    }
    within(start.elapsed(), 30)?;
    Ok(format!("full_adaptive {full} beats {}", parts.join(", ")))
}

// ---------------------------------------------------------------- 8

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if normalize_in_place(&mut v) {
            return v;
        }
    }
}

fn memory_exactness() -> Check {
    let dim = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut memory = Memory::new(dim);
    for i in 0..1000 {
        let record = MemoryRecord {
            keyword: Keyword::new(&format!("keyword {i}"), &format!("cat {}", i % 7), Origin::Wider, 1 + i % 3).unwrap(),
            kpis: KpiRecord::new(rng.gen_range(0..500), rng.gen_range(0..5000), rng.gen_range(0.0..3.0), rng.gen_range(0.0..100.0)).unwrap(),
            step: 1 + i % 3,
            embedding: random_unit(&mut rng, dim),
        };
        memory.add(record).map_err(|e| e.to_string())?;
    }
    for probe in 0..20 {
        let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut brute: Vec<(usize, f64)> =
            memory.records().iter().enumerate().map(|(i, r)| (i, plain_cosine(&q, &r.embedding))).collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for k in [1, 10, 100] {
            let hits = memory.query_top_k(&q, k).map_err(|e| e.to_string())?;
            let ids: Vec<usize> = hits.iter().map(|h| h.id).collect();
            let expected: Vec<usize> = brute[..k].iter().map(|b| b.0).collect();
            ensure(ids == expected, || format!("probe {probe}, k {k}: {ids:?} vs {expected:?}"))?;
            for (h, b) in hits.iter().zip(&brute) {
                ensure((h.cosine - b.1).abs() < 1e-12, || format!("score {} vs {}", h.cosine, b.1))?;
            }
        }
    }
    let text = memory.to_snapshot_string().map_err(|e| e.to_string())?;
    let restored = Memory::from_snapshot_str(&text).map_err(|e| e.to_string())?;
    ensure(restored.records() == memory.records(), || "restored records differ".into())?;
    ensure(restored.to_snapshot_string().unwrap() == text, || "second snapshot differs".into())?;
    Ok("1000 records x 20 probes, k in {1, 10, 100}; snapshot round-trip identical".into())
}

// ---------------------------------------------------------------- 9

struct FailOnCall {
    inner: Box<dyn KpiSource>,
    fail_on: usize,
    calls: AtomicUsize,
}

impl KpiSource for FailOnCall {
    fn observe(&self, keywords: &[Keyword]) -> Result<IndexMap<String, KpiRecord>, ToolError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) == self.fail_on {
            return Err(ToolError::injected("kpi", "injected KPI failure"));
        }
        self.inner.observe(keywords)
    }
}

/// Runs the demo through step 1, then fails step 2 and diffs the state.
fn failed_step_diff(tools: &mut kwgen_core::Tools) -> Result<(), String> {
    let config = common::demo_config();
    let initial = init_keywords(&config, tools.model.as_ref(), tools.search.as_ref()).map_err(|e| e.to_string())?;
    let state = seed_campaign(config, initial, tools).map_err(|e| e.to_string())?;
    let (state, _) = run_step(&state, tools, PolicyVariant::FullAdaptive).map_err(|e| e.to_string())?;
    let state_before = serde_json::to_vec(&state).unwrap();
    let memory_before = tools.memory.to_snapshot_string().unwrap();
    let err = run_step(&state, tools, PolicyVariant::FullAdaptive);
    ensure(err.is_err(), || "injected failure did not surface".into())?;
    ensure(serde_json::to_vec(&state).unwrap() == state_before, || "state changed".into())?;
    ensure(tools.memory.to_snapshot_string().unwrap() == memory_before, || "memory changed".into())
}

fn transactionality() -> Check {
    let mut tools = common::demo_tools();
    let script = ScriptedChatModel::from_file(&common::fixture("demo/chat_script.json")).unwrap();
    tools.model = Box::new(FailingChatModel::new(script, 2));
    failed_step_diff(&mut tools).map_err(|e| format!("chat failure: {e}"))?;

    let mut tools = common::demo_tools();
    let kpi = std::mem::replace(&mut tools.kpi_source, Box::new(kwgen_core::kpi::LiveAdsKpiSource::default()));
    tools.kpi_source = Box::new(FailOnCall { inner: kpi, fail_on: 2, calls: AtomicUsize::new(0) });
    failed_step_diff(&mut tools).map_err(|e| format!("KPI failure: {e}"))?;
    Ok("chat and KPI failures mid-step leave state and memory byte-identical".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("allocation law", allocation_law),
        ("formula spot values", spot_values),
        ("hermetic demo replay", demo_replay),
        ("KPI matching oracle", kpi_matching),
        ("metric oracles", metric_oracles),
        ("KPI normalization", normalization),
        ("ablation ordering", ablation_ordering),
        ("memory exactness", memory_exactness),
        ("transactionality", transactionality),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
