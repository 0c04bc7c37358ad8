//! Rendering of the structured generation prompt.
//!
//! One prompt carries the expert preamble, five static planning phases, the
//! live search context, retrieved memory, the current keyword inventory and
//! a machine-readable allocation block. Rendering is deterministic.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::allocation::AllocationPlan;
use crate::domain::{CampaignConfig, CampaignState, Keyword, SearchContext};
use crate::memory::Hit;
use crate::scalar::Scalar;

pub const PLAN_PHASES: [&str; 5] = [
    "Gathering Current Market Data: read the live search results below and note current prices, product attributes, discounts and the way users search for this product.",
    "Benchmarking Against Practices: compare against keyword strategies that worked for similar products; favour keywords that are relevant and specific.",
    "Analyzing Current Keyword Performance: study the existing keywords and their KPIs category by category to see which kinds of keywords perform well.",
    "Strategic Keyword Generation: follow the allocation below, which fixes how many keywords go to new categories and how many to each existing category.",
    "Generating and Implementing New Keywords: write the final list of new keywords in the output format below.",
];

const OUTPUT_INSTRUCTIONS: &str = "Respond with a single JSON object and nothing else. Each key is a category name and each value is an array of keyword strings. Use the exact existing category names for deeper keywords and new, distinct names for new categories. Do not repeat any keyword listed above.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationPrompt {
    pub system_preamble: String,
    pub plan_phases: Vec<String>,
    pub context_block: String,
    pub memory_block: String,
    pub inventory_block: String,
    pub allocation_block: String,
    pub output_schema_instructions: String,
    pub correction: Option<String>,
}

pub fn expert_preamble(product: &str) -> String {
    format!("You are the expert in setting Japanese SSA keywords for {product}.")
}

fn render_context(context: &SearchContext) -> String {
    if context.snippets().is_empty() {
        return format!("No live search results were found for the query {:?}.", context.query);
    }
    let mut out = format!("Query: {:?}\n", context.query);
    for s in context.snippets() {
        out.push_str(&format!("- [{}] {}\n", s.source_id, s.text.trim()));
    }
    out.trim_end().to_string()
}

fn render_memory<S: Scalar>(hits: &[Hit<'_, S>]) -> String {
    if hits.is_empty() {
        return "No stored keywords yet.".to_string();
    }
    hits.iter()
        .map(|h| {
            let k = &h.record.kpis;
            format!(
                "- {} [{}] clicks={} search_volume={} cpc={:.4} competitor_score={:.2} similarity={:.4}",
                h.record.keyword.surface(),
                h.record.keyword.category(),
                k.clicks,
                k.search_volume,
                k.cpc,
                k.competitor_score,
                h.cosine.as_f64()
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn inventory_of(state: &CampaignState, extra: &[Keyword]) -> IndexMap<String, Vec<String>> {
    let mut inv: IndexMap<String, Vec<String>> = IndexMap::new();
    for (name, stats) in state.categories() {
        let surfaces = stats
            .members
            .iter()
            .map(|key| state.cumulative()[key].surface().to_string())
            .collect();
        inv.insert(name.clone(), surfaces);
    }
    for kw in extra {
        let name = state.find_category(kw.category()).unwrap_or(kw.category()).to_string();
        inv.entry(name).or_default().push(kw.surface().to_string());
    }
    inv
}

fn render_inventory(inv: &IndexMap<String, Vec<String>>) -> String {
    let mut out = String::from("inventory: ");
    out.push_str(&serde_json::to_string(inv).expect("string map serializes"));
    out
}

fn render_allocation(total: usize, wider: usize, quotas: &IndexMap<String, usize>) -> String {
    let mut out = format!(
        "request: expansion\nnew_keywords_total: {total}\nwider_new_category_keywords: {wider}\n"
    );
    for (cat, q) in quotas {
        if *q > 0 {
            out.push_str(&format!("deeper_quota: {cat} = {q}\n"));
        }
    }
    out.push_str(&format!(
        "Generate exactly {wider} keywords in categories that do not exist yet, and exactly the listed number of new keywords in each existing category."
    ));
    out
}

/// Builds the prompt for one expansion step.
pub fn build_generation_prompt<S: Scalar>(
    state: &CampaignState,
    context: &SearchContext,
    memory_hits: &[Hit<'_, S>],
    plan: &AllocationPlan,
) -> GenerationPrompt {
    GenerationPrompt {
        system_preamble: expert_preamble(&state.config().product),
        plan_phases: PLAN_PHASES.iter().map(|p| p.to_string()).collect(),
        context_block: render_context(context),
        memory_block: render_memory(memory_hits),
        inventory_block: render_inventory(&inventory_of(state, &[])),
        allocation_block: render_allocation(plan.n, plan.wider_count, &plan.deeper_quotas),
        output_schema_instructions: OUTPUT_INSTRUCTIONS.to_string(),
        correction: None,
    }
}

/// Builds the prompt that seeds a campaign with `initial_count` keywords.
pub fn build_initial_prompt(config: &CampaignConfig, context: &SearchContext) -> GenerationPrompt {
    let count = config.initial_count;
    let spread = if count >= 2 {
        "Spread them over at least 2 distinct categories, each reflecting a distinct product attribute or customer segment."
    } else {
        "Use a single category."
    };
    GenerationPrompt {
        system_preamble: expert_preamble(&config.product),
        plan_phases: PLAN_PHASES.iter().map(|p| p.to_string()).collect(),
        context_block: render_context(context),
        memory_block: "No stored keywords yet.".to_string(),
        inventory_block: "inventory: {}".to_string(),
        allocation_block: format!(
            "request: initial\ninitial_keywords: {count}\nGenerate exactly {count} initial keywords. {spread}"
        ),
        output_schema_instructions: OUTPUT_INSTRUCTIONS.to_string(),
        correction: None,
    }
}

impl GenerationPrompt {
    /// Re-targets the prompt at the part of the plan still unfilled after an
    /// attempt: keywords accepted so far join the inventory and the
    /// allocation block shows only the remaining counts.
    pub fn for_retry(
        &self,
        state: &CampaignState,
        accepted: &[Keyword],
        remaining_wider: usize,
        remaining_quotas: &IndexMap<String, usize>,
        deficit: usize,
    ) -> GenerationPrompt {
        let mut next = self.clone();
        next.inventory_block = render_inventory(&inventory_of(state, accepted));
        next.allocation_block = render_allocation(deficit, remaining_wider, remaining_quotas);
        next.correction = Some(format!(
            "The previous answer left {deficit} keyword(s) unfilled (duplicates, surplus or misplaced keywords were dropped). Provide only the missing keywords described in the allocation above."
        ));
        next
    }

    pub fn with_initial_correction(&self, missing: usize, reason: &str) -> GenerationPrompt {
        let mut next = self.clone();
        next.correction = Some(format!(
            "The previous answer could not be used ({reason}); {missing} keyword(s) are still missing. Answer again following the output format exactly."
        ));
        next
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.system_preamble);
        out.push_str("\n\n## Plan\n");
        for (i, phase) in self.plan_phases.iter().enumerate() {
            out.push_str(&format!("{}. {}\n", i + 1, phase));
        }
        out.push_str("\n## Live search results\n");
        out.push_str(&self.context_block);
        out.push_str("\n\n## Keyword memory (most relevant first)\n");
        out.push_str(&self.memory_block);
        out.push_str("\n\n## Current keywords by category\n");
        out.push_str(&self.inventory_block);
        out.push_str("\n\n## Allocation\n");
        out.push_str(&self.allocation_block);
        out.push_str("\n\n## Output format\n");
        out.push_str(&self.output_schema_instructions);
        if let Some(c) = &self.correction {
            out.push_str("\n\n## Correction\n");
            out.push_str(c);
        }
        out.push('\n');
        out
    }
}

/// Machine-readable request recovered from a rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptRequest {
    Initial {
        count: usize,
    },
    Expansion {
        wider_count: usize,
        quotas: IndexMap<String, usize>,
        inventory: IndexMap<String, Vec<String>>,
    },
}

/// Recovers the request block from a prompt produced by this module.
pub fn read_request(prompt: &str) -> Option<PromptRequest> {
    let mut kind = None;
    let mut count = None;
    let mut wider = None;
    let mut quotas = IndexMap::new();
    let mut inventory = IndexMap::new();
    for line in prompt.lines() {
        if let Some(v) = line.strip_prefix("request: ") {
            kind = Some(v.trim().to_string());
        } else if let Some(v) = line.strip_prefix("initial_keywords: ") {
            count = v.trim().parse().ok();
        } else if let Some(v) = line.strip_prefix("wider_new_category_keywords: ") {
            wider = v.trim().parse().ok();
        } else if let Some(v) = line.strip_prefix("deeper_quota: ") {
            let (cat, q) = v.rsplit_once(" = ")?;
            quotas.insert(cat.to_string(), q.trim().parse().ok()?);
        } else if let Some(v) = line.strip_prefix("inventory: ") {
            inventory = serde_json::from_str(v).ok()?;
        }
    }
    match kind.as_deref()? {
        "initial" => Some(PromptRequest::Initial { count: count? }),
        "expansion" => Some(PromptRequest::Expansion {
            wider_count: wider?,
            quotas,
            inventory,
        }),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{compute_split, PolicyVariant};
    use crate::domain::{KeywordSet, KpiMetric, Origin, StepOutcome};
    use crate::memory::VectorMemory;

    fn state() -> CampaignState {
        let kws = vec![
            Keyword::new("Cancer Insurance", "A", Origin::Initial, 0).unwrap(),
            Keyword::new("Medical Insurance", "B", Origin::Initial, 0).unwrap(),
        ];
        let set = KeywordSet::new(0, kws).unwrap();
        let outcome = StepOutcome::assemble(set, IndexMap::new(), KpiMetric::Clicks, None, 0, vec![]);
        CampaignState::seed(CampaignConfig::new("Sony Bank Mortgage"), outcome).unwrap()
    }

    fn plan() -> AllocationPlan {
        let split = compute_split(30.0, 70.0, 10, PolicyVariant::FullAdaptive).unwrap();
        let cats: IndexMap<String, f64> = [("A".to_string(), 70.0), ("B".to_string(), 30.0)].into_iter().collect();
        AllocationPlan::build(split, &cats).unwrap()
    }

    #[test]
    fn allocation_block_states_counts() {
        let s = state();
        let p = build_generation_prompt::<f64>(&s, &SearchContext::empty("q"), &[], &plan());
        assert!(p.allocation_block.contains("wider_new_category_keywords: 3"));
        assert!(p.allocation_block.contains("deeper_quota: A = 5"));
        assert!(p.allocation_block.contains("deeper_quota: B = 2"));
        assert_eq!(p.plan_phases.len(), 5);
        assert!(p.system_preamble.contains("Sony Bank Mortgage"));
    }

    #[test]
    fn empty_context_is_stated() {
        let s = state();
        let p = build_generation_prompt::<f64>(&s, &SearchContext::empty("sony"), &[], &plan());
        assert!(p.context_block.starts_with("No live search results were found"));
        assert!(p.render().contains("## Output format"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = state();
        let mut mem = VectorMemory::<f64>::new(256);
        for kw in s.cumulative().values() {
            mem.add(crate::memory::MemoryRecord {
                keyword: kw.clone(),
                kpis: Default::default(),
                step: 0,
                embedding: crate::tools::hash_embed(kw.surface(), 256).unwrap(),
            })
            .unwrap();
        }
        let q = crate::tools::hash_embed::<f64>("insurance", 256).unwrap();
        let hits = mem.query_top_k(&q, 20).unwrap();
        let a = build_generation_prompt(&s, &SearchContext::empty("q"), &hits, &plan()).render();
        let b = build_generation_prompt(&s, &SearchContext::empty("q"), &hits, &plan()).render();
        assert_eq!(a, b);
        assert!(a.contains("Cancer Insurance [A]"));
    }

    #[test]
    fn request_block_round_trips() {
        let s = state();
        let text = build_generation_prompt::<f64>(&s, &SearchContext::empty("q"), &[], &plan()).render();
        match read_request(&text).unwrap() {
            PromptRequest::Expansion { wider_count, quotas, inventory } => {
                assert_eq!(wider_count, 3);
                assert_eq!(quotas["A"], 5);
                assert_eq!(inventory["B"], vec!["Medical Insurance"]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let init = build_initial_prompt(s.config(), &SearchContext::empty("q")).render();
        assert_eq!(read_request(&init), Some(PromptRequest::Initial { count: 3 }));
    }

    #[test]
    fn retry_prompt_shows_residual_plan() {
        let s = state();
        let p = build_generation_prompt::<f64>(&s, &SearchContext::empty("q"), &[], &plan());
        let accepted = vec![Keyword::new("Sony Cancer Insurance", "A", Origin::Deeper, 1).unwrap()];
        let remaining: IndexMap<String, usize> = [("A".to_string(), 4), ("B".to_string(), 0)].into_iter().collect();
        let r = p.for_retry(&s, &accepted, 1, &remaining, 5).render();
        assert!(r.contains("## Correction"));
        match read_request(&r).unwrap() {
            PromptRequest::Expansion { wider_count, quotas, inventory } => {
                assert_eq!(wider_count, 1);
                assert_eq!(quotas.len(), 1);
                assert_eq!(inventory["A"], vec!["Cancer Insurance", "Sony Cancer Insurance"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
