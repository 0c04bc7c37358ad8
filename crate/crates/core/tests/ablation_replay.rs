mod common;

use kwgen_core::{run_campaign, PolicyVariant};

use common::{ablation_config, ablation_tools};

fn cumulative_clicks(variant: PolicyVariant) -> f64 {
    run_campaign(ablation_config(), &mut ablation_tools(), variant)
        .unwrap()
        .report
        .objective_total
}

#[test]
fn adaptive_split_beats_every_fixed_policy() {
    let full = cumulative_clicks(PolicyVariant::FullAdaptive);
    for v in [
        PolicyVariant::fixed(0.5).unwrap(),
        PolicyVariant::WideOnly,
        PolicyVariant::DeepOnly,
    ] {
        let total = cumulative_clicks(v);
        assert!(full > total, "{v} reached {total}, full_adaptive {full}");
    }
}

#[test]
fn degenerate_policies_stay_on_their_side() {
    let wide = run_campaign(ablation_config(), &mut ablation_tools(), PolicyVariant::WideOnly).unwrap();
    let deep = run_campaign(ablation_config(), &mut ablation_tools(), PolicyVariant::DeepOnly).unwrap();
    use kwgen_core::Origin;
    assert!(wide.report.steps.iter().flat_map(|s| &s.keywords).all(|k| k.origin == Origin::Wider));
    assert!(deep.report.steps.iter().flat_map(|s| &s.keywords).all(|k| k.origin == Origin::Deeper));
    assert_eq!(deep.state.categories().len(), 3);
}
