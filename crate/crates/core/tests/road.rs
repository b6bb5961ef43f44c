use eeio_core::synthetic::{self, targets, CLIMATE, ECOSYSTEM_QUALITY, HUMAN_HEALTH, LEVEL4, LEVEL5_ID, ROAD};
use eeio_core::{
    aggregate, assemble, contribution_points, first_tier_decomposition, footprint,
    midpoint_endpoint_regression, national_shares, per_capita, Attribution, DemandScope, IOModel,
    TargetSet, UnitTable,
};
use std::sync::OnceLock;

fn road() -> &'static IOModel {
    static MODEL: OnceLock<IOModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let (model, report) = assemble(&synthetic::road_economy());
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        model.unwrap()
    })
}

fn r_squared(endpoint: &str, include_direct: bool) -> f64 {
    let m = road();
    let d = first_tier_decomposition(m, ROAD).unwrap();
    let table = aggregate(&d, m.hierarchy().unwrap(), LEVEL4).unwrap();
    let ind = &m.characterization().indicators;
    let pts: Vec<(f64, f64)> = contribution_points(
        &table,
        ind.position(CLIMATE).unwrap(),
        ind.position(endpoint).unwrap(),
        include_direct,
    )
    .iter()
    .map(|p| (p.x, p.y))
    .collect();
    midpoint_endpoint_regression(&pts).unwrap().r_squared
}

#[test]
fn endpoint_correlation_matches_calibration() {
    let eq = r_squared(ECOSYSTEM_QUALITY, false);
    let hh = r_squared(HUMAN_HEALTH, false);
    assert!(eq >= 0.98 && (eq - targets::R2_ECOSYSTEM).abs() < 1e-6, "{eq}");
    assert!(hh >= 0.98 && (hh - targets::R2_HEALTH).abs() < 1e-6, "{hh}");
}

#[test]
fn direct_column_raises_correlation() {
    for endpoint in [ECOSYSTEM_QUALITY, HUMAN_HEALTH] {
        assert!(r_squared(endpoint, true) > r_squared(endpoint, false), "{endpoint}");
    }
}

#[test]
fn road_intensity_survives_assembly() {
    let m = road();
    let d = first_tier_decomposition(m, ROAD).unwrap();
    let i = m.characterization().indicators.position(CLIMATE).unwrap();
    assert!((d.total[i] - targets::ROAD_INTENSITY).abs() < 1e-9 * targets::ROAD_INTENSITY);
    d.check_additivity().unwrap();
    let l5 = aggregate(&d, m.hierarchy().unwrap(), LEVEL5_ID).unwrap();
    assert_eq!(l5.labels.len(), 8);
}

#[test]
fn national_total_and_per_capita() {
    let m = road();
    let q = footprint(m, &DemandScope::Consumption).unwrap();
    let total = q.total(CLIMATE).unwrap();
    assert!((total.value - targets::NATIONAL_CLIMATE).abs() < 1e-6 * targets::NATIONAL_CLIMATE);
    let pc = per_capita(&total, targets::POPULATION).unwrap().rescale_mass(&UnitTable::standard(), "t");
    assert!((pc.value - 18.0).abs() < 0.1, "{}", pc.value);
}

#[test]
fn final_product_shares() {
    let m = road();
    let i = m.characterization().indicators.position(CLIMATE).unwrap();
    let share = |codes: &[&str]| {
        national_shares(m, &TargetSet::sectors(codes.iter().copied()), &DemandScope::Consumption, Attribution::FinalProduct)
            .unwrap()
            .shares[i]
    };
    assert!((share(&[ROAD]) - targets::ROAD_SHARE).abs() < 1e-6);
    assert!((share(&[ROAD, synthetic::OTHER_CONSTRUCTION]) - targets::CONSTRUCTION_SHARE).abs() < 1e-6);
}
