//! Deterministic synthetic data sets used by tests, benches and the
//! committed fixtures.
//!
//! The road economy is calibrated rather than random: the road
//! construction column of `A` is solved for so that first-tier climate
//! contributions hit chosen percentages, non-climate intensities are spread
//! around the climate profile with an amplitude found by bisection so that
//! the endpoint regressions reach target R² values, and final demand is set
//! so that consumption-based climate totals and road/construction shares
//! hit chosen values.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::analyze::{
    aggregate, contribution_points, first_tier_decomposition, midpoint_endpoint_regression,
    LifecycleComponent,
};
use crate::assemble::IOModel;
use crate::error::Result;
use crate::ingest::{
    write_lifecycle, DataSet, DirectEmission, FlowRecord, RawFlowAccount,
};
use crate::model::{
    AggregationHierarchy, CharacterizationMatrix, Classification, Concordance, Currency,
    DemandCategory, DirectFinalDemandEmissions, ExtensionMatrix, FinalDemand, Granularity,
    ImpactLevel, Indicator, IndicatorRegistry, Substance, SubstanceKey, SubstanceRegistry,
    SupplyUseTables, TechnologyMatrix,
};

fn fine(codes: &[String]) -> Arc<Classification> {
    Arc::new(Classification::from_codes(codes, Granularity::Fine).expect("distinct codes"))
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Builds a model straight from matrices. Sectors are `s0..`, substances
/// `sub0..` (kg, air), indicators `ind0..`, and `y` is a single `final`
/// demand category.
pub fn model_from_matrices(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    y: DVector<f64>,
) -> Result<IOModel> {
    let n = a.nrows();
    let commodities = fine(&numbered("s", n));
    let substances = Arc::new(SubstanceRegistry::new(
        numbered("sub", b.nrows())
            .into_iter()
            .map(|id| Substance {
                key: SubstanceKey::new(id, "air"),
                unit: "kg".into(),
            })
            .collect(),
    )?);
    let indicators = Arc::new(IndicatorRegistry::new(
        numbered("ind", c.nrows())
            .into_iter()
            .map(|id| Indicator {
                id,
                level: ImpactLevel::Midpoint,
                unit: "kg eq".into(),
            })
            .collect(),
    )?);
    let currency = Currency::default();
    let output = {
        let lu = (DMatrix::identity(n, n) - &a).lu();
        lu.solve(&y).unwrap_or_else(|| y.clone()).map(|v| v.max(0.0))
    };
    IOModel::new(
        TechnologyMatrix::new(Arc::clone(&commodities), a, currency.clone())?,
        ExtensionMatrix::new(Arc::clone(&substances), Arc::clone(&commodities), b, currency.clone())?,
        CharacterizationMatrix::new(indicators, Arc::clone(&substances), c)?,
        FinalDemand::new(
            commodities,
            vec![DemandCategory {
                label: "final".into(),
                export: false,
            }],
            DMatrix::from_column_slice(n, 1, y.as_slice()),
            currency,
        )?,
        DirectFinalDemandEmissions::zeros(substances, vec!["final".into()]),
        output,
    )
}

fn co2() -> SubstanceKey {
    SubstanceKey::new("CO2", "air")
}

fn ch4() -> SubstanceKey {
    SubstanceKey::new("CH4", "air")
}

fn flow(sector: &str, substance: SubstanceKey, amount: f64, unit: &str) -> FlowRecord {
    FlowRecord {
        sector: sector.to_string(),
        region: String::new(),
        substance,
        amount,
        unit: unit.to_string(),
        year: Some(2017),
    }
}

fn indicator(id: &str, level: ImpactLevel, unit: &str) -> Indicator {
    Indicator {
        id: id.into(),
        level,
        unit: unit.into(),
    }
}

/// Three commodities, two substances, one midpoint and one endpoint.
/// `Goods` flows are split over agriculture and manufacturing by output.
pub fn three_sector() -> DataSet {
    let codes: Vec<String> = ["Agriculture", "Manufacturing", "Services"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let commodities = fine(&codes);
    let industries = fine(&codes);
    let supply = DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 200.0, 300.0]));
    #[rustfmt::skip]
    let use_table = DMatrix::from_row_slice(3, 3, &[
        10.0, 20.0, 5.0,
        15.0, 40.0, 30.0,
        5.0, 20.0, 45.0,
    ]);
    // remaining output goes to final demand: 65, 115, 230
    #[rustfmt::skip]
    let fd = DMatrix::from_row_slice(3, 2, &[
        45.0, 20.0,
        75.0, 40.0,
        230.0, 0.0,
    ]);
    let final_demand = FinalDemand::new(
        Arc::clone(&commodities),
        vec![
            DemandCategory {
                label: "Households".into(),
                export: false,
            },
            DemandCategory {
                label: "Exports".into(),
                export: true,
            },
        ],
        fd,
        Currency::default(),
    )
    .expect("shapes match");
    let sut = SupplyUseTables::new(
        industries,
        Arc::clone(&commodities),
        supply,
        use_table,
        final_demand,
        None,
        Currency::default(),
        false,
    )
    .expect("valid tables")
    .with_price_basis(Some("basic".into()));

    let flows = RawFlowAccount {
        records: vec![
            flow("Goods", ch4(), 600.0, "kg"),
            flow("Goods", co2(), 90_000.0, "kg"),
            flow("Services", ch4(), 30.0, "kg"),
            flow("Services", co2(), 15_000.0, "kg"),
        ],
    };
    let mut map = BTreeMap::new();
    map.insert(
        "Goods".to_string(),
        vec![
            ("Agriculture".to_string(), 1.0 / 3.0),
            ("Manufacturing".to_string(), 2.0 / 3.0),
        ],
    );
    map.insert("Services".to_string(), vec![("Services".to_string(), 1.0)]);
    let concordance = Concordance::new(map, &commodities).expect("valid weights");

    let subs = Arc::new(
        SubstanceRegistry::new(vec![
            Substance {
                key: ch4(),
                unit: "kg".into(),
            },
            Substance {
                key: co2(),
                unit: "kg".into(),
            },
        ])
        .expect("distinct"),
    );
    let indicators = Arc::new(
        IndicatorRegistry::new(vec![
            indicator("Climate change", ImpactLevel::Midpoint, "kg CO2 eq"),
            indicator("Human health", ImpactLevel::Endpoint, "DALY"),
        ])
        .expect("distinct"),
    );
    let characterization = CharacterizationMatrix::new(
        indicators,
        subs,
        DMatrix::from_row_slice(2, 2, &[28.0, 1.0, 2.8e-5, 1e-6]),
    )
    .expect("shape");

    let hierarchy = AggregationHierarchy::new(
        Arc::clone(&commodities),
        vec![(
            "sector".into(),
            vec![
                ("Agriculture".into(), "Goods".into()),
                ("Manufacturing".into(), "Goods".into()),
                ("Services".into(), "Services".into()),
            ],
        )],
    )
    .expect("complete level");

    DataSet {
        sut,
        flows,
        inventory: None,
        concordance,
        characterization,
        direct_emissions: vec![DirectEmission {
            category: "Households".into(),
            substance: co2(),
            amount: 10_000.0,
            unit: "kg".into(),
        }],
        hierarchy: Some(hierarchy),
    }
}

/// One commodity of the road economy.
struct Commodity {
    code: &'static str,
    industry: &'static str,
    /// Coarse code used in the flow accounts.
    coarse: &'static str,
    level4: &'static str,
    /// kg CO2 per currency unit of output (ignored for construction).
    co2: f64,
    /// kg CH4 per kg CO2.
    ch4_ratio: f64,
    /// Relative spread of ecosystem-damage substances around the climate
    /// profile.
    eq_spread: f64,
    /// Same for human-health substances.
    hh_spread: f64,
    /// Percent of the road sector's climate intensity bought from here.
    road_share: f64,
    /// Weight in non-construction consumption.
    demand: f64,
    exported: bool,
}

#[allow(clippy::too_many_arguments)]
const fn c(
    code: &'static str,
    industry: &'static str,
    coarse: &'static str,
    level4: &'static str,
    co2: f64,
    ch4_ratio: f64,
    eq_spread: f64,
    hh_spread: f64,
    road_share: f64,
    demand: f64,
    exported: bool,
) -> Commodity {
    Commodity {
        code,
        industry,
        coarse,
        level4,
        co2,
        ch4_ratio,
        eq_spread,
        hh_spread,
        road_share,
        demand,
        exported,
    }
}

const REFINERY: &str = "Petroleum refineries";
const FREIGHT: &str = "Freight transportation";
const CONSTRUCTION: &str = "Construction";

pub const ROAD: &str = "Road construction";
pub const OTHER_CONSTRUCTION: &str = "Other construction";

#[rustfmt::skip]
const COMMODITIES: &[Commodity] = &[
    c("Ready-mixed concrete", "Concrete manufacturing", "Concrete manufacturing", "Concrete", 0.25, 0.001, 0.35, 0.30, 18.0, 1.0, false),
    c("Cement", "Cement manufacturing", "Cement manufacturing", "Cement", 3.0, 0.001, -0.4, -0.2, 2.5, 0.5, true),
    c("Iron and steel products", "Steel mills", "Steel mills", "Steel", 0.9, 0.001, 0.8, -0.5, 3.5, 2.0, true),
    c("Aluminum products", "Aluminum production", "Aluminum production", "Aluminum", 1.2, 0.001, 1.5, 0.6, 0.5, 1.0, true),
    c("Other non-ferrous metals", "Non-ferrous metal production", "Non-ferrous metal production", "Other metals", 0.6, 0.001, 2.0, 1.2, 0.5, 1.0, true),
    c("Asphalt paving mixtures", "Asphalt paving manufacturing", "Asphalt paving manufacturing", "Asphalt products", 0.35, 0.002, 0.0, -0.15, 18.0, 0.5, false),
    c("Crude oil", "Oil and gas extraction", "Oil and gas extraction", "Crude oil", 0.8, 0.02, -0.6, 0.9, 1.0, 0.5, true),
    c("Asphalt binders", REFINERY, REFINERY, "Asphalt binders", 0.5, 0.004, 0.5, 0.4, 2.0, 0.5, true),
    c("Sand and gravel", "Quarrying", "Quarrying", "Aggregates", 0.2, 0.001, -0.3, 1.5, 2.5, 0.5, false),
    c("Other non-metallic minerals", "Mineral product manufacturing", "Mineral product manufacturing", "Other minerals", 0.5, 0.001, 1.0, -0.6, 0.5, 1.0, true),
    c("Chemicals", "Chemical manufacturing", "Chemical manufacturing", "Chemicals", 0.45, 0.002, 2.5, 0.8, 1.0, 3.0, true),
    c("Electricity", "Electric power generation", "Electric power generation", "Electricity", 0.7, 0.002, 1.8, 2.5, 1.0, 6.0, false),
    c("Natural gas", "Natural gas distribution", "Natural gas distribution", "Natural gas", 0.9, 0.03, -0.5, -0.7, 0.5, 5.0, true),
    c("Diesel and other fuels", REFINERY, REFINERY, "Other fuels", 0.5, 0.004, 0.5, 0.4, 9.0, 12.0, true),
    c("Air freight", "Air transportation", FREIGHT, "Freight", 0.6, 0.001, 0.2, 0.3, 0.5, 0.5, false),
    c("Rail freight", "Rail transportation", FREIGHT, "Freight", 0.6, 0.001, 0.2, 0.3, 1.25, 0.5, false),
    c("Truck freight", "Truck transportation", FREIGHT, "Freight", 0.6, 0.001, 0.2, 0.3, 2.5, 1.5, false),
    c("Water freight", "Water transportation", FREIGHT, "Freight", 0.6, 0.001, 0.2, 0.3, 0.25, 0.3, false),
    c("Freight support activities", "Support activities for transportation", FREIGHT, "Freight", 0.6, 0.001, 0.2, 0.3, 0.5, 0.2, false),
    c("Machinery", "Machinery manufacturing", "Machinery manufacturing", "Machinery", 0.15, 0.001, -0.8, -0.3, 4.0, 3.0, true),
    c("Plastic and rubber products", "Plastics and rubber manufacturing", "Plastics and rubber manufacturing", "Plastic and rubber", 0.25, 0.001, 1.2, 1.0, 0.5, 2.0, true),
    c(OTHER_CONSTRUCTION, OTHER_CONSTRUCTION, CONSTRUCTION, "Buildings and infrastructure", 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, false),
    c("Administrative services", "Administrative and support services", "Administrative and support services", "Administrative services", 0.08, 0.001, -0.2, 0.5, 1.0, 8.0, false),
    c("Professional and other services", "Professional services", "Professional services", "Other services", 0.1, 0.001, 0.6, -0.4, 7.0, 25.0, false),
    c(ROAD, ROAD, CONSTRUCTION, "Upstream sales", 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, false),
    c("Retail goods", "Retail trade", "Retail trade", "Other goods", 0.08, 0.001, -0.7, 0.7, 2.0, 20.0, false),
    c("Paper and paperboard", "Paper manufacturing", "Paper manufacturing", "Paper and paperboard", 0.4, 0.002, 0.9, -0.8, 0.3, 1.0, true),
    c("Passenger transportation", "Transit and ground passenger transportation", "Transit and ground passenger transportation", "Staff transportation", 0.5, 0.001, -0.4, 1.8, 0.7, 4.0, false),
];

/// Level-4 group → level-5 group.
const LEVEL5: &[(&str, &str)] = &[
    ("Concrete", "Bridges & tunnels"),
    ("Cement", "Bridges & tunnels"),
    ("Steel", "Bridges & tunnels"),
    ("Aluminum", "Bridges & tunnels"),
    ("Other metals", "Bridges & tunnels"),
    ("Asphalt products", "Asphalt mix materials"),
    ("Crude oil", "Asphalt mix materials"),
    ("Asphalt binders", "Asphalt mix materials"),
    ("Aggregates", "Asphalt mix materials"),
    ("Other minerals", "Asphalt mix materials"),
    ("Chemicals", "Asphalt mix materials"),
    ("Electricity", "Energies"),
    ("Natural gas", "Energies"),
    ("Other fuels", "Energies"),
    ("Freight", "Freight"),
    ("Machinery", "Infrastructure and capital goods"),
    ("Plastic and rubber", "Infrastructure and capital goods"),
    ("Buildings and infrastructure", "Infrastructure and capital goods"),
    ("Administrative services", "Services"),
    ("Other services", "Services"),
    ("Upstream sales", "Services"),
    ("Other goods", "Staff consumptions"),
    ("Paper and paperboard", "Staff consumptions"),
    ("Staff transportation", "Staff consumptions"),
];

/// Non-climate substances: (id, compartment, unit, amount per kg CO2 eq of
/// direct climate intensity, endpoint family).
#[derive(Clone, Copy, PartialEq)]
enum Family {
    Ecosystem,
    Health,
    Neither,
}

const MARKERS: &[(&str, &str, &str, f64, Family)] = &[
    ("SO2", "air", "kg", 6e-3, Family::Ecosystem),
    ("Phosphorus", "water", "kg", 5e-5, Family::Ecosystem),
    ("Zinc", "water", "kg", 1e-5, Family::Ecosystem),
    ("Nitrogen", "water", "kg", 4e-4, Family::Ecosystem),
    ("Ammonia", "air", "kg", 5e-4, Family::Ecosystem),
    ("PM2.5", "air", "kg", 1e-3, Family::Health),
    ("NMVOC", "air", "kg", 1.5e-3, Family::Health),
    ("Benzene", "air", "kg", 2e-5, Family::Health),
    ("Lead", "air", "kg", 1e-6, Family::Health),
    ("CFC-11", "air", "kg", 1e-8, Family::Health),
    ("Water", "resource", "m3", 0.02, Family::Neither),
];

pub const CLIMATE: &str = "Climate change, short term";
pub const ECOSYSTEM_QUALITY: &str = "Ecosystem quality";
pub const HUMAN_HEALTH: &str = "Human health";
pub const LEVEL4: &str = "level4";
pub const LEVEL5_ID: &str = "level5";

/// Indicators: (id, level, unit, [(substance id, factor)]).
type IndicatorRow = (&'static str, ImpactLevel, &'static str, Vec<(&'static str, f64)>);

fn indicator_table() -> Vec<IndicatorRow> {
    use ImpactLevel::*;
    vec![
        (CLIMATE, Midpoint, "kg CO2 eq", vec![("CO2", 1.0), ("CH4", 28.0)]),
        ("Freshwater acidification", Midpoint, "kg SO2 eq", vec![("SO2", 1.0), ("Ammonia", 0.3)]),
        ("Freshwater eutrophication", Midpoint, "kg PO4 P-lim eq", vec![("Phosphorus", 3.07)]),
        ("Freshwater ecotoxicity", Midpoint, "CTUe", vec![("Zinc", 5.0e3), ("Lead", 2.0e2)]),
        ("Marine eutrophication", Midpoint, "kg N N-lim eq", vec![("Nitrogen", 1.0), ("Ammonia", 0.1)]),
        ("Ozone layer depletion", Midpoint, "kg CFC-11 eq", vec![("CFC-11", 1.0)]),
        ("Particulate matter formation", Midpoint, "kg PM2.5 eq", vec![("PM2.5", 1.0), ("SO2", 0.06), ("Ammonia", 0.06)]),
        ("Photochemical oxidant formation", Midpoint, "kg NMVOC eq", vec![("NMVOC", 1.0)]),
        ("Terrestrial acidification", Midpoint, "kg SO2 eq", vec![("SO2", 1.0), ("Ammonia", 1.6)]),
        ("Human toxicity cancer", Midpoint, "CTUh", vec![("Benzene", 1.0e-6), ("Lead", 1.0e-5)]),
        ("Human toxicity non-cancer", Midpoint, "CTUh", vec![("Lead", 2.0e-4), ("Zinc", 1.0e-5)]),
        ("Water use", Midpoint, "m3", vec![("Water", 1.0)]),
        (
            ECOSYSTEM_QUALITY,
            Endpoint,
            "PDF.m2.yr",
            vec![("CO2", 1.0), ("CH4", 28.0), ("SO2", 40.0), ("Phosphorus", 1000.0), ("Zinc", 2000.0), ("Nitrogen", 100.0), ("Ammonia", 60.0)],
        ),
        (
            HUMAN_HEALTH,
            Endpoint,
            "DALY",
            vec![("CO2", 1e-6), ("CH4", 2.8e-5), ("PM2.5", 6.3e-4), ("NMVOC", 1e-5), ("Benzene", 1e-3), ("Lead", 1e-2), ("CFC-11", 1e-3)],
        ),
    ]
}

/// Calibration targets for the road economy.
pub mod targets {
    /// Road sector cradle-to-gate climate intensity, kg CO2 eq per currency unit.
    pub const ROAD_INTENSITY: f64 = 0.25;
    /// Percent of road climate intensity emitted on site.
    pub const ROAD_DIRECT_SHARE: f64 = 17.0;
    pub const R2_ECOSYSTEM: f64 = 0.995;
    pub const R2_HEALTH: f64 = 0.991;
    /// Consumption-based national climate total, kg CO2 eq.
    pub const NATIONAL_CLIMATE: f64 = 6.92e11;
    pub const POPULATION: f64 = 3.84e7;
    /// Final-product climate shares.
    pub const ROAD_SHARE: f64 = 0.0102;
    pub const CONSTRUCTION_SHARE: f64 = 0.1656;
    /// Household direct emissions as a fraction of the national climate total.
    pub const HOUSEHOLD_DIRECT: f64 = 0.12;
}

struct Calibration {
    codes: Vec<String>,
    a: DMatrix<f64>,
    /// substance × commodity, substance order as in `substances()`
    b: DMatrix<f64>,
}

fn substances() -> Vec<Substance> {
    let mut v: Vec<Substance> = vec![
        Substance {
            key: co2(),
            unit: "kg".into(),
        },
        Substance {
            key: ch4(),
            unit: "kg".into(),
        },
    ];
    v.extend(MARKERS.iter().map(|(id, comp, unit, _, _)| Substance {
        key: SubstanceKey::new(*id, *comp),
        unit: unit.to_string(),
    }));
    v
}

fn characterization() -> CharacterizationMatrix {
    let subs = substances();
    let table = indicator_table();
    let mut factors = DMatrix::zeros(table.len(), subs.len());
    for (i, (_, _, _, fs)) in table.iter().enumerate() {
        for (id, f) in fs {
            let s = subs.iter().position(|s| s.key.id == *id).expect("known substance");
            factors[(i, s)] = *f;
        }
    }
    // registry must be sorted like parsed files for byte-stable round trips
    let mut order: Vec<usize> = (0..subs.len()).collect();
    order.sort_by(|&x, &y| subs[x].key.cmp(&subs[y].key));
    let sorted: Vec<Substance> = order.iter().map(|&k| subs[k].clone()).collect();
    let factors = DMatrix::from_fn(table.len(), subs.len(), |i, j| factors[(i, order[j])]);
    CharacterizationMatrix::new(
        Arc::new(
            IndicatorRegistry::new(
                table
                    .iter()
                    .map(|(id, level, unit, _)| indicator(id, *level, unit))
                    .collect(),
            )
            .expect("distinct"),
        ),
        Arc::new(SubstanceRegistry::new(sorted).expect("distinct")),
        factors,
    )
    .expect("shape")
}

fn level_hierarchy(commodities: &Arc<Classification>) -> AggregationHierarchy {
    let l4 = COMMODITIES
        .iter()
        .map(|c| (c.code.to_string(), c.level4.to_string()))
        .collect();
    let l5 = COMMODITIES
        .iter()
        .map(|c| {
            let parent = LEVEL5
                .iter()
                .find(|(g, _)| *g == c.level4)
                .map(|(_, p)| p.to_string())
                .expect("every level-4 group has a parent");
            (c.code.to_string(), parent)
        })
        .collect();
    AggregationHierarchy::new(
        Arc::clone(commodities),
        vec![(LEVEL4.into(), l4), (LEVEL5_ID.into(), l5)],
    )
    .expect("complete levels")
}

/// Climate multipliers `c · (I - A)⁻¹` for a climate intensity row `c`.
fn climate_multipliers(a: &DMatrix<f64>, climate: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let system = (DMatrix::identity(n, n) - a).transpose();
    system.lu().solve(climate).expect("productive by construction")
}

impl Calibration {
    fn index(code: &str) -> usize {
        COMMODITIES.iter().position(|c| c.code == code).expect("known code")
    }

    fn new() -> Calibration {
        let n = COMMODITIES.len();
        let road = Self::index(ROAD);
        let oc = Self::index(OTHER_CONSTRUCTION);
        let codes: Vec<String> = COMMODITIES.iter().map(|c| c.code.to_string()).collect();

        // background purchases; nobody but road buys from the two
        // construction commodities
        let mut a = DMatrix::zeros(n, n);
        for j in (0..n).filter(|&j| j != road) {
            for i in (0..n).filter(|&i| i != road && i != oc) {
                a[(i, j)] = 0.012 * (((5 * i + 3 * j) % 7) as f64) / 6.0;
            }
        }
        // multi-product refinery: both products share one recipe
        let binders = Self::index("Asphalt binders");
        let fuels = Self::index("Diesel and other fuels");
        let recipe = a.column(binders).into_owned();
        a.set_column(fuels, &recipe);

        let mut co2_row = DVector::zeros(n);
        let mut ch4_row = DVector::zeros(n);
        for (j, cm) in COMMODITIES.iter().enumerate() {
            co2_row[j] = cm.co2;
            ch4_row[j] = cm.co2 * cm.ch4_ratio;
        }
        let direct = targets::ROAD_DIRECT_SHARE / 100.0 * targets::ROAD_INTENSITY;
        for j in [road, oc] {
            co2_row[j] = 0.9 * direct;
            ch4_row[j] = 0.1 * direct / 28.0;
        }
        let climate = &co2_row + &ch4_row * 28.0;
        let m = climate_multipliers(&a, &climate);

        for (j, cm) in COMMODITIES.iter().enumerate() {
            a[(j, road)] = if j == road {
                cm.road_share / 100.0
            } else {
                cm.road_share / 100.0 * targets::ROAD_INTENSITY / m[j]
            };
        }

        let mut b = DMatrix::zeros(2 + MARKERS.len(), n);
        b.set_row(0, &co2_row.transpose());
        b.set_row(1, &ch4_row.transpose());
        Calibration { codes, a, b }
    }

    fn set_markers(&mut self, eq_amplitude: f64, hh_amplitude: f64) {
        let climate = self.b.row(0) + self.b.row(1) * 28.0;
        for (k, (_, _, _, per_eq, family)) in MARKERS.iter().enumerate() {
            for (j, cm) in COMMODITIES.iter().enumerate() {
                let spread = match family {
                    Family::Ecosystem => eq_amplitude * cm.eq_spread,
                    Family::Health => hh_amplitude * cm.hh_spread,
                    Family::Neither => 0.0,
                };
                self.b[(2 + k, j)] = per_eq * climate[j] * (1.0 + spread);
            }
        }
    }

    /// Model over the calibrated matrices with unit demand.
    fn model(&self) -> IOModel {
        let commodities = fine(&self.codes);
        let n = self.codes.len();
        let characterization = characterization();
        let subs = Arc::new(SubstanceRegistry::new(substances()).expect("distinct"));
        let currency = Currency::default();
        IOModel::new(
            TechnologyMatrix::new(Arc::clone(&commodities), self.a.clone(), currency.clone())
                .expect("square"),
            ExtensionMatrix::new(
                Arc::clone(&subs),
                Arc::clone(&commodities),
                self.b.clone(),
                currency.clone(),
            )
            .expect("shape"),
            characterization,
            FinalDemand::new(
                Arc::clone(&commodities),
                vec![DemandCategory {
                    label: "final".into(),
                    export: false,
                }],
                DMatrix::from_element(n, 1, 1.0),
                currency,
            )
            .expect("shape"),
            DirectFinalDemandEmissions::zeros(subs, vec!["final".into()]),
            DVector::from_element(n, 1.0),
        )
        .expect("calibrated model is valid")
        .with_hierarchy(Some(level_hierarchy(&commodities)))
        .expect("same axis")
    }

    fn r_squared(&self, endpoint: &str) -> f64 {
        let model = self.model();
        let d = first_tier_decomposition(&model, ROAD).expect("road exists");
        let table = aggregate(&d, model.hierarchy().expect("attached"), LEVEL4).expect("level");
        let ind = &model.characterization().indicators;
        let x = ind.position(CLIMATE).expect("climate");
        let y = ind.position(endpoint).expect("endpoint");
        let pts: Vec<(f64, f64)> = contribution_points(&table, x, y, false)
            .iter()
            .map(|p| (p.x, p.y))
            .collect();
        midpoint_endpoint_regression(&pts).expect("regression").r_squared
    }

    /// Largest amplitude in `[0, 1.2]` keeping R² at or above `target`.
    fn bisect(&mut self, target: f64, set: impl Fn(&mut Self, f64), endpoint: &str) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.2_f64);
        set(self, hi);
        if self.r_squared(endpoint) >= target {
            return hi;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            set(self, mid);
            if self.r_squared(endpoint) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        set(self, lo);
        lo
    }
}

/// Calibrated road economy with national final demand.
pub fn road_economy() -> DataSet {
    let mut cal = Calibration::new();
    let eq = cal.bisect(
        targets::R2_ECOSYSTEM,
        |c, amp| c.set_markers(amp, 0.0),
        ECOSYSTEM_QUALITY,
    );
    cal.bisect(
        targets::R2_HEALTH,
        move |c, amp| c.set_markers(eq, amp),
        HUMAN_HEALTH,
    );

    let n = cal.codes.len();
    let road = Calibration::index(ROAD);
    let oc = Calibration::index(OTHER_CONSTRUCTION);
    let climate = cal.b.row(0).transpose() + cal.b.row(1).transpose() * 28.0;
    let m = climate_multipliers(&cal.a, &climate);

    // consumption demand hitting the national total and the two shares
    let total = targets::NATIONAL_CLIMATE;
    let mut y_cons = DVector::zeros(n);
    y_cons[road] = targets::ROAD_SHARE * total / m[road];
    y_cons[oc] = (targets::CONSTRUCTION_SHARE - targets::ROAD_SHARE) * total / m[oc];
    let rest = total * (1.0 - targets::CONSTRUCTION_SHARE - targets::HOUSEHOLD_DIRECT);
    let weight_sum: f64 = COMMODITIES.iter().map(|c| c.demand).sum();
    for (j, cm) in COMMODITIES.iter().enumerate() {
        if j != road && j != oc {
            y_cons[j] = rest * cm.demand / weight_sum / m[j];
        }
    }
    let mut fd = DMatrix::zeros(n, 3);
    for (j, cm) in COMMODITIES.iter().enumerate() {
        let gov = if j == road || j == oc { 0.8 } else { 0.2 };
        fd[(j, 1)] = gov * y_cons[j];
        fd[(j, 0)] = y_cons[j] - fd[(j, 1)];
        if cm.exported {
            fd[(j, 2)] = 0.3 * y_cons[j];
        }
    }
    let y_all = DVector::from_iterator(n, (0..n).map(|j| fd.row(j).sum()));
    let x = (DMatrix::identity(n, n) - &cal.a)
        .lu()
        .solve(&y_all)
        .expect("productive");

    // industries in order of first appearance
    let mut industries: Vec<&str> = Vec::new();
    for cm in COMMODITIES {
        if !industries.contains(&cm.industry) {
            industries.push(cm.industry);
        }
    }
    let ni = industries.len();
    let ind_of: Vec<usize> = COMMODITIES
        .iter()
        .map(|cm| industries.iter().position(|i| *i == cm.industry).expect("listed"))
        .collect();
    let mut supply = DMatrix::zeros(ni, n);
    let mut use_total = DMatrix::zeros(n, ni);
    for j in 0..n {
        supply[(ind_of[j], j)] = x[j];
        for p in 0..n {
            use_total[(p, ind_of[j])] += cal.a[(p, j)] * x[j];
        }
    }
    let domestic = &use_total * 0.8;
    let imports = &use_total - &domestic;

    let commodities = fine(&cal.codes);
    let industry_axis = fine(&industries.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let final_demand = FinalDemand::new(
        Arc::clone(&commodities),
        vec![
            DemandCategory {
                label: "Households".into(),
                export: false,
            },
            DemandCategory {
                label: "Government".into(),
                export: false,
            },
            DemandCategory {
                label: "Exports".into(),
                export: true,
            },
        ],
        fd,
        Currency::default(),
    )
    .expect("shape");
    let sut = SupplyUseTables::new(
        industry_axis,
        Arc::clone(&commodities),
        supply,
        domestic,
        final_demand,
        Some(imports),
        Currency::default(),
        false,
    )
    .expect("consistent tables")
    .with_price_basis(Some("basic".into()));

    // physical flows per coarse code; GHG and water in the flow accounts,
    // the rest in the pollutant inventory
    let subs = substances();
    let mut coarse_flows: BTreeMap<(&str, usize), f64> = BTreeMap::new();
    for (j, cm) in COMMODITIES.iter().enumerate() {
        for s in 0..subs.len() {
            *coarse_flows.entry((cm.coarse, s)).or_default() += cal.b[(s, j)] * x[j];
        }
    }
    let mut flows = Vec::new();
    let mut inventory = Vec::new();
    for ((coarse, s), amount) in coarse_flows {
        let sub = &subs[s];
        let rec = flow(coarse, sub.key.clone(), amount, &sub.unit);
        if s < 2 || sub.key.id == "Water" {
            flows.push(rec);
        } else {
            inventory.push(rec);
        }
    }
    let sort = |v: &mut Vec<FlowRecord>| {
        v.sort_by(|p, q| (&p.sector, &p.substance).cmp(&(&q.sector, &q.substance)))
    };
    sort(&mut flows);
    sort(&mut inventory);

    // concordance weights are output shares within each coarse code
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (j, cm) in COMMODITIES.iter().enumerate() {
        members.entry(cm.coarse).or_default().push(j);
    }
    let map = members
        .into_iter()
        .map(|(coarse, js)| {
            let sum: f64 = js.iter().map(|&j| x[j]).sum();
            let weights = js.iter().map(|&j| (cal.codes[j].clone(), x[j] / sum)).collect();
            (coarse.to_string(), weights)
        })
        .collect();
    let concordance = Concordance::new(map, &commodities).expect("weights sum to one");

    DataSet {
        sut,
        flows: RawFlowAccount { records: flows },
        inventory: Some(RawFlowAccount { records: inventory }),
        concordance,
        characterization: characterization(),
        direct_emissions: vec![DirectEmission {
            category: "Households".into(),
            substance: co2(),
            amount: targets::HOUSEHOLD_DIRECT * total,
            unit: "kg".into(),
        }],
        hierarchy: Some(level_hierarchy(&commodities)),
    }
}

/// The 17 rows of the road transportation life-cycle GHG table, kg CO2 eq.
pub fn road_lifecycle() -> Vec<LifecycleComponent> {
    const ROWS: &[(&str, &str, f64)] = &[
        ("Infrastructure", "Roads", 8.23e9),
        ("Tailpipe emissions", "Buses", 4.46e7),
        ("Tailpipe emissions", "LCVs", 4.73e8),
        ("Tailpipe emissions", "Freight services", 1.92e10),
        ("Tailpipe emissions", "Tourism", 2.94e7),
        ("Tailpipe emissions", "School buses", 1.58e8),
        ("Tailpipe emissions", "Taxis", 2.19e8),
        ("Tailpipe emissions", "Private vehicles", 8.24e10),
        ("Fuel supply chain", "Fuel", 2.64e10),
        ("Manufacturing", "Buses", 1.58e8),
        ("Manufacturing", "Trailers", 6.75e8),
        ("Manufacturing", "LCVs", 4.96e9),
        ("Manufacturing", "Companies' trucks", 1.52e10),
        ("Manufacturing", "Tourism vans", 5.09e8),
        ("Manufacturing", "Other vehicles", 4.13e8),
        ("Manufacturing", "Private vehicles", 1.93e10),
        ("Manufacturing", "Maintenance", 4.91e8),
    ];
    ROWS.iter()
        .map(|(g, l, v)| LifecycleComponent {
            group: g.to_string(),
            label: l.to_string(),
            value: *v,
        })
        .collect()
}

/// Writes every committed fixture under `root`:
///
/// - `3sector/`, `road/`: valid data directories
/// - `bad-weights/`: concordance weights summing to 0.9
/// - `nan-cell/`: a `NaN` cell in the use table
/// - `non-productive/`: two sectors each buying their whole output from the other
/// - `road-lifecycle.csv`, `single-lifecycle.csv`: lifecycle component tables
pub fn write_fixtures(root: &Path) -> std::io::Result<()> {
    three_sector().write(&root.join("3sector"))?;
    road_economy().write(&root.join("road"))?;

    let bad = root.join("bad-weights");
    three_sector().write(&bad)?;
    std::fs::write(
        bad.join("concordance.csv"),
        "#eeio-schema v1\ncoarse,fine,weight\nGoods,Agriculture,0.3\nGoods,Manufacturing,0.6\nServices,Services,1\n",
    )?;

    let nan = root.join("nan-cell");
    three_sector().write(&nan)?;
    let use_csv = std::fs::read_to_string(nan.join("use.csv"))?;
    let patched = use_csv.replacen("15,40,30", "15,NaN,30", 1);
    assert_ne!(use_csv, patched, "use.csv layout changed");
    std::fs::write(nan.join("use.csv"), patched)?;

    non_productive().write(&root.join("non-productive"))?;

    std::fs::write(
        root.join("road-lifecycle.csv"),
        write_lifecycle(&road_lifecycle(), "kg CO2 eq"),
    )?;
    std::fs::write(
        root.join("single-lifecycle.csv"),
        write_lifecycle(
            &[LifecycleComponent {
                group: "Infrastructure".into(),
                label: "Roads".into(),
                value: 8.23e9,
            }],
            "kg CO2 eq",
        ),
    )?;
    Ok(())
}

/// Closed two-sector economy where each sector's whole output is used by
/// the other, so `A = [[0, 1], [1, 0]]`.
pub fn non_productive() -> DataSet {
    let codes = vec!["North".to_string(), "South".to_string()];
    let commodities = fine(&codes);
    let final_demand = FinalDemand::new(
        Arc::clone(&commodities),
        vec![DemandCategory {
            label: "Households".into(),
            export: false,
        }],
        DMatrix::zeros(2, 1),
        Currency::default(),
    )
    .expect("shape");
    let sut = SupplyUseTables::new(
        fine(&codes),
        Arc::clone(&commodities),
        DMatrix::from_diagonal_element(2, 2, 10.0),
        DMatrix::from_row_slice(2, 2, &[0.0, 10.0, 10.0, 0.0]),
        final_demand,
        None,
        Currency::default(),
        false,
    )
    .expect("valid tables");
    let mut base = three_sector();
    base.sut = sut;
    base.flows = RawFlowAccount {
        records: vec![flow("North", co2(), 5.0, "kg"), flow("South", co2(), 5.0, "kg")],
    };
    base.concordance = Concordance::identity(&commodities);
    base.direct_emissions.clear();
    base.hierarchy = None;
    base
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn road_calibration_hits_climate_shares() {
        let cal = Calibration::new();
        let model = cal.model();
        let d = first_tier_decomposition(&model, ROAD).unwrap();
        let i = model.characterization().indicators.position(CLIMATE).unwrap();
        assert!((d.total[i] - targets::ROAD_INTENSITY).abs() < 1e-12);
        let road = Calibration::index(ROAD);
        let share = |j: usize| 100.0 * d.per_input[(i, j)] / d.total[i];
        assert!((share(Calibration::index("Ready-mixed concrete")) - 18.0).abs() < 1e-9);
        assert!((share(Calibration::index("Asphalt paving mixtures")) - 18.0).abs() < 1e-9);
        assert!((100.0 * d.direct[i] / d.total[i] - 17.0).abs() < 1e-9);
        let column_sum: f64 = model.technology().coefficients.column(road).sum();
        assert!(column_sum < 0.9, "road purchases {column_sum}");
    }

    #[test]
    fn level5_has_seven_groups() {
        let commodities = fine(&COMMODITIES.iter().map(|c| c.code.to_string()).collect::<Vec<_>>());
        let h = level_hierarchy(&commodities);
        assert_eq!(h.level(LEVEL4).unwrap().groups().len(), 24);
        assert_eq!(h.level(LEVEL5_ID).unwrap().groups().len(), 7);
        let fold = h.fold(LEVEL4, LEVEL5_ID).unwrap();
        let l4 = h.level(LEVEL4).unwrap();
        let l5 = h.level(LEVEL5_ID).unwrap();
        let bridges: Vec<&str> = l4
            .groups()
            .iter()
            .enumerate()
            .filter(|(g, _)| l5.groups()[fold[*g]] == "Bridges & tunnels")
            .map(|(_, name)| name.as_str())
            .collect();
        assert_eq!(bridges, ["Concrete", "Cement", "Steel", "Aluminum", "Other metals"]);
    }

    #[test]
    fn three_sector_assembles() {
        let (model, report) = crate::assemble::assemble(&three_sector());
        let model = model.unwrap();
        assert!(report.errors.is_empty());
        assert_eq!(model.commodities().len(), 3);
    }
}
