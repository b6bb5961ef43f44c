//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Tolerances are pinned in the constants below.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use eeio_core::ingest::parse_lifecycle;
use eeio_core::synthetic::{model_from_matrices, CLIMATE, ECOSYSTEM_QUALITY, HUMAN_HEALTH, LEVEL4, ROAD};
use eeio_core::{
    aggregate, allocate_flows, assemble, contribution_points, first_tier_decomposition, footprint,
    lifecycle_report, midpoint_endpoint_regression, per_capita, total_requirements, Contributions,
    DataSet, DemandScope, IOModel, Quantity, UnitTable,
};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const ORACLE_CASES: usize = 200;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_BUDGET: Duration = Duration::from_secs(5);
const CLOSED_FORM_TOL: f64 = 1e-12;
const DECOMPOSITION_CASES: usize = 100;
const DECOMPOSITION_TOL: f64 = 1e-9;
const CONSERVATION_TOL: f64 = 1e-12;
const PER_CAPITA_TOL: f64 = 0.1;
const LIFECYCLE_TOTAL: f64 = 1.79e11;
const LIFECYCLE_TOTAL_REL: f64 = 0.01;
const LIFECYCLE_USE_PP: f64 = 1.0;
const OLS_TOL: f64 = 1e-12;
const ROAD_R2_FLOOR: f64 = 0.98;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_economy(rng: &mut StdRng, n: usize, max_col: f64, substances: usize, indicators: usize) -> IOModel {
    let mut a = DMatrix::from_fn(n, n, |_, _| if rng.gen_bool(0.7) { rng.gen::<f64>() } else { 0.0 });
    for j in 0..n {
        let s = a.column(j).sum();
        if s > 0.0 {
            let target = rng.gen_range(0.0..max_col);
            a.column_mut(j).scale_mut(target / s);
        }
    }
    let b = DMatrix::from_fn(substances, n, |_, _| rng.gen_range(0.0..5.0));
    let c = DMatrix::from_fn(indicators, substances, |_, _| rng.gen_range(0.0..3.0));
    let y = DVector::from_fn(n, |_, _| rng.gen_range(0.0..100.0));
    model_from_matrices(a, b, c, y).expect("random economy is valid")
}

fn neumann(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut term = y.clone();
    let mut sum = y.clone();
    while term.amax() > 1e-15 * sum.amax().max(1e-300) {
        term = a * term;
        sum += &term;
    }
    sum
}

fn oracle_equivalence() -> Check {
    let mut rng = StdRng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..ORACLE_CASES {
        let n = rng.gen_range(1..=20);
        let m = random_economy(&mut rng, n, 0.6, 1, 1);
        let y = DVector::from_fn(n, |_, _| rng.gen_range(0.0..100.0));
        let x = total_requirements(&m, &y).map_err(|e| e.to_string())?.x;
        let oracle = neumann(&m.technology().coefficients, &y);
        for (p, q) in x.iter().zip(oracle.iter()) {
            worst = worst.max(rel(*p, *q));
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= ORACLE_TOL, || format!("max relative error {worst:e}"))?;
    ensure(elapsed < ORACLE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("max relative error {worst:.2e} in {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn closed_form() -> Check {
    let m = model_from_matrices(
        DMatrix::from_element(1, 1, 0.5),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, 1.0),
    )
    .map_err(|e| e.to_string())?;
    let q = footprint(&m, &DemandScope::All).map_err(|e| e.to_string())?.totals[0];
    ensure((q - 2.0).abs() <= CLOSED_FORM_TOL, || format!("q = {q}"))?;
    Ok(format!("q = {q}"))
}

fn decomposition_additivity() -> Check {
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..DECOMPOSITION_CASES {
        let n = rng.gen_range(1..=20);
        let m = random_economy(&mut rng, n, 0.8, 3, 2);
        let sector = format!("s{}", rng.gen_range(0..n));
        let d = first_tier_decomposition(&m, &sector).map_err(|e| e.to_string())?;
        for i in 0..d.total.len() {
            let parts = d.direct[i] + d.per_input.row(i).sum();
            worst = worst.max(rel(parts, d.total[i]));
        }
    }
    ensure(worst <= DECOMPOSITION_TOL, || format!("max relative gap {worst:e}"))?;
    Ok(format!("max relative gap {worst:.2e} over {DECOMPOSITION_CASES} fixtures"))
}

fn conservation() -> Check {
    let data = DataSet::load(&fixtures().join("road")).map_err(|e| e.to_string())?;
    let fine = &data.sut.commodities;
    let mut worst: f64 = 0.0;

    // allocation keeps every coarse total
    let inventory = data.inventory.clone().unwrap_or_default();
    for account in [&data.flows, &inventory] {
        let alloc = allocate_flows(account, &data.concordance, fine).map_err(|e| e.to_string())?;
        for (s, sub) in alloc.substances.iter().enumerate() {
            let coarse: f64 = account.records.iter().filter(|r| r.substance == sub.key).map(|r| r.amount).sum();
            worst = worst.max(rel(alloc.values.row(s).sum(), coarse));
        }
    }

    // B·x reconstructs the allocated flows
    let (model, _) = assemble(&data);
    let model = model.map_err(|e| e.to_string())?;
    let ext = model.extensions();
    for account in [&data.flows, &inventory] {
        let alloc = allocate_flows(account, &data.concordance, fine).map_err(|e| e.to_string())?;
        for (s, sub) in alloc.substances.iter().enumerate() {
            let t = ext.substances.position(&sub.key).ok_or("substance lost in assembly")?;
            let scale = alloc.values.row(s).amax();
            for j in 0..fine.len() {
                let rebuilt = ext.intensities[(t, j)] * model.output()[j];
                worst = worst.max((rebuilt - alloc.values[(s, j)]).abs() / scale);
            }
        }
    }

    // aggregation keeps sums at every level
    let hierarchy = model.hierarchy().ok_or("road fixture has no hierarchy")?;
    let q = footprint(&model, &DemandScope::Consumption).map_err(|e| e.to_string())?;
    let d = first_tier_decomposition(&model, ROAD).map_err(|e| e.to_string())?;
    let tables = [q.fine_table(), d.fine_table()];
    for level in hierarchy.levels() {
        let agg = [aggregate(&q, hierarchy, &level.id), aggregate(&d, hierarchy, &level.id)];
        for (fine_t, agg_t) in tables.iter().zip(agg) {
            let agg_t = agg_t.map_err(|e| e.to_string())?;
            for i in 0..fine_t.values.nrows() {
                worst = worst.max(rel(agg_t.values.row(i).sum(), fine_t.values.row(i).sum()));
            }
        }
    }
    ensure(worst <= CONSERVATION_TOL, || format!("max relative gap {worst:e}"))?;
    Ok(format!("max relative gap {worst:.2e} ({} levels)", hierarchy.levels().len()))
}

fn per_capita_arithmetic() -> Check {
    let q = per_capita(&Quantity::new(6.92e11, "kg CO2 eq"), 3.84e7)
        .map_err(|e| e.to_string())?
        .rescale_mass(&UnitTable::standard(), "t");
    ensure((q.value - 18.0).abs() <= PER_CAPITA_TOL, || format!("{} {}", q.value, q.unit))?;
    ensure(format!("{:.2}", q.value) == "18.02", || format!("{}", q.value))?;
    Ok(format!("{:.2} {}", q.value, q.unit))
}

fn lifecycle_table() -> Check {
    let rows = parse_lifecycle(&fixtures().join("road-lifecycle.csv")).map_err(|e| e.to_string())?;
    ensure(rows.len() == 17, || format!("{} rows", rows.len()))?;
    let r = lifecycle_report(&rows).map_err(|e| e.to_string())?;
    let share = |g: &str| r.group(g).map_or(0.0, |g| 100.0 * g.share);
    let infra = share("Infrastructure");
    let use_stage = share("Tailpipe emissions") + share("Fuel supply chain");
    ensure(rel(r.total, LIFECYCLE_TOTAL) <= LIFECYCLE_TOTAL_REL, || format!("sum {:e}", r.total))?;
    ensure(format!("{infra:.1}") == "4.6" && infra.round() == 5.0, || format!("infrastructure {infra}%"))?;
    ensure((use_stage - 72.0).abs() <= LIFECYCLE_USE_PP, || format!("tailpipe + fuel {use_stage}%"))?;
    Ok(format!("sum {:.4e}, infrastructure {infra:.1}%, tailpipe + fuel {use_stage:.2}%", r.total))
}

fn regression() -> Check {
    let mut rng = StdRng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(5..=50);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0))).collect();
        let fit = midpoint_endpoint_regression(&pts).map_err(|e| e.to_string())?;
        // normal equations [n Σx; Σx Σx²] [b; m] = [Σy; Σxy]
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let beta = Matrix2::new(n as f64, sx, sx, sxx)
            .lu()
            .solve(&Vector2::new(sy, sxy))
            .ok_or("singular normal equations")?;
        let my = sy / n as f64;
        let ss_res: f64 = pts.iter().map(|p| (p.1 - beta[0] - beta[1] * p.0).powi(2)).sum();
        let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        worst = worst
            .max((fit.slope - beta[1]).abs())
            .max((fit.intercept - beta[0]).abs())
            .max((fit.r_squared - (1.0 - ss_res / ss_tot)).abs());
    }
    ensure(worst <= OLS_TOL, || format!("OLS vs oracle {worst:e}"))?;

    let collinear: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 * i as f64 - 2.0)).collect();
    let r2 = midpoint_endpoint_regression(&collinear).map_err(|e| e.to_string())?.r_squared;
    ensure((r2 - 1.0).abs() <= OLS_TOL, || format!("collinear R² {r2}"))?;

    let data = DataSet::load(&fixtures().join("road")).map_err(|e| e.to_string())?;
    let model = assemble(&data).0.map_err(|e| e.to_string())?;
    let d = first_tier_decomposition(&model, ROAD).map_err(|e| e.to_string())?;
    let table = aggregate(&d, model.hierarchy().ok_or("no hierarchy")?, LEVEL4).map_err(|e| e.to_string())?;
    let ind = &model.characterization().indicators;
    let x = ind.require(CLIMATE).map_err(|e| e.to_string())?;
    let mut road = Vec::new();
    for endpoint in [ECOSYSTEM_QUALITY, HUMAN_HEALTH] {
        let y = ind.require(endpoint).map_err(|e| e.to_string())?;
        let pts: Vec<(f64, f64)> = contribution_points(&table, x, y, false).iter().map(|p| (p.x, p.y)).collect();
        let r2 = midpoint_endpoint_regression(&pts).map_err(|e| e.to_string())?.r_squared;
        ensure(r2 >= ROAD_R2_FLOOR, || format!("{endpoint} R² {r2}"))?;
        road.push(format!("{r2:.4}"));
    }
    Ok(format!("OLS vs oracle {worst:.1e}, road R² {}", road.join(" / ")))
}

fn eeio(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_eeio")).args(args).output().expect("binary runs")
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = fixtures().join("road");
    let mut hashes = Vec::new();
    let mut models = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("road{k}.json"));
        let o = eeio(&["build", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
        hashes.push(o.stdout);
        models.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure(hashes[0] == hashes[1] && models[0] == models[1], || "rebuild changed the model".into())?;

    let m = dir.path().join("road0.json");
    let m = m.to_str().unwrap();
    let lifecycle = fixtures().join("road-lifecycle.csv");
    let commands: Vec<Vec<&str>> = vec![
        vec!["footprint", m, "--per-capita", "38400000"],
        vec!["footprint", m, "--scope", "all", "--format", "json"],
        vec!["contribute", m, "--sector", ROAD, "--level", "level5"],
        vec!["correlate", m, "--sector", ROAD, "--level", "level4", "--include-direct"],
        vec!["lifecycle", lifecycle.to_str().unwrap()],
    ];
    for args in &commands {
        let (a, b) = (eeio(args), eeio(args));
        ensure(a.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&a.stderr)))?;
        ensure(a.stdout == b.stdout, || format!("{args:?} output differs between runs"))?;
    }
    Ok(format!("identical hashes and {} byte-identical reports", commands.len()))
}

fn validation() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("m.json");
    for (fixture, needle) in [
        ("bad-weights", "concordance.csv"),
        ("nan-cell", "use.csv"),
        ("non-productive", "technology matrix is not productive"),
    ] {
        let data = fixtures().join(fixture);
        let o = eeio(&["build", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        let err = String::from_utf8_lossy(&o.stderr);
        ensure(o.status.code() == Some(2), || format!("{fixture}: exit {:?}", o.status.code()))?;
        ensure(err.contains(needle), || format!("{fixture}: {err}"))?;
    }
    Ok("bad-weights, nan-cell, non-productive exit 2 naming the culprit".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("one-sector closed form", closed_form),
        ("decomposition additivity", decomposition_additivity),
        ("conservation", conservation),
        ("per-capita arithmetic", per_capita_arithmetic),
        ("lifecycle table", lifecycle_table),
        ("regression", regression),
        ("determinism", determinism),
        ("validation", validation),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
