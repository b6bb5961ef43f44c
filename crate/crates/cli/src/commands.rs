use std::path::Path;
use std::str::FromStr;

use eeio_core::ingest::parse_lifecycle;
use eeio_core::{
    aggregate, archive, assemble, contribution_points, first_tier_decomposition, footprint as solve_footprint,
    lifecycle_report, midpoint_endpoint_regression, per_capita, ContributionTable, Contributions, DataSet,
    DemandScope, Error, IOModel, ImpactLevel, Quantity, UnitTable,
};

use crate::table::{emit, Format, Table};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::input(e.to_string())
        } else {
            Failure::runtime(e.to_string())
        }
    }
}

fn write(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    emit(bytes, path).map_err(|e| {
        let target = path.map_or("stdout".to_string(), |p| p.display().to_string());
        Failure::runtime(format!("{target}: cannot write: {e}"))
    })
}

/// Sizes the global thread pool from `EEIO_THREADS`.
pub fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("EEIO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::input(format!("EEIO_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::runtime(format!("cannot configure thread pool: {e}")))
}

fn load_model(path: &Path) -> Result<IOModel, Failure> {
    archive::load(path).map_err(|e| match e {
        Error::Archive(_) => Failure::input(e.to_string()),
        other => Failure::input(format!("{}: {other}", path.display())),
    })
}

pub fn build(data_dir: &Path, out: &Path) -> Result<(), Failure> {
    let data = DataSet::load(data_dir)?;
    let (model, report) = assemble(&data);
    let report_path = out.with_extension("report.json");
    let mut report_bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
    report_bytes.push(b'\n');
    write(Some(&report_path), &report_bytes)?;
    let model = model?;
    for w in &report.warnings {
        log::warn!("{}", w.message);
    }
    archive::save(&model, out).map_err(|e| Failure::runtime(format!("{}: cannot write: {e}", out.display())))?;
    write(None, format!("content_hash {}\n", model.content_hash()).as_bytes())
}

pub fn footprint(
    model: &Path,
    scope: &str,
    population: Option<f64>,
    per_capita_unit: &str,
    format: Format,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let scope = DemandScope::from_str(scope)?;
    let model = load_model(model)?;
    let q = solve_footprint(&model, &scope)?;
    let units = UnitTable::standard();
    if population.is_some() && !units.is_registered(per_capita_unit) {
        return Err(Failure::input(format!("unknown per-capita unit `{per_capita_unit}`")));
    }
    let mut columns = vec!["indicator", "unit", "total", "direct"];
    if population.is_some() {
        columns.extend(["per_capita", "per_capita_unit"]);
    }
    let mut table = Table::new(columns);
    for (i, ind) in q.indicators.iter().enumerate() {
        let mut row = vec![
            ind.id.as_str().into(),
            q.unit(i).into(),
            q.totals[i].into(),
            q.direct_component[i].into(),
        ];
        if let Some(p) = population {
            let pc = per_capita(&Quantity::new(q.totals[i], q.unit(i)), p)?.rescale_mass(&units, per_capita_unit);
            row.extend([pc.value.into(), pc.unit.into()]);
        }
        table.push(row);
    }
    write(out, &table.render(format))
}

fn contribution_table(model: &IOModel, sector: &str, level: Option<&str>) -> Result<ContributionTable, Failure> {
    let d = first_tier_decomposition(model, sector)?;
    Ok(match level {
        Some(l) => {
            let h = model.hierarchy().ok_or_else(|| Error::UnknownLevel(l.to_string()))?;
            aggregate(&d, h, l)?
        }
        None => d.fine_table(),
    })
}

pub fn contribute(
    model: &Path,
    sector: &str,
    level: Option<&str>,
    plot: Option<&Path>,
    format: Format,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let model = load_model(model)?;
    let table = contribution_table(&model, sector, level)?;
    let mut result = Table::new(vec!["group", "indicator", "unit", "value", "share_percent"]);
    let mut plot_data = Table::new(vec!["group", "indicator", "share_percent"]);
    for (i, ind) in table.indicators.iter().enumerate() {
        let unit = format!("{}/{}", ind.unit, model.currency());
        for (k, share) in table.shares(i).into_iter().enumerate() {
            let label = table.labels[k].as_str();
            result.push(vec![
                label.into(),
                ind.id.as_str().into(),
                unit.as_str().into(),
                table.values[(i, k)].into(),
                (100.0 * share).into(),
            ]);
            if table.values[(i, k)] != 0.0 {
                plot_data.push(vec![label.into(), ind.id.as_str().into(), (100.0 * share).into()]);
            }
        }
    }
    if let Some(p) = plot {
        write(Some(p), &plot_data.render(Format::Csv))?;
    }
    write(out, &result.render(format))
}

pub struct CorrelateOptions {
    pub sector: String,
    pub level: Option<String>,
    pub x_indicator: Option<String>,
    pub include_direct: bool,
}

pub fn correlate(
    model: &Path,
    opts: &CorrelateOptions,
    scatter: Option<&Path>,
    format: Format,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let model = load_model(model)?;
    let table = contribution_table(&model, &opts.sector, opts.level.as_deref())?;
    let indicators = &table.indicators;
    let x = match &opts.x_indicator {
        Some(id) => indicators.require(id)?,
        None => indicators
            .iter()
            .position(|i| i.level == ImpactLevel::Midpoint)
            .unwrap_or(0),
    };
    let endpoints: Vec<usize> = (0..indicators.len())
        .filter(|&i| i != x && indicators.get(i).level == ImpactLevel::Endpoint)
        .collect();
    let ys = if endpoints.is_empty() {
        (0..indicators.len()).filter(|&i| i != x).collect()
    } else {
        endpoints
    };
    let x_id = indicators.get(x).id.as_str();
    let mut fits = Table::new(vec!["x_indicator", "y_indicator", "slope", "intercept", "r_squared", "n_points"]);
    let mut points = Table::new(vec!["indicator", "group", "x_percent", "y_percent"]);
    for y in ys {
        let y_id = indicators.get(y).id.as_str();
        let pts = contribution_points(&table, x, y, opts.include_direct);
        for p in &pts {
            points.push(vec![y_id.into(), p.label.as_str().into(), p.x.into(), p.y.into()]);
        }
        let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.x, p.y)).collect();
        let fit = midpoint_endpoint_regression(&xy)?;
        fits.push(vec![
            x_id.into(),
            y_id.into(),
            fit.slope.into(),
            fit.intercept.into(),
            fit.r_squared.into(),
            fit.n_points.into(),
        ]);
    }
    if let Some(p) = scatter {
        write(Some(p), &points.render(Format::Csv))?;
    }
    write(out, &fits.render(format))
}

pub fn lifecycle(components: &Path, format: Format, out: Option<&Path>) -> Result<(), Failure> {
    let rows = parse_lifecycle(components)?;
    let report = lifecycle_report(&rows).map_err(|e| Failure::input(format!("{}: {e}", components.display())))?;
    let mut table = Table::new(vec!["kind", "group", "label", "value", "share_percent"]);
    for c in &report.components {
        table.push(vec![
            "component".into(),
            c.group.as_str().into(),
            c.label.as_str().into(),
            c.value.into(),
            (100.0 * c.share).into(),
        ]);
    }
    for g in &report.groups {
        table.push(vec![
            "group".into(),
            g.group.as_str().into(),
            "".into(),
            g.value.into(),
            (100.0 * g.share).into(),
        ]);
    }
    table.push(vec!["total".into(), "".into(), "".into(), report.total.into(), 100.0.into()]);
    write(out, &table.render(format))
}
