//! Matrix-layout files: supply, use, import use and final demand.
//!
//! First row: a corner label followed by column codes. Every following row:
//! a row code followed by one number per column.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;

use super::csvfile::{with_preamble, CsvFile};
use crate::error::{Error, IngestError, Result};
use crate::model::{
    Classification, Currency, DemandCategory, FinalDemand, Granularity, SupplyUseTables,
};

#[derive(Debug)]
pub(crate) struct MatrixFile {
    pub file: CsvFile,
    pub row_codes: Vec<String>,
    pub col_codes: Vec<String>,
    pub values: DMatrix<f64>,
}

impl MatrixFile {
    pub fn read(path: &Path) -> Result<MatrixFile, IngestError> {
        Self::from_csv(CsvFile::read(path)?)
    }

    pub fn from_csv(file: CsvFile) -> Result<MatrixFile, IngestError> {
        if file.header.len() < 2 {
            return Err(IngestError::MalformedHeader {
                file: file.path.clone(),
                line: file.header_line,
                detail: "matrix header needs a corner cell and at least one column code".into(),
            });
        }
        let col_codes: Vec<String> = file.header[1..].to_vec();
        let mut seen = HashSet::new();
        for code in &col_codes {
            if code.is_empty() {
                return Err(IngestError::MalformedHeader {
                    file: file.path.clone(),
                    line: file.header_line,
                    detail: "empty column code".into(),
                });
            }
            if !seen.insert(code.as_str()) {
                return Err(IngestError::DuplicateCode {
                    file: file.path.clone(),
                    line: file.header_line,
                    code: code.clone(),
                });
            }
        }

        let allow_negative = file.flag("allow-negative");
        let mut row_codes = Vec::with_capacity(file.rows.len());
        let mut data = Vec::with_capacity(file.rows.len() * col_codes.len());
        let mut seen = HashSet::new();
        for (line, cells) in &file.rows {
            file.check_width(*line, cells)?;
            let code = &cells[0];
            if code.is_empty() {
                return Err(IngestError::MalformedHeader {
                    file: file.path.clone(),
                    line: *line,
                    detail: "empty row code".into(),
                });
            }
            if !seen.insert(code.clone()) {
                return Err(IngestError::DuplicateCode {
                    file: file.path.clone(),
                    line: *line,
                    code: code.clone(),
                });
            }
            for (col, cell) in col_codes.iter().zip(&cells[1..]) {
                let v = file.number(*line, col, cell)?;
                if v < 0.0 && !allow_negative {
                    return Err(IngestError::NegativeEntry {
                        file: file.path.clone(),
                        line: *line,
                        column: col.clone(),
                        value: v,
                    });
                }
                data.push(v);
            }
            row_codes.push(code.clone());
        }
        if row_codes.is_empty() {
            return Err(IngestError::MalformedHeader {
                file: file.path.clone(),
                line: file.header_line,
                detail: "matrix has no rows".into(),
            });
        }
        let values = DMatrix::from_row_slice(row_codes.len(), col_codes.len(), &data);
        Ok(MatrixFile {
            file,
            row_codes,
            col_codes,
            values,
        })
    }

    fn axis_error(&self, detail: String) -> IngestError {
        IngestError::AxisMismatch {
            file: self.file.path.clone(),
            detail,
        }
    }

    fn expect_rows(&self, codes: &[String], what: &str) -> Result<(), IngestError> {
        if self.row_codes != codes {
            return Err(self.axis_error(format!("row codes must equal {what} codes in order")));
        }
        Ok(())
    }

    fn expect_cols(&self, codes: &[String], what: &str) -> Result<(), IngestError> {
        if self.col_codes != codes {
            return Err(self.axis_error(format!("column codes must equal {what} codes in order")));
        }
        Ok(())
    }
}

/// Paths of the four matrix-layout files.
#[derive(Debug, Clone)]
pub struct SupplyUsePaths {
    pub supply: PathBuf,
    pub use_table: PathBuf,
    pub final_demand: PathBuf,
    pub import_use: Option<PathBuf>,
}

impl SupplyUsePaths {
    /// `supply.csv`, `use.csv`, `final_demand.csv` and, when present,
    /// `import_use.csv` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        let import = dir.join("import_use.csv");
        SupplyUsePaths {
            supply: dir.join("supply.csv"),
            use_table: dir.join("use.csv"),
            final_demand: dir.join("final_demand.csv"),
            import_use: import.exists().then_some(import),
        }
    }
}

fn currency_of(m: &MatrixFile, expected: Option<&Currency>) -> Result<Currency, IngestError> {
    let declared = m.file.meta.get("currency").map(|c| Currency::new(c.clone()));
    match (declared, expected) {
        (Some(d), Some(e)) if &d != e => Err(IngestError::MalformedHeader {
            file: m.file.path.clone(),
            line: 1,
            detail: format!("currency {d} differs from {e} declared in supply table"),
        }),
        (Some(d), _) => Ok(d),
        (None, Some(e)) => Ok(e.clone()),
        (None, None) => Ok(Currency::default()),
    }
}

fn classification(codes: &[String]) -> Arc<Classification> {
    // codes were checked unique and non-empty while reading
    Arc::new(Classification::from_codes(codes, Granularity::Fine).expect("validated codes"))
}

/// Reads supply, use, final demand and (optional) import use tables.
pub fn parse_supply_use(paths: &SupplyUsePaths) -> Result<SupplyUseTables> {
    let supply = MatrixFile::read(&paths.supply)?;
    let currency = currency_of(&supply, None)?;
    if supply.file.flag("allow-negative") {
        return Err(IngestError::MalformedHeader {
            file: supply.file.path.clone(),
            line: 1,
            detail: "supply entries may not be negative".into(),
        }
        .into());
    }
    let industries = classification(&supply.row_codes);
    let commodities = classification(&supply.col_codes);

    let use_file = MatrixFile::read(&paths.use_table)?;
    use_file.expect_rows(&supply.col_codes, "supply column (commodity)")?;
    use_file.expect_cols(&supply.row_codes, "supply row (industry)")?;
    currency_of(&use_file, Some(&currency))?;

    let fd = MatrixFile::read(&paths.final_demand)?;
    fd.expect_rows(&supply.col_codes, "supply column (commodity)")?;
    currency_of(&fd, Some(&currency))?;
    let exports: HashSet<String> = fd
        .file
        .meta
        .get("exports")
        .map(|v| {
            v.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
        .unwrap_or_default();
    if let Some(unknown) = exports.iter().find(|e| !fd.col_codes.contains(e)) {
        return Err(IngestError::MalformedHeader {
            file: fd.file.path.clone(),
            line: 1,
            detail: format!("#exports names unknown category `{unknown}`"),
        }
        .into());
    }
    let categories = fd
        .col_codes
        .iter()
        .map(|label| DemandCategory {
            label: label.clone(),
            export: exports.contains(label),
        })
        .collect();
    let final_demand = FinalDemand::new(commodities.clone(), categories, fd.values, currency.clone())?;

    let import_use = match &paths.import_use {
        Some(p) => {
            let m = MatrixFile::read(p)?;
            m.expect_rows(&supply.col_codes, "supply column (commodity)")?;
            m.expect_cols(&supply.row_codes, "supply row (industry)")?;
            currency_of(&m, Some(&currency))?;
            Some(m)
        }
        None => None,
    };
    let negatives_flagged = use_file.file.flag("allow-negative")
        || import_use
            .as_ref()
            .is_some_and(|m| m.file.flag("allow-negative"));
    let price_basis = supply.file.meta.get("price-basis").cloned();

    SupplyUseTables::new(
        industries,
        commodities,
        supply.values,
        use_file.values,
        final_demand,
        import_use.map(|m| m.values),
        currency,
        negatives_flagged,
    )
    .map(|s| s.with_price_basis(price_basis))
    .map_err(|e| match e {
        Error::InvalidCoefficients(detail) | Error::AxisMismatch(detail) => {
            IngestError::AxisMismatch {
                file: paths.supply.clone(),
                detail,
            }
            .into()
        }
        other => other,
    })
}

/// Serializes a matrix-layout file.
pub fn write_matrix(
    corner: &str,
    row_codes: &[&str],
    col_codes: &[&str],
    values: &DMatrix<f64>,
    meta: &[(&str, String)],
) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = Vec::with_capacity(col_codes.len() + 1);
    header.push(corner.to_string());
    header.extend(col_codes.iter().map(|c| c.to_string()));
    w.write_record(&header).expect("write to memory");
    for (r, code) in row_codes.iter().enumerate() {
        let mut rec = Vec::with_capacity(col_codes.len() + 1);
        rec.push(code.to_string());
        rec.extend((0..col_codes.len()).map(|c| values[(r, c)].to_string()));
        w.write_record(&rec).expect("write to memory");
    }
    with_preamble(meta, &w.into_inner().expect("flush to memory"))
}

/// Writes the supply/use tables back in the matrix layout into `dir`.
pub fn write_supply_use(sut: &SupplyUseTables, dir: &Path) -> std::io::Result<()> {
    let ind: Vec<&str> = sut.industries.codes().collect();
    let com: Vec<&str> = sut.commodities.codes().collect();
    let mut meta = vec![("currency", sut.currency.to_string())];
    if let Some(pb) = &sut.price_basis {
        meta.push(("price-basis", pb.clone()));
    }
    std::fs::write(
        dir.join("supply.csv"),
        write_matrix("industry", &ind, &com, &sut.supply, &meta),
    )?;

    let mut use_meta = vec![("currency", sut.currency.to_string())];
    if sut.negatives_flagged {
        use_meta.push(("allow-negative", "true".into()));
    }
    std::fs::write(
        dir.join("use.csv"),
        write_matrix("commodity", &com, &ind, &sut.use_table, &use_meta),
    )?;
    if let Some(imp) = &sut.import_use {
        std::fs::write(
            dir.join("import_use.csv"),
            write_matrix("commodity", &com, &ind, imp, &use_meta),
        )?;
    }

    let fd = &sut.final_demand;
    let cats: Vec<&str> = fd.categories.iter().map(|c| c.label.as_str()).collect();
    let exports: Vec<&str> = fd
        .categories
        .iter()
        .filter(|c| c.export)
        .map(|c| c.label.as_str())
        .collect();
    let mut fd_meta = vec![("currency", fd.currency.to_string())];
    if !exports.is_empty() {
        fd_meta.push(("exports", exports.join(",")));
    }
    if fd.values.iter().any(|v| *v < 0.0) {
        fd_meta.push(("allow-negative", "true".into()));
    }
    std::fs::write(
        dir.join("final_demand.csv"),
        write_matrix("commodity", &com, &cats, &fd.values, &fd_meta),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, format!("#eeio-schema v1\n{body}")).unwrap();
        p
    }

    fn two_by_three(dir: &Path) -> SupplyUsePaths {
        write(
            dir,
            "supply.csv",
            "#currency CAD\nindustry,c1,c2,c3\ni1,10,2,0\ni2,0,3,7\n",
        );
        write(dir, "use.csv", "commodity,i1,i2\nc1,1,2\nc2,0.5,0\nc3,0,1\n");
        write(
            dir,
            "final_demand.csv",
            "#exports exports\ncommodity,households,exports\nc1,5,1\nc2,3,1\nc3,4,2\n",
        );
        SupplyUsePaths::in_dir(dir)
    }

    #[test]
    fn reads_declared_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let sut = parse_supply_use(&two_by_three(dir.path())).unwrap();
        assert_eq!(sut.industries.len(), 2);
        assert_eq!(sut.commodities.len(), 3);
        assert_eq!(sut.supply[(1, 2)], 7.0);
        assert_eq!(sut.use_table[(1, 0)], 0.5);
        assert!(sut.final_demand.categories[1].export);
        assert!(sut.import_use.is_none());
    }

    #[test]
    fn duplicate_commodity_code_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let paths = two_by_three(dir.path());
        write(dir.path(), "supply.csv", "industry,c1,c2,c1\ni1,1,2,0\ni2,0,3,7\n");
        let err = parse_supply_use(&paths).unwrap_err();
        assert!(
            matches!(err, Error::Ingest(IngestError::DuplicateCode { ref code, line: 2, .. }) if code == "c1"),
            "{err}"
        );
    }

    #[test]
    fn non_numeric_cell_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let paths = two_by_three(dir.path());
        write(dir.path(), "use.csv", "commodity,i1,i2\nc1,1,2\nc2,NaN,0\nc3,0,1\n");
        let err = parse_supply_use(&paths).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("use.csv:4"), "{msg}");
        assert!(matches!(err, Error::Ingest(IngestError::NonNumericCell { .. })));
    }

    #[test]
    fn negative_use_needs_flag() {
        let dir = tempfile::tempdir().unwrap();
        let paths = two_by_three(dir.path());
        write(dir.path(), "use.csv", "commodity,i1,i2\nc1,1,2\nc2,-0.5,0\nc3,0,1\n");
        assert!(matches!(
            parse_supply_use(&paths).unwrap_err(),
            Error::Ingest(IngestError::NegativeEntry { .. })
        ));
        write(
            dir.path(),
            "use.csv",
            "#allow-negative true\ncommodity,i1,i2\nc1,1,2\nc2,-0.5,0\nc3,0,1\n",
        );
        let sut = parse_supply_use(&paths).unwrap();
        assert!(sut.negatives_flagged);
    }

    #[test]
    fn misordered_use_rows_are_an_axis_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let paths = two_by_three(dir.path());
        write(dir.path(), "use.csv", "commodity,i1,i2\nc2,1,2\nc1,0.5,0\nc3,0,1\n");
        assert!(matches!(
            parse_supply_use(&paths).unwrap_err(),
            Error::Ingest(IngestError::AxisMismatch { .. })
        ));
    }

    #[test]
    fn wide_generated_header_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let codes: Vec<String> = (0..492).map(|i| format!("C{i:03}")).collect();
        let refs: Vec<&str> = codes.iter().map(String::as_str).collect();
        let supply = DMatrix::from_fn(1, 492, |_, c| 1.0 + c as f64);
        std::fs::write(
            dir.path().join("supply.csv"),
            write_matrix("industry", &["all"], &refs, &supply, &[]),
        )
        .unwrap();
        let use_t = DMatrix::from_element(492, 1, 0.1);
        std::fs::write(
            dir.path().join("use.csv"),
            write_matrix("commodity", &refs, &["all"], &use_t, &[]),
        )
        .unwrap();
        std::fs::write(
            dir.path().join("final_demand.csv"),
            write_matrix("commodity", &refs, &["households"], &use_t, &[]),
        )
        .unwrap();
        let sut = parse_supply_use(&SupplyUsePaths::in_dir(dir.path())).unwrap();
        assert_eq!(sut.commodities.len(), 492);
        assert!(sut.commodities.codes().eq(refs.iter().copied()));
    }
}
