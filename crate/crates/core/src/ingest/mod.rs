//! Readers and writers for the documented CSV schemas.
//!
//! A data directory holds:
//!
//! | file                    | layout | required |
//! |-------------------------|--------|----------|
//! | `supply.csv`            | matrix (industry × commodity) | yes |
//! | `use.csv`               | matrix (commodity × industry) | yes |
//! | `final_demand.csv`      | matrix (commodity × category) | yes |
//! | `import_use.csv`        | matrix (commodity × industry) | no |
//! | `flows.csv`             | record `sector,region,substance,compartment,amount,unit,year` | yes |
//! | `inventory.csv`         | same as `flows.csv` | no |
//! | `direct_emissions.csv`  | record `category,substance,compartment,amount,unit` | no |
//! | `concordance.csv`       | record `coarse,fine,weight` | yes |
//! | `characterization.csv`  | record `indicator,level,indicator_unit,substance,compartment,substance_unit,factor` | yes |
//! | `aggregation.csv`       | record `level,fine,group` | no |
//!
//! Every file starts with `#eeio-schema v1`.

mod csvfile;
mod records;
mod tables;

use std::path::{Path, PathBuf};
use std::sync::Arc;

pub use csvfile::SCHEMA_LINE;
pub use records::{
    parse_aggregation, parse_characterization, parse_concordance, parse_direct_emissions,
    parse_flow_accounts, parse_lifecycle, write_aggregation, write_characterization,
    write_concordance, write_direct_emissions, write_flow_accounts, write_lifecycle,
    DirectEmission, FlowRecord, RawFlowAccount,
};
pub use tables::{parse_supply_use, write_matrix, write_supply_use, SupplyUsePaths};

use crate::error::Result;
use crate::model::{AggregationHierarchy, CharacterizationMatrix, Concordance, SupplyUseTables};
use crate::units::UnitTable;

/// Everything read from one data directory, before assembly.
#[derive(Debug, Clone)]
pub struct DataSet {
    pub sut: SupplyUseTables,
    /// Physical flow accounts (`flows.csv`).
    pub flows: RawFlowAccount,
    /// Pollutant inventory (`inventory.csv`), summed with `flows` on assembly.
    pub inventory: Option<RawFlowAccount>,
    pub concordance: Concordance,
    pub characterization: CharacterizationMatrix,
    pub direct_emissions: Vec<DirectEmission>,
    pub hierarchy: Option<AggregationHierarchy>,
}

impl DataSet {
    /// Reads a data directory laid out as documented at module level.
    pub fn load(dir: &Path) -> Result<DataSet> {
        let table = UnitTable::standard();
        let sut = parse_supply_use(&SupplyUsePaths::in_dir(dir))?;
        let flows = parse_flow_accounts(&[dir.join("flows.csv")], &table)?;
        let inventory = optional(dir, "inventory.csv")
            .map(|p| parse_flow_accounts(&[p], &table))
            .transpose()?;
        let concordance = parse_concordance(&dir.join("concordance.csv"), &sut.commodities)?;
        let characterization = parse_characterization(&dir.join("characterization.csv"), &table)?;
        let direct_emissions = optional(dir, "direct_emissions.csv")
            .map(|p| parse_direct_emissions(&p, &table))
            .transpose()?
            .unwrap_or_default();
        let hierarchy = optional(dir, "aggregation.csv")
            .map(|p| parse_aggregation(&p, Arc::clone(&sut.commodities)))
            .transpose()?;
        Ok(DataSet {
            sut,
            flows,
            inventory,
            concordance,
            characterization,
            direct_emissions,
            hierarchy,
        })
    }

    /// Writes every table of the data set into `dir` (created if needed).
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        write_supply_use(&self.sut, dir)?;
        std::fs::write(dir.join("flows.csv"), write_flow_accounts(&self.flows))?;
        if let Some(inv) = &self.inventory {
            std::fs::write(dir.join("inventory.csv"), write_flow_accounts(inv))?;
        }
        std::fs::write(dir.join("concordance.csv"), write_concordance(&self.concordance))?;
        std::fs::write(
            dir.join("characterization.csv"),
            write_characterization(&self.characterization),
        )?;
        if !self.direct_emissions.is_empty() {
            std::fs::write(
                dir.join("direct_emissions.csv"),
                write_direct_emissions(&self.direct_emissions),
            )?;
        }
        if let Some(h) = &self.hierarchy {
            std::fs::write(dir.join("aggregation.csv"), write_aggregation(h))?;
        }
        Ok(())
    }
}

fn optional(dir: &Path, name: &str) -> Option<PathBuf> {
    let p = dir.join(name);
    p.exists().then_some(p)
}
