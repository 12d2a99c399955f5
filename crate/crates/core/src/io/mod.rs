//! File formats: data and item-map tables, TOML run configuration, and the
//! JSON/CSV reports. See `docs/formats.md` in the repository.

mod config;
mod data;
mod report;

pub use config::{BootstrapSection, GridEntry, ModelSection, RunConfig};
pub use data::{
    read_data, read_item_map, read_json, write_data, write_item_map, write_json, write_table,
    ItemMap, LoadedData, MISSING_TOKEN,
};
pub use report::{
    BootstrapOutput, CoefficientRow, FitReport, ItemRow, ParameterRow, RecoveryOutput,
    SupportRow, write_selection, FORMAT_VERSION,
};
