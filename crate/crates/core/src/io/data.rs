use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Dataset, ItemDesign, Response};

/// Token written for an unobserved response.
pub const MISSING_TOKEN: &str = "NA";

/// Item names, dimension labels and the implied item design. Items are
/// numbered in listing order; dimensions in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemMap {
    pub items: Vec<String>,
    pub dimension_labels: Vec<String>,
    pub design: ItemDesign,
}

impl ItemMap {
    pub fn new(entries: Vec<(String, String)>) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        let mut dims = Vec::with_capacity(entries.len());
        let mut items = Vec::with_capacity(entries.len());
        for (item, label) in entries {
            if items.contains(&item) {
                return Err(Error::config(format!("item `{item}` listed twice in the item map")));
            }
            let d = match labels.iter().position(|l| *l == label) {
                Some(d) => d,
                None => {
                    labels.push(label);
                    labels.len() - 1
                }
            };
            items.push(item);
            dims.push(d);
        }
        if items.is_empty() {
            return Err(Error::config("item map is empty"));
        }
        let design = ItemDesign::new(dims, labels.len())?;
        Ok(ItemMap {
            items,
            dimension_labels: labels,
            design,
        })
    }

    /// Items named `item1..itemm` on dimensions labelled `U1..Us`.
    pub fn generic(design: &ItemDesign) -> Self {
        ItemMap {
            items: (1..=design.n_items()).map(|j| format!("item{j}")).collect(),
            dimension_labels: (1..=design.n_dims()).map(|d| format!("U{d}")).collect(),
            design: design.clone(),
        }
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        row: e.position().map_or(0, |p| p.line() as usize),
        column: String::new(),
        message: format!("{}: {e}", path.display()),
    }
}

fn create_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Reads an `item,dimension` table.
pub fn read_item_map(path: impl AsRef<Path>) -> Result<ItemMap> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 1,
            column: name.to_string(),
            message: format!("{}: missing column", path.display()),
        })
    };
    let (ci, cd) = (col("item")?, col("dimension")?);
    let mut entries = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let item = rec.get(ci).unwrap_or("").to_string();
        let dim = rec.get(cd).unwrap_or("").to_string();
        if item.is_empty() || dim.is_empty() {
            return Err(Error::Parse {
                row: r + 2,
                column: if item.is_empty() { "item" } else { "dimension" }.into(),
                message: "empty cell".into(),
            });
        }
        entries.push((item, dim));
    }
    ItemMap::new(entries)
}

pub fn write_item_map(path: impl AsRef<Path>, map: &ItemMap) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_writer(path)?;
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(["item", "dimension"]).map_err(ser)?;
    for (j, item) in map.items.iter().enumerate() {
        let label = &map.dimension_labels[map.design.dimension(j)];
        w.write_record([item.as_str(), label.as_str()]).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A dataset with the names of its covariate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub data: Dataset,
    pub covariate_names: Vec<String>,
}

/// Reads a subject-by-column table. Item columns are taken from `map`;
/// covariates are either the listed `covariates` or every other column in
/// file order.
pub fn read_data(path: impl AsRef<Path>, map: &ItemMap, covariates: Option<&[String]>) -> Result<LoadedData> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let missing_col = |name: &str| Error::Parse {
        row: 1,
        column: name.to_string(),
        message: format!("{}: column not found in header", path.display()),
    };
    let item_cols = map
        .items
        .iter()
        .map(|it| index.get(it.as_str()).copied().ok_or_else(|| missing_col(it)))
        .collect::<Result<Vec<_>>>()?;
    let covariate_names: Vec<String> = match covariates {
        Some(list) => list.to_vec(),
        None => headers
            .iter()
            .filter(|h| !map.items.contains(h))
            .cloned()
            .collect(),
    };
    let cov_cols = covariate_names
        .iter()
        .map(|c| index.get(c.as_str()).copied().ok_or_else(|| missing_col(c)))
        .collect::<Result<Vec<_>>>()?;

    let mut responses = Vec::new();
    let mut xs = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = r + 2;
        for (&col, name) in item_cols.iter().zip(&map.items) {
            let cell = rec.get(col).unwrap_or("");
            responses.push(match cell {
                "" | MISSING_TOKEN => Response::Missing,
                "0" => Response::Incorrect,
                "1" => Response::Correct,
                other => {
                    return Err(Error::Parse {
                        row,
                        column: name.clone(),
                        message: format!("response must be 0, 1, NA or empty, got `{other}`"),
                    })
                }
            });
        }
        for (&col, name) in cov_cols.iter().zip(&covariate_names) {
            let cell = rec.get(col).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: name.clone(),
                message: format!("covariate must be numeric, got `{cell}`"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.clone(),
                    message: "covariate must be finite".into(),
                });
            }
            xs.push(value);
        }
    }
    Ok(LoadedData {
        data: Dataset::new(map.items.len(), covariate_names.len(), responses, xs)?,
        covariate_names,
    })
}

/// Writes a dataset with item columns first, then covariates. Missing
/// responses are written as `NA`; covariates use the shortest decimal
/// representation that parses back to the same value.
pub fn write_data(
    path: impl AsRef<Path>,
    data: &Dataset,
    map: &ItemMap,
    covariate_names: &[String],
) -> Result<()> {
    let path = path.as_ref();
    if map.items.len() != data.n_items() || covariate_names.len() != data.n_covariates() {
        return Err(Error::shape("column names do not match the dataset"));
    }
    let mut w = create_writer(path)?;
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(map.items.iter().chain(covariate_names)).map_err(ser)?;
    for i in 0..data.n_subjects() {
        let mut record: Vec<String> = data
            .responses(i)
            .iter()
            .map(|r| match r {
                Response::Correct => "1".to_string(),
                Response::Incorrect => "0".to_string(),
                Response::Missing => MISSING_TOKEN.to_string(),
            })
            .collect();
        record.extend(data.covariates(i).iter().map(|x| x.to_string()));
        w.write_record(&record).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a header and rows of pre-formatted cells.
pub fn write_table(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_writer(path)?;
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(header).map_err(ser)?;
    for row in rows {
        w.write_record(row).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
}
