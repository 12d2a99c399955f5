use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Between-item design: every item loads on exactly one ability dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemDesign {
    dimension_of: Vec<usize>,
    dims: usize,
}

impl ItemDesign {
    /// `dimension_of[j]` is the zero-based dimension of item `j`.
    pub fn new(dimension_of: Vec<usize>, dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::config("design needs at least one dimension"));
        }
        if let Some((j, d)) = dimension_of.iter().enumerate().find(|(_, &d)| d >= dims) {
            return Err(Error::shape(format!(
                "item {} mapped to dimension {} but only {} dimensions exist",
                j + 1,
                d + 1,
                dims
            )));
        }
        for d in 0..dims {
            if !dimension_of.contains(&d) {
                return Err(Error::config(format!("dimension {} has no items", d + 1)));
            }
        }
        Ok(ItemDesign { dimension_of, dims })
    }

    /// Consecutive blocks of items, `sizes[d]` items for dimension `d`.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let dimension_of = sizes
            .iter()
            .enumerate()
            .flat_map(|(d, &count)| std::iter::repeat_n(d, count))
            .collect();
        ItemDesign::new(dimension_of, sizes.len())
    }

    pub fn n_items(&self) -> usize {
        self.dimension_of.len()
    }

    pub fn n_dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn dimension(&self, item: usize) -> usize {
        self.dimension_of[item]
    }

    pub fn dimensions(&self) -> &[usize] {
        &self.dimension_of
    }

    /// Indicator `z_{dj}`.
    pub fn loads_on(&self, dim: usize, item: usize) -> bool {
        self.dimension_of[item] == dim
    }

    /// First item of `dim` in design order.
    pub fn anchor(&self, dim: usize) -> usize {
        self.dimension_of
            .iter()
            .position(|&d| d == dim)
            .expect("every dimension has an item")
    }

    pub fn is_dimension_anchor(&self, item: usize) -> bool {
        self.anchor(self.dimension_of[item]) == item
    }

    pub fn items_of(&self, dim: usize) -> impl Iterator<Item = usize> + '_ {
        self.dimension_of
            .iter()
            .enumerate()
            .filter(move |(_, &d)| d == dim)
            .map(|(j, _)| j)
    }
}

/// A single binary item response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Response {
    Incorrect,
    Correct,
    Missing,
}

impl Response {
    pub fn from_bool(correct: bool) -> Self {
        if correct {
            Response::Correct
        } else {
            Response::Incorrect
        }
    }

    /// The response indicator `r`.
    #[inline]
    pub fn observed(self) -> bool {
        self != Response::Missing
    }

    #[inline]
    pub fn is_correct(self) -> bool {
        self == Response::Correct
    }
}

/// Binary responses with missingness plus the subject covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    m: usize,
    c: usize,
    responses: Vec<Response>,
    covariates: Vec<f64>,
}

impl Dataset {
    /// Row-major `responses` (n x m) and `covariates` (n x c).
    pub fn new(m: usize, c: usize, responses: Vec<Response>, covariates: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::shape("dataset needs at least one item"));
        }
        if responses.len() % m != 0 {
            return Err(Error::shape(format!(
                "{} responses do not fill rows of {m} items",
                responses.len()
            )));
        }
        let n = responses.len() / m;
        if covariates.len() != n * c {
            return Err(Error::shape(format!(
                "expected {} covariate values for {n} subjects x {c} covariates, got {}",
                n * c,
                covariates.len()
            )));
        }
        if let Some(pos) = covariates.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: pos / c.max(1) + 1,
                column: format!("covariate {}", pos % c.max(1) + 1),
                message: "covariates must be finite".into(),
            });
        }
        Ok(Dataset {
            n,
            m,
            c,
            responses,
            covariates,
        })
    }

    pub fn empty(m: usize, c: usize) -> Self {
        Dataset {
            n: 0,
            m,
            c,
            responses: Vec::new(),
            covariates: Vec::new(),
        }
    }

    pub fn n_subjects(&self) -> usize {
        self.n
    }

    pub fn n_items(&self) -> usize {
        self.m
    }

    pub fn n_covariates(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn responses(&self, subject: usize) -> &[Response] {
        &self.responses[subject * self.m..(subject + 1) * self.m]
    }

    #[inline]
    pub fn covariates(&self, subject: usize) -> &[f64] {
        &self.covariates[subject * self.c..(subject + 1) * self.c]
    }

    #[inline]
    pub fn response(&self, subject: usize, item: usize) -> Response {
        self.responses[subject * self.m + item]
    }

    /// Response indicator `R[i][j]`.
    #[inline]
    pub fn responded(&self, subject: usize, item: usize) -> bool {
        self.response(subject, item).observed()
    }

    pub fn missing_count(&self) -> usize {
        self.responses.iter().filter(|r| !r.observed()).count()
    }

    /// New dataset built from the given (possibly repeated) subject rows.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut responses = Vec::with_capacity(rows.len() * self.m);
        let mut covariates = Vec::with_capacity(rows.len() * self.c);
        for &i in rows {
            responses.extend_from_slice(self.responses(i));
            covariates.extend_from_slice(self.covariates(i));
        }
        Dataset {
            n: rows.len(),
            m: self.m,
            c: self.c,
            responses,
            covariates,
        }
    }

    /// Observed proportion correct and response rate of an item.
    pub fn item_rates(&self, item: usize) -> (Option<f64>, f64) {
        let mut answered = 0usize;
        let mut correct = 0usize;
        for i in 0..self.n {
            let r = self.response(i, item);
            if r.observed() {
                answered += 1;
                if r.is_correct() {
                    correct += 1;
                }
            }
        }
        let response_rate = if self.n == 0 {
            0.0
        } else {
            answered as f64 / self.n as f64
        };
        let correct_rate = (answered > 0).then(|| correct as f64 / answered as f64);
        (correct_rate, response_rate)
    }
}
