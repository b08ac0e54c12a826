use std::borrow::Cow;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Design matrix and response vector for one cohort.
///
/// The matrix is stored column-major (nalgebra's layout), which is what the
/// coordinate-descent solver wants. A dataset built through [`Dataset::new`]
/// always has at least one row; zero-row datasets only arise from source
/// selection, where an empty subsample marks a non-transferable cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::input(format!(
                "dataset must have n >= 1 and p >= 1, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if x.nrows() != y.len() {
            return Err(Error::input(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            let (r, c) = (i % x.nrows(), i / x.nrows());
            return Err(Error::input(format!("non-finite covariate at row {r}, column {c}")));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite response at row {i}")));
        }
        Ok(Dataset { x, y, labels: None })
    }

    /// Build from row-major covariate rows.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::input(format!("row {i} has {} columns, expected {p}", rows[i].len())));
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Dataset::new(x, y)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::input(format!(
                "{} labels supplied for {} rows",
                labels.len(),
                self.n()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Same covariates with a replacement response vector.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::input(format!(
                "replacement response has {} entries, dataset has {} rows",
                y.len(),
                self.n()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite response at row {i}")));
        }
        Ok(Dataset { x: self.x.clone(), y, labels: self.labels.clone() })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of row `i`, falling back to the row index.
    pub fn label(&self, i: usize) -> Cow<'_, str> {
        match &self.labels {
            Some(l) => Cow::Borrowed(l[i].as_str()),
            None => Cow::Owned(i.to_string()),
        }
    }

    /// Column `j` as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    pub(crate) fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.p() {
            return Err(Error::input(format!(
                "coefficient vector has length {}, dataset has p = {}",
                beta.len(),
                self.p()
            )));
        }
        Ok(())
    }

    /// Residuals `y - X beta`.
    pub fn residuals(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.check_beta(beta)?;
        let mut r = self.y.clone();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (ri, xij) in r.iter_mut().zip(self.column(j)) {
                    *ri -= xij * b;
                }
            }
        }
        Ok(r)
    }

    /// Subsample of the given rows, in the given order.
    ///
    /// Rows keep their labels; unlabelled datasets label the subsample with
    /// the original row indices so selections stay traceable.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let x = self.x.select_rows(rows.iter());
        let y = rows.iter().map(|&i| self.y[i]).collect();
        let labels = rows.iter().map(|&i| self.label(i).into_owned()).collect();
        Dataset { x, y, labels: Some(labels) }
    }

    /// Row-wise union, in argument order. Empty parts contribute no rows.
    pub fn stack(parts: &[&Dataset]) -> Result<Dataset> {
        let nonempty: Vec<&Dataset> = parts.iter().copied().filter(|d| !d.is_empty()).collect();
        let first = nonempty
            .first()
            .ok_or_else(|| Error::input("cannot stack: every part is empty"))?;
        let p = first.p();
        if let Some(d) = nonempty.iter().find(|d| d.p() != p) {
            return Err(Error::input(format!(
                "cannot stack datasets with {} and {} columns",
                p,
                d.p()
            )));
        }
        let n: usize = nonempty.iter().map(|d| d.n()).sum();
        let mut data = Vec::with_capacity(n * p);
        for j in 0..p {
            for d in &nonempty {
                data.extend_from_slice(d.column(j));
            }
        }
        let x = DMatrix::from_vec(n, p, data);
        let y = nonempty.iter().flat_map(|d| d.y.iter().copied()).collect();
        let labels = if nonempty.iter().all(|d| d.labels.is_some()) {
            Some(nonempty.iter().flat_map(|d| d.labels.clone().unwrap()).collect())
        } else {
            None
        };
        Ok(Dataset { x, y, labels })
    }
}
