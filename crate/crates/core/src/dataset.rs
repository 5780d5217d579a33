use nalgebra::DMatrix;

use crate::error::{invalid, Result, WplError};
use crate::kernel_weights::CovariateMatrix;

/// Observations (`n × p`) with optional covariates (`n × d`).
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    data: DMatrix<f64>,
    covariates: Option<CovariateMatrix>,
}

impl DataSet {
    pub fn new(data: DMatrix<f64>, covariates: Option<CovariateMatrix>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(invalid("data matrix is empty"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("data matrix contains non-finite entries"));
        }
        if let Some(z) = &covariates {
            if z.n() != data.nrows() {
                return Err(WplError::DimensionMismatch(format!(
                    "{} data rows but {} covariate rows",
                    data.nrows(),
                    z.n()
                )));
            }
        }
        Ok(Self { data, covariates })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn covariates(&self) -> Option<&CovariateMatrix> {
        self.covariates.as_ref()
    }
}
