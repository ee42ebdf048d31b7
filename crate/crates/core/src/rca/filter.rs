use std::io::Read;

use crate::error::{Error, Result};
use crate::telemetry::DesignMatrix;

/// Expert mask over the matrix columns: `true` where a column is an
/// admissible cause of the KPI. The KPI column itself is always masked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalityFilter {
    mask: Vec<bool>,
    kpi_column: usize,
}

impl CausalityFilter {
    pub fn from_mask(mut mask: Vec<bool>, kpi_column: usize) -> Result<Self> {
        if kpi_column >= mask.len() {
            return Err(Error::InvalidParameter(format!(
                "kpi column {kpi_column} outside a mask of {} columns",
                mask.len()
            )));
        }
        mask[kpi_column] = false;
        Ok(Self { mask, kpi_column })
    }

    pub fn allow_all(n: usize, kpi_column: usize) -> Result<Self> {
        Self::from_mask(vec![true; n], kpi_column)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn kpi_column(&self) -> usize {
        self.kpi_column
    }

    pub fn allows(&self, column: usize) -> bool {
        self.mask[column]
    }

    /// Reads `kpi_name,column_name,allowed` rows. Rows for other KPIs are
    /// skipped; columns without a row stay allowed.
    pub fn read_csv<R: Read>(
        reader: R,
        source: &str,
        matrix: &DesignMatrix,
        kpi_column: usize,
    ) -> Result<Self> {
        let kpi_name = &matrix.column(kpi_column).name;
        let mut mask = vec![true; matrix.n_columns()];
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if headers != ["kpi_name", "column_name", "allowed"] {
            return Err(Error::parse(source, 1, "expected header `kpi_name,column_name,allowed`"));
        }
        for (i, rec) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::parse(source, line, "expected 3 fields"));
            }
            if rec[0].trim() != kpi_name {
                continue;
            }
            let column = rec[1].trim();
            let idx = matrix
                .column_index(column)
                .ok_or_else(|| Error::parse(source, line, format!("unknown column `{column}`")))?;
            mask[idx] = match rec[2].trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::parse(source, line, format!("allowed must be 0 or 1, got `{other}`")))
                }
            };
        }
        Self::from_mask(mask, kpi_column)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{build_design_matrix, PmKind, PmSeries, TimeGrid};

    #[test]
    fn csv_filter() {
        let g = TimeGrid::new(0, 1, 2).unwrap();
        let pm: Vec<_> = ["kpi", "a", "b"]
            .iter()
            .map(|n| PmSeries::new(*n, PmKind::Counter, vec![0.0, 1.0]))
            .collect();
        let m = build_design_matrix(&pm, &[], &[], &g).unwrap();
        let csv = "kpi_name,column_name,allowed\nkpi,a,0\nother,b,0\nkpi,kpi,1\n";
        let f = CausalityFilter::read_csv(csv.as_bytes(), "f.csv", &m, 0).unwrap();
        assert_eq!(f.mask(), [false, false, true]);

        let bad = "kpi_name,column_name,allowed\nkpi,zzz,0\n";
        let err = CausalityFilter::read_csv(bad.as_bytes(), "f.csv", &m, 0).unwrap_err();
        assert!(err.to_string().contains("f.csv:2"));
        assert!(CausalityFilter::allow_all(2, 2).is_err());
    }
}
