//! Subjects x descriptors feature tables and their CSV form.

use std::collections::HashMap;
use std::path::Path;

use crate::descriptor::FeatureDescriptor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub descriptors: Vec<FeatureDescriptor>,
    pub subject_ids: Vec<String>,
    /// Row-major, `subject_ids.len() * descriptors.len()`.
    pub values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(descriptors: Vec<FeatureDescriptor>, subject_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let expected = descriptors.len() * subject_ids.len();
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(FeatureMatrix {
            descriptors,
            subject_ids,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.descriptors.len()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let n = self.n_cols();
        self.values[row * n + col] = v;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.n_cols();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }

    pub fn column_index(&self) -> HashMap<&FeatureDescriptor, usize> {
        self.descriptors.iter().enumerate().map(|(i, d)| (d, i)).collect()
    }

    pub fn find_column(&self, d: &FeatureDescriptor) -> Option<usize> {
        self.descriptors.iter().position(|x| x == d)
    }

    /// Restrict to the given descriptors, in the given order.
    pub fn select_columns(&self, keep: &[FeatureDescriptor]) -> Result<FeatureMatrix> {
        let index = self.column_index();
        let cols: Vec<usize> = keep
            .iter()
            .map(|d| {
                index
                    .get(d)
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("descriptor {d} not in matrix")))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(cols.len() * self.n_rows());
        for r in 0..self.n_rows() {
            values.extend(cols.iter().map(|&c| self.get(r, c)));
        }
        FeatureMatrix::new(keep.to_vec(), self.subject_ids.clone(), values)
    }

    /// Restrict to the given subjects, in the given order.
    pub fn select_rows(&self, ids: &[String]) -> Result<FeatureMatrix> {
        let mut values = Vec::with_capacity(ids.len() * self.n_cols());
        for id in ids {
            let r = self
                .subject_ids
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::InvalidInput(format!("subject {id} not in matrix")))?;
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix::new(self.descriptors.clone(), ids.to_vec(), values)
    }

    /// Dense row-major copy as `Vec<Vec<f64>>`.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        self.write_to(&mut w).map_err(|e| Error::parse(path.display().to_string(), e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_to(&mut w).expect("in-memory csv");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    fn write_to<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        let mut header = vec!["subject_id".to_string()];
        header.extend(self.descriptors.iter().map(|d| d.to_string()));
        w.write_record(&header)?;
        for (r, id) in self.subject_ids.iter().enumerate() {
            let mut rec = Vec::with_capacity(self.n_cols() + 1);
            rec.push(id.clone());
            rec.extend(self.row(r).iter().map(|&v| format_value(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<FeatureMatrix> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(csv::Reader::from_reader(file), &path.display().to_string())
    }

    pub fn from_csv_str(text: &str) -> Result<FeatureMatrix> {
        Self::read_from(csv::Reader::from_reader(text.as_bytes()), "csv")
    }

    fn read_from<R: std::io::Read>(mut rdr: csv::Reader<R>, ctx: &str) -> Result<FeatureMatrix> {
        let headers = rdr.headers().map_err(|e| Error::parse(ctx, e))?.clone();
        if headers.get(0) != Some("subject_id") {
            return Err(Error::parse(ctx, "first column must be subject_id"));
        }
        let descriptors: Vec<FeatureDescriptor> =
            headers.iter().skip(1).map(|h| h.parse()).collect::<Result<_>>()?;
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(ctx, e))?;
            if rec.len() != descriptors.len() + 1 {
                return Err(Error::parse(ctx, format!("row has {} fields", rec.len())));
            }
            ids.push(rec[0].to_string());
            for f in rec.iter().skip(1) {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(ctx, format!("bad number {f:?}")))?;
                values.push(v);
            }
        }
        FeatureMatrix::new(descriptors, ids, values)
    }
}

/// 17 significant digits (exact f64 round trip); `NaN` spelled literally.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::enumerate_descriptors;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_roundtrip_preserves_values(vals in proptest::collection::vec(prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), Just(f64::NAN)], 6)) {
            let d: Vec<_> = enumerate_descriptors(true).into_iter().rev().take(3).collect();
            let m = FeatureMatrix::new(d, vec!["a".into(), "b".into()], vals.clone()).unwrap();
            let back = FeatureMatrix::from_csv_str(&m.to_csv_string()).unwrap();
            prop_assert_eq!(&back.descriptors, &m.descriptors);
            for (x, y) in back.values.iter().zip(&vals) {
                prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }

    #[test]
    fn nine_significant_digits_at_least() {
        let s = format_value(1.0 / 3.0);
        let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
        assert!(digits >= 9, "{s}");
    }
}
