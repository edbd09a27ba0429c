//! Feature selection: ANOVA-F relevance, MRMR, RFE with a linear SVM, and
//! univariate forest AUC (uAUC).

mod mrmr;
mod rfe;
mod svm;
mod uauc;

pub use mrmr::{anova_f, mrmr, MrmrScheme};
pub use rfe::rfe_svm;
pub use svm::{train_linear_svm, train_linear_svm_gram, LinearModel, SvmSolution};
pub use uauc::{uauc, UaucResult};

use serde::{Deserialize, Serialize};

use crate::descriptor::FeatureDescriptor;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorKind {
    Mrmr,
    RfeSvm,
}

impl SelectorKind {
    pub fn parse(s: &str) -> Result<SelectorKind> {
        match s {
            "mrmr" => Ok(SelectorKind::Mrmr),
            "rfe-svm" | "rfe" => Ok(SelectorKind::RfeSvm),
            other => Err(Error::InvalidInput(format!("unknown selector {other:?}"))),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            SelectorKind::Mrmr => "mrmr",
            SelectorKind::RfeSvm => "rfe-svm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDiagnostic {
    pub descriptor: FeatureDescriptor,
    /// ANOVA F for MRMR picks; final SVM importance for RFE.
    pub relevance: f64,
    /// Round in which RFE eliminated the feature (absent for survivors and MRMR).
    pub eliminated_round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: SelectorKind,
    pub selected: Vec<FeatureDescriptor>,
    pub diagnostics: Vec<FeatureDiagnostic>,
}

impl SelectionResult {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::parse("selection", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<SelectionResult> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }
}

/// Run the chosen selector on a discovery matrix.
pub fn select(
    kind: SelectorKind,
    matrix: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    n: usize,
    scheme: MrmrScheme,
) -> Result<SelectionResult> {
    match kind {
        SelectorKind::Mrmr => mrmr(matrix, y, n, scheme),
        SelectorKind::RfeSvm => rfe_svm(matrix, y, n_classes, n),
    }
}

pub(crate) fn check_labels(n_rows: usize, y: &[usize]) -> Result<()> {
    if n_rows != y.len() {
        return Err(Error::LengthMismatch {
            expected: n_rows,
            actual: y.len(),
        });
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub(crate) fn check_n(n: usize, p: usize) -> Result<()> {
    if n == 0 || n > p {
        return Err(Error::InvalidInput(format!("cannot select {n} of {p} features")));
    }
    Ok(())
}
