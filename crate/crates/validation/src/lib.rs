//! Independent reference implementations used to check radstack: direct
//! agreement formulas, quadratic-time ROC estimators and naive texture
//! enumeration.

pub mod agreement;
pub mod roc;
pub mod texture;
