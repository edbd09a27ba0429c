//! SMOTE, random forests, the soft-voting forest ensemble and model files.

mod ensemble;
mod forest;
mod smote;

pub use ensemble::{
    decode_model, encode_model, load_model, save_model, train_ensemble, ForestEnsembleModel, MODEL_MAGIC,
    MODEL_VERSION,
};
pub use forest::{argmax, train_forest, train_tree, Forest, ForestHyper, MaxFeatures, Node, Tree};
pub use smote::smote;
