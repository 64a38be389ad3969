//! Behavioural cloning of expert paths, as sub-goal trees or as a
//! next-state model.

pub mod expert;
pub mod model;

#[derive(Debug, thiserror::Error)]
pub enum BcError {
    #[error("no demonstrations")]
    EmptyData,
    #[error("demonstration {0} has fewer than two states")]
    ShortTrajectory(usize),
    #[error("could not read demonstrations: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed demonstration line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub use expert::{astar_path, densify, generate_expert_dataset, ExpertDataset};
pub use model::{bc_predict_sgt, bc_train_sequential, bc_train_sgt, evaluate_bc, mid_index, rollout_sequential, BcConfig, BcMethod, BcModel, BcRow, SeqRollout};
