//! Self-supervised data generation: disassembly episodes, time reversal,
//! and compilation of the suction/place/matching training sets.

pub mod datasets;
pub mod disassemble;
pub mod episode;

pub use datasets::{
    build_match_dataset, build_place_dataset, build_suction_dataset, DatasetIndex, MapKind,
    MapRef, MatchSample, PlaceSample, SuctionSample,
};
pub use disassemble::{
    execute_assembly, oracle_pick, reverse, run_disassembly, AssemblyAction, CollectParams,
    PickerPolicy,
};
pub use episode::{episode_dir, load_episode, save_episode, Episode, EpisodeStep};

#[derive(Debug, thiserror::Error)]
pub enum CollectError {
    #[error("collect io: {0}")]
    Io(#[from] std::io::Error),
    #[error("collect serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("render during collection: {0}")]
    Render(#[from] crate::render::RenderError),
    #[error("simulation during collection: {0}")]
    Sim(#[from] crate::sim::SimError),
    #[error("bad file: {0}")]
    Format(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("assembly replay failed: {0}")]
    ReplayFailed(String),
}
