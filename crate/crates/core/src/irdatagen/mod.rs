//! Synthetic infrared frames and the labeled patch datasets cut from them.

mod dataset;
mod frames;
mod generate;
mod samples;
mod scene;
mod subsample;

pub use dataset::{
    decode_dataset, encode_dataset, read_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION,
};
pub use frames::{read_frames, write_frames, Frame, FRAMES_DIR, TRUTHS_FILE};
pub use generate::{
    balanced_negative_budget, build_dataset, generate_dataset, generate_frames, DatagenConfig,
    GeneratedDataset,
};
pub use samples::{
    augment_negative, augment_positive, extract_samples, split_samples, AugmentedSet, CoreSet, Label,
    LabeledSample, CONTEXT_SIZE, CORE_SIZE, MARGIN, NEGATIVE_AUGMENTATION, POSITIVE_AUGMENTATION, SHIFTS,
};
pub use scene::{
    synth_scene, ClutterKind, Scene, SceneConfig, BAD_PIXEL_CLEARANCE, FULL_SCALE, MIN_FRAME_SIDE,
    TARGET_BORDER, TARGET_SEPARATION,
};
pub use subsample::{farthest_point_indices, subsample_negatives};
