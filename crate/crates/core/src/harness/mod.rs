//! Sliding-window detection over full frames, declaration matching, ROC
//! analysis and benchmark orchestration.

mod bench;
mod detect;
mod roc;
mod scorer;

pub use bench::{
    assemble_report, report_from_scores, resolve_method, run_benchmark, BenchConfig, BenchReport,
    MethodContext, MethodReport, BASE_FILTER_SIDE, STANDARD_METHODS,
};
pub use detect::{
    frame_candidates, match_detections, match_frame, nms_candidates, sliding_detect, Detection, FrameMatch,
    MatchResult, DEFAULT_MATCH_RADIUS, DEFAULT_NMS_RADIUS,
};
pub use roc::{
    match_at, normalized_auc, roc_curve, sweep_for, threshold_sweep, RocCurve, RocPoint, ScoredFrame,
    DEFAULT_THRESHOLD_COUNT,
};
pub use scorer::Scorer;
