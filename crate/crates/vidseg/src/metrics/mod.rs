//! Metric engines. Panoptic metrics (PQ, VPQ, STQ) match tubes within
//! class; semantic metrics (mIoU, weighted IoU, VC) work on class-id
//! videos. Both families accumulate into mergeable stats so datasets
//! evaluate in parallel and reduce deterministically.

pub mod panoptic;
pub mod semantic;

pub use panoptic::{
    frame_pq_stats, score, stq, stq_from_parts, stq_parts, vpq_aggregate, vpq_k, vpq_multi,
    AnnotatedFrame, ClassStats, PanopticStats, PqScore, StqOptions, StqParts, StqReport,
};
pub use semantic::{
    confusion, miou, vc_n, vc_stats, weighted_iou, ConfusionAccumulator, VcMode, VcStats,
};
