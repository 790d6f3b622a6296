//! Contrastive objective: cosine similarity, symmetric InfoNCE, the
//! dual-granularity weighted loss, and the curriculum weight schedule.

mod loss;
mod schedule;

pub use loss::{
    cosine_similarity, dual_loss, dual_loss_node, info_nce, info_nce_from_similarity,
    info_nce_node, info_nce_similarity, BatchLoss,
};
pub use schedule::{
    alpha_schedule, long_weight, LearningOrder, Phase, ScheduleConfig, DEFAULT_ALPHA_MIN,
    DEFAULT_ALPHA_START, DEFAULT_DELTA, DEFAULT_T1_FRAC, DEFAULT_T2_FRAC,
};
