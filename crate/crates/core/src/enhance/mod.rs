//! Image enhancement: insonification normalization, wavelet denoising and
//! CFAR binarization.

mod cfar;
mod chain;
mod dwt;
mod insonification;

pub use cfar::{cfar_statistics, cfar_threshold, cfar_threshold_raw, CfarParams, CfarStatistic, Goca, Soca};
pub use chain::{enhance_pipeline, CfarStage, DwtStage, EnhanceChain, EnhanceStage, NormalizeStage};
pub use dwt::{dwt_denoise, DwtParams, ThresholdRule};
pub use insonification::{insonification_pattern, normalize_insonification, PatternAccumulator, DEFAULT_EPSILON};
