//! Finite approximations of the tile: digit blocks, point clouds, measure and tiling evidence.

pub mod block;
pub mod cloud;
pub mod evidence;
pub mod multiplicity;

pub use block::{digit_block, digit_block_with, value_index, DigitBlock, SignatureWindow};
pub use cloud::{point_cloud, read_csv, write_csv, CloudRow, PointCloud};
pub use evidence::{delta_group_evidence, measure_evidence, DeltaEvidence, DeltaStatus, MeasureEvidence, Verdict};
pub use multiplicity::{compare_resolutions, multiplicity_estimate, Estimator, ResolutionComparison, Sample, TilingReport, TranslateWindow};
