//! Offline phase: parameter sampling, snapshot collection and POD or
//! nested-POD bases with energy-based truncation.

mod basis;
mod sampler;
mod snapshots;
mod svd;

pub use basis::{nested_pod, nested_spectra, pod, pod_spectra, FieldBasis, PodMethod, PodSpectra, PodWeights, ReducedBasis, Truncation};
pub(crate) use sampler::draw_normal_in_box;
pub use sampler::{sample_parameters, ParamBox, ParameterSampler, SamplingDistribution};
pub use snapshots::{collect_snapshots, collect_trajectories, ColumnKey, Field, SnapshotSet};
pub use svd::{residual_energy, svd_snapshots, svd_snapshots_weighted, truncate, Spectrum, DROP_TOLERANCE};
