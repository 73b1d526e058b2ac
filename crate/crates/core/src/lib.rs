//! Click guidance signals for interactive segmentation of 3D volumes.
//!
//! The crate covers the whole evaluation loop:
//!
//! - [`volume`], [`phantom`], [`components`], [`io`]: grids, synthetic
//!   phantoms, connected components and raw `.vol`/`.msk` files;
//! - [`distance`]: exact Euclidean and raster-scan geodesic transforms;
//! - [`encode`]: disk, Gaussian heatmap, EDT, GDT, exp-GDT and adaptive
//!   heatmap guidance;
//! - [`sim`]: simulated corrective clicks driving a pluggable segmenter;
//! - [`metrics`]: Dice-based session metrics.

pub mod components;
pub mod distance;
pub mod encode;
mod error;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod sim;
pub mod volume;

pub use components::{connected_components, Component, Connectivity};
pub use distance::{dijkstra_oracle, dilate_seeds, edt, gdt, DistanceKind, DistanceMap, GeodesicParams, Passes, SeedSet};
pub use encode::{
    adaptive_sigma, encode, encode_adaptive_heatmap, encode_disk, encode_distance_guidance, encode_heatmap,
    ClickNeighborhood, Frame, GuidanceConfig, GuidanceKind, GuidanceVolume,
};
pub use error::{Error, Result};
pub use metrics::{aggregate, aggregate_traces, consistent_improvement, dice, efficiency, gt_overlap, MetricsReport};
pub use phantom::{make_phantom, PhantomKind};
pub use sim::{
    geodesic_oracle_segment, run_session, sample_click, ClickPlacement, GeodesicOracle, OracleParams, Segmenter,
    SessionTrace, SimulationConfig, TimingMode,
};
pub use volume::{Click, ClickSet, Dims, Mask, Polarity, Spacing, Volume};
