//! Weighted reservoir sampling on top of simulated foveated rendering.
//!
//! Each output pixel is a one-slot reservoir over the stream of foveated
//! candidates that pixel has seen. Candidates are weighted by visual acuity
//! at their eccentricity, so sharp foveal samples keep being displayed after
//! the gaze moves away until the reservoir statistics retire them.

pub mod color;
pub mod error;
pub mod foveation;
pub mod geometry;
pub mod image;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod reservoir;
pub mod rng;
pub mod scanpath;
pub mod scene;
pub mod sequence;
pub mod weights;

pub use color::{delta_l, HistoryDistance};
pub use error::{Error, Result};
pub use foveation::{foveate, FoveationConfig, FoveationMethod};
pub use geometry::{eccentricity, AngularMapping, DisplayGeometry};
pub use image::{Buffer2D, DepthMap, Image, MotionField, Rgb};
pub use metrics::{psnr, ssim, SsimEvaluator};
pub use pipeline::{
    reproject, run, run_with, BiasMode, Method, PipelineConfig, PipelineState, PixelReservoir,
    PixelSample, ReservoirGrid, StageTimings, StepOutput,
};
pub use report::{FrameRecord, RunReport, Summary};
pub use reservoir::{combine, survival_probability, Reservoir};
pub use rng::{CounterRng, RandomDraw};
pub use scanpath::{parse_scanpath, synth_scanpath, GazeSample, Scanpath, SynthParams};
pub use scene::{render_procedural, FrameBundle, SceneKind, SceneSpec};
pub use sequence::{load_sequence, read_png, write_png, PngDepth};
pub use weights::{acuity_weight, cone_density, AcuityModel, WeightParams};

/// Worker threads available to the data-parallel stages.
pub fn thread_count() -> usize {
    rayon::current_num_threads()
}
