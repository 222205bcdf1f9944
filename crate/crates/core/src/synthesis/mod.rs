//! Control synthesis: time averaging, superposition fitting, oscillation
//! scheduling and concatenation into a single piecewise-constant schedule.

mod average;
mod displacement;
mod fit;
mod pipeline;
mod schedule;

pub use average::{time_average, SIMPSON_INTERVALS};
pub use displacement::displacement_target_field;
pub use fit::{fit_superposition, FitOptions, FitReport, FitResult};
pub use pipeline::{synthesize_controls, Synthesis, SynthesisParams, SynthesisReport, WindowReport, MAX_PIECES};
pub use schedule::{oscillation_schedule, ControlSchedule};
