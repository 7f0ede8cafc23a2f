//! Estimators: window counting, `g2` from photon-number distributions,
//! coincidence correlation, the two-timescale fit and tail metrics.

pub mod correlation;
pub mod fit;
pub mod g2;
pub mod histogram;
pub mod pmf;
pub mod tails;

pub use correlation::{coincidence_histogram, coincidence_histogram_with, CorrelationFunction, Normalization};
pub use fit::{fit_two_timescale, fit_two_timescale_with, FitGuess, FitResult, FitStderr};
pub use g2::{g2_bootstrap, g2_from_histogram, g2_from_probabilities, G2Estimate};
pub use histogram::{count_windows, count_windows_tiled, CountHistogram, WindowTiling};
pub use pmf::{geometric_pmf, poisson_pmf, Law};
pub use tails::{band_violations, goodness_of_fit, tail_metrics, tail_metrics_with, GoodnessOfFit, TailMetrics, TailRatio};
