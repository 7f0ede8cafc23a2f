//! Photon detection: inhomogeneous Poisson arrivals, detector dead time and
//! jitter, and the fiber beam splitter of the HBT interferometer.

pub mod detector;
pub mod sampling;
pub mod stream;
pub mod timetag;

pub use detector::{apply_dead_time, apply_jitter, beam_split, DetectorParams};
pub use sampling::{add_dark_counts, sample_arrivals};
pub use stream::PhotonStream;
pub use timetag::{read_timetags, write_timetags, TimetagFormat};
