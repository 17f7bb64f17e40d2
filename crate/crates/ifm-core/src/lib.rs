//! Intention-from-motion pipeline: preprocessing and kinematic features for
//! motion-capture reach-to-grasp trials, dense-trajectory HOG/HOF video
//! features, bag-of-features encoding, a chi-square kernel SVM trained by
//! sequential minimal optimization, and subject-wise evaluation protocols.

pub mod error;
pub mod kinfeat;
pub mod preprocess;
pub mod trial;

pub use error::{IfmError, Result};
