//! Mixed TASEP with geometric, Bernoulli and continuous-time dynamics:
//! exact-law samplers, determinantal transition probabilities, the
//! biorthogonal/hitting representation of the correlation kernel, joint
//! distributions as Fredholm determinants on finite sections, and the
//! numerical KPZ scaling harness for the kernel limits.

pub mod airy;
pub mod biortho;
pub mod contour;
pub mod error;
pub mod fredholm;
pub mod greens;
pub mod kpz;
pub mod model;
pub mod poly;
pub mod simulate;

pub use error::{Error, Result};
