//! Bias-reduced kernel density estimation and Kullback-Leibler model
//! selection.
//!
//! This crate implements a one-dimensional density estimation and model
//! selection toolkit around a bias-reduced kernel density estimator:
//!
//! - [`kernels`]: the Gaussian kernel, its second derivative, and the
//!   effective kernel of the bias-reduced estimator with all moment and
//!   norm constants.
//! - [`density`]: the classical and bias-reduced estimators with their
//!   leave-one-out variants and grid evaluation.
//! - [`bandwidth`]: least-squares cross-validation (`CV`) and its
//!   modified form for the bias-reduced estimator (`MCV`), with a
//!   grid-plus-golden-section minimizer.
//! - [`divergence`]: a truncated continuous Kullback-Leibler divergence
//!   estimator and its cell-binned discrete counterpart.
//! - [`models`]: Poisson and Geometric candidate models, closed-form
//!   MLEs, and binned probability construction.
//! - [`hypothesis`]: goodness-of-fit and model-selection statistics with
//!   bootstrap scale estimation.
//! - [`simulate`]: seeded, reproducible Monte Carlo experiments over the
//!   Poisson/Geometric mixture, and the pointwise MSE rate experiment.
//!
//! ```
//! use kldsel::density::{bkde_at, Sample};
//!
//! let sample = Sample::new(vec![-0.4, 0.1, 0.3, 1.2])?;
//! let value = bkde_at(&sample, 0.5, 0.0)?;
//! assert!(value > 0.0);
//! # Ok::<(), kldsel::Error>(())
//! ```

pub mod bandwidth;
pub mod density;
pub mod divergence;
mod error;
pub mod hypothesis;
pub mod kernels;
pub mod models;
pub mod numeric;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};

// The guide's code snippets double as doc-tests so the book can never
// drift from the library. `cargo test --doc` runs every fenced Rust block
// of every chapter.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(density_estimation, "../../../book/src/density-estimation.md");
    chapter!(bandwidth_selection, "../../../book/src/bandwidth-selection.md");
    chapter!(divergence_estimation, "../../../book/src/divergence-estimation.md");
    chapter!(model_selection, "../../../book/src/model-selection.md");
    chapter!(simulation_experiments, "../../../book/src/simulation-experiments.md");
    chapter!(cli_reference, "../../../book/src/cli-reference.md");
}
