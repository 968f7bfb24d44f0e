//! Available-cases estimation for data with missing values.
//!
//! Available cases (pairwise deletion) computes each pairwise statistic from
//! every row where that pair of variables is observed, rather than first
//! discarding every row with any missing value (complete cases). This crate
//! provides:
//!
//! - [`data`]: frames whose cells are either finite values or missing;
//! - [`moments`]: pairwise-complete counts, cross-moments and covariances;
//! - [`regression`]: AC and CC linear regression, with delta-method and
//!   bootstrap standard errors;
//! - [`pca`]: principal components from the AC covariance or correlation
//!   matrix, with an explicit negative-eigenvalue failure;
//! - [`loglinear`]: three-factor log-linear models fitted from AC margins;
//! - [`sim`]: MCAR/MAR masking and Monte-Carlo comparisons of CC and AC;
//! - [`io`]: CSV reading and writing, plus the bundled Pima and UCB data.
//!
//! ```
//! use availcases::data::NumericFrame;
//! use availcases::regression::{fit_ac, fit_cc};
//!
//! let x = NumericFrame::from_rows(&[
//!     vec![Some(1.0)], vec![Some(2.0)], vec![Some(3.0)], vec![Some(4.0)],
//! ]).unwrap();
//! let y = [Some(5.0), Some(7.0), Some(9.0), Some(11.0)];
//! let fit = fit_ac(&x, &y).unwrap();
//! assert!((fit.slopes[0] - 2.0).abs() < 1e-12);
//! assert!((fit.intercept - 3.0).abs() < 1e-12);
//! assert!((fit_cc(&x, &y).unwrap().slopes[0] - 2.0).abs() < 1e-12);
//! ```
//!
//! The guide in `book/` walks through each module; its code listings are
//! compiled and run as doctests of this crate.

pub mod data;
pub mod eigen;
pub mod error;
pub mod io;
pub mod linalg;
pub mod loglinear;
pub mod moments;
pub mod pca;
pub mod regression;
pub mod rng;
pub mod sim;

pub use error::{Error, ErrorKind, Result};

// The book's listings run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data-model.md")]
    mod data_model {}
    #[doc = include_str!("../../../book/src/pairwise-moments.md")]
    mod pairwise_moments {}
    #[doc = include_str!("../../../book/src/regression.md")]
    mod regression {}
    #[doc = include_str!("../../../book/src/pca.md")]
    mod pca {}
    #[doc = include_str!("../../../book/src/loglinear.md")]
    mod loglinear {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
