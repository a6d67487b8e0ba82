//! Head-and-neck PET/CT prognosis: NIfTI volumes, head-and-neck box
//! placement, conventional PET and radiomics features, ComBat
//! harmonisation, Cox/Lasso-Cox survival models and segmentation metrics.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Per-axis loops over several 3-arrays at once.
#![allow(clippy::needless_range_loop)]

pub mod combat;
pub mod components;
pub mod conventional;
pub mod error;
pub mod locator;
pub mod metrics;
pub mod pipeline;
pub mod radiomics;
pub mod survival;
pub mod synthetic;
pub mod volume;

pub use error::{Error, Result};
