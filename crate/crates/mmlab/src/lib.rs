//! Numerical checks for q-series, genus-two sewing and minimal-model ODE
//! systems on hyperelliptic curves.

pub mod series;
pub mod qspecial;
pub(crate) mod hp;
pub mod sewing;
pub mod curve;
pub mod contour;
pub mod odesys;
pub mod report;
