//! Evaluation toolkit for joint object detection and viewpoint estimation.
//!
//! - [`geometry`]: canonical angles, the unit-circle encoding, view bins
//!   and rotations.
//! - [`losses`]: discrete and continuous viewpoint losses with analytic
//!   gradients, plus the detection losses they are combined with.
//! - [`metrics`]: detection matching and the AP, AVP, AOS and 3D AVP
//!   metrics.
//! - [`confusion`]: categorization of viewpoint errors.
//! - [`simulate`]: synthetic scenarios with controllable error models.
//! - [`io`] and [`cli`]: file formats and the `posebench` command.

pub mod cli;
pub mod confusion;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod simulate;
