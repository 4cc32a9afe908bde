//! Desk-scale workbench for parabolic progressions `{x, x + (z, z^2)}`.
//!
//! Two halves:
//!
//! * finite fields: [`ffield`] arithmetic, additive characters and Fourier
//!   analysis on `F_q^2` in [`spectral`], exact progression counts and their
//!   Fourier-side bounds in [`progressions`], and extremal avoiding sets in
//!   [`avoiders`];
//! * the plane: parabolic dyadic geometry, Hausdorff content, Frostman
//!   measures and Riesz energies in [`pgeom`], and the spectral-gap measure
//!   pipeline with its convolution functional in [`gapfinder`].
//!
//! [`suite`] runs the acceptance battery shared by the `acceptance` test
//! target and the `suite` CLI subcommand.

pub mod avoiders;
pub mod bits;
pub mod ffield;
pub mod gapfinder;
pub mod oracle;
pub mod par;
pub mod pgeom;
pub mod progressions;
pub mod quad;
pub mod spectral;
pub mod suite;

pub use ffield::{make_field, FieldCtx, FieldElement, FieldError};
pub use par::Execution;
