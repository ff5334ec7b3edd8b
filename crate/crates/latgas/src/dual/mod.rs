//! Dual (Fourier-coefficient) representation of the generator.

pub mod checks;
pub mod collision;
pub mod ops;
pub mod resolvent;
pub mod setfn;
pub mod sets;

pub use checks::{structural_suite, IdentityCheck};
pub use collision::{single_site_collision_spectrum, CollisionSpectrum, QuadrupleDiagnostics};
pub use ops::{DualOp, Space, Stencil};
pub use resolvent::{truncated_resolvent, Collision, Hierarchy, ResolventOptions, ResolventResult, Strategy};
pub use setfn::{inverse_transform, transform, Flavor, SetFunction, SymmetricTupleFunction};
pub use sets::{canonical, Geometry, Pts};
