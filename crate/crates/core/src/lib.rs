//! Conforming virtual elements of arbitrary order with SUPG stabilization for
//! steady advection-diffusion on polygonal meshes of the unit square.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64` aliases below
//! are the double-precision instantiations used by the command-line driver.

pub mod basis;
pub mod dofs;
pub mod element;
pub mod forms;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod norms;
pub mod projectors;
pub mod quadrature;
pub mod real;
pub mod sparse;
pub mod system;

pub use dofs::{DofMap, LocalDofLayout};
pub use forms::{ConvectionForm, ElementForms, ProblemSpec, StabKind};
pub use harness::{ManufacturedCase, MeshFamily, StudyConfig, StudyResult};
pub use mesh::{MeshError, PolyMesh};
pub use projectors::ElementProjectors;
pub use real::{Point, Real};
pub use system::{Discretization, LinearSystem, SystemError};

pub type PolyMesh64 = PolyMesh<f64>;
pub type PolyMesh32 = PolyMesh<f32>;
pub type ProblemSpec64 = ProblemSpec<f64>;
pub type ManufacturedCase64 = ManufacturedCase<f64>;
pub type Discretization64<'m> = Discretization<'m, f64>;
pub type LinearSystem64 = LinearSystem<f64>;
