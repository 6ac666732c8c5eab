//! Synthetic regression models, experiment meshes, CSV ingestion, and
//! train/test splitting.

pub mod biau;
pub mod io;
pub mod mesh;
pub mod split;
pub mod synthetic;

pub use biau::biau_cef;
pub use io::{load_csv, LoadedCsv};
pub use mesh::{build_mesh, Mesh, MeshSpec};
pub use split::train_test_split;
pub use synthetic::{cef_catalog, sample_model, SyntheticModel};
