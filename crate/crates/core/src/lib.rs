//! Semantic-decomposed implicit surface machinery.
//!
//! A joint implicit field returns signed distance, density, color and a
//! probability distribution over semantic labels at every point. From that
//! field this crate carves per-semantic surfaces (semantic-equivalent SDFs),
//! evaluates them sparsely on a coarse-to-fine active domain, extracts layered
//! triangle meshes, renders holistic and semantic-masked images, and provides
//! the regularizers and geometric metrics used to assess layered characters.
//!
//! The crate is `no_std` + `alloc`. Enable the `parallel` feature to spread
//! grid sampling, extraction, rendering and metric queries over a rayon pool;
//! every result is independent of the thread count.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod error;
pub mod extract;
pub mod field;
pub mod grid;
pub mod losses;
pub mod math;
pub mod mesh;
pub mod metrics;
mod par;
pub mod proposal;
pub mod render;
pub mod semantics;
pub mod spatial;

pub use error::{Error, Result};
pub use field::{
    Field, FieldSample, GridField, ImplicitScene, LabelRegistry, Primitive, SemanticLabel, Shape,
};
pub use grid::{GridSpec, ScalarGrid};
pub use math::Vec3;
pub use mesh::{LayeredCharacter, Mesh};
pub use semantics::SemanticSet;
