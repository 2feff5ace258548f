//! Indoor layout synthesis from learned spatial relations.
//!
//! The offline stage turns a corpus of furnished rooms into a
//! [`priors::PriorStore`]: a spatial-strength graph of category pairs
//! ([`csr`]), denoised relative-pose templates and wall priors
//! ([`priors`]). The online stage ([`synthesis`]) groups the requested
//! objects, samples an initial arrangement from the templates and refines
//! it with constraint projection.

pub mod corpus;
pub mod csr;
pub mod geometry;
pub mod priors;
pub mod synthesis;
