//! Compiler from a textual keyboard/keypad layout to two printable meshes
//! (PLA and conductive PLA) and an engineering report.

pub mod controller;
pub mod electrical;
pub mod geom;
pub mod mechanics;
pub mod mesh;
pub mod parts;
pub mod placement;
pub mod routing;
pub mod spec;
pub mod pipeline;
pub mod report;
pub mod svg;
