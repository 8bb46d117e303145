//! Exact computational workbench for the Block type Lie conformal algebra
//! `[L_α λ L_β] = (α∂ + (α+β)λ) L_{α+β}` and its free intermediate series
//! modules.

pub mod classify;
pub mod conformal;
pub mod formal;
pub mod ratpoly;
pub mod repmod;
pub mod tableio;
