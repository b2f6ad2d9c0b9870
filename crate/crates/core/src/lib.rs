//! Numerical laboratory for transfer operators of Anosov maps on the 2-torus.

pub mod bump;
pub mod error;
pub mod fit;
pub mod geom;
pub mod io;
pub mod leaves;
pub mod maps;
pub mod norms;
pub mod observable;
pub mod perturb;
pub mod quad;
pub mod smooth;
pub mod stats;
pub mod transfer;
pub mod trig;

pub use error::{Error, Result};
pub use maps::{ChartAtlas, HyperbolicityReport, TorusMap};
pub use trig::{RealTrig, TrigField, TrigObservable, TrigTerm};
