//! Proof nets for Intuitionistic Light Affine Logic.

pub mod cutelim;
pub mod formula;
pub mod lal;
pub mod measure;
pub mod net;
pub mod stdlib;
pub mod syntax;
pub mod term;
pub mod tm;
pub mod translate;
pub mod typecheck;
pub mod workloads;

pub use cutelim::{normalize_outermost, RedexKind};
pub use formula::Formula;
pub use lal::Program;
pub use measure::{normalize_sigma, RoundReport, SigmaOptions};
pub use net::Net;
pub use stdlib::PolySpec;
pub use term::{Pattern, Term};
pub use tm::{Machine, OracleConfig};
pub use typecheck::{check_term, synth_term, Derivation, TypeEnv};
