//! Flag-algebra bound certification for Turán-type problems on the hypercube.
//!
//! The library enumerates F-free spanning subgraphs of small hypercubes up to
//! cube automorphism, computes exact flag pair-density tables, assembles a
//! semidefinite program for an external SDPA-format solver, and turns the
//! floating solution into a rigorous rational (or ℚ(√2)) bound certificate.
//! A poset variant works on the middle three layers of the Boolean lattice.
//!
//! The floating SDP solve is untrusted input; everything that claims rigor
//! (PSD checks, per-graph values, the final bound) is exact arithmetic.

pub mod cube;
pub mod certify;
pub mod flags;
pub mod midlayers;
pub mod pipeline;
pub mod scalar;
pub mod sdp;
pub mod subgraphs;

pub use cube::{
    automorphisms, canonical_form, coordinate_spread, hamming, spanned_subcube, CanonicalKey,
    CubeAutomorphism, CubeGraph, FeasibleMap, VertexMask, MAX_DIM,
};
pub use certify::{
    certified_bound, perturb_to_psd, psd_check_exact, rationalize, read_certificate,
    write_certificate, BoundCertificate, LdlTranscript, PsdVerdict, SymMatrix,
};
pub use flags::{
    density_table, enumerate_flags, pair_density, type_maps, DensityTable, FlagShape, SigmaFlag,
    TypeSigma,
};
pub use midlayers::{
    enumerate_q2free, mid_density, mid_density_table, mid_poset, MidFamily, MidFlagFamily,
    MidGroup, MidPoset, MidShape,
};
pub use pipeline::{cube_setup, solve_and_certify, CubeSetup, CycleKind};
pub use scalar::{CertScalar, QuadRat, Rational};
pub use sdp::{
    build_program, emit_sdpa, parse_solution, resolve_solver, run_solver, SdpProblem,
    SolverCommand, SolverSolution,
};
pub use subgraphs::{
    edge_density, enumerate_free, forbidden_cycles, subgraph_density, ForbiddenPattern, HFamily,
};

/// Errors surfaced by library operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension {0} out of range (cap {MAX_DIM})")]
    DimensionCap(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error("empty vertex set")]
    EmptyVertexSet,
    #[error("inconsistent pins: {0}")]
    InconsistentPins(String),
    #[error("unsupported forbidden cycle length {0}")]
    UnsupportedCycle(usize),
    #[error("flag condition s >= 2k - r violated: s={s}, k={k}, r={r}")]
    FlagDimension { s: usize, k: usize, r: usize },
    #[error("invalid flag parameters: {0}")]
    InvalidFlag(String),
    #[error("table/family mismatch: {0}")]
    TableMismatch(String),
    #[error("matrix is not positive semidefinite (witness {0})")]
    NotPsd(String),
    #[error("perturbation budget exhausted (delta cap reached)")]
    PerturbBudget,
    #[error("non-finite float input")]
    NonFinite,
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("verification failure: {0}")]
    Verification(String),
    #[error("unsupported midlayer ground size {0}")]
    UnsupportedGround(usize),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
