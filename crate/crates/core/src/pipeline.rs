//! Standard problem setups and the enumerate → tables → solve → certify
//! chain, shared by the command-line tool and the acceptance suite.

use std::path::Path;
use std::time::Duration;

use num_rational::BigRational;

use crate::certify::{certified_bound, perturb_to_psd, BoundCertificate, SymMatrix};
use crate::flags::{density_table, enumerate_flags, DensityTable, SigmaFlag, TypeSigma};
use crate::sdp::{build_program, run_solver, SolverCommand, SolverSolution};
pub use crate::sdp::check_family_binding;
use crate::subgraphs::{enumerate_free, forbidden_cycles, HFamily};
use crate::{Error, Result};

/// The two hypercube problem families the tool reproduces.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CycleKind {
    C4,
    C6,
}

impl CycleKind {
    pub fn length(self) -> usize {
        match self {
            CycleKind::C4 => 4,
            CycleKind::C6 => 6,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CycleKind::C4 => "cube-c4",
            CycleKind::C6 => "cube-c6",
        }
    }
}

/// Everything the SDP stage needs: the family, the chosen types with their
/// flag lists, and the exact tables.
pub struct CubeSetup {
    pub kind: CycleKind,
    pub s: usize,
    pub family: HFamily,
    pub types_with_flags: Vec<(TypeSigma, Vec<SigmaFlag>)>,
    pub tables: Vec<DensityTable>,
}

/// Enumerates the family for `Q_s` and picks the type/flag selection the
/// bounds use: the single-vertex type with 2-vertex flags for `s = 2`, both
/// distance-one pair types with 4-vertex flags for `s = 3`.
pub fn cube_setup(kind: CycleKind, s: usize) -> Result<CubeSetup> {
    let pattern = forbidden_cycles(s, kind.length())?;
    let family = enumerate_free(s, &pattern)?;
    let types_with_flags = cube_types_and_flags(kind, s)?;
    let tables = density_table(&types_with_flags, &family)?;
    Ok(CubeSetup {
        kind,
        s,
        family,
        types_with_flags,
        tables,
    })
}

pub fn cube_types_and_flags(
    kind: CycleKind,
    s: usize,
) -> Result<Vec<(TypeSigma, Vec<SigmaFlag>)>> {
    match s {
        2 => {
            let point = TypeSigma::single_vertex();
            let flag_pattern = forbidden_cycles(2, kind.length())?;
            let flags = enumerate_flags(&point, 1, 2, &flag_pattern)?;
            Ok(vec![(point, flags)])
        }
        3 => {
            let flag_pattern = forbidden_cycles(2, kind.length())?;
            let mut out = Vec::new();
            for edge in [false, true] {
                let sigma = TypeSigma::adjacent_pair(edge);
                let flags = enumerate_flags(&sigma, 2, 4, &flag_pattern)?;
                out.push((sigma, flags));
            }
            Ok(out)
        }
        other => Err(Error::BadInput(format!(
            "no standard type selection for s={other}; supported: 2, 3"
        ))),
    }
}

/// Floating solve plus exact certification. The solver output is untrusted;
/// each PSD block is rationalized, perturbed back to exact PSD, and the
/// bound is evaluated in exact arithmetic.
pub fn solve_and_certify(
    setup_tables: &[DensityTable],
    solver: &SolverCommand,
    workdir: &Path,
    max_denominator: u64,
    timeout: Duration,
) -> Result<(SolverSolution, BoundCertificate<BigRational>)> {
    let problem = build_program(setup_tables)?;
    let solution = run_solver(&problem, solver, workdir, timeout)?;
    let cert = certify_solution(&solution, setup_tables, max_denominator)?;
    Ok((solution, cert))
}

/// The certification half alone, for re-running on a saved solution.
pub fn certify_solution(
    solution: &SolverSolution,
    tables: &[DensityTable],
    max_denominator: u64,
) -> Result<BoundCertificate<BigRational>> {
    let matrices: Vec<SymMatrix<BigRational>> = solution
        .psd_blocks
        .iter()
        .map(|block| perturb_to_psd(block, max_denominator))
        .collect::<Result<_>>()?;
    certified_bound(&matrices, tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;
    use crate::sdp::resolve_solver;
    use num_traits::ToPrimitive;

    #[test]
    fn example_solve_reproduces_two_thirds() {
        let setup = cube_setup(CycleKind::C4, 2).unwrap();
        let solver = resolve_solver(None).expect("a solver must be available");
        let dir = std::env::temp_dir().join("cubeflag-test-s2");
        let (solution, cert) = solve_and_certify(
            &setup.tables,
            &solver,
            &dir,
            1_000_000,
            Duration::from_secs(120),
        )
        .unwrap();
        assert!(
            (solution.v - 2.0 / 3.0).abs() < 1e-6,
            "solver bound {} is not near 2/3",
            solution.v
        );
        assert!(solution.residual_inf < 1e-6);
        // The certified exact bound can exceed 2/3 only by rounding slack.
        let b = cert.bound.to_f64().unwrap();
        assert!(b >= 2.0 / 3.0 - 1e-12 && b <= 2.0 / 3.0 + 1e-4, "bound {b}");
        assert!(cert.bound >= rat(2, 3));
        cert.verify_against_tables(&setup.tables).unwrap();
    }
}
