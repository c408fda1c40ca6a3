//! Assembly of the semidefinite program, SDPA sparse serialization, the
//! external solver subprocess, and solution parsing.
//!
//! The program minimizes the bound variable `v` subject to
//! `v >= d(H) + sum_i <A_H^i, M_i>` over every H, with one PSD block per
//! type, encoded on the trace-constraint side of the SDPA file: block 1 is
//! the 1x1 bound variable, then one block per type, then a diagonal slack
//! block turning the inequalities into equalities. `v >= 0` holds at any
//! feasible point because every `d(H)` is nonnegative and the empty graph's
//! coefficient is a nonnegative diagonal form.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::flags::DensityTable;
use crate::subgraphs::HFamily;
use crate::{Error, Result};

/// One sparse coefficient `matno blkno i j value` (1-based block/indices,
/// `matno` 0 is the objective, `i <= j`).
#[derive(Clone, Debug, PartialEq)]
pub struct SdpEntry {
    pub matno: usize,
    pub blkno: usize,
    pub i: usize,
    pub j: usize,
    pub value: BigRational,
}

/// Block-structured SDP: one PSD block per type, a diagonal slack block,
/// and a scalar block for the bound variable.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    /// SDPA block sizes; negative marks the diagonal block.
    block_sizes: Vec<i64>,
    /// Per-type PSD block dimensions, in block order 2..=1+t.
    psd_dims: Vec<usize>,
    rhs: Vec<BigRational>,
    entries: Vec<SdpEntry>,
}

impl SdpProblem {
    pub fn constraint_count(&self) -> usize {
        self.rhs.len()
    }

    pub fn block_sizes(&self) -> &[i64] {
        &self.block_sizes
    }

    pub fn psd_dims(&self) -> &[usize] {
        &self.psd_dims
    }

    pub fn rhs(&self) -> &[BigRational] {
        &self.rhs
    }

    pub fn entries(&self) -> &[SdpEntry] {
        &self.entries
    }
}

/// Cross-checks that the tables were computed for exactly this family.
pub fn check_family_binding(tables: &[DensityTable], family: &HFamily) -> Result<()> {
    let family_digest = crate::flags::family_digest(family);
    for t in tables {
        if t.column_count() != family.len() {
            return Err(Error::TableMismatch(format!(
                "table has {} columns, family has {} members",
                t.column_count(),
                family.len()
            )));
        }
        if t.family_digest() != family_digest {
            return Err(Error::TableMismatch(
                "table was computed for a different family".into(),
            ));
        }
    }
    Ok(())
}

/// Builds the program from the exact tables, which must agree on the
/// family (column count and digest).
pub fn build_program(tables: &[DensityTable]) -> Result<SdpProblem> {
    if tables.is_empty() {
        return Err(Error::TableMismatch("no tables".into()));
    }
    let m = tables[0].column_count();
    if m == 0 {
        return Err(Error::TableMismatch("empty family".into()));
    }
    for t in tables {
        if t.column_count() != m {
            return Err(Error::TableMismatch(
                "tables disagree on the column count".into(),
            ));
        }
        if t.family_digest() != tables[0].family_digest() {
            return Err(Error::TableMismatch(
                "tables were computed for different families".into(),
            ));
        }
    }
    let n_types = tables.len();
    let slack_block = n_types + 2;
    let mut block_sizes: Vec<i64> = Vec::with_capacity(n_types + 2);
    block_sizes.push(1);
    for t in tables {
        block_sizes.push(t.flag_count() as i64);
    }
    block_sizes.push(-(m as i64));

    let mut entries = Vec::new();
    // Objective: maximize -v, i.e. minimize the bound.
    entries.push(SdpEntry {
        matno: 0,
        blkno: 1,
        i: 1,
        j: 1,
        value: -BigRational::from_integer(BigInt::from(1)),
    });
    for h in 0..m {
        let matno = h + 1;
        entries.push(SdpEntry {
            matno,
            blkno: 1,
            i: 1,
            j: 1,
            value: BigRational::from_integer(BigInt::from(1)),
        });
        for (t_idx, t) in tables.iter().enumerate() {
            for row in t.rows() {
                let v = row.value(h);
                if v.is_zero() {
                    continue;
                }
                entries.push(SdpEntry {
                    matno,
                    blkno: t_idx + 2,
                    i: row.i + 1,
                    j: row.j + 1,
                    value: -v,
                });
            }
        }
        entries.push(SdpEntry {
            matno,
            blkno: slack_block,
            i: h + 1,
            j: h + 1,
            value: -BigRational::from_integer(BigInt::from(1)),
        });
    }
    Ok(SdpProblem {
        block_sizes,
        psd_dims: tables.iter().map(|t| t.flag_count()).collect(),
        rhs: tables[0].densities().to_vec(),
        entries,
    })
}

/// Exact decimal rendering: terminating expansions are printed exactly,
/// anything else is correctly rounded to 17 significant digits.
pub fn decimal17(r: &BigRational) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.is_negative();
    let a = r.abs();
    let ten = BigInt::from(10);
    // Exponent e with |r| in [10^e, 10^(e+1)).
    let mut e: i32 = 0;
    let mut probe = a.clone();
    let one = BigRational::from_integer(BigInt::from(1));
    while probe < one {
        probe = probe * BigRational::from_integer(ten.clone());
        e -= 1;
    }
    while probe >= BigRational::from_integer(ten.clone()) {
        probe = probe / BigRational::from_integer(ten.clone());
        e += 1;
    }
    // Scale so the integer part carries 17 significant digits.
    let shift = 16 - e;
    let scaled = if shift >= 0 {
        a.clone() * BigRational::from_integer(ten.pow(shift as u32))
    } else {
        a.clone() / BigRational::from_integer(ten.pow((-shift) as u32))
    };
    let mut int_part = scaled.numer() / scaled.denom();
    let rem = scaled.numer() - &int_part * scaled.denom();
    if !rem.is_zero() {
        // Round half to even on the 17th digit.
        let twice = &rem * BigInt::from(2);
        let cmp = twice.cmp(scaled.denom());
        let round_up = match cmp {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => (&int_part % 2u8) == BigInt::from(1),
        };
        if round_up {
            int_part += 1;
        }
    }
    let mut digits = int_part.to_string();
    // Rounding may carry into an 18th digit.
    let e = e + (digits.len() as i32 - 17);
    let point = e + 1; // digits before the decimal point
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if point <= 0 {
        out.push_str("0.");
        for _zero in 0..-point {
            out.push('0');
        }
        out.push_str(digits.trim_end_matches('0'));
    } else if (point as usize) >= digits.len() {
        while (digits.len() as i32) < point {
            digits.push('0');
        }
        out.push_str(&digits);
    } else {
        let (head, tail) = digits.split_at(point as usize);
        out.push_str(head);
        let tail = tail.trim_end_matches('0');
        if !tail.is_empty() {
            out.push('.');
            out.push_str(tail);
        }
    }
    out
}

/// SDPA sparse `.dat-s` text; deterministic, byte-identical for identical
/// problems.
pub fn emit_sdpa(problem: &SdpProblem) -> String {
    let mut out = String::new();
    out.push_str("\"Hypercube flag-algebra bound program.\n");
    out.push_str(
        "\"Block 1 is the bound variable v; v >= 0 at any feasible point since\n",
    );
    out.push_str(
        "\"all right-hand sides d(H) are nonnegative. Last block: slacks.\n",
    );
    out.push_str(&format!("{}\n", problem.constraint_count()));
    out.push_str(&format!("{}\n", problem.block_sizes.len()));
    let sizes: Vec<String> = problem.block_sizes.iter().map(|s| s.to_string()).collect();
    out.push_str(&sizes.join(" "));
    out.push('\n');
    let rhs: Vec<String> = problem.rhs.iter().map(decimal17).collect();
    out.push_str(&rhs.join(" "));
    out.push('\n');
    for e in &problem.entries {
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            e.matno,
            e.blkno,
            e.i,
            e.j,
            decimal17(&e.value)
        ));
    }
    out
}

/// Floating solution blocks keyed to the problem's structure.
#[derive(Clone, Debug)]
pub struct SolverSolution {
    /// Value of the bound variable block.
    pub v: f64,
    /// Dense symmetric PSD blocks, one per type.
    pub psd_blocks: Vec<Vec<Vec<f64>>>,
    /// Slack diagonal.
    pub slacks: Vec<f64>,
    /// Dual vector (first solution line).
    pub dual: Vec<f64>,
    pub status: String,
    /// Infinity norm of the equality-constraint violation.
    pub residual_inf: f64,
}

/// Parses a CSDP-style solution file: the dual vector on the first line,
/// then `matno blkno i j value` lines where matno 2 carries the primal
/// matrix blocks the certificate stage consumes.
pub fn parse_solution(problem: &SdpProblem, text: &str) -> Result<SolverSolution> {
    let mut lines = text.lines().enumerate();
    let (_n0, first) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty solution file".into()))?;
    let dual: Vec<f64> = first
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("line 1: bad dual vector: {e}")))?;
    if dual.len() != problem.constraint_count() {
        return Err(Error::Parse(format!(
            "line 1: dual vector has {} entries, expected {}",
            dual.len(),
            problem.constraint_count()
        )));
    }
    let n_types = problem.psd_dims.len();
    let slack_block = n_types + 2;
    let slack_size = problem.constraint_count();
    let mut v = None;
    let mut psd_blocks: Vec<Vec<Vec<f64>>> = problem
        .psd_dims
        .iter()
        .map(|&d| vec![vec![0.0; d]; d])
        .collect();
    let mut touched = vec![false; n_types + 2];
    let mut slacks = vec![0.0; slack_size];
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(Error::Parse(format!(
                "line {}: expected 5 fields, got {}",
                idx + 1,
                toks.len()
            )));
        }
        let matno: usize = toks[0]
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
        let blkno: usize = toks[1]
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
        let i: usize = toks[2]
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
        let j: usize = toks[3]
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
        let value: f64 = toks[4]
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
        if matno != 2 {
            continue; // matno 1 is the solver's dual slack matrix
        }
        if blkno == 0 || blkno > n_types + 2 {
            return Err(Error::Parse(format!(
                "line {}: block {blkno} out of range",
                idx + 1
            )));
        }
        touched[blkno - 1] = true;
        if blkno == 1 {
            if i != 1 || j != 1 {
                return Err(Error::Parse(format!(
                    "line {}: bound block is 1x1",
                    idx + 1
                )));
            }
            v = Some(value);
        } else if blkno == slack_block {
            if i != j || i == 0 || i > slack_size {
                return Err(Error::Parse(format!(
                    "line {}: bad slack index {i},{j}",
                    idx + 1
                )));
            }
            slacks[i - 1] = value;
        } else {
            let d = problem.psd_dims[blkno - 2];
            if i == 0 || j == 0 || i > d || j > d {
                return Err(Error::Parse(format!(
                    "line {}: index ({i},{j}) outside block of size {d}",
                    idx + 1
                )));
            }
            psd_blocks[blkno - 2][i - 1][j - 1] = value;
            psd_blocks[blkno - 2][j - 1][i - 1] = value;
        }
    }
    let v = v.ok_or_else(|| Error::Parse("missing block 1 (bound variable)".into()))?;
    for (b, t) in touched.iter().enumerate() {
        if !t {
            return Err(Error::Parse(format!(
                "missing block {} in solution",
                b + 1
            )));
        }
    }
    let residual_inf = constraint_residual(problem, v, &psd_blocks, &slacks);
    Ok(SolverSolution {
        v,
        psd_blocks,
        slacks,
        dual,
        status: String::new(),
        residual_inf,
    })
}

fn constraint_residual(
    problem: &SdpProblem,
    v: f64,
    psd_blocks: &[Vec<Vec<f64>>],
    slacks: &[f64],
) -> f64 {
    let m = problem.constraint_count();
    let n_types = problem.psd_dims.len();
    let slack_block = n_types + 2;
    let mut lhs = vec![0.0; m];
    for e in &problem.entries {
        if e.matno == 0 {
            continue;
        }
        let coeff = e.value.to_f64().unwrap_or(f64::NAN);
        let h = e.matno - 1;
        if e.blkno == 1 {
            lhs[h] += coeff * v;
        } else if e.blkno == slack_block {
            lhs[h] += coeff * slacks[e.i - 1];
        } else {
            let x = psd_blocks[e.blkno - 2][e.i - 1][e.j - 1];
            let w = if e.i == e.j { 1.0 } else { 2.0 };
            lhs[h] += w * coeff * x;
        }
    }
    let mut worst: f64 = 0.0;
    for h in 0..m {
        let rhs = problem.rhs[h].to_f64().unwrap_or(f64::NAN);
        worst = worst.max((lhs[h] - rhs).abs());
    }
    worst
}

/// How to launch the external solver for a problem file and solution path.
#[derive(Clone, Debug)]
pub struct SolverCommand {
    program: PathBuf,
}

impl SolverCommand {
    pub fn new(program: PathBuf) -> Self {
        SolverCommand { program }
    }

    pub fn program(&self) -> &Path {
        &self.program
    }

    fn command(&self, input: &Path, output: &Path) -> Command {
        // Python scripts run through the interpreter so no executable bit
        // is needed; anything else is treated as a CSDP-compatible binary.
        if self.program.extension().is_some_and(|e| e == "py") {
            let mut c = Command::new("python3");
            c.arg(&self.program).arg(input).arg(output);
            c
        } else {
            let mut c = Command::new(&self.program);
            c.arg(input).arg(output);
            c
        }
    }
}

/// Resolution order: explicit path, then `CUBEFLAG_SOLVER`, then `csdp` on
/// PATH, then the bundled cvxopt-backed script.
pub fn resolve_solver(explicit: Option<&Path>) -> Result<SolverCommand> {
    if let Some(p) = explicit {
        if !p.exists() {
            return Err(Error::Solver(format!("solver not found: {}", p.display())));
        }
        return Ok(SolverCommand::new(p.to_path_buf()));
    }
    if let Ok(env) = std::env::var("CUBEFLAG_SOLVER") {
        let p = PathBuf::from(env);
        if !p.exists() {
            return Err(Error::Solver(format!(
                "CUBEFLAG_SOLVER points at a missing file: {}",
                p.display()
            )));
        }
        return Ok(SolverCommand::new(p));
    }
    if let Some(path_var) = std::env::var_os("PATH") {
        for dir in std::env::split_paths(&path_var) {
            let candidate = dir.join("csdp");
            if candidate.is_file() {
                return Ok(SolverCommand::new(candidate));
            }
        }
    }
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../tools/sdpa-solver.py");
    if bundled.exists() {
        return Ok(SolverCommand::new(bundled));
    }
    Err(Error::Solver(
        "solver not found: pass --solver, set CUBEFLAG_SOLVER, or install csdp".into(),
    ))
}

/// Writes the problem, launches the solver subprocess on it, and parses the
/// solution file. Stdout/stderr are streamed to `solver.log` next to the
/// problem file.
pub fn run_solver(
    problem: &SdpProblem,
    solver: &SolverCommand,
    workdir: &Path,
    timeout: Duration,
) -> Result<SolverSolution> {
    std::fs::create_dir_all(workdir)?;
    let input = workdir.join("problem.dat-s");
    let output = workdir.join("solution.sol");
    let log_path = workdir.join("solver.log");
    std::fs::write(&input, emit_sdpa(problem))?;
    if output.exists() {
        std::fs::remove_file(&output)?;
    }
    let log = std::fs::File::create(&log_path)?;
    let log_err = log.try_clone()?;
    let mut child = solver
        .command(&input, &output)
        .stdout(Stdio::from(log))
        .stderr(Stdio::from(log_err))
        .spawn()
        .map_err(|e| {
            Error::Solver(format!(
                "solver not found or failed to start ({}): {e}",
                solver.program().display()
            ))
        })?;
    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() > timeout {
            child.kill().ok();
            child.wait().ok();
            return Err(Error::Solver(format!(
                "solver timed out after {:?} (log: {})",
                timeout,
                log_path.display()
            )));
        }
        std::thread::sleep(Duration::from_millis(50));
    };
    let log_tail = std::fs::read_to_string(&log_path)
        .unwrap_or_default()
        .lines()
        .rev()
        .take(6)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect::<Vec<_>>()
        .join("\n");
    if !status.success() {
        return Err(Error::Solver(format!(
            "solver exited with {status}: {log_tail}"
        )));
    }
    let text = std::fs::read_to_string(&output).map_err(|e| {
        Error::Solver(format!(
            "solver wrote no solution file {}: {e}",
            output.display()
        ))
    })?;
    let mut solution = parse_solution(problem, &text)?;
    solution.status = format!("exit {status}; {log_tail}");
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flags::{density_table, enumerate_flags, TypeSigma};
    use crate::scalar::rat;
    use crate::subgraphs::{enumerate_free, forbidden_cycles};

    fn example_problem() -> (SdpProblem, Vec<DensityTable>) {
        let pattern = forbidden_cycles(2, 4).unwrap();
        let family = enumerate_free(2, &pattern).unwrap();
        let point = TypeSigma::single_vertex();
        let flags = enumerate_flags(&point, 1, 2, &pattern).unwrap();
        let tables = density_table(&[(point, flags)], &family).unwrap();
        let problem = build_program(&tables).unwrap();
        (problem, tables)
    }

    #[test]
    fn example_program_structure() {
        let (problem, _tables) = example_problem();
        assert_eq!(problem.constraint_count(), 5);
        assert_eq!(problem.block_sizes(), &[1, 2, -5]);
        let text = emit_sdpa(&problem);
        let mut lines = text.lines().skip_while(|l| l.starts_with('"'));
        assert_eq!(lines.next(), Some("5"));
        assert_eq!(lines.next(), Some("3"));
        assert_eq!(lines.next(), Some("1 2 -5"));
    }

    #[test]
    fn emission_is_deterministic() {
        let (p1, _t1) = example_problem();
        let (p2, _t2) = example_problem();
        assert_eq!(emit_sdpa(&p1), emit_sdpa(&p2));
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(decimal17(&rat(1, 4)), "0.25");
        assert_eq!(decimal17(&rat(0, 1)), "0");
        assert_eq!(decimal17(&rat(-3, 2)), "-1.5");
        assert_eq!(decimal17(&rat(1, 3)), "0.33333333333333333");
        assert_eq!(decimal17(&rat(2, 3)), "0.66666666666666667");
        assert_eq!(decimal17(&rat(5, 1)), "5");
        assert_eq!(decimal17(&rat(1, 1024)), "0.0009765625");
        assert_eq!(decimal17(&rat(100, 1)), "100");
    }

    #[test]
    fn solution_round_trip() {
        let (problem, _tables) = example_problem();
        // A hand-made solution: v = 3/4, M = I/4, slacks arbitrary.
        let text = "\
0.1 0.1 0.2 0.3 0.3
2 1 1 1 0.75
2 2 1 1 0.25
2 2 2 2 0.25
2 3 1 1 0.01
2 3 2 2 0.01
2 3 3 3 0.01
2 3 4 4 0.01
2 3 5 5 0.01
";
        let sol = parse_solution(&problem, text).unwrap();
        assert_eq!(sol.v, 0.75);
        assert_eq!(sol.psd_blocks[0][0][0], 0.25);
        assert_eq!(sol.psd_blocks[0][0][1], 0.0);

        // Truncated: missing the slack block entirely.
        let truncated = "\
0.1 0.1 0.2 0.3 0.3
2 1 1 1 0.75
2 2 1 1 0.25
";
        let err = parse_solution(&problem, truncated).unwrap_err();
        assert!(err.to_string().contains("block 3"), "{err}");

        let garbled = "0.1 0.1 0.2 0.3 0.3\n2 1 1 one 0.75\n";
        let err = parse_solution(&problem, garbled).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn missing_solver_is_reported() {
        let err = resolve_solver(Some(Path::new("/nonexistent/solver"))).unwrap_err();
        assert!(err.to_string().contains("solver not found"));
    }
}
