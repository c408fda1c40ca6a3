//! The rigorous stage: rationalize a floating SDP solution, restore positive
//! semidefiniteness exactly, and evaluate `max_H (d(H) + c_H)` in exact
//! arithmetic. The floating solve is untrusted input; everything here is
//! exact rationals or ℚ(√2).

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::flags::DensityTable;
use crate::scalar::CertScalar;
use crate::{Error, Result};

/// Symmetric matrix over an exact scalar, stored as the upper triangle.
#[derive(Clone, PartialEq, Debug)]
pub struct SymMatrix<S> {
    n: usize,
    upper: Vec<S>,
}

impl<S: CertScalar> SymMatrix<S> {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            upper: vec![S::zero(); n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, S::one());
        }
        m
    }

    /// Builds from full rows, requiring exact symmetry.
    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::BadInput("matrix is not square".into()));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::BadInput(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, rows[i][j].clone());
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.upper[self.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        let idx = self.idx(i, j);
        self.upper[idx] = v;
    }

    pub fn add_scaled_identity(&self, delta: &S) -> SymMatrix<S> {
        let mut out = self.clone();
        for i in 0..self.n {
            out.set(i, i, out.get(i, i).clone() + delta.clone());
        }
        out
    }

    /// Quadratic form `x^T M x`, exact.
    pub fn quadratic_form(&self, x: &[S]) -> S {
        let mut acc = S::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                acc = acc + x[i].clone() * self.get(i, j).clone() * x[j].clone();
            }
        }
        acc
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = (0..self.n)
            .map(|i| Value::Array((0..self.n).map(|j| self.get(i, j).to_json()).collect()))
            .collect();
        Value::Array(rows)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let rows = v
            .as_array()
            .ok_or_else(|| Error::Parse("matrix must be an array of rows".into()))?;
        let parsed: Vec<Vec<S>> = rows
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| Error::Parse("matrix row must be an array".into()))?
                    .iter()
                    .map(S::from_json)
                    .collect()
            })
            .collect::<Result<_>>()?;
        Self::from_rows(&parsed)
    }
}

/// Exact LDL^T factorization with symmetric pivoting: the PSD witness.
#[derive(Clone, PartialEq, Debug)]
pub struct LdlTranscript<S> {
    /// `perm[k]` is the original index handled at elimination step `k`.
    pub perm: Vec<usize>,
    /// Pivot values; strictly positive for `k < rank`, zero afterwards.
    pub diag: Vec<S>,
    /// Unit-lower-triangular columns in permuted order: `lower[k][t]` is
    /// `L[k+1+t][k]`.
    pub lower: Vec<Vec<S>>,
    pub rank: usize,
}

impl<S: CertScalar> LdlTranscript<S> {
    /// Re-checks `P M P^T == L D L^T` and nonnegativity of the pivots.
    pub fn verify(&self, m: &SymMatrix<S>) -> bool {
        let n = m.n();
        if self.perm.len() != n || self.diag.len() != n {
            return false;
        }
        for (k, d) in self.diag.iter().enumerate() {
            match d.sign() {
                Ordering::Less => return false,
                Ordering::Equal if k < self.rank => return false,
                Ordering::Greater if k >= self.rank => return false,
                _ => {}
            }
        }
        let l_entry = |i: usize, k: usize| -> S {
            match i.cmp(&k) {
                Ordering::Equal => S::one(),
                Ordering::Greater => self.lower[k][i - k - 1].clone(),
                Ordering::Less => S::zero(),
            }
        };
        for i in 0..n {
            for j in i..n {
                let mut acc = S::zero();
                for k in 0..=i.min(j) {
                    acc = acc + l_entry(i, k) * self.diag[k].clone() * l_entry(j, k);
                }
                if acc != *m.get(self.perm[i], self.perm[j]) {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_json(&self) -> Value {
        json!({
            "perm": self.perm,
            "diag": self.diag.iter().map(|d| d.to_json()).collect::<Vec<_>>(),
            "lower": self
                .lower
                .iter()
                .map(|col| col.iter().map(|v| v.to_json()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "rank": self.rank,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let perm = v["perm"]
            .as_array()
            .ok_or_else(|| Error::Parse("transcript perm".into()))?
            .iter()
            .map(|x| x.as_u64().map(|u| u as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Parse("transcript perm".into()))?;
        let diag = v["diag"]
            .as_array()
            .ok_or_else(|| Error::Parse("transcript diag".into()))?
            .iter()
            .map(S::from_json)
            .collect::<Result<Vec<_>>>()?;
        let lower = v["lower"]
            .as_array()
            .ok_or_else(|| Error::Parse("transcript lower".into()))?
            .iter()
            .map(|col| {
                col.as_array()
                    .ok_or_else(|| Error::Parse("transcript lower".into()))?
                    .iter()
                    .map(S::from_json)
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let rank = v["rank"]
            .as_u64()
            .ok_or_else(|| Error::Parse("transcript rank".into()))? as usize;
        Ok(LdlTranscript {
            perm,
            diag,
            lower,
            rank,
        })
    }
}

/// Outcome of the exact PSD check.
#[derive(Clone, PartialEq, Debug)]
pub enum PsdVerdict<S> {
    Psd(LdlTranscript<S>),
    /// A rational vector with `w^T M w < 0` (value attached).
    NotPsd { witness: Vec<S>, value: S },
}

impl<S: CertScalar> PsdVerdict<S> {
    pub fn is_psd(&self) -> bool {
        matches!(self, PsdVerdict::Psd(_))
    }
}

/// LDL^T with symmetric pivoting in exact arithmetic. Pivots on the first
/// strictly positive diagonal entry; when none remains the matrix is PSD
/// exactly when the remaining block vanishes, otherwise an explicit witness
/// vector with negative quadratic form is produced.
pub fn psd_check_exact<S: CertScalar>(m: &SymMatrix<S>) -> PsdVerdict<S> {
    let n = m.n();
    // Dense working copy in original order; `order` maps working slot to
    // original index.
    let mut a: Vec<Vec<S>> = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j).clone()).collect())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut lower: Vec<Vec<S>> = Vec::with_capacity(n);
    let mut diag: Vec<S> = Vec::with_capacity(n);

    let mut k = 0usize;
    while k < n {
        // First strictly positive diagonal entry among the remainder.
        let pivot = (k..n).find(|&i| a[i][i].sign() == Ordering::Greater);
        match pivot {
            Some(p) => {
                if p != k {
                    a.swap(p, k);
                    for row in a.iter_mut() {
                        row.swap(p, k);
                    }
                    order.swap(p, k);
                }
                let d = a[k][k].clone();
                let col: Vec<S> = (k + 1..n).map(|i| a[i][k].clone() / d.clone()).collect();
                for i in k + 1..n {
                    for j in k + 1..=i {
                        let delta = col[i - k - 1].clone() * d.clone() * col[j - k - 1].clone();
                        a[i][j] = a[i][j].clone() - delta.clone();
                        if i != j {
                            a[j][i] = a[i][j].clone();
                        }
                    }
                }
                diag.push(d);
                lower.push(col);
                k += 1;
            }
            None => {
                // No positive pivot left: a negative diagonal entry or a
                // nonzero off-diagonal disproves PSD.
                if let Some(i) = (k..n).find(|&i| a[i][i].sign() == Ordering::Less) {
                    let mut y = vec![S::zero(); n];
                    y[i] = S::one();
                    return not_psd(m, &order, &lower, k, y);
                }
                for i in k..n {
                    for j in i + 1..n {
                        match a[i][j].sign() {
                            Ordering::Equal => {}
                            Ordering::Greater => {
                                let mut y = vec![S::zero(); n];
                                y[i] = S::one();
                                y[j] = -S::one();
                                return not_psd(m, &order, &lower, k, y);
                            }
                            Ordering::Less => {
                                let mut y = vec![S::zero(); n];
                                y[i] = S::one();
                                y[j] = S::one();
                                return not_psd(m, &order, &lower, k, y);
                            }
                        }
                    }
                }
                // Remaining block is zero: PSD of rank k.
                let rank = k;
                for _fill in k..n {
                    diag.push(S::zero());
                    lower.push(vec![S::zero(); n - lower.len() - 1]);
                }
                return PsdVerdict::Psd(LdlTranscript {
                    perm: order,
                    diag,
                    lower,
                    rank,
                });
            }
        }
    }
    PsdVerdict::Psd(LdlTranscript {
        perm: order,
        diag,
        lower,
        rank: n,
    })
}

/// Back-substitutes the Schur-space direction `y` through the recorded
/// columns so that `L^T x = y`, then un-permutes into original coordinates.
fn not_psd<S: CertScalar>(
    m: &SymMatrix<S>,
    order: &[usize],
    lower: &[Vec<S>],
    eliminated: usize,
    y: Vec<S>,
) -> PsdVerdict<S> {
    let n = y.len();
    let mut x = y;
    for i in (0..eliminated).rev() {
        let mut acc = x[i].clone();
        for j in i + 1..n {
            acc = acc - lower[i][j - i - 1].clone() * x[j].clone();
        }
        x[i] = acc;
    }
    let mut witness = vec![S::zero(); n];
    for (slot, &orig) in order.iter().enumerate() {
        witness[orig] = x[slot].clone();
    }
    let value = m.quadratic_form(&witness);
    debug_assert_eq!(value.sign(), Ordering::Less);
    PsdVerdict::NotPsd { witness, value }
}

/// Best rational approximation to `x` with denominator at most
/// `max_denominator`, via continued-fraction convergents and the closing
/// semiconvergent, compared exactly.
pub fn rationalize(x: f64, max_denominator: u64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    if max_denominator == 0 {
        return Err(Error::BadInput("max denominator must be positive".into()));
    }
    let exact = BigRational::from_float(x).ok_or(Error::NonFinite)?;
    Ok(best_approximation(&exact, &BigInt::from(max_denominator)))
}

fn best_approximation(x: &BigRational, qmax: &BigInt) -> BigRational {
    if x.denom() <= qmax {
        return x.clone();
    }
    let mut num = x.numer().clone();
    let mut den = x.denom().clone();
    // Convergents h/k with the usual two-term recurrence; seeds are the
    // virtual convergents h_{-2}/k_{-2} = 0/1 and h_{-1}/k_{-1} = 1/0.
    let (mut h_prev, mut k_prev) = (BigInt::zero(), BigInt::one());
    let (mut h_cur, mut k_cur) = (BigInt::one(), BigInt::zero());
    loop {
        let a = num.div_floor(&den);
        let rem = &num - &a * &den;
        let h_next = &a * &h_cur + &h_prev;
        let k_next = &a * &k_cur + &k_prev;
        if k_next > *qmax {
            // Best semiconvergent still within the budget.
            let t = (qmax - &k_prev).div_floor(&k_cur);
            let candidates = [
                BigRational::new(h_cur.clone(), k_cur.clone()),
                BigRational::new(&h_prev + &t * &h_cur, &k_prev + &t * &k_cur),
            ];
            return candidates
                .into_iter()
                .min_by(|p, q| {
                    (x - p)
                        .abs()
                        .cmp(&(x - q).abs())
                        .then_with(|| p.denom().cmp(q.denom()))
                })
                .expect("two candidates");
        }
        h_prev = std::mem::replace(&mut h_cur, h_next);
        k_prev = std::mem::replace(&mut k_cur, k_next);
        num = std::mem::replace(&mut den, rem);
        if den.is_zero() {
            // x itself became representable; can only happen within budget.
            return BigRational::new(h_cur, k_cur);
        }
    }
}

/// Entrywise rationalization, symmetrization by averaging, then `delta * I`
/// restoration doubling `delta` from 2^-40 up to 2^-10. The result is
/// exactly PSD or the budget is reported exhausted.
pub fn perturb_to_psd(m_float: &[Vec<f64>], max_denominator: u64) -> Result<SymMatrix<BigRational>> {
    let n = m_float.len();
    for row in m_float {
        if row.len() != n {
            return Err(Error::BadInput("matrix is not square".into()));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if (m_float[i][j] - m_float[j][i]).abs() > 1e-6 {
                return Err(Error::BadInput(format!(
                    "input is not symmetric up to 1e-6 at ({i},{j})"
                )));
            }
        }
    }
    let mut m = SymMatrix::<BigRational>::zeros(n);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    for i in 0..n {
        for j in i..n {
            let a = rationalize(m_float[i][j], max_denominator)?;
            let b = rationalize(m_float[j][i], max_denominator)?;
            m.set(i, j, (a + b) * half.clone());
        }
    }
    if psd_check_exact(&m).is_psd() {
        return Ok(m);
    }
    let mut delta = BigRational::new(BigInt::one(), BigInt::from(1u64 << 40));
    let cap = BigRational::new(BigInt::one(), BigInt::from(1u64 << 10));
    while delta <= cap {
        let candidate = m.add_scaled_identity(&delta);
        if psd_check_exact(&candidate).is_psd() {
            return Ok(candidate);
        }
        delta = delta * BigRational::from_integer(BigInt::from(2));
    }
    Err(Error::PerturbBudget)
}

/// A rigorous bound: PSD matrices per type plus the exact per-H values
/// `d(H) + c_H`, their maximum, and the PSD factorization transcripts.
#[derive(Clone, Debug)]
pub struct BoundCertificate<S> {
    pub label: String,
    pub family_digest: String,
    pub table_digest: String,
    pub type_lines: Vec<String>,
    pub flag_lines: Vec<Vec<String>>,
    pub matrices: Vec<SymMatrix<S>>,
    pub per_h: Vec<S>,
    pub bound: S,
    pub attained: Vec<usize>,
    pub transcripts: Vec<LdlTranscript<S>>,
}

/// SHA-256 over the concatenated CSV renderings: the binding between a
/// certificate and the tables it was computed from.
pub fn tables_digest(tables: &[DensityTable]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    for t in tables {
        hasher.update(crate::flags::write_table_csv(t).as_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Exact `c_H` coefficients added onto the density row: off-diagonal matrix
/// entries weigh twice, matching the unordered-pair table layout.
pub fn per_h_values<S: CertScalar>(
    matrices: &[SymMatrix<S>],
    tables: &[DensityTable],
) -> Result<Vec<S>> {
    if matrices.len() != tables.len() {
        return Err(Error::TableMismatch(format!(
            "{} matrices against {} tables",
            matrices.len(),
            tables.len()
        )));
    }
    let columns = tables
        .first()
        .ok_or_else(|| Error::TableMismatch("no tables".into()))?
        .column_count();
    for t in tables {
        if t.column_count() != columns || t.family_digest() != tables[0].family_digest() {
            return Err(Error::TableMismatch(
                "tables disagree on the family".into(),
            ));
        }
    }
    for (m, t) in matrices.iter().zip(tables.iter()) {
        if m.n() != t.flag_count() {
            return Err(Error::TableMismatch(format!(
                "matrix of size {} against {} flags",
                m.n(),
                t.flag_count()
            )));
        }
    }
    let mut per_h: Vec<S> = tables[0]
        .densities()
        .iter()
        .map(|d| S::from_rational(d.clone()))
        .collect();
    let two = S::one() + S::one();
    for (m, t) in matrices.iter().zip(tables.iter()) {
        for row in t.rows() {
            let weight = if row.i == row.j { S::one() } else { two.clone() };
            let coeff = weight * m.get(row.i, row.j).clone();
            if coeff.sign() == Ordering::Equal {
                continue;
            }
            for (col, v) in row.nonzero() {
                per_h[*col] =
                    per_h[*col].clone() + coeff.clone() * S::from_rational(v.clone());
            }
        }
    }
    Ok(per_h)
}

/// Verifies PSD-ness of every matrix (rejecting with an explicit witness)
/// and evaluates the exact bound `max_H (d(H) + c_H)`.
pub fn certified_bound<S: CertScalar>(
    matrices: &[SymMatrix<S>],
    tables: &[DensityTable],
) -> Result<BoundCertificate<S>> {
    let mut transcripts = Vec::with_capacity(matrices.len());
    for (idx, m) in matrices.iter().enumerate() {
        match psd_check_exact(m) {
            PsdVerdict::Psd(t) => transcripts.push(t),
            PsdVerdict::NotPsd { witness, value } => {
                let w: Vec<String> = witness.iter().map(|x| x.to_string()).collect();
                return Err(Error::NotPsd(format!(
                    "matrix {idx}: w = [{}], w^T M w = {value}",
                    w.join(", ")
                )));
            }
        }
    }
    let per_h = per_h_values(matrices, tables)?;
    let bound = per_h
        .iter()
        .cloned()
        .reduce(|a, b| if (b.clone() - a.clone()).sign() == Ordering::Greater { b } else { a })
        .ok_or_else(|| Error::TableMismatch("empty family".into()))?;
    let attained: Vec<usize> = per_h
        .iter()
        .enumerate()
        .filter(|(_i, v)| **v == bound)
        .map(|(i, _v)| i)
        .collect();
    Ok(BoundCertificate {
        label: String::new(),
        family_digest: tables[0].family_digest().to_string(),
        table_digest: tables_digest(tables),
        type_lines: tables.iter().map(|t| t.type_line().to_string()).collect(),
        flag_lines: tables
            .iter()
            .map(|t| t.flag_lines().to_vec())
            .collect(),
        matrices: matrices.to_vec(),
        per_h,
        bound,
        attained,
        transcripts,
    })
}

impl<S: CertScalar> BoundCertificate<S> {
    /// Internal consistency: transcripts re-verify, the recorded bound is
    /// the maximum of the per-H values, attainment indices are right.
    pub fn verify_internal(&self) -> Result<()> {
        if self.matrices.len() != self.transcripts.len() {
            return Err(Error::Verification("transcript count mismatch".into()));
        }
        for (idx, (m, t)) in self.matrices.iter().zip(self.transcripts.iter()).enumerate() {
            match psd_check_exact(m) {
                PsdVerdict::Psd(fresh) => {
                    if fresh != *t {
                        return Err(Error::Verification(format!(
                            "stored transcript for matrix {idx} does not recompute"
                        )));
                    }
                }
                PsdVerdict::NotPsd { witness, value } => {
                    let w: Vec<String> = witness.iter().map(|x| x.to_string()).collect();
                    return Err(Error::NotPsd(format!(
                        "matrix {idx}: w = [{}], w^T M w = {value}",
                        w.join(", ")
                    )));
                }
            }
            if !t.verify(m) {
                return Err(Error::Verification(format!(
                    "transcript {idx} fails reconstruction"
                )));
            }
        }
        let max = self
            .per_h
            .iter()
            .cloned()
            .reduce(|a, b| if (b.clone() - a.clone()).sign() == Ordering::Greater { b } else { a })
            .ok_or_else(|| Error::Verification("empty per-H vector".into()))?;
        if max != self.bound {
            return Err(Error::Verification(
                "recorded bound is not the maximum of the per-H values".into(),
            ));
        }
        let attained: Vec<usize> = self
            .per_h
            .iter()
            .enumerate()
            .filter(|(_i, v)| **v == self.bound)
            .map(|(i, _v)| i)
            .collect();
        if attained != self.attained {
            return Err(Error::Verification("attainment set mismatch".into()));
        }
        Ok(())
    }

    /// Full re-verification against the density tables the certificate
    /// claims to be bound to.
    pub fn verify_against_tables(&self, tables: &[DensityTable]) -> Result<()> {
        self.verify_internal()?;
        if tables_digest(tables) != self.table_digest {
            return Err(Error::Verification(
                "table digest mismatch: certificate is bound to different tables".into(),
            ));
        }
        let fresh = per_h_values(&self.matrices, tables)?;
        if fresh != self.per_h {
            return Err(Error::Verification(
                "per-H values do not recompute from the tables".into(),
            ));
        }
        Ok(())
    }
}

fn strip_self_digest(value: &Value) -> (Value, Option<String>) {
    let mut v = value.clone();
    let digest = v
        .as_object_mut()
        .and_then(|map| map.remove("self_digest"))
        .and_then(|d| d.as_str().map(str::to_string));
    (v, digest)
}

fn digest_of_value(v: &Value) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(v.to_string().as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Serializes a certificate, embedding a self digest over its content.
pub fn write_certificate<S: CertScalar>(cert: &BoundCertificate<S>) -> String {
    let mut value = json!({
        "format": "cubeflag-certificate-v1",
        "scalar": S::FIELD_NAME,
        "label": cert.label,
        "family_digest": cert.family_digest,
        "table_digest": cert.table_digest,
        "types": cert.type_lines,
        "flags": cert.flag_lines,
        "matrices": cert.matrices.iter().map(|m| m.to_json()).collect::<Vec<_>>(),
        "per_H": cert.per_h.iter().map(|v| v.to_json()).collect::<Vec<_>>(),
        "bound": cert.bound.to_json(),
        "attained": cert.attained,
        "psd_transcripts": cert.transcripts.iter().map(|t| t.to_json()).collect::<Vec<_>>(),
    });
    let digest = digest_of_value(&value);
    value
        .as_object_mut()
        .expect("object")
        .insert("self_digest".into(), Value::String(digest));
    serde_json::to_string_pretty(&value).expect("serialize certificate") + "\n"
}

/// Scalar field recorded in a serialized certificate, for dispatch.
pub fn certificate_scalar(text: &str) -> Result<String> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad certificate: {e}")))?;
    value["scalar"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| Error::Parse("certificate lacks a scalar field".into()))
}

/// Parses and re-verifies a certificate: self digest, PSD transcripts and
/// the recorded maximum are all recomputed.
pub fn read_certificate<S: CertScalar>(text: &str) -> Result<BoundCertificate<S>> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad certificate: {e}")))?;
    if value["format"].as_str() != Some("cubeflag-certificate-v1") {
        return Err(Error::Parse("unknown certificate format".into()));
    }
    if value["scalar"].as_str() != Some(S::FIELD_NAME) {
        return Err(Error::Parse(format!(
            "certificate scalar {:?} does not match requested field {}",
            value["scalar"], S::FIELD_NAME
        )));
    }
    let (stripped, digest) = strip_self_digest(&value);
    let digest = digest.ok_or_else(|| Error::Verification("missing self digest".into()))?;
    if digest_of_value(&stripped) != digest {
        return Err(Error::Verification(
            "certificate self digest mismatch: tampered entries".into(),
        ));
    }
    let as_strings = |key: &str| -> Result<Vec<String>> {
        value[key]
            .as_array()
            .ok_or_else(|| Error::Parse(format!("missing {key}")))?
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Error::Parse(format!("bad entry in {key}")))
            })
            .collect()
    };
    let type_lines = as_strings("types")?;
    let flag_lines = value["flags"]
        .as_array()
        .ok_or_else(|| Error::Parse("missing flags".into()))?
        .iter()
        .map(|group| {
            group
                .as_array()
                .ok_or_else(|| Error::Parse("bad flag group".into()))?
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| Error::Parse("bad flag line".into()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let matrices = value["matrices"]
        .as_array()
        .ok_or_else(|| Error::Parse("missing matrices".into()))?
        .iter()
        .map(SymMatrix::<S>::from_json)
        .collect::<Result<Vec<_>>>()?;
    let per_h = value["per_H"]
        .as_array()
        .ok_or_else(|| Error::Parse("missing per_H".into()))?
        .iter()
        .map(S::from_json)
        .collect::<Result<Vec<_>>>()?;
    let bound = S::from_json(&value["bound"])?;
    let attained = value["attained"]
        .as_array()
        .ok_or_else(|| Error::Parse("missing attained".into()))?
        .iter()
        .map(|v| v.as_u64().map(|u| u as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Parse("bad attained".into()))?;
    let transcripts = value["psd_transcripts"]
        .as_array()
        .ok_or_else(|| Error::Parse("missing transcripts".into()))?
        .iter()
        .map(LdlTranscript::<S>::from_json)
        .collect::<Result<Vec<_>>>()?;
    let cert = BoundCertificate {
        label: value["label"].as_str().unwrap_or_default().to_string(),
        family_digest: value["family_digest"]
            .as_str()
            .unwrap_or_default()
            .to_string(),
        table_digest: value["table_digest"]
            .as_str()
            .unwrap_or_default()
            .to_string(),
        type_lines,
        flag_lines,
        matrices,
        per_h,
        bound,
        attained,
        transcripts,
    };
    cert.verify_internal()?;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, QuadRat};

    fn m2(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> SymMatrix<BigRational> {
        let mut m = SymMatrix::zeros(2);
        m.set(0, 0, rat(a.0, a.1));
        m.set(0, 1, rat(b.0, b.1));
        m.set(1, 1, rat(c.0, c.1));
        m
    }

    #[test]
    fn identity_is_psd() {
        let verdict = psd_check_exact(&SymMatrix::<BigRational>::identity(2));
        assert!(verdict.is_psd());
    }

    #[test]
    fn optimal_matrix_is_psd() {
        // Singular: (2/3)(1/6) = (1/3)^2, so rank one with trace 5/6.
        let m = m2((2, 3), (-1, 3), (1, 6));
        match psd_check_exact(&m) {
            PsdVerdict::Psd(t) => {
                assert_eq!(t.rank, 1);
                assert!(t.verify(&m));
            }
            PsdVerdict::NotPsd { .. } => panic!("M* must be PSD"),
        }
    }

    #[test]
    fn hand_matrix_is_rank_one_psd() {
        // The sqrt(2) matrix with zero determinant.
        let half = rat(1, 2);
        let m11 = QuadRat::new(rat(-1, 2), half.clone()); // (√2-1)/2
        let m12 = QuadRat::new(rat(-1, 1), half); // (√2-2)/2
        let m22 = QuadRat::new(rat(-1, 1), rat(1, 1)); // √2-1
        let mut m = SymMatrix::zeros(2);
        m.set(0, 0, m11.clone());
        m.set(0, 1, m12.clone());
        m.set(1, 1, m22.clone());
        let det = m11 * m22 - m12.clone() * m12;
        assert!(num_traits::Zero::is_zero(&det));
        match psd_check_exact(&m) {
            PsdVerdict::Psd(t) => {
                assert_eq!(t.rank, 1);
                assert!(t.verify(&m));
            }
            PsdVerdict::NotPsd { .. } => panic!("hand matrix must be PSD"),
        }
    }

    #[test]
    fn witnesses_are_exact() {
        let cases = [
            m2((1, 1), (2, 1), (1, 1)),   // indefinite
            m2((-1, 1), (0, 1), (1, 1)),  // negative diagonal
            m2((0, 1), (1, 2), (0, 1)),   // zero diagonal, nonzero cross
        ];
        for m in cases {
            match psd_check_exact(&m) {
                PsdVerdict::Psd(_) => panic!("matrix must fail"),
                PsdVerdict::NotPsd { witness, value } => {
                    assert_eq!(m.quadratic_form(&witness), value);
                    assert!(value < BigRational::zero());
                }
            }
        }
    }

    #[test]
    fn rationalize_examples() {
        assert_eq!(rationalize(0.25, 10).unwrap(), rat(1, 4));
        assert_eq!(rationalize(0.6666667, 100).unwrap(), rat(2, 3));
        assert_eq!(rationalize(std::f64::consts::PI, 113).unwrap(), rat(355, 113));
        assert!(rationalize(f64::NAN, 10).is_err());
    }

    #[test]
    fn rationalize_matches_exhaustive_search() {
        // Small-budget oracle: scan every denominator.
        let inputs = [0.6068, 0.37549, 0.123456, -0.625, 3.1416, 0.49999];
        for &x in &inputs {
            for qmax in [7u64, 20, 57] {
                let got = rationalize(x, qmax).unwrap();
                let exact = BigRational::from_float(x).unwrap();
                let mut best: Option<BigRational> = None;
                for q in 1..=qmax {
                    let p = (x * q as f64).round() as i64;
                    for cand_p in [p - 1, p, p + 1] {
                        let cand = rat(cand_p, q as i64);
                        let better = match &best {
                            None => true,
                            Some(b) => {
                                let eb = (&exact - b).abs();
                                let ec = (&exact - &cand).abs();
                                ec < eb || (ec == eb && cand.denom() < b.denom())
                            }
                        };
                        if better {
                            best = Some(cand);
                        }
                    }
                }
                let best = best.unwrap();
                assert_eq!(
                    (&exact - &got).abs(),
                    (&exact - &best).abs(),
                    "x={x} qmax={qmax}: got {got}, oracle {best}"
                );
            }
        }
    }

    #[test]
    fn perturbation_restores_psd() {
        // Already PSD input stays unchanged.
        let rows = vec![vec![0.25, 0.0], vec![0.0, 0.5]];
        let m = perturb_to_psd(&rows, 1 << 20).unwrap();
        assert_eq!(*m.get(0, 0), rat(1, 4));
        assert_eq!(*m.get(1, 1), rat(1, 2));

        // M* with a slightly negative diagonal dent is restored.
        let dent = 1e-12;
        let rows = vec![
            vec![2.0 / 3.0, -1.0 / 3.0],
            vec![-1.0 / 3.0, 1.0 / 6.0 - dent],
        ];
        let m = perturb_to_psd(&rows, 1 << 20).unwrap();
        assert!(psd_check_exact(&m).is_psd());

        // A solidly negative eigenvalue exceeds the delta budget.
        let rows = vec![vec![-0.1, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            perturb_to_psd(&rows, 1 << 20),
            Err(Error::PerturbBudget)
        ));
    }
}
