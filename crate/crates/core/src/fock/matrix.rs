//! Dense matrix and vector realizations over a truncated Fock basis.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::algebra::{Family, Generator, OperatorPoly};
use crate::error::{Error, Result};
use crate::fock::space::FockSpace;
use crate::format::{json_array, value_to_f64};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    space: FockSpace,
    entries: CMatrix,
}

impl OperatorMatrix {
    pub fn new(space: FockSpace, entries: CMatrix) -> Result<Self> {
        let d = space.dimension();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix for dimension {}",
                entries.nrows(),
                entries.ncols(),
                d
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { space, entries })
    }

    pub fn identity(space: FockSpace) -> Self {
        let d = space.dimension();
        Self { space, entries: CMatrix::identity(d, d) }
    }

    pub fn zeros(space: FockSpace) -> Self {
        let d = space.dimension();
        Self { space, entries: CMatrix::zeros(d, d) }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::ShapeMismatch("operators live on different spaces".into()));
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { space: self.space, entries: &self.entries * &other.entries })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { space: self.space, entries: &self.entries + &other.entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { space: self.space, entries: &self.entries - &other.entries })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { space: self.space, entries: &self.entries * c }
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space, entries: self.entries.adjoint() }
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self {
            space: self.space,
            entries: &self.entries * &other.entries - &other.entries * &self.entries,
        })
    }

    /// max |M − M†|.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.entries - self.entries.adjoint()))
    }

    /// max |M + M†|.
    pub fn anti_hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.entries + self.entries.adjoint()))
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if self.space != v.space {
            return Err(Error::ShapeMismatch("operator and state live on different spaces".into()));
        }
        Ok(StateVector { space: self.space, entries: &self.entries * &v.entries })
    }

    /// Largest entry magnitude within the given row and column index sets.
    pub fn block_max_abs(&self, rows: &[usize], cols: &[usize]) -> f64 {
        block_max_abs(&self.entries, rows, cols)
    }

    pub fn to_json(&self) -> Value {
        matrix_json(self.space, &self.entries)
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn block_max_abs(m: &CMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for &c in cols {
        for &r in rows {
            best = best.max(m[(r, c)].norm());
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: FockSpace,
    entries: CVector,
}

impl StateVector {
    pub fn new(space: FockSpace, entries: CVector) -> Result<Self> {
        if entries.len() != space.dimension() {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} for dimension {}",
                entries.len(),
                space.dimension()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { space, entries })
    }

    pub fn basis(space: FockSpace, index: usize) -> Self {
        let mut entries = CVector::zeros(space.dimension());
        entries[index] = Complex64::new(1.0, 0.0);
        Self { space, entries }
    }

    pub fn vacuum(space: FockSpace) -> Self {
        Self::basis(space, 0)
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn entries(&self) -> &CVector {
        &self.entries
    }

    pub fn component(&self, occupations: &[usize]) -> Complex64 {
        self.entries[self.space.index(occupations)]
    }

    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.entries.dotc(&other.entries)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { space: self.space, entries: &self.entries * c }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::ShapeMismatch("states live on different spaces".into()));
        }
        Ok(Self { space: self.space, entries: &self.entries + &other.entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn to_json(&self) -> Value {
        let mut obj = header(self.space);
        obj.insert("re".into(), json_array(self.entries.iter().map(|z| z.re)));
        obj.insert("im".into(), json_array(self.entries.iter().map(|z| z.im)));
        Value::Object(obj)
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let space = parse_header(value)?;
        let re = number_list(value, "re")?;
        let im = number_list(value, "im")?;
        if re.len() != im.len() {
            return Err(Error::Serialization("re/im length mismatch".into()));
        }
        let entries = CVector::from_iterator(re.len(), re.iter().zip(&im).map(|(r, i)| Complex64::new(*r, *i)));
        Self::new(space, entries)
    }
}

/// Density matrix with the truncation tail it was built under.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: FockSpace,
    entries: CMatrix,
    tail: f64,
}

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

impl DensityMatrix {
    pub(crate) fn from_parts(space: FockSpace, entries: CMatrix, tail: f64) -> Self {
        Self { space, entries, tail }
    }

    /// Validates Hermiticity, positivity and trace before accepting `entries`.
    pub fn new(space: FockSpace, entries: CMatrix, tail: f64) -> Result<Self> {
        let op = OperatorMatrix::new(space, entries)?;
        let rho = Self { space, entries: op.into_entries(), tail };
        rho.validate()?;
        Ok(rho)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        let min_eig = self.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::Domain(format!("density matrix has eigenvalue {min_eig:.3e}")));
        }
        Ok(())
    }

    /// Hermiticity and trace only; skips the eigenvalue check.
    pub fn validate_structure(&self) -> Result<()> {
        let defect = max_abs(&(&self.entries - self.entries.adjoint()));
        if defect > HERMITIAN_TOL {
            return Err(Error::NonHermitian { deviation: defect });
        }
        let tr = self.trace().re;
        if tr < 1.0 - self.tail - 1e-12 || tr > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("trace {tr} outside [1 - {:.3e}, 1]", self.tail)));
        }
        Ok(())
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Numerical rank: eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().into_iter().filter(|&e| e > tol).count()
    }

    pub fn to_json(&self) -> Value {
        matrix_json(self.space, &self.entries)
    }

    pub fn from_json(value: &Value, tail: f64) -> Result<Self> {
        let (space, entries) = parse_matrix_json(value)?;
        Self::new(space, entries, tail)
    }
}

/// Tr(ρM), summed in fixed index order.
pub fn expectation(rho: &DensityMatrix, m: &OperatorMatrix) -> Result<Complex64> {
    if rho.space != m.space {
        return Err(Error::ShapeMismatch("density matrix and operator live on different spaces".into()));
    }
    let d = rho.space.dimension();
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += rho.entries[(i, j)] * m.entries[(j, i)];
        }
    }
    Ok(acc)
}

/// Resolves each word of `p` into (slot, dagger) pairs for the given space.
fn resolved_terms(space: FockSpace, p: &OperatorPoly) -> Result<Vec<(Complex64, Vec<(usize, bool)>)>> {
    if p.modes() != space.modes() {
        return Err(Error::ModeMismatch { left: space.modes(), right: p.modes() });
    }
    if !space.is_expanded() && p.has_family(Family::B) {
        return Err(Error::FamilyMismatch(Family::B));
    }
    p.terms()
        .map(|(word, c)| {
            let slots = word.iter().map(|g| Ok((space.slot(*g)?, g.dagger))).collect::<Result<Vec<_>>>()?;
            Ok((c, slots))
        })
        .collect()
}

pub fn ladder_matrix(space: FockSpace, g: Generator) -> Result<OperatorMatrix> {
    realize(space, &OperatorPoly::generator(space.modes(), g)?)
}

/// Word-by-word matrix realization with truncated creation (a⁺|N⟩ = 0).
pub fn realize(space: FockSpace, p: &OperatorPoly) -> Result<OperatorMatrix> {
    let terms = resolved_terms(space, p)?;
    let d = space.dimension();
    let mut m = CMatrix::zeros(d, d);
    for (c, word) in &terms {
        for col in 0..d {
            if let Some((amp, row)) = space.apply_slots(word, col) {
                m[(row, col)] += c * amp;
            }
        }
    }
    OperatorMatrix::new(space, m)
}

/// Applies `p` directly to a state without forming the matrix.
pub fn apply_poly(p: &OperatorPoly, v: &StateVector) -> Result<StateVector> {
    let space = v.space;
    let terms = resolved_terms(space, p)?;
    let d = space.dimension();
    let mut out = CVector::zeros(d);
    for (c, word) in &terms {
        for col in 0..d {
            let x = v.entries[col];
            if x == ZERO {
                continue;
            }
            if let Some((amp, row)) = space.apply_slots(word, col) {
                out[row] += c * amp * x;
            }
        }
    }
    StateVector::new(space, out)
}

fn header(space: FockSpace) -> Map<String, Value> {
    let mut obj = Map::new();
    obj.insert("modes".into(), json!(space.modes()));
    obj.insert("cutoff".into(), json!(space.cutoff()));
    obj.insert("layout".into(), json!("mixed-radix-lsb"));
    if space.is_expanded() {
        obj.insert("families".into(), json!(["A", "B"]));
        obj.insert("cutoffs".into(), json!({ "A": space.cutoff(), "B": space.cutoff() }));
    }
    obj
}

fn parse_header(value: &Value) -> Result<FockSpace> {
    let bad = |m: &str| Error::Serialization(m.to_string());
    let modes = value.get("modes").and_then(Value::as_u64).ok_or_else(|| bad("missing 'modes'"))? as usize;
    let cutoff = value.get("cutoff").and_then(Value::as_u64).ok_or_else(|| bad("missing 'cutoff'"))? as usize;
    if value.get("layout").and_then(Value::as_str) != Some("mixed-radix-lsb") {
        return Err(bad("layout must be 'mixed-radix-lsb'"));
    }
    match value.get("families") {
        None => FockSpace::new(modes, cutoff),
        Some(f) if f == &json!(["A", "B"]) => FockSpace::expanded(modes, cutoff),
        Some(_) => Err(bad("families must be [\"A\", \"B\"]")),
    }
}

fn number_list(value: &Value, key: &str) -> Result<Vec<f64>> {
    value
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Serialization(format!("missing '{key}'")))?
        .iter()
        .map(|v| value_to_f64(v).ok_or_else(|| Error::Serialization(format!("non-numeric entry in '{key}'"))))
        .collect()
}

fn matrix_json(space: FockSpace, m: &CMatrix) -> Value {
    let rows = |f: fn(&Complex64) -> f64| {
        Value::Array((0..m.nrows()).map(|r| json_array((0..m.ncols()).map(|c| f(&m[(r, c)])))).collect())
    };
    let mut obj = header(space);
    obj.insert("re".into(), rows(|z| z.re));
    obj.insert("im".into(), rows(|z| z.im));
    Value::Object(obj)
}

fn parse_matrix_json(value: &Value) -> Result<(FockSpace, CMatrix)> {
    let space = parse_header(value)?;
    let d = space.dimension();
    let grid = |key: &str| -> Result<Vec<f64>> {
        let rows = value
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Serialization(format!("missing '{key}'")))?;
        if rows.len() != d {
            return Err(Error::Serialization(format!("'{key}' has {} rows, expected {d}", rows.len())));
        }
        let mut out = Vec::with_capacity(d * d);
        for row in rows {
            let row = row.as_array().ok_or_else(|| Error::Serialization(format!("'{key}' row is not an array")))?;
            if row.len() != d {
                return Err(Error::Serialization(format!("'{key}' row has {} entries, expected {d}", row.len())));
            }
            for v in row {
                out.push(value_to_f64(v).ok_or_else(|| Error::Serialization(format!("non-numeric entry in '{key}'")))?);
            }
        }
        Ok(out)
    };
    let re = grid("re")?;
    let im = grid("im")?;
    let m = CMatrix::from_fn(d, d, |r, c| Complex64::new(re[r * d + c], im[r * d + c]));
    Ok((space, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{phi_op, pi_op};

    fn space(n: usize, cutoff: usize) -> FockSpace {
        FockSpace::new(n, cutoff).unwrap()
    }

    #[test]
    fn vacuum_annihilated() {
        let s = space(1, 4);
        let a = ladder_matrix(s, Generator::a(1)).unwrap();
        let out = a.apply(&StateVector::vacuum(s)).unwrap();
        assert_eq!(out.norm(), 0.0);
        let ad = ladder_matrix(s, Generator::a_dag(1)).unwrap();
        assert_eq!(ad.apply(&StateVector::vacuum(s)).unwrap(), StateVector::basis(s, 1));
        assert!((ad.entries()[(2, 1)].re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn realize_identity_and_number() {
        let s = space(2, 3);
        assert_eq!(realize(s, &OperatorPoly::identity(2)).unwrap(), OperatorMatrix::identity(s));
        let num = OperatorPoly::from_monomials(
            2,
            [crate::algebra::LadderMonomial::new(
                Complex64::new(1.0, 0.0),
                vec![Generator::a_dag(1), Generator::a(1)],
            )],
        )
        .unwrap();
        let m = realize(s, &num).unwrap();
        for i in 0..s.dimension() {
            for j in 0..s.dimension() {
                let want = if i == j { s.occupations(i)[0] as f64 } else { 0.0 };
                assert!((m.entries()[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn realized_field_commutator_interior() {
        let s = space(1, 12);
        let comm = phi_op(1, 1).unwrap().commutator(&pi_op(1, 1).unwrap()).unwrap();
        let m = realize(s, &comm).unwrap();
        let interior = s.interior(2);
        for &i in &interior {
            for &j in &interior {
                let want = if i == j { Complex64::new(0.0, 0.5) } else { ZERO };
                assert!((m.entries()[(i, j)] - want).norm() < 1e-15);
            }
        }
        // the numerical matrix commutator carries the boundary defect
        let phi = realize(s, &phi_op(1, 1).unwrap()).unwrap();
        let pi = realize(s, &pi_op(1, 1).unwrap()).unwrap();
        let num = phi.commutator(&pi).unwrap();
        assert!((num.entries()[(12, 12)] - Complex64::new(0.0, 0.5 * (1.0 - 13.0))).norm() < 1e-12);
    }

    #[test]
    fn b_family_rejected_on_plain_space() {
        let p = OperatorPoly::generator(1, Generator::b(1)).unwrap();
        assert!(matches!(realize(space(1, 3), &p), Err(Error::FamilyMismatch(Family::B))));
    }

    #[test]
    fn apply_poly_matches_realize() {
        let s = space(2, 4);
        let p = phi_op(2, 1).unwrap().multiply(&pi_op(2, 2).unwrap().pow(2).unwrap()).unwrap();
        let v = StateVector::new(
            s,
            CVector::from_fn(s.dimension(), |i, _| Complex64::new((i as f64 * 0.37).sin(), (i as f64).cos())),
        )
        .unwrap();
        let a = apply_poly(&p, &v).unwrap();
        let b = realize(s, &p).unwrap().apply(&v).unwrap();
        assert!((a.entries() - b.entries()).norm() < 1e-12);
    }

    #[test]
    fn state_json_round_trip() {
        let s = FockSpace::expanded(1, 2).unwrap();
        let v = StateVector::new(s, CVector::from_fn(9, |i, _| Complex64::new(i as f64 / 7.0, -0.1 * i as f64))).unwrap();
        let json = v.to_json();
        assert_eq!(json["families"], json!(["A", "B"]));
        assert_eq!(StateVector::from_json(&json).unwrap(), v);
        let text = serde_json::to_string(&json).unwrap();
        assert!(text.contains("1.4285714285714285e-1"), "{text}");
    }
}
