//! State-vector simulation of the quantum device: qubit allocation, unitary
//! application and projective measurement with collapse.
//!
//! Qubit `i` is the `i`-th tensor factor from the left, so in the amplitude
//! vector it occupies bit `n-1-i` of the basis index (the leftmost qubit is
//! the most significant bit). Allocation appends on the right. For
//! multi-qubit gates the first listed qubit is the most significant gate
//! input.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

/// Numerical tolerance: states stay normalized to within this bound, and
/// amplitude comparisons use it.
pub const EPS_NORM: f64 = 1e-9;

#[derive(Debug, Clone, Error)]
pub enum QuantumError {
    #[error("qubit index {index} out of range for a {qubits}-qubit state")]
    IndexOutOfRange { index: usize, qubits: usize },
    #[error("duplicate qubit index {0} in gate application")]
    DuplicateIndex(usize),
    #[error("gate `{gate}` expects {expected} qubit(s), got {got}")]
    ArityMismatch { gate: String, expected: usize, got: usize },
    #[error("gate `{0}` is not unitary")]
    NotUnitary(String),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("bad gate table entry at line {line}: {message}")]
    BadGateLine { line: usize, message: String },
    #[error("gate name `{0}` must be a capitalized identifier")]
    BadGateName(String),
    #[error("bad state vector: {0}")]
    BadState(String),
}

/// A normalized complex amplitude vector over `n` qubits; `n = 0` is the
/// single-amplitude empty state.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    /// The empty register `|⟩`.
    pub fn empty() -> Self {
        QuantumState { n: 0, amps: vec![Complex64::new(1.0, 0.0)] }
    }

    /// The computational basis state `|b₀b₁…⟩`.
    pub fn basis(bits: &[bool]) -> Self {
        let n = bits.len();
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        let mut idx = 0usize;
        for &b in bits {
            idx = (idx << 1) | usize::from(b);
        }
        amps[idx] = Complex64::new(1.0, 0.0);
        QuantumState { n, amps }
    }

    /// Builds a state from raw amplitudes; `amps.len()` must be a power of
    /// two and the vector must be normalized within [`EPS_NORM`].
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, QuantumError> {
        let len = amps.len();
        if len == 0 || len & (len - 1) != 0 {
            return Err(QuantumError::BadState(format!(
                "amplitude vector length {len} is not a power of two"
            )));
        }
        let n = len.trailing_zeros() as usize;
        let state = QuantumState { n, amps };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > EPS_NORM {
            return Err(QuantumError::BadState(format!("norm² = {norm}, expected 1")));
        }
        Ok(state)
    }

    pub fn qubit_count(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn bit_of(&self, basis: usize, qubit: usize) -> bool {
        (basis >> (self.n - 1 - qubit)) & 1 == 1
    }

    /// Tensors `|b⟩` on the right: returns the extended state and the index
    /// of the fresh qubit. Pre-existing amplitudes are untouched.
    pub fn new_qubit(&self, b: bool) -> (QuantumState, usize) {
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len() * 2];
        let off = usize::from(b);
        for (i, a) in self.amps.iter().enumerate() {
            amps[2 * i + off] = *a;
        }
        (QuantumState { n: self.n + 1, amps }, self.n)
    }

    /// Applies `gate` to the qubits listed in `indices` (first index = most
    /// significant gate input).
    pub fn apply(&self, gate: &Unitary, indices: &[usize]) -> Result<QuantumState, QuantumError> {
        if indices.len() != gate.arity() {
            return Err(QuantumError::ArityMismatch {
                gate: String::new(),
                expected: gate.arity(),
                got: indices.len(),
            });
        }
        let mut seen = vec![false; self.n];
        for &i in indices {
            if i >= self.n {
                return Err(QuantumError::IndexOutOfRange { index: i, qubits: self.n });
            }
            if seen[i] {
                return Err(QuantumError::DuplicateIndex(i));
            }
            seen[i] = true;
        }
        let k = indices.len();
        let dim = 1usize << k;
        // Bit position (from the LSB of the basis index) of each gate input.
        let positions: Vec<usize> = indices.iter().map(|&i| self.n - 1 - i).collect();
        let scatter = |bits: usize| -> usize {
            let mut out = 0;
            for (j, &pos) in positions.iter().enumerate() {
                if (bits >> (k - 1 - j)) & 1 == 1 {
                    out |= 1 << pos;
                }
            }
            out
        };
        let gate_mask: usize = positions.iter().map(|&p| 1usize << p).sum();
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for base in 0..self.amps.len() {
            if base & gate_mask != 0 {
                continue;
            }
            for col in 0..dim {
                let a = self.amps[base | scatter(col)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for row in 0..dim {
                    let u = gate.at(row, col);
                    if u.norm_sqr() == 0.0 {
                        continue;
                    }
                    out[base | scatter(row)] += u * a;
                }
            }
        }
        Ok(QuantumState { n: self.n, amps: out })
    }

    /// Projectively measures qubit `i`. Returns exactly two branches, for
    /// outcomes 0 and 1, with their probabilities and collapsed
    /// (renormalized) states; the qubit stays allocated. A zero-probability
    /// branch carries an arbitrary valid state with the qubit fixed to the
    /// outcome.
    pub fn measure(&self, i: usize) -> Result<[MeasureBranch; 2], QuantumError> {
        if i >= self.n {
            return Err(QuantumError::IndexOutOfRange { index: i, qubits: self.n });
        }
        let mut probs = [0.0f64; 2];
        for (basis, a) in self.amps.iter().enumerate() {
            probs[usize::from(self.bit_of(basis, i))] += a.norm_sqr();
        }
        let branch = |outcome: bool| -> MeasureBranch {
            let p = probs[usize::from(outcome)];
            let state = if p > 0.0 {
                let scale = 1.0 / p.sqrt();
                let amps = self
                    .amps
                    .iter()
                    .enumerate()
                    .map(|(basis, a)| {
                        if self.bit_of(basis, i) == outcome {
                            a * scale
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                QuantumState { n: self.n, amps }
            } else {
                // Impossible outcome: collapse to the basis state with this
                // qubit fixed and every other qubit zero.
                let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
                let idx = if outcome { 1 << (self.n - 1 - i) } else { 0 };
                amps[idx] = Complex64::new(1.0, 0.0);
                QuantumState { n: self.n, amps }
            };
            MeasureBranch { outcome, probability: p, state }
        };
        Ok([branch(false), branch(true)])
    }

    /// Multiplies by a global phase so the first nonzero amplitude is real
    /// and nonnegative.
    pub fn fix_global_phase(&self) -> QuantumState {
        for a in &self.amps {
            if a.norm() > EPS_NORM {
                let phase = a / a.norm();
                let amps = self.amps.iter().map(|x| x / phase).collect();
                return QuantumState { n: self.n, amps };
            }
        }
        self.clone()
    }

    /// Componentwise comparison within `eps`, after callers have fixed the
    /// global phase if they want phase-insensitivity.
    pub fn approx_eq(&self, other: &QuantumState, eps: f64) -> bool {
        self.n == other.n
            && self
                .amps
                .iter()
                .zip(&other.amps)
                .all(|(a, b)| (a - b).norm() <= eps)
    }
}

impl fmt::Display for QuantumState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, a) in self.amps.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:.6}{:+.6}i", a.re, a.im)?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone)]
pub struct MeasureBranch {
    pub outcome: bool,
    pub probability: f64,
    pub state: QuantumState,
}

/// A square complex matrix of dimension `2^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    dim: usize,
    elems: Vec<Complex64>, // row-major
}

impl Unitary {
    /// Builds a `2^k × 2^k` matrix from row-major entries, checking
    /// `U·U† = I` within [`EPS_NORM`].
    pub fn new(dim: usize, elems: Vec<Complex64>) -> Result<Self, QuantumError> {
        assert!(dim.is_power_of_two(), "gate dimension must be a power of two");
        assert_eq!(elems.len(), dim * dim, "row-major entries must fill the matrix");
        let u = Unitary { dim, elems };
        if !u.is_unitary() {
            return Err(QuantumError::NotUnitary(String::new()));
        }
        Ok(u)
    }

    fn from_rows(rows: &[&[(f64, f64)]]) -> Self {
        let dim = rows.len();
        let elems = rows
            .iter()
            .flat_map(|r| r.iter().map(|&(re, im)| Complex64::new(re, im)))
            .collect();
        Unitary { dim, elems }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of qubits the gate acts on.
    pub fn arity(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.elems[row * self.dim + col]
    }

    pub fn is_unitary(&self) -> bool {
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut dot = Complex64::new(0.0, 0.0);
                for k in 0..self.dim {
                    dot += self.at(i, k) * self.at(j, k).conj();
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).norm() > EPS_NORM {
                    return false;
                }
            }
        }
        true
    }

    /// The conjugate transpose.
    pub fn dagger(&self) -> Unitary {
        let mut elems = vec![Complex64::new(0.0, 0.0); self.dim * self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                elems[j * self.dim + i] = self.at(i, j).conj();
            }
        }
        Unitary { dim: self.dim, elems }
    }
}

/// The table of named unitary gates available to programs.
#[derive(Debug, Clone)]
pub struct GateTable {
    gates: BTreeMap<String, Unitary>,
}

impl GateTable {
    /// The built-in table: `H`, `X`, `Y`, `Z`, `CNOT` and the teleportation
    /// corrections `U00` (identity), `U01`, `U10`, `U11`.
    pub fn builtin() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut gates = BTreeMap::new();
        gates.insert(
            "H".into(),
            Unitary::from_rows(&[&[(h, 0.0), (h, 0.0)], &[(h, 0.0), (-h, 0.0)]]),
        );
        gates.insert(
            "X".into(),
            Unitary::from_rows(&[&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (0.0, 0.0)]]),
        );
        gates.insert(
            "Y".into(),
            Unitary::from_rows(&[&[(0.0, 0.0), (0.0, -1.0)], &[(0.0, 1.0), (0.0, 0.0)]]),
        );
        gates.insert(
            "Z".into(),
            Unitary::from_rows(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]]),
        );
        gates.insert(
            "CNOT".into(),
            Unitary::from_rows(&[
                &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)],
                &[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)],
                &[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)],
                &[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0), (0.0, 0.0)],
            ]),
        );
        gates.insert(
            "U00".into(),
            Unitary::from_rows(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (1.0, 0.0)]]),
        );
        gates.insert(
            "U01".into(),
            Unitary::from_rows(&[&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (0.0, 0.0)]]),
        );
        gates.insert(
            "U10".into(),
            Unitary::from_rows(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]]),
        );
        gates.insert(
            "U11".into(),
            Unitary::from_rows(&[&[(0.0, 0.0), (1.0, 0.0)], &[(-1.0, 0.0), (0.0, 0.0)]]),
        );
        GateTable { gates }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.gates.contains_key(name)
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.gates.get(name).map(|u| u.arity())
    }

    pub fn get(&self, name: &str) -> Result<&Unitary, QuantumError> {
        self.gates
            .get(name)
            .ok_or_else(|| QuantumError::UnknownGate(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.gates.keys().map(|s| s.as_str())
    }

    /// Registers a gate. Names must be capitalized identifiers so the parser
    /// can resolve them; matrices are checked for unitarity.
    pub fn insert(&mut self, name: impl Into<String>, gate: Unitary) -> Result<(), QuantumError> {
        let name = name.into();
        let ok = name.starts_with(|c: char| c.is_ascii_uppercase())
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ok {
            return Err(QuantumError::BadGateName(name));
        }
        if !gate.is_unitary() {
            return Err(QuantumError::NotUnitary(name));
        }
        self.gates.insert(name, gate);
        Ok(())
    }

    /// Extends the table from a config file: one gate per line,
    /// `NAME arity re,im re,im …` row-major; blank lines and `#` or `--`
    /// comments are skipped.
    pub fn extend_from_str(&mut self, src: &str) -> Result<(), QuantumError> {
        for (lineno, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("--") {
                continue;
            }
            let lineno = lineno + 1;
            let bad = |message: String| QuantumError::BadGateLine { line: lineno, message };
            let mut fields = line.split_whitespace();
            let name = fields.next().ok_or_else(|| bad("missing gate name".into()))?;
            let arity: usize = fields
                .next()
                .ok_or_else(|| bad("missing arity".into()))?
                .parse()
                .map_err(|_| bad("arity must be a number".into()))?;
            if arity == 0 || arity > 16 {
                return Err(bad(format!("unsupported arity {arity}")));
            }
            let dim = 1usize << arity;
            let mut elems = Vec::with_capacity(dim * dim);
            for field in fields {
                let (re, im) = field
                    .split_once(',')
                    .ok_or_else(|| bad(format!("expected `re,im`, found `{field}`")))?;
                let re: f64 = re.parse().map_err(|_| bad(format!("bad number `{re}`")))?;
                let im: f64 = im.parse().map_err(|_| bad(format!("bad number `{im}`")))?;
                elems.push(Complex64::new(re, im));
            }
            if elems.len() != dim * dim {
                return Err(bad(format!(
                    "gate `{name}` needs {} entries, found {}",
                    dim * dim,
                    elems.len()
                )));
            }
            let gate = Unitary::new(dim, elems).map_err(|_| {
                QuantumError::NotUnitary(format!("{name} (line {lineno})"))
            })?;
            self.insert(name.to_string(), gate)?;
        }
        Ok(())
    }

    pub fn extend_from_file(&mut self, path: &Path) -> Result<(), QuantumError> {
        let src = std::fs::read_to_string(path).map_err(|e| QuantumError::BadGateLine {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        self.extend_from_str(&src)
    }
}
