//! The helicopter plant: continuous LTI hover model, exact zero-order-hold
//! discretization, simulation, eigen-analysis, pointwise transfer-function
//! evaluation, and the nonlinear rigid-body propagator.

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, expm, lu_solve, Matrix};
use crate::scalar::Real;
use num_complex::Complex;

/// Canonical state ordering of the 10-state hover model.
pub const STATE_LABELS: [&str; 10] = ["u", "w", "q", "theta", "a1s", "v", "p", "r", "phi", "b1s"];

/// Canonical input ordering: collective, longitudinal cyclic, pedal, lateral
/// cyclic. This matches the column structure of the numeric input matrix
/// (the collective column carries the Z/M/N control derivatives).
pub const INPUT_LABELS: [&str; 4] = ["dcoll", "dlong", "dped", "dlat"];

// Numeric hover matrices, copied verbatim. Row order follows STATE_LABELS,
// column order of B follows INPUT_LABELS.
const HOVER_A: [[f64; 10]; 10] = [
    [-0.78501, 0.0, 0.0, -9.8, -9.8, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, -0.065145, 0.0, 0.0, -56.659, 0.0, 0.0, -0.79784, -0.0045036, 1344.1],
    [0.35712, 0.0, 0.0, 0.0, 92.468, -0.063629, 0.0, 0.0, 0.0, 56.515],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, -11.842, 0.0, 0.0, 0.0, 0.0, -7.1176],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.11245, 0.0, 0.0, 9.8, 9.8],
    [0.46624, 0.0, 0.0, 0.0, -0.6588, -0.083441, 0.0, 0.0, 0.0, 131.19],
    [0.0, 1.0349, 0.0, 0.0, 0.0, 0.0, -9.9435, -0.30115, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 2.1755, 0.0, -1.0, 0.0, 0.0, -14.687],
];

const HOVER_B: [[f64; 4]; 10] = [
    [0.0, 0.0, 0.0, 0.0],
    [0.71986, 0.0, 0.0, 0.0],
    [1.4468, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, -11.198, 0.0, 4.3523],
    [0.0, 0.0, 204.28, 0.0],
    [0.0, 0.0, 0.0, 0.0],
    [-3.5204, 0.0, -7.5159, 0.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 2.9241, 0.0, 11.712],
];

/// Default sample period, 50 Hz. The fastest hover mode (12.9 rad/s) is
/// sampled about 24 times per period.
pub const DEFAULT_STEP: f64 = 0.02;

/// Continuous-time LTI model `xdot = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel<T> {
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub c: Matrix<T>,
    pub d: Matrix<T>,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
}

impl<T: Real> LtiModel<T> {
    pub fn new(
        a: Matrix<T>,
        b: Matrix<T>,
        c: Matrix<T>,
        d: Matrix<T>,
        state_labels: Vec<String>,
        input_labels: Vec<String>,
    ) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() {
            return Err(Error::BadShape("state matrix must be square".into()));
        }
        if b.rows() != n || c.cols() != n || d.rows() != c.rows() || d.cols() != b.cols() {
            return Err(Error::BadShape("inconsistent state-space dimensions".into()));
        }
        if state_labels.len() != n || input_labels.len() != b.cols() {
            return Err(Error::BadShape("label count must match dimensions".into()));
        }
        Ok(LtiModel { a, b, c, d, state_labels, input_labels })
    }

    /// Single-state single-input model, convenient for scalar test systems.
    pub fn scalar(a: T, b: T) -> Self {
        LtiModel {
            a: Matrix::new(1, 1, vec![a]),
            b: Matrix::new(1, 1, vec![b]),
            c: Matrix::identity(1),
            d: Matrix::zeros(1, 1),
            state_labels: vec!["x".into()],
            input_labels: vec!["u".into()],
        }
    }

    pub fn n_states(&self) -> usize {
        self.a.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.cols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.rows()
    }

    pub fn output_labels(&self) -> Vec<String> {
        // C = identity everywhere this crate builds models, so outputs carry
        // the state names.
        if self.n_outputs() == self.n_states() {
            self.state_labels.clone()
        } else {
            (0..self.n_outputs()).map(|i| format!("y{i}")).collect()
        }
    }
}

/// The numeric hover model: `C = I`, `D = 0`, states and inputs labeled
/// canonically.
pub fn hover_model<T: Real>() -> LtiModel<T> {
    let a = Matrix::from_fn(10, 10, |i, j| T::c(HOVER_A[i][j]));
    let b = Matrix::from_fn(10, 4, |i, j| T::c(HOVER_B[i][j]));
    LtiModel {
        a,
        b,
        c: Matrix::identity(10),
        d: Matrix::zeros(10, 4),
        state_labels: STATE_LABELS.iter().map(|s| s.to_string()).collect(),
        input_labels: INPUT_LABELS.iter().map(|s| s.to_string()).collect(),
    }
}

/// State derivative `A x + B u`.
pub fn derivative<T: Real>(model: &LtiModel<T>, x: &[T], u: &[T]) -> Result<Vec<T>> {
    if x.len() != model.n_states() || u.len() != model.n_inputs() {
        return Err(Error::BadShape(format!(
            "state/input length {}/{} does not match model {}/{}",
            x.len(),
            u.len(),
            model.n_states(),
            model.n_inputs()
        )));
    }
    let ax = model.a.matvec(x);
    let bu = model.b.matvec(u);
    Ok(ax.iter().zip(&bu).map(|(&p, &q)| p + q).collect())
}

/// Exact zero-order-hold discretization of an LTI model.
#[derive(Debug, Clone)]
pub struct DiscretePair<T> {
    pub ad: Matrix<T>,
    pub bd: Matrix<T>,
    pub step: T,
}

/// Discretize by the augmented-matrix exponential
/// `[Ad Bd; 0 I] = expm(h [A B; 0 0])`, exact for inputs held constant over
/// each sample interval.
pub fn discretize_zoh<T: Real>(model: &LtiModel<T>, h: T) -> Result<DiscretePair<T>> {
    assert!(h > T::zero(), "sample period must be positive");
    let n = model.n_states();
    let m = model.n_inputs();
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.set_block(0, 0, &model.a.scale(h));
    aug.set_block(0, n, &model.b.scale(h));
    let e = expm(&aug)?;
    Ok(DiscretePair { ad: e.block(0, 0, n, n), bd: e.block(0, n, n, m), step: h })
}

/// Time-indexed simulation record at a fixed step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub step: T,
    pub times: Vec<T>,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
    /// One row per step.
    pub inputs: Matrix<T>,
    /// State at each step (before the update), one row per step.
    pub states: Matrix<T>,
    /// `y = C x + D u`, one row per step. Dataset synthesis replaces these
    /// with noisy measurements.
    pub outputs: Matrix<T>,
}

impl<T: Real> Trace<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV serialization: header `t,<inputs>,<outputs>`, one row per step,
    /// 17 significant digits so values round-trip exactly.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        write!(w, "t")?;
        for l in &self.input_labels {
            write!(w, ",{l}")?;
        }
        for l in &self.output_labels {
            write!(w, ",{l}")?;
        }
        writeln!(w)?;
        for k in 0..self.len() {
            write!(w, "{:.16e}", self.times[k].as_f64())?;
            for j in 0..self.inputs.cols() {
                write!(w, ",{:.16e}", self.inputs[(k, j)].as_f64())?;
            }
            for j in 0..self.outputs.cols() {
                write!(w, ",{:.16e}", self.outputs[(k, j)].as_f64())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Parse a trace written by [`Trace::write_csv`]. `n_inputs` splits the
    /// columns; the state matrix is set equal to the outputs (valid for the
    /// identity output map used throughout).
    pub fn read_csv(text: &str, n_inputs: usize) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 2 + n_inputs || cols[0] != "t" {
            return Err(Error::Parse("bad trace header".into()));
        }
        let input_labels: Vec<String> = cols[1..1 + n_inputs].iter().map(|s| s.to_string()).collect();
        let output_labels: Vec<String> = cols[1 + n_inputs..].iter().map(|s| s.to_string()).collect();
        let n_outputs = output_labels.len();
        let mut times = Vec::new();
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 1 + n_inputs + n_outputs {
                return Err(Error::Parse(format!("row {} has {} fields", lineno + 2, fields.len())));
            }
            let parse = |s: &str| -> Result<T> {
                s.parse::<f64>().map(T::c).map_err(|e| Error::Parse(format!("{s}: {e}")))
            };
            times.push(parse(fields[0])?);
            for f in &fields[1..1 + n_inputs] {
                inputs.push(parse(f)?);
            }
            for f in &fields[1 + n_inputs..] {
                outputs.push(parse(f)?);
            }
        }
        if times.is_empty() {
            return Err(Error::Parse("trace has no rows".into()));
        }
        let n = times.len();
        let step = if n > 1 { times[1] - times[0] } else { T::c(DEFAULT_STEP) };
        let inputs = Matrix::new(n, n_inputs, inputs);
        let outputs = Matrix::new(n, n_outputs, outputs);
        Ok(Trace {
            step,
            times,
            input_labels,
            output_labels,
            states: outputs.clone(),
            inputs,
            outputs,
        })
    }
}

/// Simulate the ZOH-discretized model from `x0` under `inputs` (one row per
/// step). The state recorded at step k is the state before applying input k.
pub fn simulate<T: Real>(
    model: &LtiModel<T>,
    x0: &[T],
    inputs: &Matrix<T>,
    h: T,
) -> Result<Trace<T>> {
    let n_steps = inputs.rows();
    assert!(n_steps >= 1, "need at least one step");
    if x0.len() != model.n_states() || inputs.cols() != model.n_inputs() {
        return Err(Error::BadShape("x0/inputs do not match model dimensions".into()));
    }
    let disc = discretize_zoh(model, h)?;
    let n = model.n_states();
    let l = model.n_outputs();
    let mut states = Matrix::zeros(n_steps, n);
    let mut outputs = Matrix::zeros(n_steps, l);
    let mut x = x0.to_vec();
    for k in 0..n_steps {
        let u = inputs.row(k);
        for (j, &xj) in x.iter().enumerate() {
            states[(k, j)] = xj;
        }
        let y_c = model.c.matvec(&x);
        let y_d = model.d.matvec(u);
        for j in 0..l {
            outputs[(k, j)] = y_c[j] + y_d[j];
        }
        let xa = disc.ad.matvec(&x);
        let xb = disc.bd.matvec(u);
        x = xa.iter().zip(&xb).map(|(&p, &q)| p + q).collect();
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Overflow(format!("state non-finite at step {k}")));
        }
    }
    Ok(Trace {
        step: h,
        times: (0..n_steps).map(|k| T::of_usize(k) * h).collect(),
        input_labels: model.input_labels.clone(),
        output_labels: model.output_labels(),
        inputs: inputs.clone(),
        states,
        outputs,
    })
}

/// One eigenvalue of the plant with its damping ratio and natural frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeRecord<T> {
    pub eigenvalue: Complex<T>,
    pub damping: T,
    pub frequency: T,
}

/// Eigenvalues of the state matrix with `damping = -Re/|lambda|` and
/// `frequency = |lambda|` (damping defined as 0 for a zero eigenvalue).
pub fn eigen_report<T: Real>(model: &LtiModel<T>) -> Result<Vec<ModeRecord<T>>> {
    let eigs = eigenvalues(&model.a)?;
    Ok(eigs
        .into_iter()
        .map(|e| {
            let freq = (e.re * e.re + e.im * e.im).sqrt();
            let damping = if freq > T::zero() { -e.re / freq } else { T::zero() };
            ModeRecord { eigenvalue: e, damping, frequency: freq }
        })
        .collect())
}

/// Complex matrix stored as real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    pub re: Matrix<T>,
    pub im: Matrix<T>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn at(&self, i: usize, j: usize) -> Complex<T> {
        Complex::new(self.re[(i, j)], self.im[(i, j)])
    }
}

/// Evaluate `G(s) = C (sI - A)^{-1} B + D` at one complex frequency by a
/// real-embedded linear solve.
pub fn transfer_at<T: Real>(model: &LtiModel<T>, s: Complex<T>) -> Result<ComplexMatrix<T>> {
    let n = model.n_states();
    let m = model.n_inputs();
    // (P + iQ)(Xr + iXi) = B with P = Re(s) I - A, Q = Im(s) I
    let mut big = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let p = if i == j { s.re - model.a[(i, j)] } else { -model.a[(i, j)] };
            big[(i, j)] = p;
            big[(n + i, n + j)] = p;
        }
        big[(i, n + i)] = -s.im;
        big[(n + i, i)] = s.im;
    }
    let mut rhs = Matrix::zeros(2 * n, m);
    rhs.set_block(0, 0, &model.b);
    let x = lu_solve(&big, &rhs)?;
    let xr = x.block(0, 0, n, m);
    let xi = x.block(n, 0, n, m);
    Ok(ComplexMatrix {
        re: model.c.matmul(&xr).add(&model.d),
        im: model.c.matmul(&xi),
    })
}

/// Hover state in the canonical ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector<T> {
    pub u: T,
    pub w: T,
    pub q: T,
    pub theta: T,
    pub a1s: T,
    pub v: T,
    pub p: T,
    pub r: T,
    pub phi: T,
    pub b1s: T,
}

impl<T: Real> StateVector<T> {
    pub fn zero() -> Self {
        let z = T::zero();
        StateVector { u: z, w: z, q: z, theta: z, a1s: z, v: z, p: z, r: z, phi: z, b1s: z }
    }

    pub fn to_vec(self) -> Vec<T> {
        vec![self.u, self.w, self.q, self.theta, self.a1s, self.v, self.p, self.r, self.phi, self.b1s]
    }

    pub fn from_slice(x: &[T]) -> Self {
        assert_eq!(x.len(), 10);
        StateVector {
            u: x[0],
            w: x[1],
            q: x[2],
            theta: x[3],
            a1s: x[4],
            v: x[5],
            p: x[6],
            r: x[7],
            phi: x[8],
            b1s: x[9],
        }
    }
}

/// Control perturbations about hover trim, canonical order
/// `[collective, longitudinal, pedal, lateral]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlVector<T> {
    pub collective: T,
    pub longitudinal: T,
    pub pedal: T,
    pub lateral: T,
}

/// Full stick ranges: collective [0,1], the cyclics and pedal [-1,1].
pub const CONTROL_RANGES: [(f64, f64); 4] = [(0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)];

/// Hover trim point inside the stick ranges; model inputs are deviations
/// from it.
pub const CONTROL_TRIM: [f64; 4] = [0.5, 0.0, 0.0, 0.0];

/// Per-channel limits on the perturbation inputs: stick range shifted by trim.
pub fn perturbation_limits<T: Real>() -> [(T, T); 4] {
    let mut out = [(T::zero(), T::zero()); 4];
    for (k, o) in out.iter_mut().enumerate() {
        *o = (T::c(CONTROL_RANGES[k].0 - CONTROL_TRIM[k]), T::c(CONTROL_RANGES[k].1 - CONTROL_TRIM[k]));
    }
    out
}

impl<T: Real> ControlVector<T> {
    pub fn zero() -> Self {
        let z = T::zero();
        ControlVector { collective: z, longitudinal: z, pedal: z, lateral: z }
    }

    pub fn to_vec(self) -> Vec<T> {
        vec![self.collective, self.longitudinal, self.pedal, self.lateral]
    }

    pub fn from_slice(u: &[T]) -> Self {
        assert_eq!(u.len(), 4);
        ControlVector { collective: u[0], longitudinal: u[1], pedal: u[2], lateral: u[3] }
    }

    /// True when trim plus perturbation stays inside the stick ranges.
    pub fn within_ranges(&self) -> bool {
        let lims = perturbation_limits::<T>();
        self.to_vec().iter().zip(&lims).all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }
}

/// Mass and inertia of the rigid body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyParams<T> {
    pub mass: T,
    pub ixx: T,
    pub iyy: T,
    pub izz: T,
    pub gravity: T,
}

impl<T: Real> RigidBodyParams<T> {
    pub fn new(mass: T, ixx: T, iyy: T, izz: T) -> Self {
        RigidBodyParams { mass, ixx, iyy, izz, gravity: T::c(9.8) }
    }
}

/// Nonlinear rigid-body equations of motion solved for the derivatives of
/// `(u, v, w, p, q, r, phi, theta, psi)`:
///
/// ```text
/// udot   = X/m + r v - q w - g sin(theta)
/// vdot   = Y/m - r u + p w + g sin(phi) cos(theta)
/// wdot   = -Z/m - g cos(phi) cos(theta) - q u + p v
/// pdot   = (L + (Iyy - Izz) q r) / Ixx
/// qdot   = (M + (Izz - Ixx) p r) / Iyy
/// rdot   = (N + (Ixx - Iyy) p q) / Izz
/// phidot = p + (q sin(phi) + r cos(phi)) tan(theta)
/// thetadot = q cos(phi) - r sin(phi)
/// psidot = (q sin(phi) + r cos(phi)) sec(theta)
/// ```
///
/// The translational sign convention (note `wdot = -Z/m - ...`) is kept as
/// given; hover equilibrium is `Z = -m g` with everything else zero.
pub fn rigid_body_derivative<T: Real>(
    params: &RigidBodyParams<T>,
    forces: [T; 3],
    moments: [T; 3],
    state: &[T; 9],
) -> Result<[T; 9]> {
    let [u, v, w, p, q, r, phi, theta, _psi] = *state;
    let half_pi = T::c(std::f64::consts::FRAC_PI_2);
    if theta.abs() >= half_pi - T::c(1e-6) {
        return Err(Error::GimbalProximity(theta.as_f64()));
    }
    let [fx, fy, fz] = forces;
    let [ml, mm, mn] = moments;
    let m = params.mass;
    let g = params.gravity;
    let (sin_phi, cos_phi) = (phi.sin(), phi.cos());
    let (sin_theta, cos_theta) = (theta.sin(), theta.cos());
    let tan_theta = sin_theta / cos_theta;

    let udot = fx / m + r * v - q * w - g * sin_theta;
    let vdot = fy / m - r * u + p * w + g * sin_phi * cos_theta;
    let wdot = -fz / m - g * cos_phi * cos_theta - q * u + p * v;
    let pdot = (ml + (params.iyy - params.izz) * q * r) / params.ixx;
    let qdot = (mm + (params.izz - params.ixx) * p * r) / params.iyy;
    let rdot = (mn + (params.ixx - params.iyy) * p * q) / params.izz;
    let phidot = p + (q * sin_phi + r * cos_phi) * tan_theta;
    let thetadot = q * cos_phi - r * sin_phi;
    let psidot = (q * sin_phi + r * cos_phi) / cos_theta;
    Ok([udot, vdot, wdot, pdot, qdot, rdot, phidot, thetadot, psidot])
}
