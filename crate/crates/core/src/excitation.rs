//! Deterministic excitation signals and dataset synthesis. The published
//! flight data is unavailable, so identification runs on simulated traces
//! excited by doublets, chirps, and PRBS sequences.

use crate::dynamics::{perturbation_limits, simulate, LtiModel, Trace, INPUT_LABELS};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Pcg;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Signal shape plus its kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// +amplitude for the first half of the duration, -amplitude for the
    /// second half, zero elsewhere.
    Doublet,
    /// Sine with frequency swept linearly from `f0_hz` to `f1_hz` over the
    /// duration.
    Chirp { f0_hz: f64, f1_hz: f64 },
    /// Maximal-length shift-register sequence scaled to +-amplitude, one bit
    /// every `bit_period` seconds.
    Prbs { bit_period: f64, register_len: u32 },
    /// Constant amplitude over the window.
    Constant,
}

/// One excitation component on one input channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub channel: String,
    pub amplitude: f64,
    /// Window start, seconds.
    pub start: f64,
    /// Window length, seconds.
    pub duration: f64,
    pub kind: SignalKind,
}

// Maximal-length LFSR feedback taps (1-based bit positions) for register
// lengths 2..=16.
const LFSR_TAPS: [&[u32]; 15] = [
    &[2, 1],
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 6, 4, 1],
    &[13, 4, 3, 1],
    &[14, 5, 3, 1],
    &[15, 14],
    &[16, 15, 13, 4],
];

/// Generate the first `n_bits` of the maximal-length sequence for the given
/// register length (all-ones initial state). Period is `2^len - 1` bits.
fn mls_bits(register_len: u32, n_bits: usize) -> Result<Vec<bool>> {
    if !(2..=16).contains(&register_len) {
        return Err(Error::BadSpec(format!("prbs register length {register_len} outside 2..=16")));
    }
    let taps = LFSR_TAPS[(register_len - 2) as usize];
    let mask = (1u32 << register_len) - 1;
    let mut state = mask; // all ones
    let mut bits = Vec::with_capacity(n_bits);
    for _ in 0..n_bits {
        bits.push((state >> (register_len - 1)) & 1 == 1);
        let fb = taps.iter().fold(0u32, |acc, &t| acc ^ (state >> (t - 1))) & 1;
        state = ((state << 1) | fb) & mask;
    }
    Ok(bits)
}

/// Render one signal at sample period `h`, `n` samples starting at t = 0.
/// Deterministic: equal arguments always return equal samples.
pub fn render_signal<T: Real>(spec: &SignalSpec, h: T, n: usize) -> Result<Vec<T>> {
    assert!(h > T::zero(), "sample period must be positive");
    if spec.duration <= 0.0 {
        return Err(Error::BadSpec(format!("nonpositive duration {}", spec.duration)));
    }
    let amp = T::c(spec.amplitude);
    let start = spec.start;
    let dur = spec.duration;

    let prbs_bits = match spec.kind {
        SignalKind::Prbs { bit_period, register_len } => {
            if bit_period <= 0.0 {
                return Err(Error::BadSpec(format!("nonpositive prbs bit period {bit_period}")));
            }
            Some((bit_period, mls_bits(register_len, (dur / bit_period).ceil() as usize + 1)?))
        }
        _ => None,
    };

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = (T::of_usize(k) * h).as_f64();
        let tau = t - start;
        if tau < 0.0 || tau >= dur {
            out.push(T::zero());
            continue;
        }
        let v = match &spec.kind {
            SignalKind::Constant => amp,
            SignalKind::Doublet => {
                if tau < dur / 2.0 {
                    amp
                } else {
                    -amp
                }
            }
            SignalKind::Chirp { f0_hz, f1_hz } => {
                let phase = 2.0
                    * std::f64::consts::PI
                    * (f0_hz * tau + (f1_hz - f0_hz) * tau * tau / (2.0 * dur));
                amp * T::c(phase.sin())
            }
            SignalKind::Prbs { .. } => {
                let (bit_period, bits) = prbs_bits.as_ref().expect("prbs bits prepared");
                let idx = (tau / bit_period) as usize;
                if bits[idx % bits.len()] {
                    amp
                } else {
                    -amp
                }
            }
        };
        out.push(v);
    }
    Ok(out)
}

/// A simulated trace with measurement noise on the outputs, ready for
/// identification.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    /// `trace.outputs` holds the noisy measurements; inputs are noise-free.
    pub trace: Trace<T>,
    pub noise_std: Vec<T>,
    pub seed: u64,
    /// First test-split sample; samples before it are the training split.
    pub split_index: usize,
    pub specs: Vec<SignalSpec>,
}

/// Sum the rendered signals into the model's input matrix.
pub fn render_inputs<T: Real>(
    model: &LtiModel<T>,
    specs: &[SignalSpec],
    h: T,
    n: usize,
) -> Result<Matrix<T>> {
    let mut inputs = Matrix::zeros(n.max(1), model.n_inputs());
    for spec in specs {
        let ch = model
            .input_labels
            .iter()
            .position(|l| *l == spec.channel)
            .ok_or_else(|| Error::BadSpec(format!("unknown input channel '{}'", spec.channel)))?;
        let samples = render_signal(spec, h, n)?;
        for (k, s) in samples.into_iter().enumerate() {
            inputs[(k, ch)] = inputs[(k, ch)] + s;
        }
    }
    Ok(inputs)
}

/// Simulate the model under the summed signals and add zero-mean Gaussian
/// noise (seeded, one deterministic pass in time-major order) to the
/// outputs. The split index is recorded at 70% of `n`.
pub fn generate_dataset<T: Real>(
    model: &LtiModel<T>,
    specs: &[SignalSpec],
    h: T,
    n: usize,
    noise_std: &[T],
    seed: u64,
) -> Result<Dataset<T>> {
    assert!(n >= 2, "dataset needs at least two samples");
    if noise_std.len() != model.n_outputs() {
        return Err(Error::BadShape(format!(
            "noise_std has {} entries for {} outputs",
            noise_std.len(),
            model.n_outputs()
        )));
    }
    let inputs = render_inputs(model, specs, h, n)?;

    // summed excitation must respect the stick ranges on the canonical
    // channels
    let lims = perturbation_limits::<T>();
    for (j, label) in model.input_labels.iter().enumerate() {
        if let Some(ci) = INPUT_LABELS.iter().position(|l| l == label) {
            let (lo, hi) = lims[ci];
            for k in 0..n {
                let v = inputs[(k, j)];
                if v < lo || v > hi {
                    return Err(Error::BadSpec(format!(
                        "summed excitation on {label} leaves its range at sample {k}: {}",
                        v.as_f64()
                    )));
                }
            }
        }
    }

    let x0 = vec![T::zero(); model.n_states()];
    let mut trace = simulate(model, &x0, &inputs, h)?;

    let mut rng = Pcg::new(seed);
    for k in 0..n {
        for j in 0..model.n_outputs() {
            let e: T = rng.gaussian();
            trace.outputs[(k, j)] = trace.outputs[(k, j)] + noise_std[j] * e;
        }
    }

    Ok(Dataset {
        trace,
        noise_std: noise_std.to_vec(),
        seed,
        split_index: (n * 7) / 10,
        specs: specs.to_vec(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    seed: u64,
    h: f64,
    noise_std: Vec<f64>,
    split_index: usize,
    n_inputs: usize,
    specs: Vec<SignalSpec>,
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.is_empty()
    }

    /// JSON sidecar carrying everything the CSV does not.
    pub fn sidecar_json(&self) -> String {
        let sc = Sidecar {
            seed: self.seed,
            h: self.trace.step.as_f64(),
            noise_std: self.noise_std.iter().map(|s| s.as_f64()).collect(),
            split_index: self.split_index,
            n_inputs: self.trace.inputs.cols(),
            specs: self.specs.clone(),
        };
        serde_json::to_string_pretty(&sc).expect("sidecar serializes")
    }

    pub fn save(&self, csv_path: &std::path::Path, json_path: &std::path::Path) -> Result<()> {
        let mut csv = std::fs::File::create(csv_path)?;
        self.trace.write_csv(&mut csv)?;
        std::fs::write(json_path, self.sidecar_json())?;
        Ok(())
    }

    pub fn load(csv_path: &std::path::Path, json_path: &std::path::Path) -> Result<Self> {
        let sc: Sidecar = serde_json::from_str(&std::fs::read_to_string(json_path)?)
            .map_err(|e| Error::Parse(format!("sidecar: {e}")))?;
        let trace = Trace::read_csv(&std::fs::read_to_string(csv_path)?, sc.n_inputs)?;
        Ok(Dataset {
            trace,
            noise_std: sc.noise_std.iter().map(|&s| T::c(s)).collect(),
            seed: sc.seed,
            split_index: sc.split_index,
            specs: sc.specs,
        })
    }
}

/// Default identification recipe: staggered doublets per channel in both
/// the training (first 70%) and test (last 30%) windows, plus a
/// low-amplitude PRBS per channel with distinct register lengths.
pub fn doublet_prbs_recipe(channels: &[&str], horizon_s: f64) -> Vec<SignalSpec> {
    let mut specs = Vec::new();
    let test_start = 0.7 * horizon_s;
    for (k, ch) in channels.iter().enumerate() {
        for start in [2.0 + 6.0 * k as f64, test_start + 1.0 + 6.0 * k as f64] {
            if start + 2.0 < horizon_s {
                specs.push(SignalSpec {
                    channel: ch.to_string(),
                    amplitude: 0.1,
                    start,
                    duration: 2.0,
                    kind: SignalKind::Doublet,
                });
            }
        }
        specs.push(SignalSpec {
            channel: ch.to_string(),
            amplitude: 0.02,
            start: 0.0,
            duration: horizon_s,
            kind: SignalKind::Prbs { bit_period: 0.2, register_len: 9 + k as u32 },
        });
    }
    specs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::hover_model;

    fn doublet(channel: &str, amplitude: f64, start: f64, duration: f64) -> SignalSpec {
        SignalSpec {
            channel: channel.into(),
            amplitude,
            start,
            duration,
            kind: SignalKind::Doublet,
        }
    }

    #[test]
    fn constant_zero_amplitude_all_zeros() {
        let spec = SignalSpec {
            channel: "dcoll".into(),
            amplitude: 0.0,
            start: 0.0,
            duration: 10.0,
            kind: SignalKind::Constant,
        };
        let s: Vec<f64> = render_signal(&spec, 0.5, 30).unwrap();
        assert!(s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn doublet_piecewise_values() {
        let spec = doublet("dlong", 0.1, 1.0, 2.0);
        let s: Vec<f64> = render_signal(&spec, 0.5, 8).unwrap();
        // t = 0, 0.5 outside; 1.0, 1.5 positive; 2.0, 2.5 negative; 3.0+ outside
        assert_eq!(s, vec![0.0, 0.0, 0.1, 0.1, -0.1, -0.1, 0.0, 0.0]);
    }

    #[test]
    fn prbs_period_15_for_4_bit_register() {
        let bits = mls_bits(4, 60).unwrap();
        // period exactly 15: repeats at lag 15, at no smaller lag
        for lag in 1..15usize {
            assert!((0..45).any(|i| bits[i] != bits[i + lag]), "period divides {lag}");
        }
        assert!((0..45).all(|i| bits[i] == bits[i + 15]));
        // autocorrelation of the +-1 sequence over full periods peaks at 15
        let x: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let corr = |lag: usize| (0..30).map(|i| x[i] * x[i + lag]).sum::<f64>() / 30.0;
        assert!((corr(15) - 1.0).abs() < 1e-12);
        for lag in 1..15 {
            assert!(corr(lag) < 0.5, "lag {lag} corr {}", corr(lag));
        }
    }

    #[test]
    fn all_register_lengths_are_maximal() {
        for r in 2..=16u32 {
            let period = (1usize << r) - 1;
            let bits = mls_bits(r, 2 * period).unwrap();
            assert!((0..period).all(|i| bits[i] == bits[i + period]), "register {r}");
            // a maximal sequence has 2^(r-1) ones per period
            let ones = bits[..period].iter().filter(|&&b| b).count();
            assert_eq!(ones, 1 << (r - 1), "register {r} ones count");
        }
    }

    #[test]
    fn render_is_deterministic() {
        let spec = SignalSpec {
            channel: "dlat".into(),
            amplitude: 0.05,
            start: 0.3,
            duration: 12.0,
            kind: SignalKind::Chirp { f0_hz: 0.1, f1_hz: 2.0 },
        };
        let a: Vec<f64> = render_signal(&spec, 0.02, 700).unwrap();
        let b: Vec<f64> = render_signal(&spec, 0.02, 700).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_specs_rejected() {
        let mut spec = doublet("dcoll", 0.1, 0.0, -1.0);
        assert!(matches!(render_signal::<f64>(&spec, 0.02, 10), Err(Error::BadSpec(_))));
        spec.duration = 1.0;
        spec.kind = SignalKind::Prbs { bit_period: 0.1, register_len: 1 };
        assert!(matches!(render_signal::<f64>(&spec, 0.02, 10), Err(Error::BadSpec(_))));
    }

    #[test]
    fn zero_signals_zero_noise_gives_zero_dataset() {
        let m = hover_model::<f64>();
        let ds = generate_dataset(&m, &[], 0.02, 50, &[0.0; 10], 7).unwrap();
        assert_eq!(ds.trace.outputs.max_abs(), 0.0);
        assert_eq!(ds.split_index, 35);
    }

    #[test]
    fn same_seed_byte_identical() {
        let m = hover_model::<f64>();
        let specs = doublet_prbs_recipe(&["dcoll", "dlong"], 8.0);
        let noise = [0.01; 10];
        let a = generate_dataset(&m, &specs, 0.02, 400, &noise, 42).unwrap();
        let b = generate_dataset(&m, &specs, 0.02, 400, &noise, 42).unwrap();
        assert_eq!(a.trace.to_csv_string(), b.trace.to_csv_string());
        assert_eq!(a.sidecar_json(), b.sidecar_json());
        let c = generate_dataset(&m, &specs, 0.02, 400, &noise, 43).unwrap();
        assert_ne!(a.trace.to_csv_string(), c.trace.to_csv_string());
    }

    #[test]
    fn zero_noise_matches_simulation_exactly() {
        let m = hover_model::<f64>();
        let specs = doublet_prbs_recipe(&["dlat", "dped"], 8.0);
        let ds = generate_dataset(&m, &specs, 0.02, 400, &[0.0; 10], 9).unwrap();
        let inputs = render_inputs(&m, &specs, 0.02, 400).unwrap();
        let clean = simulate(&m, &[0.0; 10], &inputs, 0.02).unwrap();
        assert_eq!(ds.trace.outputs, clean.outputs);
    }

    #[test]
    fn noise_standard_deviation_matches_request() {
        let m = crate::dynamics::LtiModel::<f64>::scalar(-1.0, 1.0);
        let n = 10_000;
        let ds = generate_dataset(&m, &[], 0.02, n, &[0.01], 123).unwrap();
        // zero input: outputs are pure noise
        let vals: Vec<f64> = (0..n).map(|k| ds.trace.outputs[(k, 0)]).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        assert!((std - 0.01).abs() < 0.01 * 0.05, "std {std}");
    }

    #[test]
    fn range_violation_is_rejected() {
        let m = hover_model::<f64>();
        let specs = vec![doublet("dcoll", 0.7, 1.0, 2.0)]; // 0.7 > 0.5 headroom
        assert!(matches!(
            generate_dataset(&m, &specs, 0.02, 300, &[0.0; 10], 1),
            Err(Error::BadSpec(_))
        ));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = std::env::temp_dir().join("hoverid_ds_test");
        std::fs::create_dir_all(&dir).unwrap();
        let m = hover_model::<f64>();
        let specs = doublet_prbs_recipe(&["dcoll"], 6.0);
        let ds = generate_dataset(&m, &specs, 0.02, 300, &[0.005; 10], 11).unwrap();
        let csv = dir.join("ds.csv");
        let json = dir.join("ds.json");
        ds.save(&csv, &json).unwrap();
        let back = Dataset::<f64>::load(&csv, &json).unwrap();
        assert_eq!(back.trace.outputs, ds.trace.outputs);
        assert_eq!(back.split_index, ds.split_index);
        assert_eq!(back.specs, ds.specs);
        std::fs::remove_dir_all(&dir).ok();
    }
}
