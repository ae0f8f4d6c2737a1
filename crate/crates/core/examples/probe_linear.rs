// scratch: linear ARX one-step floor for the longitudinal view
use hoverid::dynamics::{hover_model, simulate};
use hoverid::excitation::*;
use hoverid::linalg::{lu_solve, Matrix};
use hoverid::nn::{build_regressor, NarxConfig};
use hoverid::sysid::split_modes;

fn arx_heldout_nrmse(lon: &hoverid::sysid::ModeData<f64>, cfg: &NarxConfig) -> Vec<f64> {
    let n = lon.len();
    let split = lon.split_index;
    let t0 = cfg.min_t();
    let reg = cfg.regressor_len();
    // least squares with bias column
    let rows: Vec<usize> = (t0..split).collect();
    let mut phi = Matrix::<f64>::zeros(rows.len(), reg + 1);
    for (r, &t) in rows.iter().enumerate() {
        let p = build_regressor(&lon.outputs, &lon.inputs, t, cfg).unwrap();
        for (c, &v) in p.iter().enumerate() { phi[(r, c)] = v; }
        phi[(r, reg)] = 1.0;
    }
    let pt = phi.transpose();
    let mut ptp = pt.matmul(&phi);
    for i in 0..reg + 1 { ptp[(i, i)] += 1e-10; }
    let mut out = vec![];
    for ch in 0..cfg.n_outputs {
        let b = Matrix::column_vector(&rows.iter().map(|&t| lon.outputs[(t, ch)]).collect::<Vec<_>>());
        let w = lu_solve(&ptp, &pt.matmul(&b)).unwrap();
        // held-out
        let mut se = 0.0; let mut ys = vec![];
        for t in split..n {
            let p = build_regressor(&lon.outputs, &lon.inputs, t, cfg).unwrap();
            let mut yh = w[(reg, 0)];
            for (c, &v) in p.iter().enumerate() { yh += w[(c, 0)] * v; }
            let y = lon.outputs[(t, ch)];
            se += (y - yh) * (y - yh);
            ys.push(y);
        }
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        let sp = ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>();
        out.push(100.0 * (se / sp).sqrt());
    }
    out
}

fn main() {
    let n = 2000usize;
    let h = 0.02;
    let model = hover_model::<f64>();
    let recipes: Vec<(&str, Vec<SignalSpec>)> = vec![
        ("default(prbs .02/.2s)", doublet_prbs_recipe(&["dlong", "dcoll"], n as f64 * h)),
        ("rich prbs .05/.1s", {
            let mut s = vec![];
            for (k, ch) in ["dlong", "dcoll"].iter().enumerate() {
                s.push(SignalSpec { channel: ch.to_string(), amplitude: 0.1, start: 2.0 + 18.0 * k as f64, duration: 2.0, kind: SignalKind::Doublet });
                s.push(SignalSpec { channel: ch.to_string(), amplitude: 0.05, start: 0.0, duration: 40.0, kind: SignalKind::Prbs { bit_period: 0.1, register_len: 9 + k as u32 } });
            }
            s
        }),
    ];
    for (name, specs) in &recipes {
        let inputs = render_inputs(&model, specs, h, n).unwrap();
        let clean = simulate(&model, &[0.0; 10], &inputs, h).unwrap();
        let mut noise = vec![0.0; 10];
        for ch in 0..10 {
            let col: Vec<f64> = (0..n).map(|k| clean.outputs[(k, ch)]).collect();
            let m = col.iter().sum::<f64>() / n as f64;
            noise[ch] = 0.01 * (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
        }
        let ds = generate_dataset(&model, specs, h, n, &noise, 42).unwrap();
        let (lon, _) = split_modes(&ds).unwrap();
        println!("== {name}");
        for (na, nb) in [(2, 2), (3, 3), (4, 4), (5, 5), (6, 6), (3, 2), (4, 2)] {
            let cfg = NarxConfig::new(na, nb, 1, 4, 2).unwrap();
            let e = arx_heldout_nrmse(&lon, &cfg);
            println!("  ARX na={na} nb={nb}: theta {:.2}% u {:.2}% w {:.2}% q {:.2}%", e[0], e[1], e[2], e[3]);
        }
    }
}
