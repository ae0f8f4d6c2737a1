// scratch experiment harness (not part of the deliverable)
use hoverid::dynamics::{hover_model, simulate};
use hoverid::excitation::{doublet_prbs_recipe, generate_dataset, render_inputs};
use hoverid::lm::LmOptions;
use hoverid::nn::NarxConfig;
use hoverid::sysid::{identify, split_modes, validate};

fn main() {
    let n = 2000usize;
    let h = 0.02;
    let model = hover_model::<f64>();
    let specs = doublet_prbs_recipe(&["dlong", "dcoll"], n as f64 * h);
    let inputs = render_inputs(&model, &specs, h, n).unwrap();
    let clean = simulate(&model, &[0.0; 10], &inputs, h).unwrap();
    let mut noise = vec![0.0; 10];
    for ch in 0..10 {
        let col: Vec<f64> = (0..n).map(|k| clean.outputs[(k, ch)]).collect();
        let m = col.iter().sum::<f64>() / n as f64;
        noise[ch] = 0.01 * (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
    }
    let ds = generate_dataset(&model, &specs, h, n, &noise, 42).unwrap();
    let (lon, _) = split_modes(&ds).unwrap();
    let ds2 = generate_dataset(&model, &specs, h, n, &noise, 1042).unwrap();
    let (lon2, _) = split_modes(&ds2).unwrap();

    for (na, nb, iters, restarts) in [(2usize, 2usize, 150usize, 3usize), (2, 2, 300, 3), (3, 3, 150, 3), (3, 3, 300, 3)] {
        let cfg = NarxConfig::new(na, nb, 1, 4, 2).unwrap();
        let opts = LmOptions { max_iters: iters, ..LmOptions::default() };
        let t0 = std::time::Instant::now();
        let plant = identify(&lon, cfg, &[10], &opts, restarts, 7).unwrap();
        let el = t0.elapsed();
        let rep = validate(&plant, &lon.test_view(), 25).unwrap();
        let rep2 = validate(&plant, &lon2, 25).unwrap();
        print!("na={na} nb={nb} it={iters} r={restarts} [{el:.0?}] cost {:.2e} term {:?} | heldout NRMSE%:",
            plant.training.fit.cost, plant.training.fit.termination);
        for o in &rep.outputs { print!(" {:.2}", 100.0 * o.nrmse_one_step); }
        print!(" | free-run%:");
        for o in &rep.outputs { print!(" {:.0}", 100.0 * o.nrmse_free_run); }
        // 200-step free-run window (4 s), MRC-relevant
        {
            use hoverid::linalg::Matrix;
            let t0 = plant.narx.cfg.min_t();
            let tv = lon.test_view();
            let m200 = 200 + t0;
            let u = tv.inputs.block(0, 0, m200, 2);
            let yi = tv.outputs.block(0, 0, t0, 4);
            let fr = plant.narx.free_run(&u, &yi).unwrap();
            print!(" | fr200%:");
            for ch in 0..4 {
                let y: Vec<f64> = (t0..m200).map(|t| tv.outputs[(t, ch)]).collect();
                let e: Vec<f64> = (t0..m200).map(|t| tv.outputs[(t, ch)] - fr[(t, ch)]).collect();
                let m = y.iter().sum::<f64>() / y.len() as f64;
                let sp = y.iter().map(|v| (v - m) * (v - m)).sum::<f64>().sqrt();
                let se = e.iter().map(|v| v * v).sum::<f64>().sqrt();
                print!(" {:.0}", 100.0 * se / sp);
            }
            let _ = Matrix::<f64>::zeros(1, 1);
        }
        print!(" | indep max|cross|:");
        for o in &rep2.outputs {
            let mc = o.cross_correlation.iter().flat_map(|(_, v)| v.iter()).fold(0.0f64, |a, &b| a.max(b.abs()));
            print!(" {:.3}", mc);
        }
        println!(" (band {:.3})", rep2.confidence_band);
    }
}
