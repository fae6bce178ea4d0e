//! Timing probe for experiment runtimes (development aid).

use latwalk::suite::{default_manifest, run_experiment, RunOverrides};

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let m = default_manifest();
    for cfg in &m.experiments {
        if !which.is_empty() && !which.contains(&cfg.id) {
            continue;
        }
        let t = std::time::Instant::now();
        match run_experiment(cfg, &RunOverrides::default()) {
            Ok(res) => {
                println!(
                    "{:<20} {:>8.1}s pass={} metrics={}",
                    cfg.id,
                    t.elapsed().as_secs_f64(),
                    res.output.pass,
                    serde_json::to_string(&res.output.metrics).unwrap()
                );
            }
            Err(e) => println!("{:<20} ERROR: {e}", cfg.id),
        }
    }
}
