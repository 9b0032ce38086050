use std::path::Path;

use anyhow::{bail, Context, Result};
use hls_lab_core::dsp::{energy, mean_square};
use hls_lab_core::stimuli::leq;
use hls_lab_core::synthesis::apply_static_filter;
use hls_lab_core::wav::{read_wav, write_wav};
use hls_lab_core::Simulator;

use crate::config::RunConfig;

/// Residual bound for `--verify-linear`, dB relative to the output energy.
const LINEAR_TOLERANCE_DB: f64 = -50.0;

fn level(x: &[f64], cal: f64) -> String {
    match leq(x, cal) {
        Ok(l) if mean_square(x) > 0.0 => format!("{l:.2} dB SPL"),
        _ => "silent".into(),
    }
}

pub fn run(cfg: &RunConfig, input: &Path, output: &Path, verify_linear: bool) -> Result<()> {
    let audio = read_wav::<f64>(input).with_context(|| format!("reading {}", input.display()))?;
    let rate = audio.info.sample_rate;
    let sim = Simulator::new(cfg.simulator_config()?, rate)?;
    if verify_linear && !sim.is_level_independent() {
        bail!("--verify-linear needs a level-independent simulation (alpha = 1 or no active loss)");
    }
    let y = sim.process(&audio.samples, rate)?.output;
    let clipped = write_wav(output, &y, audio.info).with_context(|| format!("writing {}", output.display()))?;

    let cal = cfg.cal_offset;
    println!("method: {}  profile: {}  alpha: {}", cfg.method, sim.config().profile.name(), cfg.alpha);
    println!("input Leq:  {}", level(&audio.samples, cal));
    println!("output Leq: {}", level(&y, cal));
    if mean_square(&audio.samples) > 0.0 && mean_square(&y) > 0.0 {
        println!("level change: {:+.2} dB", leq(&y, cal)? - leq(&audio.samples, cal)?);
    }
    println!("clipped samples: {clipped}");
    if clipped > 0 {
        eprintln!("warning: {clipped} samples clipped at full scale");
    }

    if verify_linear {
        let taps = sim.linear_filter()?.expect("checked level independence").taps;
        let z = apply_static_filter(&audio.samples, &taps);
        let diff: f64 = y.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
        let e = energy(&y);
        let rel = if e > 0.0 { 10.0 * (diff / e).log10() } else if diff == 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        println!("linear residual: {rel:.1} dB (limit {LINEAR_TOLERANCE_DB} dB)");
        if rel > LINEAR_TOLERANCE_DB {
            bail!("output differs from the static filter by {rel:.1} dB");
        }
    }
    Ok(())
}
