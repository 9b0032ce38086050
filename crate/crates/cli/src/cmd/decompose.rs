use std::fmt::Write;

use anyhow::Result;
use hls_lab_core::{decompose_hl, ActiveGainCalibration, AudiogramProfile, CompressionHealth, HLDecomposition};

use crate::config::RunConfig;
use hls_lab_core::stimuli::load_profile;

/// `act+pas` cells, one row per alpha, frequencies as columns.
pub fn table(profile: &AudiogramProfile<f64>, rows: &[HLDecomposition<f64>]) -> String {
    let fmt = |v: f64| {
        if v == v.round() {
            format!("{v:.0}")
        } else {
            format!("{v:.1}")
        }
    };
    let mut s = String::new();
    writeln!(s, "profile: {}   (HL_total = HL_act + HL_pas, dB)", profile.name()).unwrap();
    write!(s, "{:<10}", "f (Hz)").unwrap();
    for &f in profile.frequencies() {
        write!(s, "{:>9}", fmt(f)).unwrap();
    }
    s.push('\n');
    write!(s, "{:<10}", "HL_total").unwrap();
    for &h in profile.hearing_level() {
        write!(s, "{:>9}", fmt(h)).unwrap();
    }
    s.push('\n');
    for d in rows {
        write!(s, "{:<10}", format!("a={}", d.alpha.value())).unwrap();
        for (&a, &p) in d.hl_act.iter().zip(&d.hl_pas) {
            write!(s, "{:>9}", format!("{}+{}", fmt(a), fmt(p))).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn run(cfg: &RunConfig, alphas: &[f64], json: bool) -> Result<()> {
    let profile = load_profile::<f64>(&cfg.profile)?;
    let cal = ActiveGainCalibration::standard();
    let alphas = if alphas.is_empty() { vec![cfg.alpha] } else { alphas.to_vec() };
    let rows = alphas
        .iter()
        .map(|&a| Ok(decompose_hl(&profile, CompressionHealth::new(a)?, &cal)))
        .collect::<Result<Vec<_>>>()?;
    if json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        print!("{}", table(&profile, &rows));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_alpha_row_matches_layout() {
        let p = AudiogramProfile::age_70();
        let d = decompose_hl(&p, CompressionHealth::new(0.5).unwrap(), &ActiveGainCalibration::standard());
        let t = table(&p, &[d]);
        let row: Vec<&str> = t.lines().nth(3).unwrap().split_whitespace().skip(1).collect();
        assert_eq!(row, ["8+0", "8+0", "9+0", "10+0", "19+0", "27+16", "27+32"]);
    }

    #[test]
    fn zero_profile_is_all_zero() {
        let p = AudiogramProfile::normal();
        let d = decompose_hl(&p, CompressionHealth::new(0.3).unwrap(), &ActiveGainCalibration::standard());
        let t = table(&p, &[d]);
        assert!(t.lines().nth(3).unwrap().split_whitespace().skip(1).all(|c| c == "0+0"));
    }
}
