//! CSV and summary writers. Floats use the shortest round-trip form, so
//! identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use udts_core::link::NetworkEvaluation;
use udts_core::sf::NUM_SF;
use udts_core::{Assignment, EndDevice, SpreadingFactor};

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("cannot create output directory {}", path.display()))?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.0.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn path(&self) -> &Path {
        &self.0
    }
}

pub fn metrics_csv(devices: &[EndDevice], assignment: &Assignment, eval: &NetworkEvaluation) -> String {
    let mut s = String::from("id,radial_m,slant_m,sf,p_snr,p_sir,p_s,epp_j\n");
    for ((d, sf), m) in devices.iter().zip(assignment.as_slice()).zip(&eval.metrics) {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            d.id,
            d.radial_m,
            d.slant_m,
            sf.value(),
            m.p_snr,
            m.p_sir,
            m.p_s,
            m.epp_j
        )
        .unwrap();
    }
    s
}

pub fn trace_csv(trace: &[f64]) -> String {
    let mut s = String::from("episode,avg_epp\n");
    for (i, v) in trace.iter().enumerate() {
        writeln!(s, "{},{}", i + 1, v).unwrap();
    }
    s
}

pub fn sf_trace_csv(histograms: &[[usize; NUM_SF]]) -> String {
    let mut s = String::from("episode,sf7,sf8,sf9,sf10,sf11,sf12\n");
    for (i, h) in histograms.iter().enumerate() {
        writeln!(s, "{},{},{},{},{},{},{}", i + 1, h[0], h[1], h[2], h[3], h[4], h[5]).unwrap();
    }
    s
}

pub fn sf_hist_csv(assignment: &Assignment) -> String {
    let mut s = String::from("sf,count,share\n");
    let counts = assignment.counts();
    let shares = assignment.shares();
    for sf in SpreadingFactor::ALL {
        writeln!(s, "{},{},{}", sf.value(), counts[sf.index()], shares[sf.index()]).unwrap();
    }
    s
}

pub fn curve_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("slant_m,p_s\n");
    for (d, p) in points {
        writeln!(s, "{d},{p}").unwrap();
    }
    s
}
