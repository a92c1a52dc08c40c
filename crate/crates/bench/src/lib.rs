//! Fixtures shared by the Criterion benchmarks in `benches/`.

use vocscan_core::scanner::ScanResult;
use vocscan_core::synth::{default_template_set, synth_sample, SynthConfig};
use vocscan_core::{AbundanceMatrix, ConvNet, ConvNetConfig, VocLabel};

/// A synthetic sample with all ten default compounds present.
pub fn sample(rows: usize, seed: u64) -> AbundanceMatrix {
    let cfg = SynthConfig {
        rows,
        seed,
        ..SynthConfig::default()
    };
    let templates = default_template_set(10, &cfg);
    synth_sample("bench", &templates, &[true; 10], &cfg)
        .expect("valid synthetic config")
        .0
}

/// The reference network with untrained weights; inference cost does not
/// depend on the weight values.
pub fn reference_net() -> ConvNet {
    ConvNet::init(
        80,
        411,
        &ConvNetConfig {
            targets: 10,
            ..ConvNetConfig::default()
        },
    )
    .expect("reference architecture fits 80 x 411")
}

/// A scan of `n` windows made of runs of 5 to 60 windows with labels 0..=10.
pub fn scan_of_runs(n: usize) -> ScanResult {
    let mut labels = Vec::with_capacity(n);
    let mut i = 0u64;
    while labels.len() < n {
        // cheap deterministic mixing; the distribution hardly matters here
        i = i.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let label = VocLabel(((i >> 33) % 11) as u16);
        let run = 5 + ((i >> 45) % 56) as usize;
        labels.extend(std::iter::repeat_n(label, run));
    }
    labels.truncate(n);
    ScanResult {
        sample_id: "bench".into(),
        delta: 80,
        confidences: (0..n).map(|k| 0.5 + 0.5 * ((k * 7919) % 100) as f64 / 100.0).collect(),
        rts: (0..n).map(|k| 0.5 + k as f64 / 375.0).collect(),
        labels,
    }
}
