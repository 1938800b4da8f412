use pcgscreen::dataio::{load_annotations, load_manifest, load_recording, Label};
use pcgscreen::learn::rank_sum_test;
use pcgscreen::spectral::welch_psd;
use pcgscreen::synth::{beat_onsets, synth_dataset, synth_dataset_with_heldout, synth_subject, SynthParams};
use proptest::prelude::*;

const RAW_FS: f64 = 7812.5;

/// Mean Welch density between two frequencies.
fn band_power(x: &[f64], lo: f64, hi: f64) -> f64 {
    let psd = welch_psd(x, RAW_FS, 2048, 0.5).unwrap();
    let picked: Vec<f64> = psd
        .freqs_hz
        .iter()
        .zip(&psd.density)
        .filter(|(f, _)| (lo..=hi).contains(*f))
        .map(|(_, p)| *p)
        .collect();
    picked.iter().sum::<f64>() / picked.len() as f64
}

#[test]
fn recordings_have_the_fixed_layout_and_repeat() {
    let params = SynthParams::default();
    let (a, ann) = synth_subject("x1", Label::Cad, &params, 11).unwrap();
    assert_eq!(a.n_channels(), 7);
    assert_eq!(a.n_samples(), 78125);
    assert_eq!(a.fs_hz, RAW_FS);
    assert_eq!(ann.spans.len(), 3);
    let (b, _) = synth_subject("x1", Label::Cad, &params, 11).unwrap();
    assert_eq!(a, b);
    let (c, _) = synth_subject("x1", Label::Cad, &params, 12).unwrap();
    assert_ne!(a.channels, c.channels);
    let peak = a.channels.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak <= 1.0);
}

#[test]
fn murmur_raises_band_power_for_matched_seeds() {
    let params = SynthParams::default();
    for seed in 0..6 {
        let (cad, _) = synth_subject("p", Label::Cad, &params, seed).unwrap();
        let (normal, _) = synth_subject("p", Label::Normal, &params, seed).unwrap();
        for ch in 0..7 {
            let (pc, pn) = (
                band_power(&cad.channels[ch], 200.0, 600.0),
                band_power(&normal.channels[ch], 200.0, 600.0),
            );
            assert!(pc > pn, "seed {seed} channel {}: {pc} <= {pn}", ch + 1);
        }
    }
}

#[test]
fn no_murmur_means_no_class_difference() {
    let params = SynthParams {
        murmur_rel_power: 0.0,
        ..SynthParams::default()
    };
    let ds = synth_dataset(40, &params, 77).unwrap();
    assert_eq!(ds.recordings.len(), 80);
    assert_eq!(ds.annotations.spans.len(), 240);
    let power = |label: Label| -> Vec<f64> {
        ds.recordings
            .iter()
            .zip(&ds.manifest.entries)
            .filter(|(_, e)| e.label == label)
            .map(|(r, _)| band_power(&r.channels[1], 200.0, 600.0))
            .collect()
    };
    let p = rank_sum_test(&power(Label::Cad), &power(Label::Normal)).unwrap().p_value;
    assert!(p > 0.05, "p = {p}");
}

#[test]
fn datasets_are_balanced_and_seeded() {
    let params = SynthParams::default();
    let a = synth_dataset_with_heldout(3, 2, &params, 5).unwrap();
    assert_eq!(a.manifest.count(Label::Cad), 5);
    assert_eq!(a.manifest.count(Label::Normal), 5);
    let b = synth_dataset_with_heldout(3, 2, &params, 5).unwrap();
    assert_eq!(a.recordings, b.recordings);
    let c = synth_dataset_with_heldout(3, 2, &params, 6).unwrap();
    assert_eq!(c.recordings.len(), a.recordings.len());
    assert_ne!(c.recordings[0].channels, a.recordings[0].channels);

    let dir = tempfile::tempdir().unwrap();
    let (m, ann) = a.write(dir.path()).unwrap();
    let manifest = load_manifest(&m).unwrap();
    assert_eq!(manifest.entries.len(), 10);
    assert_eq!(load_annotations(&ann, true).unwrap().spans.len(), 30);
    let back = load_recording(&manifest.entries[0].path).unwrap();
    // stored as 32-bit floats
    let worst = back
        .channels
        .iter()
        .flatten()
        .zip(a.recordings[0].channels.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    assert!(worst <= 6e-8, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn each_epoch_spans_two_beats(rate in 45.0f64..110.0, seed in any::<u64>()) {
        let params = SynthParams { heart_rate_bpm: rate, ..SynthParams::default() };
        let (_, ann) = synth_subject("q", Label::Normal, &params, seed).unwrap();
        let onsets: Vec<usize> = beat_onsets(rate).iter().map(|t| (t * 2000.0).round() as usize).collect();
        for span in &ann.spans {
            let inside = onsets.iter().filter(|&&o| o >= span.start_sample && o < span.end_sample).count();
            prop_assert_eq!(inside, 2);
        }
    }
}

#[test]
fn invalid_bands_are_rejected() {
    let params = SynthParams {
        murmur_band_hz: (600.0, 200.0),
        ..SynthParams::default()
    };
    assert!(synth_subject("z", Label::Cad, &params, 0).is_err());
    let params = SynthParams {
        s1_band_hz: (20.0, 5000.0),
        ..SynthParams::default()
    };
    assert!(synth_subject("z", Label::Cad, &params, 0).is_err());
    assert!(synth_dataset(0, &SynthParams::default(), 0).is_err());
}
