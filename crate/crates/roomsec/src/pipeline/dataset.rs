//! Synthetic sound-event corpus and the on-disk WAV-directory loader.
//!
//! The synthetic classes are parametric event templates; per-class base
//! parameters come from register tables (so repeated template kinds land
//! in well-separated registers) plus a seeded per-class jitter, and each
//! clip adds small frequency/duration/onset jitter on top. Several kinds
//! share spectral bands while differing in temporal structure, which is
//! exactly the information reverberation smears.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::PipelineError;
use crate::exec;
use crate::signal::{crop_pad, normalize_max, resample, wav, AudioClip};
use crate::util;

const RATE: u32 = 16_000;

/// A labelled corpus of one-second 16 kHz clips with index-based splits.
#[derive(Debug, Clone)]
pub struct EventDataset {
    pub classes: Vec<String>,
    /// (class id, preprocessed clip).
    pub clips: Vec<(usize, AudioClip)>,
    /// Training pool (validation is carved out of this per trial).
    pub train_pool: Vec<usize>,
    pub test: Vec<usize>,
    /// Validation subset drawn at dataset construction (dataset seed);
    /// trials draw their own via [`EventDataset::trial_split`].
    pub default_val: Vec<usize>,
    pub seed: u64,
}

impl EventDataset {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Per-trial split: 20% of the training pool becomes validation.
    pub fn trial_split(&self, trial_seed: u64) -> (Vec<usize>, Vec<usize>) {
        split_val(&self.train_pool, trial_seed)
    }

    pub fn label_of(&self, clip_index: usize) -> usize {
        self.clips[clip_index].0
    }
}

fn split_val(pool: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = pool.to_vec();
    let mut rng = util::derived_rng(seed, &[util::tag("val-split")]);
    // Fisher-Yates.
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let n_val = pool.len() / 5;
    let val: Vec<usize> = order[..n_val].to_vec();
    let train: Vec<usize> = order[n_val..].to_vec();
    (train, val)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TemplateKind {
    ToneBurst,
    HarmonicStack,
    Chirp,
    NoiseBurst,
    ClickTrain,
    AmTone,
}

const KINDS: [TemplateKind; 6] = [
    TemplateKind::ToneBurst,
    TemplateKind::HarmonicStack,
    TemplateKind::Chirp,
    TemplateKind::NoiseBurst,
    TemplateKind::ClickTrain,
    TemplateKind::AmTone,
];

/// Per-class template parameters, fixed at dataset construction.
/// `decay_tau_s` turns a sustained event into a struck one: an exponential
/// amplitude envelope inside each burst (or over the whole note).
#[derive(Debug, Clone)]
struct ClassTemplate {
    kind: TemplateKind,
    freq_a: f64,
    freq_b: f64,
    rate_hz: f64,
    duration_s: f64,
    decay_tau_s: Option<f64>,
}

/// Register tables are chosen so that class pairs collide in the exact
/// dimensions reverberation corrupts. Second-occurrence tone bursts,
/// harmonic stacks and noise bursts share their register's spectrum but
/// are struck (decaying) instead of sustained: a room tail glued onto a
/// sustained event is what a struck event looks like, and only the RIR
/// disambiguates the two. AM tones share the tone-burst carriers, the
/// first two chirp registers sweep one band in opposite directions, and
/// broadband noise bursts sit in the click trains' band.
fn class_template(kind: TemplateKind, occurrence: usize, rng: &mut ChaCha8Rng) -> ClassTemplate {
    let reg = occurrence % 3;
    let jitter = |rng: &mut ChaCha8Rng| 1.0 + rng.random_range(-0.04..0.04);
    match kind {
        TemplateKind::ToneBurst => {
            let (freq, decay) = [
                (520.0, None),
                (520.0, Some(0.035)), // struck twin of register 0
                (2_800.0, None),
            ][reg];
            ClassTemplate {
                kind,
                freq_a: freq * jitter(rng),
                freq_b: 0.0,
                rate_hz: rng.random_range(4.0..5.5), // bursts per second
                duration_s: 0.85,
                decay_tau_s: decay,
            }
        }
        TemplateKind::HarmonicStack => {
            let (f0, decay) = [
                (220.0, None),
                (220.0, Some(0.18)), // struck twin of register 0
                (640.0, None),
            ][reg];
            ClassTemplate {
                kind,
                freq_a: f0 * jitter(rng),
                freq_b: 0.0,
                rate_hz: 0.0,
                duration_s: rng.random_range(0.75..0.9),
                decay_tau_s: decay,
            }
        }
        TemplateKind::Chirp => {
            // Registers 0 and 1 sweep the same band in opposite directions.
            let (a, b) = [(500.0, 3_000.0), (3_000.0, 500.0), (800.0, 5_000.0)][reg];
            ClassTemplate {
                kind,
                freq_a: a * jitter(rng),
                freq_b: b * jitter(rng),
                rate_hz: 0.0,
                duration_s: rng.random_range(0.55..0.7),
                decay_tau_s: None,
            }
        }
        TemplateKind::NoiseBurst => {
            // Broadband like the click trains; register 1 is its struck twin.
            let (band, decay) = [
                ((300.0, 5_200.0), None),
                ((300.0, 5_200.0), Some(0.04)),
                ((900.0, 1_900.0), None),
            ][reg];
            ClassTemplate {
                kind,
                freq_a: band.0 * jitter(rng),
                freq_b: band.1 * jitter(rng),
                rate_hz: rng.random_range(3.0..4.5),
                duration_s: 0.8,
                decay_tau_s: decay,
            }
        }
        TemplateKind::ClickTrain => ClassTemplate {
            kind,
            freq_a: 0.0,
            freq_b: 0.0,
            rate_hz: [12.0, 7.0, 18.0][reg] * jitter(rng),
            duration_s: 0.85,
            decay_tau_s: None,
        },
        TemplateKind::AmTone => ClassTemplate {
            // Same carrier registers as the tone bursts.
            kind,
            freq_a: [520.0, 1_600.0, 2_800.0][reg] * jitter(rng),
            freq_b: 0.0,
            rate_hz: rng.random_range(5.0..8.0), // modulation rate
            duration_s: rng.random_range(0.7..0.85),
            decay_tau_s: None,
        },
    }
}

/// Hann-ramped edges, in place.
fn apply_ramps(samples: &mut [f64], ramp: usize) {
    let n = samples.len();
    let ramp = ramp.min(n / 2);
    for i in 0..ramp {
        let w = 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / ramp as f64).cos();
        samples[i] *= w;
        samples[n - 1 - i] *= w;
    }
}

fn render_clip(template: &ClassTemplate, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // Per-clip jitter: +-5% frequency, +-10% duration, +-20 ms onset.
    let fj = 1.0 + rng.random_range(-0.05..0.05);
    let dj = 1.0 + rng.random_range(-0.10..0.10);
    let onset_s = (0.03 + rng.random_range(-0.02..0.02f64)).max(0.0);
    let dur = (template.duration_s * dj).min(0.95);
    let n = (dur * RATE as f64) as usize;
    let onset = (onset_s * RATE as f64) as usize;
    let fs = RATE as f64;
    let tau = |i: usize| i as f64 / fs;

    let mut body = vec![0.0f64; n];
    let burst_env = |i: usize| match template.decay_tau_s {
        Some(t) => (-(i as f64 / fs) / t).exp(),
        None => 1.0,
    };
    match template.kind {
        TemplateKind::ToneBurst => {
            let f = template.freq_a * fj;
            let period = (fs / template.rate_hz) as usize;
            let burst_len = (period as f64 * 0.45) as usize;
            let mut start = 0;
            while start + 32 < n {
                let len = burst_len.min(n - start);
                let mut burst: Vec<f64> = (0..len)
                    .map(|i| burst_env(i) * (2.0 * std::f64::consts::PI * f * tau(i)).sin())
                    .collect();
                apply_ramps(&mut burst, (0.008 * fs) as usize);
                body[start..start + len].copy_from_slice(&burst);
                start += period;
            }
        }
        TemplateKind::HarmonicStack => {
            let f0 = template.freq_a * fj;
            for (i, v) in body.iter_mut().enumerate() {
                let t = tau(i);
                let mut s = 0.0;
                for h in 1..=5 {
                    let fh = f0 * h as f64;
                    if fh < 7_500.0 {
                        s += (2.0 * std::f64::consts::PI * fh * t).sin() / h as f64;
                    }
                }
                *v = burst_env(i) * s;
            }
            apply_ramps(&mut body, (0.04 * fs) as usize);
        }
        TemplateKind::Chirp => {
            let f_start = template.freq_a * fj;
            let f_end = template.freq_b * fj;
            let total = n as f64 / fs;
            let mut phase = 0.0;
            for (i, v) in body.iter_mut().enumerate() {
                let t = tau(i);
                let f = f_start + (f_end - f_start) * t / total;
                phase += 2.0 * std::f64::consts::PI * f / fs;
                *v = phase.sin();
            }
            apply_ramps(&mut body, (0.01 * fs) as usize);
        }
        TemplateKind::NoiseBurst => {
            let lo = (template.freq_a * fj).max(50.0);
            let hi = (template.freq_b * fj).min(7_800.0);
            let period = (fs / template.rate_hz) as usize;
            let burst_len = (period as f64 * 0.4) as usize;
            let mut start = 0;
            while start + 64 < n {
                let len = burst_len.min(n - start);
                let mut burst = band_noise(len, lo, hi, rng);
                for (i, v) in burst.iter_mut().enumerate() {
                    *v *= burst_env(i);
                }
                apply_ramps(&mut burst, (0.006 * fs) as usize);
                body[start..start + len].copy_from_slice(&burst);
                start += period;
            }
        }
        TemplateKind::ClickTrain => {
            let period = (fs / template.rate_hz) as usize;
            let mut start = 0;
            while start < n {
                // 2 ms decaying click.
                for i in 0..((0.002 * fs) as usize).min(n - start) {
                    body[start + i] += (-(i as f64) / (0.0004 * fs)).exp();
                }
                start += period.max(1);
            }
        }
        TemplateKind::AmTone => {
            let f = template.freq_a * fj;
            let fm = template.rate_hz;
            let depth = 0.9;
            for (i, v) in body.iter_mut().enumerate() {
                let t = tau(i);
                let env = 1.0 - depth * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * fm * t).cos());
                *v = env * (2.0 * std::f64::consts::PI * f * t).sin();
            }
            apply_ramps(&mut body, (0.02 * fs) as usize);
        }
    }

    let mut samples = vec![0.0; onset];
    samples.extend(body);
    samples
}

/// Brick-wall band-passed white noise via FFT masking; deterministic for a
/// given RNG stream.
fn band_noise(n: usize, lo_hz: f64, hi_hz: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rustfft::{num_complex::Complex, FftPlanner};
    let size = n.next_power_of_two().max(64);
    let mut buf: Vec<Complex<f64>> = (0..size)
        .map(|_| Complex::new(rng.random_range(-1.0..1.0), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    let bin_hz = RATE as f64 / size as f64;
    for (k, v) in buf.iter_mut().enumerate() {
        let f = if k <= size / 2 {
            k as f64 * bin_hz
        } else {
            (size - k) as f64 * bin_hz
        };
        if f < lo_hz || f > hi_hz {
            *v = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let peak = buf[..n].iter().map(|c| c.re.abs()).fold(1e-12, f64::max);
    buf[..n].iter().map(|c| c.re / peak).collect()
}

fn preprocess(clip: &AudioClip) -> Result<AudioClip, PipelineError> {
    let at_rate = if clip.sample_rate() == RATE {
        clip.clone()
    } else {
        resample(clip, RATE)?
    };
    let cropped = crop_pad(&at_rate, 1.0)?;
    Ok(normalize_max(&cropped).clip)
}

/// Deterministic synthetic corpus: `n_classes` parametric event classes
/// with `clips_per_class` clips each. The last `clips_per_class -
/// train_per_class` clips of each class form the test split.
pub fn synth_dataset(
    n_classes: usize,
    clips_per_class: usize,
    train_per_class: usize,
    seed: u64,
) -> Result<EventDataset, PipelineError> {
    if n_classes < 2 {
        return Err(PipelineError::TooFewClasses(n_classes));
    }
    assert!(train_per_class < clips_per_class);
    let templates: Vec<ClassTemplate> = (0..n_classes)
        .map(|c| {
            let kind = KINDS[c % KINDS.len()];
            let mut rng = util::derived_rng(seed, &[util::tag("class"), c as u64]);
            class_template(kind, c / KINDS.len(), &mut rng)
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..n_classes)
        .flat_map(|c| (0..clips_per_class).map(move |i| (c, i)))
        .collect();
    let rendered: Vec<Result<AudioClip, PipelineError>> = exec::par_map(&jobs, |&(c, i)| {
        let mut rng = util::derived_rng(seed, &[util::tag("clip"), c as u64, i as u64]);
        let raw = render_clip(&templates[c], &mut rng);
        preprocess(&AudioClip::new(raw, RATE).map_err(PipelineError::Signal)?)
    });

    let mut clips = Vec::with_capacity(jobs.len());
    for ((c, _), clip) in jobs.into_iter().zip(rendered) {
        clips.push((c, clip?));
    }

    let mut train_pool = Vec::new();
    let mut test = Vec::new();
    for c in 0..n_classes {
        for i in 0..clips_per_class {
            let idx = c * clips_per_class + i;
            if i < train_per_class {
                train_pool.push(idx);
            } else {
                test.push(idx);
            }
        }
    }
    let (_, default_val) = split_val(&train_pool, seed);
    Ok(EventDataset {
        classes: (0..n_classes).map(|c| format!("class_{c:02}")).collect(),
        clips,
        train_pool,
        test,
        default_val,
        seed,
    })
}

/// Outcome of loading a WAV directory: the dataset plus non-fatal warnings
/// (unreadable files that were skipped).
#[derive(Debug)]
pub struct LoadReport {
    pub dataset: EventDataset,
    pub warnings: Vec<String>,
}

/// Load `root/<class>/*.wav` into a dataset with the same preprocessing as
/// the synthetic corpus; 25% of each class (rounded down) becomes test.
pub fn load_wav_dataset(root: &Path, seed: u64) -> Result<LoadReport, PipelineError> {
    if !root.is_dir() {
        return Err(PipelineError::BadRoot(root.display().to_string()));
    }
    let mut class_dirs: Vec<std::path::PathBuf> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();
    if class_dirs.len() < 2 {
        return Err(PipelineError::TooFewClasses(class_dirs.len()));
    }

    let mut warnings = Vec::new();
    let mut classes = Vec::new();
    let mut clips = Vec::new();
    let mut train_pool = Vec::new();
    let mut test = Vec::new();
    for (class_id, dir) in class_dirs.iter().enumerate() {
        let class_name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
            .collect();
        files.sort();
        let mut class_clips = Vec::new();
        for file in files {
            match wav::read(&file).map_err(crate::signal::SignalError::Wav) {
                Ok(clip) => match preprocess(&clip) {
                    Ok(p) => class_clips.push(p),
                    Err(e) => warnings.push(format!("{}: {e}", file.display())),
                },
                Err(e) => warnings.push(format!("{}: {e}", file.display())),
            }
        }
        if class_clips.is_empty() {
            return Err(PipelineError::EmptyClass(class_name));
        }
        let n = class_clips.len();
        let n_test = n / 4; // 75/25 rounding toward train
        for (i, clip) in class_clips.into_iter().enumerate() {
            let idx = clips.len();
            clips.push((class_id, clip));
            if i < n - n_test {
                train_pool.push(idx);
            } else {
                test.push(idx);
            }
        }
        classes.push(class_name);
    }
    let (_, default_val) = split_val(&train_pool, seed);
    Ok(LoadReport {
        dataset: EventDataset {
            classes,
            clips,
            train_pool,
            test,
            default_val,
            seed,
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::mel_spectrogram;

    #[test]
    fn synth_is_reproducible_and_shaped() {
        let a = synth_dataset(10, 8, 6, 42).unwrap();
        let b = synth_dataset(10, 8, 6, 42).unwrap();
        assert_eq!(a.clips.len(), 80);
        assert_eq!(a.train_pool.len(), 60);
        assert_eq!(a.test.len(), 20);
        for ((la, ca), (lb, cb)) in a.clips.iter().zip(&b.clips) {
            assert_eq!(la, lb);
            assert_eq!(ca.samples(), cb.samples());
        }
        let c = synth_dataset(10, 8, 6, 43).unwrap();
        assert_ne!(a.clips[0].1.samples(), c.clips[0].1.samples());
    }

    #[test]
    fn every_clip_is_one_second_normalized() {
        let ds = synth_dataset(6, 4, 3, 7).unwrap();
        for (_, clip) in &ds.clips {
            assert_eq!(clip.len(), 16_000);
            assert_eq!(clip.sample_rate(), 16_000);
            assert!((clip.peak() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive() {
        let ds = synth_dataset(5, 8, 6, 3).unwrap();
        let mut all: Vec<usize> = ds.train_pool.iter().chain(&ds.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        let (train, val) = ds.trial_split(99);
        assert_eq!(val.len(), ds.train_pool.len() / 5);
        let mut merged: Vec<usize> = train.iter().chain(&val).copied().collect();
        merged.sort();
        let mut pool = ds.train_pool.clone();
        pool.sort();
        assert_eq!(merged, pool);
    }

    #[test]
    fn nearest_centroid_separates_classes_on_clean_mel() {
        // Sanity floor: a trivial classifier must get >= 80% on the test
        // split using mel features.
        let ds = synth_dataset(10, 12, 9, 1234).unwrap();
        let feats: Vec<(usize, Vec<f64>)> = ds
            .clips
            .iter()
            .map(|(label, clip)| (*label, mel_spectrogram(clip).unwrap().values().to_vec()))
            .collect();
        let dim = feats[0].1.len();
        let mut centroids = vec![vec![0.0; dim]; ds.n_classes()];
        let mut counts = vec![0usize; ds.n_classes()];
        for &idx in &ds.train_pool {
            let (label, f) = &feats[idx];
            counts[*label] += 1;
            for (c, v) in centroids[*label].iter_mut().zip(f) {
                *c += v;
            }
        }
        for (c, n) in centroids.iter_mut().zip(&counts) {
            for v in c.iter_mut() {
                *v /= *n as f64;
            }
        }
        let mut correct = 0;
        for &idx in &ds.test {
            let (label, f) = &feats[idx];
            let best = (0..ds.n_classes())
                .min_by(|&a, &b| {
                    let da: f64 = centroids[a].iter().zip(f).map(|(c, v)| (c - v) * (c - v)).sum();
                    let db: f64 = centroids[b].iter().zip(f).map(|(c, v)| (c - v) * (c - v)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            if best == *label {
                correct += 1;
            }
        }
        let acc = correct as f64 / ds.test.len() as f64;
        assert!(acc >= 0.8, "nearest-centroid accuracy {acc}");
    }

    #[test]
    fn rejects_single_class() {
        assert!(matches!(
            synth_dataset(1, 4, 3, 0),
            Err(PipelineError::TooFewClasses(1))
        ));
    }

    #[test]
    fn wav_dataset_split_and_downmix() {
        let root = std::env::temp_dir().join("roomsec_wav_ds");
        let _ = std::fs::remove_dir_all(&root);
        for class in ["alpha", "beta"] {
            let dir = root.join(class);
            std::fs::create_dir_all(&dir).unwrap();
            for i in 0..4 {
                let f = 300.0 + if class == "alpha" { 0.0 } else { 700.0 } + i as f64;
                let clip = AudioClip::new(
                    (0..8_000)
                        .map(|t| (2.0 * std::f64::consts::PI * f * t as f64 / 16_000.0).sin())
                        .collect(),
                    16_000,
                )
                .unwrap();
                wav::write(&dir.join(format!("c{i}.wav")), &clip, wav::SampleFormat::Pcm16)
                    .unwrap();
            }
        }
        let report = load_wav_dataset(&root, 5).unwrap();
        let ds = report.dataset;
        assert_eq!(ds.classes, vec!["alpha", "beta"]);
        assert_eq!(ds.clips.len(), 8);
        // 3/1 per class, rounding toward train.
        assert_eq!(ds.train_pool.len(), 6);
        assert_eq!(ds.test.len(), 2);
        for (_, clip) in &ds.clips {
            assert_eq!(clip.len(), 16_000);
        }
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn wav_dataset_empty_class_errors_by_name() {
        let root = std::env::temp_dir().join("roomsec_wav_empty");
        let _ = std::fs::remove_dir_all(&root);
        std::fs::create_dir_all(root.join("filled")).unwrap();
        std::fs::create_dir_all(root.join("hollow")).unwrap();
        let clip = AudioClip::new(vec![0.5; 1_000], 16_000).unwrap();
        wav::write(
            &root.join("filled/a.wav"),
            &clip,
            wav::SampleFormat::Pcm16,
        )
        .unwrap();
        wav::write(
            &root.join("filled/b.wav"),
            &clip,
            wav::SampleFormat::Pcm16,
        )
        .unwrap();
        match load_wav_dataset(&root, 0) {
            Err(PipelineError::EmptyClass(name)) => assert_eq!(name, "hollow"),
            other => panic!("expected EmptyClass, got {other:?}"),
        }
    }

    #[test]
    fn wav_dataset_skips_unreadable_with_warning() {
        let root = std::env::temp_dir().join("roomsec_wav_warn");
        let _ = std::fs::remove_dir_all(&root);
        let clip = AudioClip::new(vec![0.5; 1_000], 16_000).unwrap();
        for class in ["a", "b"] {
            std::fs::create_dir_all(root.join(class)).unwrap();
            for i in 0..2 {
                wav::write(
                    &root.join(class).join(format!("{i}.wav")),
                    &clip,
                    wav::SampleFormat::Pcm16,
                )
                .unwrap();
            }
        }
        std::fs::write(root.join("a/broken.wav"), b"garbage").unwrap();
        let report = load_wav_dataset(&root, 0).unwrap();
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("broken.wav"));
        assert_eq!(report.dataset.clips.len(), 4);
    }
}
