use laserfault::baselines::ThresholdDetector;
use laserfault::degradation::{generate_dataset, GenerationConfig, UniformRange};
use laserfault::neural::{train, RmsPropConfig, TrainingConfig};
use laserfault::pipeline::{RawWindow, Scaler};
use laserfault::DegradationMode;

#[test]
fn threshold_detects_every_noiseless_fault() {
    let mut config = GenerationConfig {
        samples_per_mode: 150,
        rng_seed: 5,
        observation_noise_fraction: 0.0,
        ..GenerationConfig::default()
    };
    // degradation from the first observation, so the whole window shows the fault
    config.gradual.onset_fraction = UniformRange::new(0.0, 0.0);
    config.rapid.onset_fraction = UniformRange::new(0.0, 0.0);
    let detector = ThresholdDetector::default();
    let mut faults = 0;
    for sample in generate_dataset(&config).unwrap() {
        let window = RawWindow::from_sample(&sample).unwrap();
        let mode = detector
            .classify(&window.currents, window.laser.threshold_current_ma)
            .unwrap();
        if sample.mode.is_fault() {
            faults += 1;
            assert!(
                mode.is_fault(),
                "sample {} ({:?}) not detected",
                sample.sample_id,
                sample.mode
            );
        } else {
            assert_eq!(mode, DegradationMode::Normal);
        }
    }
    assert_eq!(faults, 450);
}

#[test]
fn lstm_memorizes_sixteen_windows() {
    let config = GenerationConfig {
        samples_per_mode: 4,
        rng_seed: 8,
        ..GenerationConfig::default()
    };
    let windows: Vec<RawWindow> = generate_dataset(&config)
        .unwrap()
        .iter()
        .map(|s| RawWindow::from_sample(s).unwrap())
        .collect();
    let scaler = Scaler::fit(&windows).unwrap();
    let set: Vec<_> = windows.iter().map(|w| scaler.transform(w, false).unwrap()).collect();
    assert_eq!(set.len(), 16);
    let training = TrainingConfig {
        max_epochs: 500,
        batch_size: 16,
        patience: 500,
        optimizer: RmsPropConfig {
            learning_rate: 3e-3,
            ..RmsPropConfig::default()
        },
        ..TrainingConfig::default()
    };
    // the memorization set doubles as the monitored set, so val_loss is the training loss
    let out = train(&training, &set, &set, 1, 2).unwrap();
    let best = out.history.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    let first = out.history.iter().find(|r| r.val_loss < 0.01).map(|r| r.epoch);
    eprintln!("memorization: loss < 0.01 first at epoch {first:?}, best {best:.2e}");
    assert!(
        best < 0.01,
        "best training loss {best} after {} epochs",
        out.history.len()
    );
}
