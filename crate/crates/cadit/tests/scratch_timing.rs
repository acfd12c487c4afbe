use std::time::Instant;

use cadit::synthdata::{gen_glyph_pair, BatchSampler, GlyphStyle};
use cadit::train::{train_step, TrainConfig, TrainState};

#[test]
#[ignore]
fn timing_probe() {
    let style_s = GlyphStyle { stroke_width: 1, invert: false, noise_sd: 0.02, shear: 0.0 };
    let style_t = GlyphStyle { stroke_width: 2, invert: true, noise_sd: 0.1, shear: 0.0 };
    let pair = gen_glyph_pair(10, 200, &style_s, &style_t, 1).unwrap();
    let cfg = TrainConfig { seed: 1, ..TrainConfig::default() };
    let kind = cadit::train::data_kind_of(&pair).unwrap();
    let mut state = TrainState::new(kind, 10, &cfg);
    let mut sampler = BatchSampler::new(&pair, 64, 1).unwrap();
    println!("batches/epoch: {}", sampler.batches_per_epoch());

    // Warm up once, then time.
    let b = sampler.next_batch(&pair);
    train_step(&mut state, &b, &cfg, cfg.enabled, 0.002).unwrap();
    let t0 = Instant::now();
    let n = 20;
    for _ in 0..n {
        let b = sampler.next_batch(&pair);
        train_step(&mut state, &b, &cfg, cfg.enabled, 0.002).unwrap();
    }
    let per_step = t0.elapsed().as_secs_f64() / n as f64;
    let steps_per_run = cfg.epochs * sampler.batches_per_epoch();
    println!(
        "per step: {:.1} ms; per run ({} steps): {:.1} s; ablation 45 runs: {:.1} min",
        per_step * 1e3,
        steps_per_run,
        per_step * steps_per_run as f64,
        per_step * steps_per_run as f64 * 45.0 / 60.0
    );

    // Breakdown-only timing.
    let b = sampler.next_batch(&pair);
    let t0 = Instant::now();
    for _ in 0..n {
        cadit::train::objective_breakdown(&state, &b, &cfg, cfg.enabled).unwrap();
    }
    println!("objective_breakdown: {:.1} ms", t0.elapsed().as_secs_f64() / n as f64 * 1e3);

    // Generator forward alone (no grad).
    let t0 = Instant::now();
    for _ in 0..n {
        state.translate_to_target(&b.source).unwrap();
    }
    println!("one generator forward (batch 64): {:.1} ms", t0.elapsed().as_secs_f64() / n as f64 * 1e3);

    // Trunk forward alone.
    let t0 = Instant::now();
    for _ in 0..n {
        state.trunk_features_target(&b.target).unwrap();
    }
    println!("one trunk forward (batch 64): {:.1} ms", t0.elapsed().as_secs_f64() / n as f64 * 1e3);
}
