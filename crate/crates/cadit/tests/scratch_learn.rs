use cadit::synthdata::{gen_glyph_pair, GlyphStyle};
use cadit::train::{ablation_rows, run_training, TrainConfig};

#[test]
#[ignore]
fn learning_probe() {
    let style_s = GlyphStyle { stroke_width: 1, invert: false, noise_sd: 0.02, shear: 0.0 };
    let style_t = GlyphStyle { stroke_width: 2, invert: true, noise_sd: 0.1, shear: 0.0 };
    let rows = ablation_rows();
    for row in [&rows[2], &rows[8]] {
        let pair = gen_glyph_pair(10, 200, &style_s, &style_t, 1).unwrap();
        let cfg = TrainConfig {
            seed: 1,
            epochs: 12,
            warmup_epochs: 3,
            enabled: row.terms,
            gamma_mode: row.gamma,
            epoch_eval: true,
            ..TrainConfig::default()
        };
        let t0 = std::time::Instant::now();
        let (_state, hist) = run_training(&pair, &cfg).unwrap();
        let accs: Vec<String> = hist.epochs.iter().map(|e| format!("{:.3}", e.target_accuracy)).collect();
        println!(
            "row {} ({}): {:.1}s  acc by epoch: {}",
            row.index,
            row.name,
            t0.elapsed().as_secs_f64(),
            accs.join(" ")
        );
    }
}
