use cadit::nn::{DataKind, NetConfig};
use cadit::synthdata::{gen_glyph_pair, GlyphStyle};
use cadit::train::{run_training, EnabledTerms, TrainConfig};

#[test]
#[ignore]
fn classifier_sanity() {
    let style_s = GlyphStyle { stroke_width: 1, invert: false, noise_sd: 0.02, shear: 0.0 };
    let style_t = GlyphStyle { stroke_width: 2, invert: true, noise_sd: 0.1, shear: 0.0 };
    let pair = gen_glyph_pair(10, 200, &style_s, &style_t, 1).unwrap();
    let labels: Vec<usize> = pair.source.labels.iter().map(|&l| l as usize).collect();

    // (a) Stand-alone classifier on the raw source domain.
    let t0 = std::time::Instant::now();
    let clf = cadit::eval::train_classifier(
        &pair.source.samples,
        &labels,
        10,
        DataKind::Image { side: 16 },
        NetConfig::default(),
        10,
        64,
        7,
    )
    .unwrap();
    let acc = cadit::eval::classifier_accuracy(&clf, &pair.source.samples, &labels).unwrap();
    println!("standalone classifier on source (10 epochs): {:.3} in {:.1}s", acc, t0.elapsed().as_secs_f64());

    // (b) C_s after row-2 style training (dgan_s only).
    let cfg = TrainConfig {
        seed: 1,
        epochs: 8,
        warmup_epochs: 0,
        enabled: EnabledTerms { dgan_s: true, ..EnabledTerms::none() },
        ..TrainConfig::default()
    };
    let (state, _) = run_training(&pair, &cfg).unwrap();
    let logits = state.classify_source(&pair.source.samples).unwrap();
    let pred = logits.argmax_rows();
    let acc = pred.iter().zip(&labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64;
    println!("C_s on source after 8 epochs of dgan_s: {:.3}", acc);

    // (c) Translation quality probe: does G_t produce varied outputs?
    let translated = state.translate_to_target(&pair.source.samples).unwrap();
    let d = translated.data();
    let mean: f64 = d.iter().sum::<f64>() / d.len() as f64;
    let sd: f64 = (d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d.len() as f64).sqrt();
    println!("G_s->t output stats: mean {:.3} sd {:.3}", mean, sd);
}
