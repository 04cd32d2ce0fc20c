//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test -p cad-core --test acceptance -- 1 4 9`.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use cad_core::datagen::{corpus_split, generate_session, SynthConfig};
use cad_core::exec::Execution;
use cad_core::features::mel::hz_to_mel;
use cad_core::features::{
    decode_feature_file, encode_feature_file, extract_stream, frame_signal, prosody_features, FeatureStream, FrameSpec,
    Waveform,
};
use cad_core::io::{
    decode_checkpoint, encode_checkpoint, fit_train_stats, predict_waveform, prepare_sessions, recipe_features,
    write_prediction, Checkpoint, RawSession, SessionRecord,
};
use cad_core::labels::LabelScheme;
use cad_core::metrics::{aggregate_time, average_precision, hard_accuracy, mean_average_precision, pr_curve, Accuracy};
use cad_core::models::{dilation_schedule, receptive_field, Arch, Model, ModelConfig, Posteriors};
use cad_core::training::{
    accumulate_gradients, apply_gradients, cb_focal_loss, gradient_check, train_model, AdamState, Chunk, GradSum,
    LossConfig, OptimizerConfig, SessionData, TrainConfig,
};
use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_input(t: usize, d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((t, d), || rng.random_range(-1.0..1.0))
}

fn random_model(cfg: ModelConfig, rng: &mut ChaCha8Rng, scale: f64) -> Model {
    let mut m = Model::new(cfg, rng.random()).unwrap();
    for t in m.params_mut().tensors_mut() {
        if t.trainable {
            t.value.mapv_inplace(|_| rng.random_range(-scale..scale));
        }
    }
    m
}

// 1 ------------------------------------------------------------------

/// Class-balanced focal loss written out directly.
fn focal_oracle(p: f64, n: u64, beta: f64, gamma: f64) -> f64 {
    let w = if beta == 0.0 {
        1.0
    } else {
        (1.0 - beta) / (1.0 - beta.powi(n as i32))
    };
    -w * (1.0 - p).powf(gamma) * p.ln()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = rng.random_range(2..10usize);
        let logits: Vec<f64> = (0..c).map(|_| rng.random_range(-4.0..4.0)).collect();
        let z: f64 = logits.iter().map(|v| v.exp()).sum();
        let probs = Array2::from_shape_fn((1, c), |(_, j)| logits[j].exp() / z);
        let y = rng.random_range(0..c);
        let beta = if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.0..0.9999)
        };
        let gamma = rng.random_range(0.0..5.0);
        let counts: Vec<u64> = (0..c).map(|_| rng.random_range(1..5000)).collect();
        let cfg = LossConfig::new(beta, gamma, counts.clone()).map_err(|e| e.to_string())?;
        let got = cb_focal_loss(probs.view(), &[y], &cfg).map_err(|e| e.to_string())?;
        worst = worst.max((got - focal_oracle(probs[[0, y]], counts[y], beta, gamma)).abs());
    }
    ensure(worst <= 1e-6, || format!("max |delta| {worst:.3e}"))?;

    let probs = Array2::from_shape_fn((50, 4), |(i, j)| if j == i % 4 { 0.4 } else { 0.2 });
    let targets: Vec<usize> = (0..50).map(|i| (i * 7) % 4).collect();
    let cfg = LossConfig::new(0.0, 0.0, vec![10; 4]).unwrap();
    let got = cb_focal_loss(probs.view(), &targets, &cfg).unwrap();
    let ce = targets
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[[i, y]].ln())
        .sum::<f64>()
        / 50.0;
    ensure(got == ce, || format!("cross-entropy reduction {got} vs {ce}"))?;
    let half = cb_focal_loss(ndarray::array![[0.5, 0.5]].view(), &[0], &cfg).unwrap();
    ensure(half == std::f64::consts::LN_2, || format!("p=0.5 gives {half}"))?;

    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("max |delta| {worst:.2e} over 1000 cases, {elapsed:.2?}"))
}

// 2 ------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for arch in [Arch::Dnn, Arch::Dtcnn, Arch::Gru, Arch::Bigru] {
        let mut cfg = ModelConfig::new(arch, 3, 4, 2, 4);
        cfg.context_k = 1;
        cfg.dropout_rate = 0.0;
        let model = random_model(cfg, &mut rng, 0.5);
        let x = random_input(7, 3, &mut rng);
        let targets: Vec<usize> = (0..7).map(|i| i % 4).collect();
        let loss = LossConfig::new(0.9, 1.5, vec![5, 3, 2, 8]).unwrap();
        let checks = gradient_check(&model, &x, &targets, &loss, 1e-5).map_err(|e| e.to_string())?;
        for c in checks {
            ensure(c.analytic_norm > 0.0 || c.rel_error == 0.0, || {
                format!("{arch:?} {} has no gradient", c.name)
            })?;
            ensure(c.rel_error <= 1e-4, || {
                format!("{arch:?} {}: rel error {:.3e}", c.name, c.rel_error)
            })?;
            worst = worst.max(c.rel_error);
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "max relative error {worst:.2e} across 4 architectures, {elapsed:.2?}"
    ))
}

// 3 ------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut line = Vec::new();
    for (scheme, expected) in [
        (LabelScheme::Four, 0.25),
        (LabelScheme::Five, 0.2),
        (LabelScheme::Nine, 1.0 / 9.0),
    ] {
        let c = scheme.arity();
        let per = 500;
        let mut train: Vec<usize> = (0..c * per).map(|i| i % c).collect();
        let mut test = train.clone();
        train.rotate_left(rng.random_range(0..c * per));
        test.rotate_left(rng.random_range(0..c * per));
        let mut dist = vec![0.0; c];
        for &y in &train {
            dist[y] += 1.0 / train.len() as f64;
        }
        let post = Posteriors::constant(test.len(), &dist).map_err(|e| e.to_string())?;
        let map = mean_average_precision(&post, &test).map_err(|e| e.to_string())?.map;
        ensure((map - expected).abs() <= 1e-9, || {
            format!("{c}-way mAP {map} vs {expected}")
        })?;
        line.push(format!("{c}-way {map:.3}"));
    }
    // unbalanced: still the mean class prevalence
    let test: Vec<usize> = (0..1000)
        .map(|i| {
            if i % 10 < 6 {
                0
            } else if i % 10 < 9 {
                1
            } else {
                2
            }
        })
        .collect();
    let post = Posteriors::constant(test.len(), &[0.6, 0.3, 0.1]).unwrap();
    let map = mean_average_precision(&post, &test).unwrap().map;
    ensure((map - 1.0 / 3.0).abs() <= 1e-9, || format!("unbalanced mAP {map}"))?;
    Ok(line.join(", "))
}

// 4 ------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let a = Accuracy::from_accuracy(0.938);
    ensure(a.error_percent() == 6.2, || format!("0.938 -> {}%", a.error_percent()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = rng.random_range(1..300);
        let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let acc = hard_accuracy(&p, &t).unwrap();
        let hits = p.iter().zip(&t).filter(|(a, b)| a == b).count() as f64 / n as f64;
        ensure(acc.accuracy == hits && acc.error_rate == 1.0 - hits, || {
            format!("identity broken at n={n}")
        })?;
    }
    Ok("0.938 -> 6.2%, error = 1 - accuracy on 200 random cases".into())
}

// 5 ------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let dil = dilation_schedule(2.0, 3);
    ensure(dil == vec![1, 2, 4], || format!("schedule {dil:?}"))?;
    ensure(receptive_field(3, &dil) == 15, || "receptive field".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cfg = ModelConfig::new(Arch::Dtcnn, 4, 6, 3, 4);
    cfg.kernel_size = 3;
    let model = random_model(cfg, &mut rng, 0.6);
    let t_len = 40;
    let x = random_input(t_len, 4, &mut rng);
    let base = model.posteriors(&x).unwrap();
    let mut checked = 0;
    for t in [0, 7, 19, 20, 32, 39] {
        for s in 0..t_len {
            let mut xp = x.clone();
            xp.row_mut(s).mapv_inplace(|v| v + 3.0);
            let out = model.posteriors(&xp).unwrap();
            let same = out.view().row(t) == base.view().row(t);
            if s.abs_diff(t) > 7 {
                ensure(same, || format!("frame {s} changed output at {t}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} out-of-field perturbations left outputs bit-identical"
    ))
}

// 6 ------------------------------------------------------------------

/// Copy of `m` with the forward and backward directions exchanged.
fn swap_directions(m: &Model) -> Model {
    let mut p = m.params().clone();
    for t in m.params().tensors() {
        let other = if let Some(rest) = t.name.strip_prefix("bigru.fwd.") {
            format!("bigru.bwd.{rest}")
        } else if let Some(rest) = t.name.strip_prefix("bigru.bwd.") {
            format!("bigru.fwd.{rest}")
        } else if t.name == "bigru.W_f" {
            "bigru.W_b".into()
        } else if t.name == "bigru.W_b" {
            "bigru.W_f".into()
        } else {
            continue;
        };
        *p.get_mut(&other).unwrap() = t.value.clone();
    }
    Model::from_parts(m.config().clone(), p).unwrap()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t_len = rng.random_range(2..16);
        let d = rng.random_range(1..5);
        let layers = rng.random_range(1..3);
        let bi = random_model(ModelConfig::new(Arch::Bigru, d, 4, layers, 5), &mut rng, 0.8);
        let x = random_input(t_len, d, &mut rng);
        let rev = x.slice(s![..;-1, ..]).to_owned();
        let a = bi.posteriors(&x).unwrap();
        let b = swap_directions(&bi).posteriors(&rev).unwrap();
        for (u, v) in a.view().iter().zip(b.view().slice(s![..;-1, ..]).iter()) {
            worst = worst.max((u - v).abs());
        }

        let uni = random_model(ModelConfig::new(Arch::Gru, d, 4, layers, 5), &mut rng, 0.8);
        let cut = rng.random_range(0..t_len);
        let mut xp = x.clone();
        for i in cut..t_len {
            xp.row_mut(i).mapv_inplace(|v| v * -2.0 + 1.0);
        }
        let p = uni.posteriors(&x).unwrap();
        let q = uni.posteriors(&xp).unwrap();
        for i in 0..cut {
            for (u, v) in p.view().row(i).iter().zip(q.view().row(i)) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    ensure(worst <= 1e-6, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("100 instances, max deviation {worst:.2e}"))
}

// 7 ------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for arch in [Arch::Dnn, Arch::Dtcnn, Arch::Gru, Arch::Bigru] {
        let mut cfg = ModelConfig::new(arch, 3, 5, 2, 4);
        cfg.context_k = 1;
        cfg.dropout_rate = 0.2;
        let model = random_model(cfg, &mut rng, 0.5);
        let chunks: Vec<Chunk> = (0..8)
            .map(|i| Chunk {
                features: random_input(20, 3, &mut rng),
                labels: (0..20).map(|j| (i + j / 5) % 4).collect(),
                session: format!("s{i}"),
                offset: 0,
            })
            .collect();
        let keyed: Vec<(u64, &Chunk)> = chunks.iter().enumerate().map(|(i, c)| (100 + i as u64, c)).collect();
        let loss = LossConfig::new(0.99, 2.0, vec![40, 40, 40, 40]).unwrap();
        let optim = OptimizerConfig::default();
        for k in [2, 4, 8] {
            let mut one = model.clone();
            let mut adam = AdamState::new(one.params());
            let full = accumulate_gradients(&one, &keyed, &loss, Execution::Sequential).unwrap();
            apply_gradients(&mut one, &mut adam, full, &optim, 1e-2).unwrap();

            let mut many = model.clone();
            let mut adam = AdamState::new(many.params());
            let mut sum = GradSum::empty(many.params().len());
            for mb in keyed.chunks(keyed.len() / k) {
                sum.merge(accumulate_gradients(&many, mb, &loss, Execution::Sequential).unwrap());
            }
            apply_gradients(&mut many, &mut adam, sum, &optim, 1e-2).unwrap();

            for (a, b) in one.params().tensors().iter().zip(many.params().tensors()) {
                let diff = (&a.value - &b.value).mapv(|v| v * v).sum().sqrt();
                let norm = a.value.mapv(|v| v * v).sum().sqrt().max(1e-12);
                worst = worst.max(diff / norm);
            }
        }
    }
    ensure(worst <= 1e-5, || {
        format!("max relative parameter difference {worst:.3e}")
    })?;
    Ok(format!(
        "k in {{2,4,8}}, 4 architectures, max relative difference {worst:.2e}"
    ))
}

// 8 ------------------------------------------------------------------

const C8_HIDDEN: usize = 32;
const C8_EPOCHS: usize = 12;
const C8_BUDGET: Duration = Duration::from_secs(30 * 60);

fn featurize(cfg: &SynthConfig, records: &[SessionRecord]) -> Result<Vec<RawSession>, String> {
    let keys: Vec<(usize, usize)> = records
        .iter()
        .map(|r| {
            let sess = r.session.rsplit("sess").next().unwrap().parse().unwrap();
            (r.instructor, sess)
        })
        .collect();
    Execution::default().try_map(keys.len(), |i| {
        let (inst, sess) = keys[i];
        let s = generate_session(cfg, inst, sess).map_err(|e| e.to_string())?;
        let features = recipe_features(&s.waveform, &cad_core::io::default_recipe(), Execution::Sequential)
            .map_err(|e| e.to_string())?;
        Ok(RawSession {
            id: s.id,
            instructor: s.instructor,
            features,
            intervals: s.intervals,
        })
    })
}

fn pooled_accuracy(model: &Model, sessions: &[SessionData], chunk: usize) -> f64 {
    let mut pred = Vec::new();
    let mut targets = Vec::new();
    for s in sessions {
        pred.extend(
            model
                .posteriors_chunked(&s.features, chunk, Execution::default())
                .unwrap()
                .argmax(),
        );
        targets.extend_from_slice(&s.labels);
    }
    hard_accuracy(&pred, &targets).unwrap().accuracy
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let cfg = SynthConfig::default();
    let split = corpus_split(&cfg).map_err(|e| e.to_string())?;
    let train_inst: std::collections::BTreeSet<usize> = split.train.iter().map(|r| r.instructor).collect();
    let test2_inst: std::collections::BTreeSet<usize> = split.test2.iter().map(|r| r.instructor).collect();
    ensure(test2_inst.len() == 3 && train_inst.len() == 6, || {
        "expected 6 seen + 3 withheld instructors".into()
    })?;

    let train = featurize(&cfg, &split.train)?;
    let dev = featurize(&cfg, &split.dev)?;
    let test1 = featurize(&cfg, &split.test1)?;
    let test2 = featurize(&cfg, &split.test2)?;
    let stats = fit_train_stats(&train).map_err(|e| e.to_string())?;

    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for (scheme, floor) in [(LabelScheme::Four, 0.95), (LabelScheme::Nine, 0.85)] {
        let prep = |r: &[RawSession]| prepare_sessions(r, &stats, scheme).map_err(|e| e.to_string());
        let (tr, dv, t1, t2) = (prep(&train)?, prep(&dev)?, prep(&test1)?, prep(&test2)?);
        let mut model = ModelConfig::new(Arch::Bigru, stats.dim(), C8_HIDDEN, 1, scheme.arity());
        model.dropout_rate = 0.1;
        let mut tc = TrainConfig::new(model, scheme);
        tc.max_epochs = C8_EPOCHS;
        tc.seed = 8;
        let out = train_model(&tc, &tr, &dv, Execution::default()).map_err(|e| e.to_string())?;
        let chunk = tc.chunk_len();
        let (a1, a2) = (
            pooled_accuracy(&out.model, &t1, chunk),
            pooled_accuracy(&out.model, &t2, chunk),
        );
        parts.push(format!(
            "{}-way test1 {a1:.3} test2 {a2:.3} ({} epochs)",
            scheme.arity(),
            out.log.len()
        ));
        if a1 < floor {
            failures.push(format!("{}-way test1 {a1:.3} < {floor}", scheme.arity()));
        }
        if a1 - a2 > 0.10 {
            failures.push(format!("{}-way test2 gap {:.3} > 0.10", scheme.arity(), a1 - a2));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > C8_BUDGET {
        failures.push(format!("took {elapsed:.0?}"));
    }
    let summary = format!("{}, {elapsed:.0?}", parts.join("; "));
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}: {summary}", failures.join(", ")))
    }
}

// 9 ------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let names = LabelScheme::Nine.class_names();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut actual = BTreeMap::new();
    for s in 0..5 {
        let n = rng.random_range(20_000..40_000);
        actual.insert(
            format!("s{s}"),
            (0..n).map(|i| (i / 997 + s) % 9).collect::<Vec<usize>>(),
        );
    }
    let perfect = aggregate_time(&actual, &actual, names, 10.0).map_err(|e| e.to_string())?;
    ensure(perfect.rmse_minutes.iter().all(|&r| r == 0.0), || {
        "perfect predictions give non-zero RMSE".into()
    })?;

    // two sessions, "g" over- and under-predicted by exactly 6000 frames
    let g = 6;
    let base: Vec<usize> = (0..30_000).map(|i| if i < 12_000 { g } else { 1 }).collect();
    let mut over = base.clone();
    over[12_000..18_000].fill(g);
    let mut under = base.clone();
    under[..6_000].fill(1);
    let act = BTreeMap::from([("a".to_string(), base.clone()), ("b".to_string(), base)]);
    let pred = BTreeMap::from([("a".to_string(), over), ("b".to_string(), under)]);
    let rep = aggregate_time(&pred, &act, names, 10.0).map_err(|e| e.to_string())?;
    ensure(rep.rmse_minutes[g] == 1.0, || {
        format!("RMSE for g {}", rep.rmse_minutes[g])
    })?;
    ensure(rep.rmse_minutes[1] == 1.0, || {
        format!("RMSE for l {}", rep.rmse_minutes[1])
    })?;

    for (id, frames) in &actual {
        let mut noisy = frames.clone();
        for v in noisy.iter_mut().step_by(3) {
            *v = rng.random_range(0..9);
        }
        let r = aggregate_time(&BTreeMap::from([(id.clone(), noisy)]), &actual, names, 10.0).unwrap();
        let total: f64 = r.sessions[0].predicted_minutes.iter().sum();
        let duration = frames.len() as f64 * 10.0 / 60_000.0;
        ensure((total - duration).abs() <= 1e-9 * duration, || {
            format!("{id}: {total} vs {duration} minutes")
        })?;
        let frame_total: u64 = r.sessions[0].predicted_frames.iter().sum();
        ensure(frame_total == frames.len() as u64, || {
            format!("{id}: frame totals differ")
        })?;
    }
    Ok("perfect RMSE 0, +-1 min pair RMSE 1.00, session totals exact".into())
}

// 10 -----------------------------------------------------------------

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let feat = FeatureStream::new(
        "mel",
        FrameSpec::MEL,
        Array2::from_shape_simple_fn((123, 40), || rng.random_range(-30.0f32..5.0) as f64),
    );
    let bytes = encode_feature_file(&feat).map_err(|e| e.to_string())?;
    let back = decode_feature_file(&bytes, std::path::Path::new("mem")).map_err(|e| e.to_string())?;
    ensure(back == feat, || "feature file round trip changed values".into())?;
    ensure(encode_feature_file(&back).unwrap() == bytes, || {
        "feature re-encode differs".into()
    })?;

    let dim = 43;
    let stats = cad_core::features::StandardizationStats {
        mean: (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect(),
        std: (0..dim).map(|_| rng.random_range(0.5..3.0)).collect(),
        source: cad_core::features::Split::Train,
    };
    let mut checked = 0;
    for arch in [Arch::Dnn, Arch::Dtcnn, Arch::Gru, Arch::Bigru] {
        let model = random_model(ModelConfig::new(arch, dim, 8, 2, 4), &mut rng, 0.3);
        let ckpt = Checkpoint::new(
            model,
            LabelScheme::Four,
            cad_core::io::default_recipe(),
            stats.clone(),
            "d".into(),
            3,
            0.1,
        )
        .map_err(|e| e.to_string())?;
        let bytes = encode_checkpoint(&ckpt).map_err(|e| e.to_string())?;
        let back = decode_checkpoint(&bytes, std::path::Path::new("mem")).map_err(|e| e.to_string())?;
        ensure(back == ckpt, || format!("{arch:?} checkpoint round trip differs"))?;
        let x = random_input(50, dim, &mut rng);
        let (p, q) = (ckpt.model.posteriors(&x).unwrap(), back.model.posteriors(&x).unwrap());
        ensure(
            p.view().iter().zip(q.view()).all(|(a, b)| a.to_bits() == b.to_bits()),
            || format!("{arch:?} reloaded posteriors differ"),
        )?;
        checked += 1;

        if arch == Arch::Bigru {
            let wave = Waveform::new(
                (0..24_000)
                    .map(|i| 0.3 * (i as f64 * 0.05).sin() * (i as f64 * 1e-3).cos())
                    .collect(),
                16_000,
            )
            .unwrap();
            let dir = tempfile::tempdir().unwrap();
            let mut files = Vec::new();
            for run in 0..2 {
                let pred =
                    predict_waveform(&back, &wave, &back.recipe, Execution::default()).map_err(|e| e.to_string())?;
                let (t, f) = write_prediction(&dir.path().join(run.to_string()), "x", &pred, LabelScheme::Four)
                    .map_err(|e| e.to_string())?;
                files.push((std::fs::read(t).unwrap(), std::fs::read(f).unwrap()));
            }
            ensure(files[0] == files[1], || "predict outputs differ between runs".into())?;
        }
    }
    Ok(format!(
        "feature file and {checked} checkpoints bit-exact, predict byte-identical"
    ))
}

// 11 -----------------------------------------------------------------

fn sine(freq: f64, seconds: f64, rate: u32) -> Waveform {
    let n = (seconds * rate as f64) as usize;
    Waveform::new(
        (0..n)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect(),
        rate,
    )
    .unwrap()
}

fn criterion_11() -> Outcome {
    // filter centers evenly spaced in mel between 0 and Nyquist
    let n_mels = 40;
    let top = hz_to_mel(8000.0);
    let centers: Vec<f64> = (1..=n_mels)
        .map(|i| 700.0 * (10f64.powf(top * i as f64 / (n_mels + 1) as f64 / 2595.0) - 1.0))
        .collect();
    let mut tested = 0;
    let mut f = 150.0;
    while f < 7600.0 {
        let mut by_dist: Vec<(f64, usize)> = centers.iter().enumerate().map(|(i, c)| ((c - f).abs(), i)).collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        // skip tones too close to the midpoint between two centers
        if by_dist[1].0 - by_dist[0].0 > 8.0 {
            let mel = extract_stream(&sine(f, 1.0, 16_000), "mel", Execution::default()).map_err(|e| e.to_string())?;
            let row = mel.data.row(mel.frames() / 2);
            let arg = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            ensure(arg == by_dist[0].1, || {
                format!("{f:.1} Hz peaks in filter {arg}, nearest is {}", by_dist[0].1)
            })?;
            tested += 1;
        }
        f *= 1.09;
    }

    let mut worst_f0: f64 = 0.0;
    for f in [80.0, 95.0, 120.0, 150.0, 180.0, 220.0, 275.0, 310.0, 360.0, 400.0] {
        let w = sine(f, 0.6, 16_000);
        let pro = prosody_features(&frame_signal(&w, FrameSpec::PROSODY).map_err(|e| e.to_string())?);
        let mut f0 = pro.data.column(0).to_vec();
        f0.sort_by(|a, b| a.total_cmp(b));
        let median = f0[f0.len() / 2];
        worst_f0 = worst_f0.max((median - f).abs() / f);
    }
    ensure(worst_f0 <= 0.02, || {
        format!("worst f0 median error {:.2}%", worst_f0 * 100.0)
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_ap: f64 = 0.0;
    for case in 0..300 {
        let n = rng.random_range(1..200);
        let levels = rng.random_range(1..12);
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let mut pos: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        pos[case % n] = true;
        let ap = average_precision(&scores, &pos).unwrap().unwrap();
        let area = pr_curve(&scores, &pos, 0).unwrap().area();
        worst_ap = worst_ap.max((ap - area).abs());
    }
    ensure(worst_ap <= 1e-9, || format!("PR area vs AP {worst_ap:.3e}"))?;

    Ok(format!(
        "{tested} tones in nearest filter, f0 error <= {:.3}%, |area - AP| <= {worst_ap:.1e}",
        worst_f0 * 100.0
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "loss oracle", criterion_1),
        (2, "gradient suite", criterion_2),
        (3, "baseline consistency", criterion_3),
        (4, "error-rate identity", criterion_4),
        (5, "DTCNN locality", criterion_5),
        (6, "BiGRU reversal / GRU causality", criterion_6),
        (7, "gradient accumulation", criterion_7),
        (8, "synthetic learnability", criterion_8),
        (9, "aggregate-time report", criterion_9),
        (10, "format round-trips", criterion_10),
        (11, "feature oracles", criterion_11),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("PASS {id:>2} {name}: {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {detail}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: panicked");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
