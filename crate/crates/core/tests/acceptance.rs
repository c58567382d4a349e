//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use lutpool::harness::synthetic::SyntheticSpec;
use lutpool::image::ImageBuffer;
use lutpool::lut::{query, storage_bytes, Lut, PatchTable, QuantizedLut, RealLut};
use lutpool::metrics::{blocking_effect_factor, mse, psnr, psnr_b, ssim};
use lutpool::orientation::{KernelPattern, OrientationSet};
use lutpool::pipeline::{
    bicubic_resize, query_cost_model, restore_image, restore_instrumented, PipelineConfig, Stage, Task,
};
use lutpool::pooling::{fuse_average, fuse_gmp, fuse_oap, CoeffLut, Norm, PoolingSpec};
use lutpool::training::{
    batch_loss, finetune, forward_backward, train, validation_psnr, FinetuneConfig, Loss, TrainConfig, TrainPair,
    TrainSet, TrainableLut, TrainableModel, TrainablePooling,
};
use lutpool::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_image(r: &mut impl Rng, w: usize, h: usize) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, |_, _| r.gen_range(0..=255) as f64).unwrap()
}

fn random_table(r: &mut impl Rng, q: u8, n: usize, m: usize) -> QuantizedLut {
    let points = (2usize.pow(8 - q as u32) + 1).pow(n as u32);
    let codes = (0..points * m).map(|_| r.gen_range(0..256u16)).collect();
    QuantizedLut::from_codes(q, n, m, 8, false, codes).unwrap()
}

// 1
fn storage() -> Check {
    let cases = [(4, 16, 1_336_336u64), (4, 1, 83_521), (5, 4, 26_244)];
    for (q, m, expected) in cases {
        let got = storage_bytes(q, 4, m, 8).map_err(|e| e.to_string())?;
        ensure(got == expected, || format!("q={q} m={m}: {got} B, expected {expected} B"))?;
    }
    let mb = 1_336_336.0 / (1024.0 * 1024.0);
    let kb = 83_521.0 / 1024.0;
    ensure(format!("{mb:.3}") == "1.274" && format!("{kb:.3}") == "81.563", || format!("{mb} MB, {kb} KB"))?;
    Ok("1336336 / 83521 / 26244 bytes".into())
}

/// Multilinear interpolation written out over all 2^n corners.
fn naive_query(t: &RealLut, q: u8, n: usize, patch: &[f64]) -> Vec<f64> {
    let w = (1u32 << q) as f64;
    let side = 2usize.pow(8 - q as u32) + 1;
    let m = t.m();
    let (base, frac): (Vec<usize>, Vec<f64>) = patch
        .iter()
        .map(|&x| {
            let b = ((x / w).floor() as usize).min(side - 2);
            (b, (x - b as f64 * w) / w)
        })
        .unzip();
    let mut out = vec![0.0; m];
    for corner in 0..1usize << n {
        let mut weight = 1.0;
        let mut flat = 0;
        for d in 0..n {
            let bit = (corner >> d) & 1;
            weight *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
            flat = flat * side + base[d] + bit;
        }
        for (o, v) in out.iter_mut().zip(&t.values()[flat * m..(flat + 1) * m]) {
            *o += weight * v;
        }
    }
    out
}

// 2
fn interpolation() -> Check {
    let mut r = rng(2);
    let (q, n, m) = (4, 4, 3);
    let points = 17usize.pow(4);
    let values = (0..points * m).map(|_| r.gen_range(-300.0..300.0)).collect();
    let table = RealLut::from_values(q, n, m, values).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let patch: Vec<f64> = (0..n)
            .map(|_| if r.gen_bool(0.1) { r.gen_range(0..=255) as f64 } else { r.gen_range(0.0..=255.0) })
            .collect();
        let fast = query(&table, &patch).map_err(|e| e.to_string())?;
        let slow = naive_query(&table, q, n, &patch);
        for (a, b) in fast.iter().zip(&slow) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
        }
    }
    ensure(worst <= 1e-12, || format!("max relative deviation {worst:e}"))?;
    Ok(format!("max relative deviation {worst:.1e} over 10^4 patches"))
}

// 3
fn gmp_limits() -> Check {
    let mut r = rng(3);
    let mut worst_avg: f64 = 0.0;
    let mut worst_hard: f64 = 1.0;
    let mut skipped = 0;
    for _ in 0..1000 {
        let m = r.gen_range(1..=4);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..m).map(|_| r.gen_range(0.0..255.0)).collect()).collect();
        let avg = fuse_average(&xs).unwrap().output;
        let soft = fuse_gmp(&xs, 1e6, Norm::L2).unwrap().output;
        for (a, b) in avg.iter().zip(&soft) {
            worst_avg = worst_avg.max((a - b).abs());
        }
        let mean: Vec<f64> = (0..m).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / 4.0).collect();
        let mut dist: Vec<(f64, usize)> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| (x.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        if dist[1].0 - dist[0].0 < 1e-3 {
            skipped += 1;
            continue;
        }
        let w = fuse_gmp(&xs, 1e-6, Norm::L2).unwrap().weights;
        worst_hard = worst_hard.min(w[dist[0].1]);
    }
    // Distances and values are in 8-bit intensity units, so the gap to the
    // average is about spread * distance spread / (k * tau), up to ~6e-3 here.
    ensure(worst_avg <= 1e-4, || format!("tau=1e6 deviates from average by {worst_avg:.2e}"))?;
    ensure(worst_hard >= 1.0 - 1e-6, || format!("tau=1e-6 nearest weight only {worst_hard}"))?;
    ensure(skipped < 10, || format!("{skipped} near-tied cases"))?;
    Ok(format!("avg gap {worst_avg:.1e}, min nearest weight {worst_hard:.9}"))
}

// 4
fn simplex_and_hull() -> Check {
    let mut r = rng(4);
    let logits = (0..5usize.pow(4) * 4).map(|_| r.gen_range(-6.0..6.0)).collect();
    let real = CoeffLut::new(Lut::Real(RealLut::from_values(6, 4, 4, logits).unwrap().with_orientations(4)), 4).unwrap();
    let quant = CoeffLut::new(Lut::Quantized(random_table(&mut r, 6, 4, 4).with_orientations(4)), 4).unwrap();
    for case in 0..10_000 {
        let m = r.gen_range(1..=4);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..m).map(|_| r.gen_range(-50.0..300.0)).collect()).collect();
        let patch: Vec<f64> = (0..4).map(|_| r.gen_range(0.0..=255.0)).collect();
        let tau = 10f64.powf(r.gen_range(-3.0..4.0));
        let coeff = if case % 2 == 0 { &real } else { &quant };
        let results = [
            fuse_average(&xs).unwrap(),
            fuse_gmp(&xs, tau, if case % 3 == 0 { Norm::L1 } else { Norm::L2 }).unwrap(),
            fuse_oap(&xs, &patch, coeff).unwrap(),
        ];
        for (name, res) in ["avg", "gmp", "oap"].iter().zip(&results) {
            let sum: f64 = res.weights.iter().sum();
            ensure((sum - 1.0).abs() <= 1e-9 && res.weights.iter().all(|&a| a >= -1e-9), || {
                format!("{name} case {case}: weights {:?}", res.weights)
            })?;
            for j in 0..m {
                let lo = xs.iter().map(|x| x[j]).fold(f64::INFINITY, f64::min);
                let hi = xs.iter().map(|x| x[j]).fold(f64::NEG_INFINITY, f64::max);
                let v = res.output[j];
                ensure(v >= lo - 1e-9 && v <= hi + 1e-9, || format!("{name} case {case}: {v} outside [{lo}, {hi}]"))?;
            }
        }
    }
    Ok("10^4 cases x 3 fusers".into())
}

fn two_tap() -> KernelPattern {
    KernelPattern::new("h2", vec![(0, 0), (0, 1)]).unwrap()
}

fn random_pairs(r: &mut impl Rng, count: usize, w: usize, h: usize, scale: usize) -> Vec<TrainPair> {
    (0..count)
        .map(|_| TrainPair {
            input: random_image(r, w, h),
            target: random_image(r, w * scale, h * scale),
        })
        .collect()
}

// 5
fn gradient_checks() -> Check {
    let mut r = rng(5);
    let cfg = TrainConfig {
        loss: Loss::Charbonnier { epsilon: 1e-3 },
        lambda: 0.05,
        ..Default::default()
    };
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    let h = 1e-4;
    let mut checked = [0usize; 3];
    let mut worst: f64 = 0.0;
    for pooling in [
        TrainablePooling::gmp(15.0, Norm::L2, true),
        TrainablePooling::Oap(TrainableLut::zeros(6, 4, 4, 1.0).unwrap()),
    ] {
        let mut model = TrainableModel::new(
            Task::SuperResolution { scale: 2 },
            vec![two_tap()],
            OrientationSet::default(),
            6,
            pooling,
            true,
        )
        .map_err(|e| e.to_string())?;
        for v in &mut model.tables[0].params.values {
            *v = r.gen_range(-0.2..0.2);
        }
        if let TrainablePooling::Oap(c) = &mut model.pooling {
            for v in &mut c.params.values {
                *v = r.gen_range(-1.5..1.5);
            }
        }
        let pairs = random_pairs(&mut r, 2, 6, 5, 2);
        let set = TrainSet::new(&pairs, 2, true, model.pad(), true, false).map_err(|e| e.to_string())?;
        let samples = set.all_samples();
        let grads = forward_backward(&model, &set, &samples, &cfg).map_err(|e| e.to_string())?.gradients;

        let mut coords: Vec<(bool, usize)> = Vec::new();
        let live: Vec<usize> = (0..grads.tables[0].len()).filter(|&i| grads.tables[0][i] != 0.0).collect();
        for _ in 0..200 {
            coords.push((true, live[r.gen_range(0..live.len())]));
        }
        let live: Vec<usize> = (0..grads.pooling.len()).filter(|&i| grads.pooling[i] != 0.0).collect();
        let pooling_coords = if grads.pooling.len() == 1 { 1 } else { 200 };
        for _ in 0..pooling_coords {
            coords.push((false, live[r.gen_range(0..live.len())]));
        }
        for (table, i) in coords {
            let eval = |delta: f64| {
                let mut m = model.clone();
                if table {
                    m.tables[0].params.values[i] += delta;
                } else {
                    m.pooling_params_mut().unwrap().values[i] += delta;
                }
                batch_loss(&m, &set, &samples, &cfg).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let g = if table { grads.tables[0][i] } else { grads.pooling[i] };
            let e = rel(g, fd);
            worst = worst.max(e);
            ensure(e <= 1e-4, || format!("{} {} {i}: analytic {g} vs fd {fd}", model.pooling.name(), if table { "entry" } else { "pooling" }))?;
            let slot = if table { 0 } else if pooling_coords == 1 { 2 } else { 1 };
            checked[slot] += 1;
        }
    }
    let total: usize = checked.iter().sum();
    ensure(total >= 500, || format!("only {total} coordinates"))?;
    Ok(format!(
        "{total} coordinates ({} entries, {} logits, {} tau), max rel err {worst:.1e}",
        checked[0], checked[1], checked[2]
    ))
}

// 6
fn equivariance() -> Check {
    let mut r = rng(6);
    let table: Arc<dyn PatchTable> = Arc::new(Lut::Quantized(random_table(&mut r, 4, 4, 4)));
    let config = PipelineConfig::single(Task::SuperResolution { scale: 2 }, table, PoolingSpec::Average, false);
    for i in 0..20 {
        let img = random_image(&mut r, 32, 32);
        for turns in 1..4u8 {
            let a = restore_image(&img.rotate(turns), &config).map_err(|e| e.to_string())?;
            let b = restore_image(&img, &config).map_err(|e| e.to_string())?.rotate(turns);
            let border = 4;
            ensure(a.shave(border) == b.shave(border), || format!("image {i}, {turns} quarter turns"))?;
        }
    }
    Ok("20 images x 3 rotations, exact on interior".into())
}

// 7
fn zero_logit_oap() -> Check {
    let mut r = rng(7);
    let table: Arc<dyn PatchTable> = Arc::new(Lut::Quantized(random_table(&mut r, 4, 4, 4)));
    let avg = PipelineConfig::single(Task::SuperResolution { scale: 2 }, table.clone(), PoolingSpec::Average, true);
    let zero = RealLut::zeros(5, 4, 4).unwrap().with_orientations(4);
    let oap = PipelineConfig {
        pooling: PoolingSpec::Oap(CoeffLut::new(Lut::Real(zero), 4).unwrap()),
        ..avg.clone()
    };
    for i in 0..5 {
        let img = random_image(&mut r, 24, 20);
        let a = restore_image(&img, &avg).map_err(|e| e.to_string())?;
        let b = restore_image(&img, &oap).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("image {i} differs"))?;
    }
    Ok("5 images bitwise identical".into())
}

// 8
fn outliers() -> Check {
    let mut cases = 0;
    for delta in [20.0, -20.0, 50.0, -50.0, 74.0, -74.0f64] {
        for v in (0..=255).step_by(5).map(|v| v as f64) {
            if !(0.0..=255.0).contains(&(v + delta)) {
                continue;
            }
            let xs = [[v], [v], [v], [v + delta]];
            let g = fuse_gmp(&xs, delta.abs() / 8.0, Norm::L2).unwrap().output[0];
            let a = fuse_average(&xs).unwrap().output[0];
            ensure((g - v).abs() < (a - v).abs(), || format!("v={v} delta={delta}: gmp {g}, avg {a}"))?;
            cases += 1;
        }
    }
    let g = fuse_gmp(&[[130.0], [130.0], [130.0], [56.0]], 74.0 / 8.0, Norm::L2).unwrap().output[0];
    Ok(format!("{cases} tuples; outlier 56 vs 130 fuses to {g:.3} (average 111.5)"))
}

struct DeskRun {
    bicubic: f64,
    average: f64,
    oap: f64,
    gmp: f64,
    tau: f64,
    steps: usize,
    exported: f64,
    real: f64,
    export_time: Duration,
}

fn desk_training() -> Result<DeskRun, String> {
    let e = |e: lutpool::training::TrainError| e.to_string();
    let spec = SyntheticSpec::default();
    let (train_pairs, val) = spec.pairs().map_err(|e| e.to_string())?;
    let bicubic = val
        .iter()
        .map(|p| {
            let up = bicubic_resize(&p.input, 2.0).unwrap().quantized();
            psnr(&p.target.shave(2), &up.shave(2)).unwrap()
        })
        .sum::<f64>()
        / val.len() as f64;

    let mut model = TrainableModel::new(
        Task::SuperResolution { scale: 2 },
        vec![KernelPattern::square()],
        OrientationSet::default(),
        4,
        TrainablePooling::Average,
        true,
    )
    .map_err(e)?;
    let set = TrainSet::new(&train_pairs, 2, true, model.pad(), true, true).map_err(e)?;
    let main = TrainConfig {
        lr: 1e-3,
        iterations: 600,
        batch: 64,
        patch: 12,
        seed: 1,
        ..Default::default()
    };
    train(&mut model, &set, &[], &main).map_err(e)?;
    let average = validation_psnr(&model, &val, Execution::Parallel).map_err(e)?;

    let mut ft = FinetuneConfig::after(&main);
    ft.train.eval_every = 10;
    let mut oap_model = model.clone();
    let coeff = TrainablePooling::oap_zero(5, 4).map_err(e)?;
    let oap = finetune(&mut oap_model, coeff, &set, &val, &ft).map_err(e)?;
    let mut gmp_model = model.clone();
    let gmp = finetune(&mut gmp_model, TrainablePooling::gmp(30.0, Norm::L2, true), &set, &val, &ft).map_err(e)?;

    let export_start = Instant::now();
    let exported = oap_model.export(8, Execution::Parallel).map_err(e)?;
    let real = oap.final_val_psnr.unwrap();
    let pairs: Vec<_> = val.to_vec();
    let mut total = 0.0;
    for p in &pairs {
        let out = restore_image(&p.input, &exported.config).map_err(|e| e.to_string())?;
        total += psnr(&p.target.shave(2), &out.shave(2)).map_err(|e| e.to_string())?;
    }
    Ok(DeskRun {
        bicubic,
        average,
        oap: real,
        gmp: gmp.final_val_psnr.unwrap(),
        tau: gmp_model.pooling.tau().unwrap(),
        steps: main.iterations + 2 * ft.train.iterations,
        exported: total / pairs.len() as f64,
        real,
        export_time: export_start.elapsed(),
    })
}

// 9
fn desk_scale(run: &Result<DeskRun, String>) -> Check {
    let d = run.as_ref().map_err(Clone::clone)?;
    ensure(d.steps <= 20_000, || format!("{} steps", d.steps))?;
    ensure(d.average >= d.bicubic + 0.3, || format!("average {:.3} vs bicubic {:.3}", d.average, d.bicubic))?;
    ensure(d.oap >= d.average, || format!("oap {:.3} below average {:.3}", d.oap, d.average))?;
    ensure(d.gmp >= d.average - 0.05, || format!("gmp {:.3} vs average {:.3}", d.gmp, d.average))?;
    Ok(format!(
        "bicubic {:.3}, average {:.3}, oap {:.3}, gmp {:.3} (tau {:.2}) dB, {} steps",
        d.bicubic, d.average, d.oap, d.gmp, d.tau, d.steps
    ))
}

// 10
fn export_consistency(run: &Result<DeskRun, String>) -> Check {
    let d = run.as_ref().map_err(Clone::clone)?;
    let gap = (d.exported - d.real).abs();
    ensure(gap <= 0.2, || format!("8-bit {:.3} vs real {:.3} dB", d.exported, d.real))?;
    Ok(format!("8-bit {:.3} vs real {:.3} dB (gap {gap:.3})", d.exported, d.real))
}

// 11
fn metric_sanity() -> Check {
    let mut r = rng(11);
    let a = random_image(&mut r, 40, 40);
    let b = ImageBuffer::from_fn(40, 40, |row, c| {
        let v = a.get(row, c);
        if v < 128.0 { v + 1.0 } else { v - 1.0 }
    })
    .unwrap();
    ensure(mse(&a, &b).unwrap() == 1.0, || "mse".into())?;
    let p = psnr(&a, &b).unwrap();
    let expected = 20.0 * 255f64.log10();
    ensure((p - expected).abs() < 1e-9 && (p - 48.1308).abs() < 5e-5, || format!("unit mse psnr {p}"))?;
    ensure(ssim(&a, &a).unwrap() == 1.0, || "ssim of identical images".into())?;
    for _ in 0..200 {
        let (w, h) = (r.gen_range(8..48), r.gen_range(8..48));
        let x = random_image(&mut r, w, h);
        let noise = random_image(&mut r, w, h);
        let y = ImageBuffer::from_fn(w, h, |row, c| {
            (x.get(row, c) + (noise.get(row, c) - 127.5) / 4.0).clamp(0.0, 255.0).round()
        })
        .unwrap();
        let (pb, pp) = (psnr_b(&x, &y, 8).unwrap(), psnr(&x, &y).unwrap());
        ensure(pb <= pp, || format!("psnr-b {pb} > psnr {pp}"))?;
        if blocking_effect_factor(&y, 8).unwrap() == 0.0 {
            ensure(pb == pp, || "psnr-b differs with zero blocking factor".into())?;
        }
    }
    let ramp = ImageBuffer::from_fn(32, 32, |row, c| (row * 3 + c * 5) as f64).unwrap();
    let shifted = ramp.map(|v| v + 2.0);
    ensure(blocking_effect_factor(&shifted, 8).unwrap() == 0.0, || "ramp blocking".into())?;
    ensure(psnr_b(&ramp, &shifted, 8).unwrap() == psnr(&ramp, &shifted).unwrap(), || "ramp psnr-b".into())?;
    Ok(format!("unit mse {p:.4} dB, ssim 1, psnr-b bounds on 200 pairs"))
}

// 12
fn cost_accounting() -> Check {
    let mut r = rng(12);
    let t1: Arc<dyn PatchTable> = Arc::new(Lut::Quantized(random_table(&mut r, 4, 4, 1)));
    let t4: Arc<dyn PatchTable> = Arc::new(Lut::Quantized(random_table(&mut r, 4, 4, 4)));
    let coeff = CoeffLut::new(Lut::Quantized(random_table(&mut r, 5, 4, 4).with_orientations(4)), 4).unwrap();
    let img = random_image(&mut r, 64, 48);
    let pixels = 64 * 48u64;
    let mut runs = 0;
    for pooling in [PoolingSpec::Average, PoolingSpec::gmp(8.0, Norm::L2).unwrap(), PoolingSpec::Oap(coeff)] {
        for stages in [1, 2] {
            for share in [true, false] {
                if share && !matches!(pooling, PoolingSpec::Oap(_)) {
                    continue;
                }
                let mut config =
                    PipelineConfig::single(Task::SuperResolution { scale: 2 }, t4.clone(), pooling.clone(), true);
                if stages == 2 {
                    config.stages = vec![Stage::single(t1.clone()), Stage::single(t4.clone())];
                }
                config.share_oap_across_stages = share;
                let (_, stats) = restore_instrumented(&img, &config).map_err(|e| e.to_string())?;
                let model = query_cost_model(&config);
                let name = pooling.name();
                ensure(stats.lut_queries == model.lut_queries_per_pixel * pixels, || format!("{name}/{stages}: lut"))?;
                ensure(stats.coeff_queries == model.coeff_queries_per_pixel * pixels, || {
                    format!("{name}/{stages}: coefficient")
                })?;
                ensure(stats.lut_queries == 4 * stages as u64 * pixels, || format!("{name}/{stages}: k T_f"))?;
                let coeff_expected = match (name, share) {
                    ("oap", true) => pixels,
                    ("oap", false) => stages as u64 * pixels,
                    _ => 0,
                };
                ensure(stats.coeff_queries == coeff_expected, || format!("{name}/{stages}: T_C"))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} configurations match the cost model"))
}

fn main() {
    let mut failed = 0;
    // `extra` charges work done before the check itself (the shared training run).
    let mut report = |id: usize, name: &str, budget: Duration, extra: Duration, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let took = start.elapsed() + extra;
        let (status, detail) = match (&result, took <= budget) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over time budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "{status} {id:>2} {name:<28} {:>8.2}s / {:>4}s  {detail}",
            took.as_secs_f64(),
            budget.as_secs()
        );
    };
    let s = Duration::from_secs;
    report(1, "storage exactness", s(1), Duration::ZERO, &mut storage);
    report(2, "interpolation oracle", s(5), Duration::ZERO, &mut interpolation);
    report(3, "gmp limits", s(5), Duration::ZERO, &mut gmp_limits);
    report(4, "simplex and hull", s(5), Duration::ZERO, &mut simplex_and_hull);
    report(5, "gradient checks", s(30), Duration::ZERO, &mut gradient_checks);
    report(6, "rotation equivariance", s(10), Duration::ZERO, &mut equivariance);
    report(7, "zero-logit oap is average", s(5), Duration::ZERO, &mut zero_logit_oap);
    report(8, "outlier robustness", s(1), Duration::ZERO, &mut outliers);
    let start = Instant::now();
    let run = catch_unwind(desk_training).unwrap_or_else(|_| Err("training panicked".into()));
    let export = run.as_ref().map_or(Duration::ZERO, |d| d.export_time);
    let training = start.elapsed() - export;
    report(9, "desk-scale training", s(15 * 60), training, &mut || desk_scale(&run));
    report(10, "export consistency", s(120), export, &mut || export_consistency(&run));
    report(11, "metric sanity", s(5), Duration::ZERO, &mut metric_sanity);
    report(12, "cost accounting", s(10), Duration::ZERO, &mut cost_accounting);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
