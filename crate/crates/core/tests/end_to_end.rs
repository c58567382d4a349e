use std::sync::Arc;

use lutpool::harness::config::ConfigFile;
use lutpool::harness::eval::{evaluate_all, write_metric_csv};
use lutpool::harness::manifest::{DatasetManifest, Split};
use lutpool::harness::pnm::write_pgm;
use lutpool::harness::synthetic::synthetic_image;
use lutpool::image::ImageBuffer;
use lutpool::lut::{bake, Lut, PatchTable, QuantizedLut};
use lutpool::metrics::EvalOptions;
use lutpool::pipeline::{bicubic_resize_to, restore_image, PipelineConfig, Stage, Task};
use lutpool::pooling::{CoeffLut, Norm, PoolingSpec};
use lutpool::Execution;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn constant_table(m: usize, value: f64) -> QuantizedLut {
    bake(
        |_, out| {
            out.fill(value);
            Ok(())
        },
        4,
        4,
        m,
        8,
        true,
    )
    .unwrap()
    .0
}

fn random_table(m: usize, seed: u64) -> Arc<dyn PatchTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = 17usize.pow(4);
    let codes = (0..points * m).map(|_| rng.gen_range(100..156u16)).collect();
    Arc::new(Lut::Quantized(QuantizedLut::from_codes(4, 4, m, 8, true, codes).unwrap()))
}

fn noise_image(w: usize, h: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px: Vec<u8> = (0..w * h).map(|_| rng.gen()).collect();
    ImageBuffer::from_u8(w, h, &px).unwrap()
}

#[test]
fn zero_residual_table_from_config_gives_bicubic() {
    let dir = tempfile::tempdir().unwrap();
    Lut::Quantized(constant_table(4, 0.0)).write(dir.path().join("zero.lut")).unwrap();
    let text = "[pipeline]\ntask = \"sr\"\nscale = 2\nstages = [\"zero.lut\"]\n[pipeline.pooling]\nkind = \"gmp\"\ntau = 4.0\n";
    std::fs::write(dir.path().join("p.toml"), text).unwrap();
    let file = ConfigFile::load(dir.path().join("p.toml")).unwrap();
    let config = file.pipeline.build(&file.base_dir).unwrap();

    let input = synthetic_image(5, 1, 24).unwrap();
    let out = restore_image(&input, &config).unwrap();
    let bicubic = bicubic_resize_to(&input, 48, 48).unwrap().quantized();
    assert_eq!(out, bicubic);
}

#[test]
fn manifest_degrade_restore_eval() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..3 {
        write_pgm(dir.path().join(format!("img{i}.pgm")), &synthetic_image(9, i, 32).unwrap()).unwrap();
    }
    let manifest = "# name: toy\ntest\timg0.pgm\t@awgn:15:3\ntest\timg1.pgm\t@awgn:15:3\ntrain\timg2.pgm\t@bicubic_down:2\n";
    std::fs::write(dir.path().join("toy.tsv"), manifest).unwrap();
    let m = DatasetManifest::load(dir.path().join("toy.tsv")).unwrap();
    assert_eq!(m.name, "toy");
    let pairs = m.load_pairs(Split::Test).unwrap();
    assert_eq!(pairs.len(), 2);
    assert_ne!(pairs[0].degraded, pairs[1].degraded);

    // A zero residual on the restoration task returns the noisy input.
    let table: Arc<dyn PatchTable> = Arc::new(Lut::Quantized(constant_table(1, 0.0)));
    let config = PipelineConfig::single(Task::Restore, table, PoolingSpec::Average, true);
    let outs: Vec<ImageBuffer> = pairs.iter().map(|p| restore_image(&p.degraded, &config).unwrap()).collect();
    for (p, o) in pairs.iter().zip(&outs) {
        assert_eq!(&p.degraded, o);
    }

    let report = evaluate_all(
        &m.name,
        pairs.iter().zip(&outs).map(|(p, o)| (p.name.clone(), &p.clean, o)),
        EvalOptions::default(),
    )
    .unwrap();
    let mean = report.aggregate().unwrap();
    // sigma 15 noise sits near 24.6 dB before clipping
    assert!((23.0..27.0).contains(&mean.psnr), "{}", mean.psnr);
    assert!(mean.psnr_b.is_none_or(|b| b <= mean.psnr + 1e-9));
    let csv = dir.path().join("m.csv");
    write_metric_csv(&report, &csv).unwrap();
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 4);
}

#[test]
fn missing_manifest_entry_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.tsv"), "test\tnope.pgm\t@awgn:5:1\n").unwrap();
    let err = DatasetManifest::load(dir.path().join("m.tsv")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sr_output_dims(w in 4usize..20, h in 4usize..20, scale in 2usize..5, seed in 0u64..100) {
        let config = PipelineConfig::single(
            Task::SuperResolution { scale },
            random_table(scale * scale, seed),
            PoolingSpec::Average,
            true,
        );
        let out = restore_image(&noise_image(w, h, seed), &config).unwrap();
        prop_assert_eq!(out.dims(), (w * scale, h * scale));
        prop_assert!(out.pixels().iter().all(|v| (0.0..=255.0).contains(v) && v.fract() == 0.0));
    }

    #[test]
    fn constant_image_and_constant_residual(c in 0u8..=255, v in -40i32..40, scale in 2usize..4) {
        let table: Arc<dyn PatchTable> = Arc::new(Lut::Quantized(constant_table(scale * scale, v as f64)));
        let config = PipelineConfig::single(
            Task::SuperResolution { scale },
            table,
            PoolingSpec::gmp(3.0, Norm::L2).unwrap(),
            true,
        );
        let img = ImageBuffer::filled(9, 7, c as f64).unwrap();
        let out = restore_image(&img, &config).unwrap();
        let want = (c as f64 + v as f64).clamp(0.0, 255.0);
        prop_assert!(out.pixels().iter().all(|&p| p == want));
    }

    #[test]
    fn sequential_and_parallel_agree(seed in 0u64..1000, tau in 0.5f64..50.0) {
        let mut config = PipelineConfig::single(
            Task::SuperResolution { scale: 2 },
            random_table(4, seed),
            PoolingSpec::gmp(tau, Norm::L2).unwrap(),
            true,
        );
        let img = noise_image(13, 11, seed + 1);
        config.execution = Execution::Sequential;
        let a = restore_image(&img, &config).unwrap();
        config.execution = Execution::Parallel;
        let b = restore_image(&img, &config).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn uniform_coefficients_make_sharing_irrelevant(seed in 0u64..1000) {
        let coeff = CoeffLut::uniform(4, 4, 4).unwrap();
        let mut config = PipelineConfig::single(Task::Restore, random_table(1, seed), PoolingSpec::Oap(coeff), true);
        config.stages.push(Stage::single(random_table(1, seed + 1)));
        let img = noise_image(12, 10, seed);
        let shared = restore_image(&img, &config).unwrap();
        config.share_oap_across_stages = false;
        let separate = restore_image(&img, &config).unwrap();
        config.pooling = PoolingSpec::Average;
        let average = restore_image(&img, &config).unwrap();
        prop_assert_eq!(&shared, &separate);
        prop_assert_eq!(&shared, &average);
    }
}

// Bilinear extrapolation from the 2x2 patch to the four sub-pixel centres.
// On a linear ramp this equals bicubic upsampling, and every orientation
// agrees, so the baked pipeline must reproduce the ramp.
#[test]
fn baked_subpixel_oracle_reproduces_a_ramp() {
    let (table, clamped) = bake(
        |p, out| {
            let [a, b, c, d] = [p[0], p[1], p[2], p[3]];
            for (k, o) in out.iter_mut().enumerate() {
                let (dy, dx) = ((k / 2) as f64 * 0.5 - 0.25, (k % 2) as f64 * 0.5 - 0.25);
                *o = a * (1.0 - dy) * (1.0 - dx) + b * (1.0 - dy) * dx + c * dy * (1.0 - dx) + d * dy * dx;
            }
            Ok(())
        },
        4,
        4,
        4,
        8,
        false,
    )
    .unwrap();
    assert!(clamped > 0);
    let config = PipelineConfig::single(
        Task::SuperResolution { scale: 2 },
        Arc::new(Lut::Quantized(table)),
        PoolingSpec::Average,
        false,
    );
    let ramp = ImageBuffer::from_fn(6, 6, |r, c| (16 * (r + c) + 32) as f64).unwrap();
    let out = restore_image(&ramp, &config).unwrap();
    for row in 2..10 {
        for col in 2..10 {
            let y = |t: usize| (t as f64 + 0.5) / 2.0 - 0.5;
            let want = 16.0 * (y(row) + y(col)) + 32.0;
            assert!((out.get(row, col) - want).abs() <= 1.0, "({row},{col}) {} vs {want}", out.get(row, col));
        }
    }
}
