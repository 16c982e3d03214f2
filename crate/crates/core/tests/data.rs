mod common;

use common::*;
use proptest::prelude::*;
use win_core::data::*;

fn noise_field(sigma: f32, seed: u64) -> (Vec<f64>, GrayImage, GrayImage) {
    let clean = GrayImage::filled(512, 512, 0.5).unwrap();
    let pair = add_awgn(&clean, sigma, seed).unwrap();
    let diff = pair
        .noisy
        .pixels()
        .iter()
        .zip(clean.pixels())
        .map(|(&n, &c)| n as f64 - c as f64)
        .collect();
    (diff, clean, pair.noisy)
}

#[test]
fn awgn_moments_and_closed_form_psnr() {
    for (sigma, expected_db) in [(10.0f32, 28.13), (30.0, 18.59), (50.0, 14.15), (70.0, 11.23)] {
        let (d, _, _) = noise_field(sigma, 7);
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let target = sigma as f64 / 255.0;
        assert!((var.sqrt() / target - 1.0).abs() < 0.01, "sigma {sigma}: std {}", var.sqrt());
        assert!(mean.abs() < 3.0 * target / n.sqrt(), "sigma {sigma}: mean {mean}");
        let mse = d.iter().map(|v| v * v).sum::<f64>() / n;
        let db = 10.0 * (1.0 / mse).log10();
        assert!((db - expected_db).abs() <= 0.15, "sigma {sigma}: {db} dB");
    }
}

#[test]
fn awgn_leaves_clean_untouched_and_is_seeded() {
    let img = GrayImage::from_fn(33, 17, |x, y| (x + y) as f32 / 50.0).unwrap();
    let copy = img.clone();
    let a = add_awgn(&img, 25.0, 1).unwrap();
    let b = add_awgn(&img, 25.0, 1).unwrap();
    let c = add_awgn(&img, 25.0, 2).unwrap();
    assert_eq!(img, copy);
    assert_eq!(a.clean, img);
    assert_eq!(a.noisy, b.noisy);
    assert_ne!(a.noisy, c.noisy);
    assert!(add_awgn(&img, -1.0, 1).is_err());
}

#[test]
fn stronger_noise_moves_pixels_further() {
    let levels = [5.0f32, 15.0, 30.0, 55.0];
    let mad: Vec<f64> = levels
        .iter()
        .map(|&s| {
            let (d, _, _) = noise_field(s, 3);
            d.iter().map(|v| v.abs()).sum::<f64>() / d.len() as f64
        })
        .collect();
    assert!(mad.windows(2).all(|w| w[0] < w[1]), "{mad:?}");
}

#[test]
fn blind_sigma_is_uniform() {
    let corpus: Vec<GrayImage> = (0..4)
        .map(|i| GrayImage::from_fn(40, 40, |x, y| ((x * 3 + y * (i + 1)) % 23) as f32 / 23.0).unwrap())
        .collect();
    let cfg = StreamConfig {
        regime: SigmaRegime::blind(),
        patch_size: 8,
        stride: 2,
        batch: 50,
        augment: false,
        seed: 12,
    };
    let stream = make_training_stream(&corpus, cfg).unwrap();
    let sigmas: Vec<f32> = stream.take(200).flat_map(|b| b.sigmas).collect();
    assert_eq!(sigmas.len(), 10_000);
    let bins = 14;
    let mut counts = vec![0u32; bins];
    for s in &sigmas {
        assert!((0.0..=70.0).contains(s));
        counts[((s / 70.0 * bins as f32) as usize).min(bins - 1)] += 1;
    }
    let expected = sigmas.len() as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 13 degrees of freedom, 0.001 upper tail.
    assert!(chi2 < 34.53, "chi-square {chi2}: {counts:?}");
}

#[test]
fn stream_is_reproducible_and_seekable() {
    let corpus: Vec<GrayImage> = train_images().into_iter().take(3).map(|n| n.image).collect();
    let mut cfg = StreamConfig::new(SigmaRegime::blind(), 5);
    cfg.batch = 4;
    cfg.augment = true;
    let a: Vec<Batch> = make_training_stream(&corpus, cfg).unwrap().take(12).collect();
    let b: Vec<Batch> = make_training_stream(&corpus, cfg).unwrap().take(12).collect();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.noisy, y.noisy);
        assert_eq!(x.origins, y.origins);
    }
    let mut s = make_training_stream(&corpus, cfg).unwrap();
    s.seek(7);
    assert_eq!(s.next().unwrap().noisy, a[7].noisy);

    cfg.seed = 6;
    let c = make_training_stream(&corpus, cfg).unwrap().next().unwrap();
    assert_ne!(c.noisy, a[0].noisy);
}

#[test]
fn stream_visits_every_patch_once_per_epoch() {
    let corpus: Vec<GrayImage> = (0..2)
        .map(|i| GrayImage::from_fn(20, 20, |x, y| (x * 20 + y + i * 400) as f32 / 800.0).unwrap())
        .collect();
    let cfg = StreamConfig {
        regime: SigmaRegime::Single { sigma: 15.0 },
        patch_size: 8,
        stride: 4,
        batch: 5,
        augment: false,
        seed: 1,
    };
    let stream = make_training_stream(&corpus, cfg).unwrap();
    assert_eq!(stream.num_patches(), 2 * 16);
    let per_epoch = stream.batches_per_epoch() as usize;
    assert_eq!(per_epoch, 6);
    let mut seen: Vec<PatchOrigin> = stream.take(per_epoch).flat_map(|b| {
        assert!(b.sigmas.iter().all(|&s| s == 15.0));
        b.origins
    }).collect();
    seen.sort_by_key(|o| (o.image, o.top, o.left));
    seen.dedup();
    assert_eq!(seen.len(), per_epoch * 5);
}

#[test]
fn stream_errors() {
    let cfg = StreamConfig::new(SigmaRegime::Single { sigma: 10.0 }, 0);
    assert!(make_training_stream(&[], cfg).is_err());
    let small = vec![GrayImage::filled(64, 64, 0.2).unwrap()];
    assert!(make_training_stream(&small, cfg).is_err(), "one patch cannot fill a batch of 32");
}

#[test]
fn fixture_manifests_load() {
    let train = train_images();
    let test = test_images();
    assert!(train.len() >= 10 && train.len() <= 20);
    assert!(test.len() >= 5);
    for im in train.iter().chain(&test) {
        assert!(im.image.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        let bytes = encode_pgm(&im.image);
        assert_eq!(decode_pgm(&bytes).unwrap(), im.image);
    }
}

fn square_patch() -> impl Strategy<Value = (usize, Vec<f32>)> {
    (1usize..=9).prop_flat_map(|s| (Just(s), proptest::collection::vec(0.0f32..1.0, s * s)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn patch_count_and_crops(h in 4usize..40, w in 4usize..40, size in 1usize..12, stride in 1usize..9) {
        prop_assume!(size <= h.min(w));
        let img = GrayImage::from_fn(w, h, |x, y| (y * w + x) as f32).unwrap();
        let set = extract_patches(&img, size, stride).unwrap();
        prop_assert_eq!(set.len(), ((h - size) / stride + 1) * ((w - size) / stride + 1));
        prop_assert_eq!(set.len(), patch_count(h, w, size, stride));
        for (i, o) in set.provenance.iter().enumerate() {
            prop_assert_eq!(o.top % stride, 0);
            prop_assert_eq!(o.left % stride, 0);
            let p = set.patch(i);
            for r in 0..size {
                for c in 0..size {
                    prop_assert_eq!(p[r * size + c], img.get(o.left + c, o.top + r));
                }
            }
        }
    }

    #[test]
    fn dihedral_group_laws((s, p) in square_patch()) {
        prop_assert_eq!(&augment(&p, s, 0).unwrap(), &p);
        let mut q = p.clone();
        for _ in 0..4 {
            q = augment(&q, s, 1).unwrap();
        }
        prop_assert_eq!(&q, &p);
        let flipped = augment(&augment(&p, s, 4).unwrap(), s, 4).unwrap();
        prop_assert_eq!(&flipped, &p);
        for code in 0..8u8 {
            let mut a = augment(&p, s, code).unwrap();
            let mut b = p.clone();
            a.sort_by(f32::total_cmp);
            b.sort_by(f32::total_cmp);
            prop_assert_eq!(a, b);
        }
        prop_assert!(augment(&p, s, 8).is_err());
    }

}
