//! Deterministic synthetic JPEG corpus.
//!
//! Images mix smooth gradients, filled shapes, stripes and noise so the
//! entropy-coded scans exercise a wide spread of MCU lengths, including
//! 0xFF bytes that need stuffing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{encode, EncodeParams, Sampling};

#[derive(Debug, Clone)]
pub struct CorpusImage {
    pub name: String,
    pub params: EncodeParams,
    pub bytes: Vec<u8>,
}

/// Renders `width` x `height` pixels with `channels` channels.
pub fn render(rng: &mut impl Rng, width: u32, height: u32, channels: usize) -> Vec<u8> {
    let (w, h) = (width as usize, height as usize);
    let mut px = vec![0u8; w * h * channels];
    let base: Vec<f32> = (0..channels).map(|_| rng.random_range(0.0..255.0)).collect();
    let gx: Vec<f32> = (0..channels).map(|_| rng.random_range(-2.0..2.0)).collect();
    let gy: Vec<f32> = (0..channels).map(|_| rng.random_range(-2.0..2.0)).collect();
    let noise = rng.random_range(0.0f32..60.0);
    let stripes = rng.random_bool(0.3);
    let period = rng.random_range(2..24) as usize;
    for y in 0..h {
        for x in 0..w {
            for c in 0..channels {
                let mut v = base[c] + gx[c] * x as f32 + gy[c] * y as f32;
                if stripes && (x / period + y / period).is_multiple_of(2) {
                    v += 70.0;
                }
                v += rng.random_range(-noise..=noise);
                px[(y * w + x) * channels + c] = v.rem_euclid(256.0) as u8;
            }
        }
    }
    let shapes = rng.random_range(0..6);
    for _ in 0..shapes {
        let cx = rng.random_range(0..w) as i64;
        let cy = rng.random_range(0..h) as i64;
        let r = rng.random_range(2..(w.max(h) / 2).max(3)) as i64;
        let color: Vec<u8> = (0..channels).map(|_| rng.random()).collect();
        for y in (cy - r).max(0)..(cy + r).min(h as i64) {
            for x in (cx - r).max(0)..(cx + r).min(w as i64) {
                if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                    let o = (y as usize * w + x as usize) * channels;
                    px[o..o + channels].copy_from_slice(&color);
                }
            }
        }
    }
    px
}

/// Draws random baseline encoding parameters.
pub fn random_params(rng: &mut impl Rng, max_dim: u32) -> EncodeParams {
    let sampling = Sampling::ALL[rng.random_range(0..Sampling::ALL.len())];
    let restart_interval = match rng.random_range(0..6) {
        0 => 1,
        1 => 4,
        2 => rng.random_range(2..40),
        _ => 0,
    };
    EncodeParams {
        width: rng.random_range(1..=max_dim),
        height: rng.random_range(1..=max_dim),
        sampling,
        quality: rng.random_range(20..=100),
        restart_interval,
        optimize: rng.random_bool(0.4),
        progressive: false,
        arithmetic: false,
    }
}

/// Generates `count` baseline images; identical seeds give identical bytes.
pub fn baseline_corpus(count: usize, seed: u64, max_dim: u32) -> Vec<CorpusImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let params = random_params(&mut rng, max_dim);
            let px = render(&mut rng, params.width, params.height, params.sampling.components());
            let bytes = encode(&params, &px).expect("libjpeg encode");
            CorpusImage { name: format!("synth-{seed}-{i:04}"), params, bytes }
        })
        .collect()
}
