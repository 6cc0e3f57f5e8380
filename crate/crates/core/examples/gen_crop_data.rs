//! Writes a synthetic crop-recommendation table with the same schema and
//! per-crop value ranges as the public 2200-row Kaggle dataset.
//!
//! Every feature is drawn uniformly from its per-crop range; N, P and K are
//! integers. Usage: `cargo run -p agroml --example gen_crop_data -- out.csv [seed]`

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Range = (f64, f64);

// crop, N, P, K, temperature, humidity, ph, rainfall
const CROPS: [(&str, Range, Range, Range, Range, Range, Range, Range); 22] = [
    (
        "rice",
        (60., 99.),
        (35., 60.),
        (35., 45.),
        (20., 27.),
        (80., 85.),
        (5., 7.9),
        (182., 299.),
    ),
    (
        "maize",
        (60., 100.),
        (35., 60.),
        (15., 25.),
        (18., 26.5),
        (55., 75.),
        (5.5, 7.),
        (60., 110.),
    ),
    (
        "chickpea",
        (20., 60.),
        (55., 80.),
        (75., 85.),
        (17., 21.),
        (14., 20.),
        (6., 8.9),
        (65., 95.),
    ),
    (
        "kidneybeans",
        (0., 40.),
        (55., 80.),
        (15., 25.),
        (15., 25.),
        (18., 25.),
        (5.5, 6.),
        (60., 150.),
    ),
    (
        "pigeonpeas",
        (0., 40.),
        (55., 80.),
        (15., 25.),
        (18., 37.),
        (30., 70.),
        (4.5, 7.4),
        (90., 199.),
    ),
    (
        "mothbeans",
        (0., 40.),
        (35., 60.),
        (15., 25.),
        (24., 32.),
        (40., 65.),
        (3.5, 9.9),
        (30., 75.),
    ),
    (
        "mungbean",
        (0., 40.),
        (35., 60.),
        (15., 25.),
        (27., 30.),
        (80., 90.),
        (6.2, 7.2),
        (36., 60.),
    ),
    (
        "blackgram",
        (20., 60.),
        (55., 80.),
        (15., 25.),
        (25., 35.),
        (60., 70.),
        (6.5, 7.8),
        (60., 75.),
    ),
    (
        "lentil",
        (0., 40.),
        (55., 80.),
        (15., 25.),
        (18., 30.),
        (60., 70.),
        (5.9, 7.8),
        (35., 55.),
    ),
    (
        "pomegranate",
        (0., 40.),
        (5., 30.),
        (35., 45.),
        (18., 25.),
        (85., 95.),
        (5.6, 7.2),
        (102., 113.),
    ),
    (
        "banana",
        (80., 120.),
        (70., 95.),
        (45., 55.),
        (25., 30.),
        (75., 85.),
        (5.5, 6.5),
        (90., 120.),
    ),
    (
        "mango",
        (0., 40.),
        (15., 40.),
        (25., 35.),
        (27., 36.),
        (45., 55.),
        (4.5, 7.),
        (89., 101.),
    ),
    (
        "grapes",
        (0., 40.),
        (120., 145.),
        (195., 205.),
        (8.8, 42.),
        (80., 84.),
        (5.5, 6.5),
        (65., 75.),
    ),
    (
        "watermelon",
        (80., 120.),
        (5., 30.),
        (45., 55.),
        (24., 27.),
        (80., 90.),
        (6., 7.),
        (40., 60.),
    ),
    (
        "muskmelon",
        (80., 120.),
        (5., 30.),
        (45., 55.),
        (27., 30.),
        (90., 95.),
        (6., 6.8),
        (20., 30.),
    ),
    (
        "apple",
        (0., 40.),
        (120., 145.),
        (195., 205.),
        (21., 24.),
        (90., 95.),
        (5.5, 6.5),
        (100., 125.),
    ),
    (
        "orange",
        (0., 40.),
        (5., 30.),
        (5., 15.),
        (10., 35.),
        (90., 95.),
        (6., 8.),
        (100., 120.),
    ),
    (
        "papaya",
        (31., 70.),
        (46., 70.),
        (45., 55.),
        (23., 44.),
        (90., 95.),
        (6.5, 7.),
        (40., 249.),
    ),
    (
        "coconut",
        (0., 40.),
        (5., 30.),
        (25., 35.),
        (25., 30.),
        (90., 100.),
        (5.5, 6.5),
        (131., 226.),
    ),
    (
        "cotton",
        (100., 140.),
        (35., 60.),
        (15., 25.),
        (22., 26.),
        (75., 85.),
        (5.8, 8.),
        (60., 100.),
    ),
    (
        "jute",
        (60., 100.),
        (35., 60.),
        (35., 45.),
        (23., 27.),
        (70., 90.),
        (6., 7.5),
        (150., 200.),
    ),
    (
        "coffee",
        (80., 120.),
        (15., 40.),
        (25., 35.),
        (23., 28.),
        (50., 70.),
        (6., 7.5),
        (115., 200.),
    ),
];

const ROWS_PER_CROP: usize = 100;

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .unwrap_or_else(|| "data/crop_recommendation.csv".into());
    let seed: u64 = args
        .next()
        .map_or(2200, |s| s.parse().expect("seed must be an integer"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut w = std::io::BufWriter::new(std::fs::File::create(&out)?);
    writeln!(w, "N,P,K,temperature,humidity,ph,rainfall,label")?;
    for (name, n, p, k, t, h, ph, rain) in CROPS {
        for _ in 0..ROWS_PER_CROP {
            let int = |rng: &mut ChaCha8Rng, r: Range| rng.gen_range(r.0 as i64..=r.1 as i64);
            let real = |rng: &mut ChaCha8Rng, r: Range| rng.gen_range(r.0..=r.1);
            let (n, p, k) = (int(&mut rng, n), int(&mut rng, p), int(&mut rng, k));
            let (t, h, ph, rain) = (
                real(&mut rng, t),
                real(&mut rng, h),
                real(&mut rng, ph),
                real(&mut rng, rain),
            );
            writeln!(w, "{n},{p},{k},{t:.8},{h:.8},{ph:.8},{rain:.8},{name}")?;
        }
    }
    w.flush()
}
