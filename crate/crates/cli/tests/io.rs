use atrt_cli::io::{
    boundary_csv, history_csv, image_csv, parse_image_csv, parse_pgm, parse_sinogram_csv, pgm_bytes,
    sinogram_csv,
};
use atrt_core::phantom::make_geometry;
use atrt_core::singularity::RecoveredSet;
use atrt_core::solver::HistoryRow;
use atrt_core::{Image, PixelGrid, Point2, Sinogram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(m: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = PixelGrid::spanning(m, 2.0).unwrap();
    let v = (0..m * m)
        .map(|i| match i % 5 {
            0 => rng.random_range(-1e-300..1e-300),
            1 => rng.random_range(-1e12..1e12),
            _ => rng.random_range(0.0..1.0),
        })
        .collect();
    Image::new(grid, v).unwrap()
}

#[test]
fn image_csv_round_trip_is_lossless() {
    for (m, seed) in [(1, 0), (7, 1), (32, 2)] {
        let img = random_image(m, seed);
        let back = parse_image_csv(&image_csv(&img), 2.0).unwrap();
        assert_eq!(back, img);
    }
}

#[test]
fn pgm_round_trip_is_within_half_a_quantization_step() {
    let mut img = random_image(16, 3);
    img.values_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    let bytes = pgm_bytes(&img, 0.0, 1.0).unwrap();
    assert!(bytes.starts_with(b"P5\n16 16\n65535\n"));
    let back = parse_pgm(&bytes, 2.0, 0.0, 1.0).unwrap();
    for (a, b) in img.values().iter().zip(back.values()) {
        assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-15);
    }
    assert!(pgm_bytes(&img, 1.0, 1.0).is_err());
    assert!(parse_pgm(b"P2\n1 1\n255\n0", 2.0, 0.0, 1.0).is_err());
}

#[test]
fn non_square_images_are_rejected() {
    assert!(parse_image_csv("1,2\n3,4\n5,6\n", 2.0).is_err());
    assert!(parse_image_csv("", 2.0).is_err());
    assert!(parse_image_csv("1,x\n3,4\n", 2.0).is_err());
}

#[test]
fn sinogram_round_trip_keeps_geometry() {
    let grid = PixelGrid::spanning(16, 2.0).unwrap();
    let geo = make_geometry(5, 9, &grid, 4).unwrap();
    let values = (0..45).map(|i| (i as f64).sin()).collect();
    let d = Sinogram::new(geo, values).unwrap();
    let text = sinogram_csv(&d);
    assert!(text.starts_with("s,omega,value\n"));
    assert_eq!(text.lines().count(), 46);
    assert_eq!(parse_sinogram_csv(&text).unwrap(), d);
    assert!(parse_sinogram_csv("s,omega,value\n0,0,1\n1,0,1\n0,1,1\n").is_err());
    assert!(parse_sinogram_csv("a,b,c\n0,0,1\n").is_err());
}

#[test]
fn table_headers_are_exact() {
    let sets = vec![RecoveredSet { points: vec![Point2::new(0.5, -0.25)], hull: vec![] }];
    assert_eq!(boundary_csv(&sets), "set_index,x,y\n0,0.5,-0.25\n");
    let row = HistoryRow {
        k: 1,
        objective: 2.0,
        r: 1e-4,
        s: 2e-4,
        beta: 0.1,
        mb_proportion: 0.5,
        delta_a: 0.25,
        delta_f: 0.125,
        inner_converged: true,
    };
    let text = history_csv(&[row]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,objective,r,s,beta,mb_proportion,delta_a,delta_f"));
    assert_eq!(lines.next().unwrap().split(',').count(), 8);
}
