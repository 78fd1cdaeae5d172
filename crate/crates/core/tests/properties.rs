use gptunnel::observables::{full_spectrum, plane_wave_transmission, region_norm};
use gptunnel::propagator::{read_field_dump, write_field_dump};
use gptunnel::{gaussian_packet, Grid, PacketSpec, Shape};
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::centered(0.25, 2048).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn packets_are_normalized(x0 in 10.0..120.0f64, dx0 in 2.0..20.0f64, k0 in -2.0..2.0f64) {
        let spec = PacketSpec::new(x0, dx0, k0).unwrap();
        let psi = gaussian_packet(&grid(), &spec).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spectrum_carries_the_norm(x0 in 10.0..120.0f64, dx0 in 2.0..20.0f64, k0 in -2.0..2.0f64) {
        let g = grid();
        let psi = gaussian_packet(&g, &PacketSpec::new(x0, dx0, k0).unwrap()).unwrap();
        let s = full_spectrum(&psi);
        prop_assert!((s.mass() - psi.norm()).abs() < 1e-10);
        prop_assert!((s.mean().unwrap() - k0).abs() < g.dk());
    }

    #[test]
    fn profiles_are_even(x in -20.0..20.0f64, width in 0.5..15.0f64, order in 1u32..30) {
        let shapes = [Shape::Rectangular { width }, Shape::SuperGaussian { width, order }];
        for s in shapes {
            prop_assert_eq!(s.eval(x), s.eval(-x));
            prop_assert!((0.0..=1.0).contains(&s.eval(x)));
        }
    }

    #[test]
    fn region_norm_shrinks_with_the_cut(a in -200.0..200.0f64, b in -200.0..200.0f64) {
        let psi = gaussian_packet(&grid(), &PacketSpec::new(20.0, 20.0, 0.5).unwrap()).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(region_norm(&psi, lo) >= region_norm(&psi, hi));
    }

    #[test]
    fn transmission_is_a_probability(k in 0.01..4.0f64, v0 in 0.0..5.0f64, width in 0.1..15.0f64) {
        let t2 = plane_wave_transmission(k, v0, width).norm_sqr();
        prop_assert!(t2 > 0.0 && t2 <= 1.0 + 1e-12, "{}", t2);
    }

    #[test]
    fn transmission_is_continuous_at_the_barrier_top(v0 in 0.2..3.0f64, width in 0.5..12.0f64) {
        let k = (2.0 * v0).sqrt();
        let t = |k: f64| plane_wave_transmission(k, v0, width).norm_sqr();
        let at = t(k);
        prop_assert!((at - 1.0 / (1.0 + width * width * v0 / 2.0)).abs() < 1e-9);
        prop_assert!((t(k * (1.0 - 1e-7)) / at - 1.0).abs() < 1e-4);
        prop_assert!((t(k * (1.0 + 1e-7)) / at - 1.0).abs() < 1e-4);
    }

    #[test]
    fn field_dump_round_trips(x0 in 10.0..150.0f64, k0 in -2.0..2.0f64) {
        let psi = gaussian_packet(&grid(), &PacketSpec::new(x0, 8.0, k0).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_field_dump(&mut buf, &psi).unwrap();
        let back = read_field_dump(buf.as_slice()).unwrap();
        prop_assert_eq!(&back.amplitudes, &psi.amplitudes);
        prop_assert_eq!(back.grid(), psi.grid());
    }
}
