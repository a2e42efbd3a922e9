use gazelab_core::field::{field_gradient, Image, ScalarField};
use gazelab_core::{build_fieldset, FieldSet, Vec2};
use proptest::prelude::*;

fn image_strategy() -> impl Strategy<Value = Image> {
    (8usize..24, 8usize..24, prop::bool::ANY).prop_flat_map(|(w, h, color)| {
        let ch = if color { 3 } else { 1 };
        prop::collection::vec(0.0f64..=1.0, w * h * ch)
            .prop_map(move |data| Image::new(w, h, ch, data).unwrap())
    })
}

fn all_finite(fs: &FieldSet) -> bool {
    let scalars = [fs.brightness(), fs.peripheral(), fs.g_b(), fs.g_p()];
    let vectors = [fs.grad_g_b(), fs.grad_g_p()];
    scalars.iter().all(|f| f.values().iter().all(|v| v.is_finite()))
        && vectors.iter().all(|f| f.values().iter().all(|v| v.is_finite()))
        && fs.grad_topdown().is_none_or(|g| g.values().iter().all(|v| v.is_finite()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fieldsets_are_finite(img in image_strategy(), sigma in 0.3f64..6.0) {
        let fs = FieldSet::build(&img, None, Some(sigma)).unwrap();
        prop_assert!(all_finite(&fs));
        prop_assert!(fs.brightness().values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn constant_field_gradient_is_exactly_zero(w in 1usize..20, h in 1usize..20, c in -5.0f64..5.0) {
        let g = field_gradient(&ScalarField::constant(w, h, c));
        prop_assert!(g.values().iter().all(|v| *v == Vec2::ZERO));
    }

    #[test]
    fn bilinear_is_lipschitz(
        img in image_strategy(),
        px in -4.0f64..30.0,
        py in -4.0f64..30.0,
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let b = FieldSet::build(&img, None, None).unwrap().brightness().clone();
        let mut lip: f64 = 0.0;
        for y in 0..b.height() {
            for x in 0..b.width() {
                if x + 1 < b.width() { lip = lip.max((b.get(x + 1, y) - b.get(x, y)).abs()); }
                if y + 1 < b.height() { lip = lip.max((b.get(x, y + 1) - b.get(x, y)).abs()); }
            }
        }
        let delta = 1e-6 * Vec2::new(angle.cos(), angle.sin());
        let p = Vec2::new(px, py);
        let diff = (b.sample(p) - b.sample(p + delta)).abs();
        // L1 bound of bilinear interpolation plus round-off
        prop_assert!(diff <= 2.0 * lip * delta.norm() + 1e-15, "{diff} vs {lip}");
    }
}

#[test]
fn builds_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cf.pgm");
    let data: Vec<u16> = (0..30).map(|i| ((i * 7919) % 65536) as u16).collect();
    gazelab_core::pgm::write_pgm16(&path, 6, 5, &data).unwrap();
    let img = Image::from_fn(40, 30, |x, y| (((x * 13 + y * 7) % 17) as f64) / 16.0).unwrap();
    let a = build_fieldset(&img, Some(&path), None).unwrap();
    let b = build_fieldset(&img, Some(&path), None).unwrap();
    assert_eq!(a, b);
    let bits = |f: &FieldSet| -> Vec<u64> {
        f.g_b().values().iter().chain(f.topdown_map().unwrap().values()).map(|v| v.to_bits()).collect()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn stimulus_files_decode() {
    let dir = tempfile::tempdir().unwrap();
    let rgb = image::RgbImage::from_fn(12, 10, |x, y| image::Rgb([(x * 20) as u8, (y * 20) as u8, 255]));
    let gray = image::GrayImage::from_fn(12, 10, |x, _| image::Luma([(x * 20) as u8]));
    let png = dir.path().join("a.png");
    let jpg = dir.path().join("b.jpg");
    let pgm = dir.path().join("c.pgm");
    let ppm = dir.path().join("d.ppm");
    rgb.save(&png).unwrap();
    rgb.save(&jpg).unwrap();
    gray.save(&pgm).unwrap();
    rgb.save(&ppm).unwrap();
    let a = Image::open(&png).unwrap();
    assert_eq!((a.width(), a.height(), a.channels()), (12, 10, 3));
    assert_eq!(Image::open(&jpg).unwrap().channels(), 3);
    let c = Image::open(&pgm).unwrap();
    assert_eq!(c.channels(), 1);
    assert!((c.data()[3] - 60.0 / 255.0).abs() < 1e-6);
    assert_eq!(Image::open(&ppm).unwrap().data(), a.data());
    let tiny = dir.path().join("tiny.png");
    image::GrayImage::new(4, 4).save(&tiny).unwrap();
    assert!(Image::open(&tiny).is_err());
}
