mod support;

use std::f64::consts::PI;

use support::*;
use weldcnn_core::augment::{
    affine_rotation, affine_scale, affine_shear, compose, warp, AffineTransform, Recipe,
};
use weldcnn_core::rng;

#[test]
fn quarter_turn_is_index_permutation() {
    for seed in 0..3 {
        assert!(rot90_matches(seed));
    }
}

#[test]
fn identity_warp_is_bit_exact() {
    let mut r = rng::seeded(5);
    let img = random_tensor(&[7, 9, 3], 0.0, 1.0, &mut r);
    assert_eq!(warp(&img, &AffineTransform::IDENTITY, 0.5).unwrap(), img);
}

#[test]
fn rotation_group_and_orthogonality() {
    let mut r = rng::seeded(9);
    for _ in 0..100 {
        let (a, b) = (rng::uniform(&mut r, -PI, PI), rng::uniform(&mut r, -PI, PI));
        let ra = affine_rotation(a).unwrap();
        assert!((ra.det() - 1.0).abs() <= 1e-12);
        let rt = AffineTransform::linear([[ra.m[0][0], ra.m[1][0]], [ra.m[0][1], ra.m[1][1]]]);
        assert!(affine_near(
            &compose(&rt, &ra),
            &AffineTransform::IDENTITY,
            1e-12
        ));
        let sum = affine_rotation(a + b).unwrap();
        assert!(affine_near(
            &compose(&ra, &affine_rotation(b).unwrap()),
            &sum,
            1e-12
        ));
    }
}

#[test]
fn scale_and_shear_cases() {
    let id = AffineTransform::IDENTITY;
    assert!(affine_near(&affine_scale(1.0, 1.0).unwrap(), &id, 0.0));
    assert!(affine_near(&affine_shear(0.0, 0.0).unwrap(), &id, 0.0));
    let s = affine_scale(2.0, 0.25).unwrap();
    assert!(affine_near(
        &compose(&s, &affine_scale(0.5, 4.0).unwrap()),
        &id,
        1e-12
    ));
    let h = affine_shear(0.3, 0.0).unwrap();
    assert!(affine_near(
        &compose(&h, &affine_shear(-0.3, 0.0).unwrap()),
        &id,
        1e-12
    ));
    assert!(affine_near(&compose(&h.inverse().unwrap(), &h), &id, 1e-12));
}

#[test]
fn six_recipes() {
    for recipe in Recipe::ALL {
        for seed in [0, 1, 77] {
            recipe_check(recipe, seed).unwrap();
        }
    }
}
