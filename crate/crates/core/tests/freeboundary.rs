use freebound::energy::{Energy, Field};
use freebound::freeboundary::{
    extract_level_set, generalized_fb_check, median, one_sided_gradients, oracle_1d, oracle_radial,
    pde_residuals,
};
use freebound::mesh::{assemble, build_disk_mesh, build_interval_mesh, build_rect_mesh, Mesh};
use freebound::model::NonlinearityModel;

fn interpolate<F: Fn([f64; 2]) -> f64>(mesh: &Mesh<f64>, f: F) -> Field<f64> {
    let v = mesh
        .vertices()
        .iter()
        .zip(mesh.boundary_mask())
        .map(|(&p, &b)| if b { 0.0 } else { f(p) })
        .collect();
    Field::from_values(mesh, v).unwrap()
}

fn radius(p: [f64; 2]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

fn median_jump(mesh: &Mesh<f64>, f: &Field<f64>, delta: f64) -> f64 {
    let ls = extract_level_set(mesh, f, 1.0).unwrap();
    let os = one_sided_gradients(mesh, f, &ls, delta).unwrap();
    let mut r: Vec<f64> = os
        .iter()
        .filter(|o| o.reliable)
        .map(|o| o.jump_residual().abs())
        .collect();
    median(&mut r).expect("reliable segments")
}

#[test]
fn interval_median_jump_halves() {
    let o = oracle_1d(60.0).unwrap();
    let errs: Vec<f64> = [256, 512, 1024]
        .iter()
        .map(|&n| {
            let m = build_interval_mesh(n, 1.0).unwrap();
            median_jump(&m, &interpolate(&m, |p| o.value(o.a_stable, p[0])), 1e-6)
        })
        .collect();
    assert!(errs[0] / errs[1] >= 1.5 && errs[1] / errs[2] >= 1.5, "{errs:?}");
}

#[test]
fn radial_median_jump_halves() {
    // small inner disk: both phases are resolved from 64 rings on
    let o = oracle_radial(100.0, 1.0).unwrap();
    let errs: Vec<f64> = [64, 128]
        .iter()
        .map(|&n| {
            let m = build_disk_mesh(n, 1.0).unwrap();
            median_jump(&m, &interpolate(&m, |p| o.value(o.rho_unstable, radius(p))), 1e-6)
        })
        .collect();
    assert!(errs[0] / errs[1] >= 1.5, "{errs:?}");
}

#[test]
fn radial_harmonic_residual_is_first_order() {
    let o = oracle_radial(100.0, 1.0).unwrap();
    let res: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let m = build_disk_mesh(n, 1.0).unwrap();
            let forms = assemble(&m).unwrap();
            let e = Energy::new(&m, &forms, NonlinearityModel::prandtl_batchelor(), 100.0).unwrap();
            let f = interpolate(&m, |p| o.value(o.rho_unstable, radius(p)));
            pde_residuals(&e, &f, 1e-3).unwrap().harmonic
        })
        .collect();
    assert!(res[0] / res[1] >= 1.5 && res[1] / res[2] >= 1.5, "{res:?}");
}

#[test]
fn interval_oracle_pde_residuals_vanish() {
    // both pieces are reproduced exactly by P1 at the nodes
    let o = oracle_1d(60.0).unwrap();
    let m = build_interval_mesh(256, 1.0).unwrap();
    let forms = assemble(&m).unwrap();
    let e = Energy::new(&m, &forms, NonlinearityModel::prandtl_batchelor(), 60.0).unwrap();
    let r = pde_residuals(&e, &interpolate(&m, |p| o.value(o.a_stable, p[0])), 1e-3).unwrap();
    assert!(r.harmonic < 1e-8 && r.interior < 1e-8, "{r:?}");
}

#[test]
fn closed_level_curves_have_even_segment_counts() {
    let o = oracle_radial(100.0, 1.0).unwrap();
    for n in [32, 48, 64] {
        let m = build_disk_mesh(n, 1.0).unwrap();
        let ls = extract_level_set(&m, &interpolate(&m, |p| o.value(o.rho_unstable, radius(p))), 1.0)
            .unwrap();
        assert_eq!(ls.len() % 2, 0, "{n} rings: {}", ls.len());
    }
    let m = build_rect_mesh(24, 24, 1.0, 1.0).unwrap();
    let bump = |p: [f64; 2]| {
        let d = ((p[0] - 0.45).powi(2) + (p[1] - 0.55).powi(2)).sqrt();
        2.0 - 5.0 * d
    };
    let ls = extract_level_set(&m, &interpolate(&m, bump), 1.0).unwrap();
    assert!(!ls.is_empty());
    assert_eq!(ls.len() % 2, 0);
}

#[test]
fn radial_generalized_check_decreases() {
    let o = oracle_radial(100.0, 1.0).unwrap();
    let m = build_disk_mesh(64, 1.0).unwrap();
    let f = interpolate(&m, |p| o.value(o.rho_unstable, radius(p)));
    // radial field supported around the free boundary, off-centred so that
    // the flux does not cancel by symmetry
    let phi: Vec<[f64; 2]> = m
        .vertices()
        .iter()
        .map(|&p| {
            let t = (radius(p) - o.rho_unstable) / 0.08;
            let w = if t.abs() < 1.0 { (1.0 - t * t).powi(2) } else { 0.0 };
            let s = 1.0 + p[0];
            [w * s * p[0], w * s * p[1]]
        })
        .collect();
    // the exact value decays once δ is below 0.1 and the level sets stay
    // more than a cell away from the kink of the gradient
    let (mut dp, mut dm) = (0.08, 0.08);
    let mut values = Vec::new();
    for _ in 0..4 {
        values.push(generalized_fb_check(&m, &f, &phi, dp, dm).unwrap().value.abs());
        dp *= 0.5;
        dm *= 0.5;
    }
    for w in values.windows(2) {
        assert!(w[0] / w[1] >= 1.2, "{values:?}");
    }
}
