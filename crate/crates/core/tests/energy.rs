use freebound::energy::{Energy, Field};
use freebound::mesh::{assemble, build_disk_mesh, build_interval_mesh, build_rect_mesh, AssembledForms, Mesh};
use freebound::model::NonlinearityModel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(mesh: &Mesh<f64>, seed: u64, hi: f64) -> Field<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..mesh.n_vertices()).map(|_| rng.gen_range(0.0..hi)).collect();
    Field::from_values_clamped(mesh, v)
}

fn meshes() -> Vec<Mesh<f64>> {
    vec![
        build_interval_mesh(20, 1.0).unwrap(),
        build_rect_mesh(6, 5, 1.0, 0.8).unwrap(),
        build_disk_mesh(5, 1.0).unwrap(),
    ]
}

fn models() -> [NonlinearityModel<f64>; 2] {
    [
        NonlinearityModel::prandtl_batchelor(),
        NonlinearityModel::power(0.5, 2.0, 1.4).unwrap(),
    ]
}

/// Worst relative error of the analytic gradient against central
/// differences, relative to the gradient's largest entry.
fn fd_error<F: Fn(&[f64]) -> f64>(f: F, u: &[f64], grad: &[f64], mask: &[bool]) -> f64 {
    let h = 1e-6;
    let scale = grad.iter().fold(1e-8, |a: f64, g| a.max(g.abs()));
    let mut worst: f64 = 0.0;
    let mut x = u.to_vec();
    for i in (0..u.len()).filter(|&i| !mask[i]) {
        x[i] = u[i] + h;
        let fp = f(&x);
        x[i] = u[i] - h;
        let fm = f(&x);
        x[i] = u[i];
        worst = worst.max(((fp - fm) / (2.0 * h) - grad[i]).abs() / scale);
    }
    worst
}

fn energy<'a>(m: &'a Mesh<f64>, f: &'a AssembledForms<f64>, model: NonlinearityModel<f64>) -> Energy<'a, f64> {
    Energy::new(m, f, model, 7.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradients_match_differences(seed in any::<u64>(), eps in 0.05f64..0.5) {
        for mesh in meshes() {
            let forms = assemble(&mesh).unwrap();
            for model in models() {
                let e = energy(&mesh, &forms, model);
                let sm = e.smoother(eps).unwrap();
                let u = random_field(&mesh, seed, 2.5);
                let cap = random_field(&mesh, seed ^ 0x5555, 2.5);
                let mask = mesh.boundary_mask();
                let g = e.grad_j_eps(&u, &sm).unwrap();
                let err = fd_error(|x| e.eval(x, &sm, None, None).total, u.values(), g.values(), mask);
                prop_assert!(err < 1e-5, "J_eps: {err}");
                let g = e.grad_j_tilde(&u, &sm, &cap).unwrap();
                let err = fd_error(|x| e.eval(x, &sm, Some(cap.values()), None).total, u.values(), g.values(), mask);
                prop_assert!(err < 1e-5, "J_tilde: {err}");
            }
        }
    }

    #[test]
    fn smoothing_sandwich(seed in any::<u64>(), eps in 0.001f64..1.0) {
        for mesh in meshes() {
            let forms = assemble(&mesh).unwrap();
            for model in models() {
                let e = energy(&mesh, &forms, model);
                let sm = e.smoother(eps).unwrap();
                let u = random_field(&mesh, seed, 3.0);
                let j = e.j(&u).unwrap().total;
                let je = e.j_eps(&u, &sm).unwrap().total;
                let layer = e.nodal_measure(u.values(), |v| (1.0..=1.0 + eps).contains(&v));
                let gap = e.lambda() * model.smoothing_gap_bound(eps) * mesh.omega_measure();
                let slack = 1e-12 * (1.0 + j.abs());
                prop_assert!(j - layer <= je + slack, "{j} - {layer} > {je}");
                prop_assert!(je <= j + gap + slack, "{je} > {j} + {gap}");
            }
        }
    }

    #[test]
    fn truncation_is_exact_below_cap(seed in any::<u64>(), eps in 0.01f64..1.0) {
        for mesh in meshes() {
            let forms = assemble(&mesh).unwrap();
            let e = energy(&mesh, &forms, models()[1]);
            let sm = e.smoother(eps).unwrap();
            let cap = random_field(&mesh, seed, 3.0);
            let scaled: Vec<f64> = cap.values().iter().map(|c| 0.7 * c).collect();
            let u = Field::from_values(&mesh, scaled).unwrap();
            let a = e.j_tilde(&u, &sm, &cap).unwrap().total;
            let b = e.j_eps(&u, &sm).unwrap().total;
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn energies_are_coercive() {
    let mesh = build_rect_mesh(10, 10, 1.0, 1.0).unwrap();
    let forms = assemble(&mesh).unwrap();
    for model in models() {
        let e = Energy::new(&mesh, &forms, model, 50.0).unwrap();
        let sm = e.smoother(0.05).unwrap();
        for seed in 0..10 {
            let u = random_field(&mesh, seed, 1.0);
            let at = |t: f64| {
                let v: Vec<f64> = u.values().iter().map(|x| t * x).collect();
                e.j_eps(&Field::from_values(&mesh, v).unwrap(), &sm).unwrap().total
            };
            let (a, b) = (at(1e3), at(1e4));
            assert!(a > 0.0 && b > 10.0 * a, "{a} {b}");
        }
    }
}

#[test]
fn single_precision_tracks_double() {
    let m64 = build_rect_mesh(8, 8, 1.0f64, 1.0).unwrap();
    let m32 = build_rect_mesh(8, 8, 1.0f32, 1.0).unwrap();
    let (f64s, f32s) = (assemble(&m64).unwrap(), assemble(&m32).unwrap());
    let e64 = Energy::new(&m64, &f64s, NonlinearityModel::prandtl_batchelor(), 20.0).unwrap();
    let e32 = Energy::new(&m32, &f32s, NonlinearityModel::prandtl_batchelor(), 20.0f32).unwrap();
    let u64 = random_field(&m64, 3, 2.0);
    let u32 = Field::from_values(&m32, u64.values().iter().map(|&v| v as f32).collect()).unwrap();
    let a = e64.j_eps(&u64, &e64.smoother(0.1).unwrap()).unwrap().total;
    let b = e32.j_eps(&u32, &e32.smoother(0.1).unwrap()).unwrap().total;
    assert!((a - b as f64).abs() < 1e-4 * (1.0 + a.abs()), "{a} {b}");
}
