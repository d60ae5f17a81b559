use ctrnn_synth::ffnet::{Activation, FfNet};
use ctrnn_synth::integrate::{
    integrate_rk4, integrate_rk4_driven, integrate_rk4_recording, Dynamics,
};
use ctrnn_synth::linalg::{eigenvalues, spectral_radius, spectrum_distance};
use ctrnn_synth::synthesis::{
    check_tau, merge_frnn, merge_frnn_with, synthesize, ForcedRnn, SynthRnn,
};
use ctrnn_synth::systems::Domain;
use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn net_from(n: usize, m: usize, values: &[f64], act: Activation) -> FfNet {
    let a = DMatrix::from_row_slice(n, m, &values[..n * m]);
    let b = DMatrix::from_row_slice(m, n, &values[n * m..2 * n * m]);
    let theta = values[2 * n * m..2 * n * m + m].to_vec();
    FfNet::new(a, b, theta, act).unwrap()
}

fn random_net(n: usize, m: usize, seed: u64) -> FfNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..2 * n * m + m)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    net_from(n, m, &values, Activation::Tanh)
}

fn shaped_net() -> impl Strategy<Value = FfNet> {
    (1usize..=5, 1usize..=20).prop_flat_map(|(n, m)| {
        prop::collection::vec(-2.0f64..2.0, 2 * n * m + m)
            .prop_map(move |v| net_from(n, m, &v, Activation::Tanh))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn block_and_eigen_structure(net in shaped_net()) {
        let rnn = synthesize(&net, 1e6).unwrap();
        let (n, m) = (net.n, net.m);
        for r in 0..n + m {
            for c in 0..n {
                prop_assert_eq!(rnn.w[(r, c)], 0.0);
            }
        }
        let ba = &net.b * &net.a;
        let mut expected = eigenvalues(&ba);
        expected.extend(std::iter::repeat_n(Complex::new(0.0, 0.0), n));
        let d = spectrum_distance(&eigenvalues(&rnn.w), &expected).unwrap();
        prop_assert!(d < 1e-9, "eigenvalue mismatch {}", d);
    }
}

#[test]
fn example_one_printed_weights_give_caption_radius() {
    let a = DMatrix::from_row_slice(
        2,
        3,
        &[-1.20327, -0.07202, -0.93635, 1.18810, -1.50015, 0.93519],
    );
    let b = DMatrix::from_row_slice(
        3,
        2,
        &[1.21464, -0.10502, 0.12023, 0.19387, -1.36695, 0.12201],
    );
    let theta = vec![-7.56499e-5, 1.34708e-4, -6.24925e-6];
    let rnn = synthesize(
        &FfNet::new(a.clone(), b.clone(), theta, Activation::Tanh).unwrap(),
        1e6,
    )
    .unwrap();
    // Nonzero eigenvalues of BA are those of the 2×2 matrix AB.
    let ab = &a * &b;
    let (tr, det) = (ab.trace(), ab.determinant());
    let disc = tr * tr - 4.0 * det;
    let oracle = if disc >= 0.0 {
        ((tr.abs() + disc.sqrt()) / 2.0).abs()
    } else {
        det.sqrt()
    };
    assert!((rnn.spectral_radius() - oracle).abs() < 1e-12);
    assert!((spectral_radius(&rnn.w) - oracle).abs() < 1e-12);
    assert!((oracle - 0.302).abs() < 5e-4, "radius {oracle}");
}

#[test]
fn tau_conditions_by_direct_evaluation() {
    let rnn = synthesize(&random_net(2, 3, 1), 1e6).unwrap();
    let domain = Domain::square(2, 3.0 / 2f64.sqrt());
    let r = check_tau(&rnn, 0.1, 40.0, 1.0, 1.0, &domain).unwrap();
    let growth = 0.1 / (4.0 * (40f64.exp() - 1.0));
    assert!((r.q_bound - growth).abs() <= 1e-12 * growth);
    assert!((r.q_over_tau - 3e-6).abs() < 1e-15);
    assert!((r.inv_tau_bound - 0.5).abs() < 1e-15);
    assert_eq!(r.q_ok, 3e-6 < growth);
    assert!(r.inv_tau_ok);
    let small = rnn.clone().with_tau(1e-9).unwrap();
    for l_g in [1.0, 1e3, 1e6] {
        assert!(
            !check_tau(&small, 0.1, 40.0, 1.0, l_g, &domain)
                .unwrap()
                .inv_tau_ok
        );
    }
}

fn forced_pair(seed: u64, hidden_forcing: bool) -> (SynthRnn, SynthRnn, ForcedRnn) {
    let u = synthesize(&random_net(2, 5, seed), 1e6).unwrap();
    let f = synthesize(&random_net(3, 4, seed + 100), 1e6).unwrap();
    let fr = merge_frnn_with(&u, &f, hidden_forcing).unwrap();
    (u, f, fr)
}

#[test]
fn merged_blocks_are_the_only_nonzeros() {
    let (u, f, fr) = forced_pair(3, false);
    let (n, p, m, q) = (u.n, f.n, u.m, f.m);
    let (eta, eta_f) = (n + p, n + p + m);
    for r in 0..fr.dim() {
        for c in 0..fr.dim() {
            let expected = if r < n && (eta..eta_f).contains(&c) {
                u.a[(r, c - eta)]
            } else if (n..n + p).contains(&r) && c >= eta_f {
                f.a[(r - n, c - eta_f)]
            } else if (eta..eta_f).contains(&r) && (eta..eta_f).contains(&c) {
                u.w[(n + r - eta, n + c - eta)]
            } else if r >= eta_f && c >= eta_f {
                f.w[(p + r - eta_f, p + c - eta_f)]
            } else {
                0.0
            };
            assert_eq!(fr.w_sigma[(r, c)], expected, "W_sigma[{r}, {c}]");
            let k = if r < n && c == n + r { 1.0 } else { 0.0 };
            assert_eq!(fr.k_sigma[(r, c)], k, "K_sigma[{r}, {c}]");
        }
    }
    assert_eq!((fr.n, fr.p, fr.m, fr.q), (n, p, m, q));
}

/// Unforced net integrated with the forcing outputs recorded at every RK4
/// stage of a separate forcing-net run.
fn two_integrator_oracle(
    u: &SynthRnn,
    f: &SynthRnn,
    q0: &[f64],
    qf0: &[f64],
    hidden_forcing: bool,
) -> Vec<Vec<f64>> {
    let (h, t) = (1e-3, 10.0);
    let (_, stages) = integrate_rk4_recording(f, &f.initial_state(qf0).unwrap(), h, t).unwrap();
    let fd = f.dim();
    let n = u.n;
    let input = |k: usize, i: usize| stages[(k * 4 + i) * fd..(k * 4 + i) * fd + n].to_vec();
    let g = |s: &[f64], force: &[f64], out: &mut [f64]| {
        u.derivative(s, out);
        for c in 0..n {
            out[c] += force[c];
        }
        if hidden_forcing {
            for j in 0..u.m {
                out[n + j] += (0..n).map(|k| u.b[(j, k)] * force[k]).sum::<f64>();
            }
        }
    };
    let traj =
        integrate_rk4_driven(u.dim(), g, &u.initial_state(q0).unwrap(), h, t, input).unwrap();
    traj.iter().map(|s| s[..n].to_vec()).collect()
}

#[test]
fn frnn_matches_two_integrator_oracle() {
    for hidden_forcing in [false, true] {
        let (u, f, fr) = forced_pair(5, hidden_forcing);
        let (q0, qf0) = ([0.4, -0.3], [0.6, -0.2, 0.1]);
        let merged = integrate_rk4(&fr, &fr.initial_state(&q0, &qf0).unwrap(), 1e-3, 10.0).unwrap();
        let oracle = two_integrator_oracle(&u, &f, &q0, &qf0, hidden_forcing);
        assert_eq!(merged.len(), oracle.len());
        let worst = merged
            .iter()
            .zip(&oracle)
            .flat_map(|(s, o)| s[..2].iter().zip(o).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        assert!(
            worst < 1e-9,
            "hidden_forcing={hidden_forcing}: divergence {worst}"
        );
    }
}

#[test]
fn forcing_block_is_independent_of_driven_block() {
    let (_, _, fr) = forced_pair(7, true);
    let qf0 = [0.5, 0.1, -0.4];
    let run = |q0: [f64; 2]| {
        integrate_rk4(&fr, &fr.initial_state(&q0, &qf0).unwrap(), 1e-3, 5.0).unwrap()
    };
    let (a, b) = (run([0.1, 0.2]), run([-1.5, 0.9]));
    let (n, p) = (fr.n, fr.p);
    let (lo, hi) = (n + p + fr.m, fr.dim());
    for (x, y) in a.iter().zip(b.iter()) {
        assert_eq!(&x[n..n + p], &y[n..n + p]);
        assert_eq!(&x[lo..hi], &y[lo..hi]);
    }
}

#[test]
fn silent_forcing_net_leaves_the_unforced_orbit() {
    let u = synthesize(&random_net(2, 6, 9), 1e6).unwrap();
    let mut silent = random_net(3, 4, 10);
    silent.a.fill(0.0);
    let f = synthesize(&silent, 1e6).unwrap();
    let fr = merge_frnn(&u, &f).unwrap();
    let q0 = [0.7, -0.2];
    let merged = integrate_rk4(
        &fr,
        &fr.initial_state(&q0, &[0.0, 0.0, 1.0]).unwrap(),
        1e-3,
        10.0,
    )
    .unwrap();
    let alone = integrate_rk4(&u, &u.initial_state(&q0).unwrap(), 1e-3, 10.0).unwrap();
    for (x, y) in merged.iter().zip(alone.iter()) {
        assert!((x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12);
    }
}

#[test]
fn hidden_forcing_keeps_hidden_state_affine_in_outputs() {
    let (u, _, fr) = forced_pair(11, true);
    let fr = ForcedRnn {
        bias_drive: true,
        ..fr
    };
    let q0 = [0.2, 0.3];
    let traj = integrate_rk4(
        &fr,
        &fr.initial_state(&q0, &[0.5, -0.5, 0.2]).unwrap(),
        1e-3,
        10.0,
    )
    .unwrap();
    let eta = fr.n + fr.p;
    let u = &u;
    let worst = traj
        .iter()
        .flat_map(|s| {
            (0..u.m).map(move |j| {
                let r = u.theta[j] + (0..u.n).map(|k| u.b[(j, k)] * s[k]).sum::<f64>();
                (s[eta + j] - r).abs()
            })
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "hidden drift {worst}");
}
