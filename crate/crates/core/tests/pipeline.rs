use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vqsd_core::agent::{AgentConfig, DdqnAgent, Transition};
use vqsd_core::circuit::{Circuit, Gate};
use vqsd_core::environment::{EnvConfig, Environment};
use vqsd_core::optimizer::{minimize, OptimizerBudget};
use vqsd_core::qsim::DensityMatrix;
use vqsd_core::states::ginibre_density_matrix;
use vqsd_core::vqsd::{cost_with_params, eigenvalue_error, eigenvalue_readout, eigenvector_prepare};

#[test]
fn diagonal_target_succeeds_on_first_step() {
    let rho = DensityMatrix::from_diagonal(&[0.5, 0.25, 0.125, 0.125]).unwrap();
    let mut env = Environment::new(EnvConfig::new(rho, 1e-6, 5, OptimizerBudget::new(50))).unwrap();
    env.reset();
    assert!(env.cost().abs() < 1e-15);
    let o = env.step(2).unwrap();
    assert!(o.done && o.success);
    assert_eq!(o.reward, 5.0);
    assert!(env.step(0).is_err());
}

#[test]
fn optimized_circuit_reads_out_the_spectrum() {
    // A rotated pure-ish state that one RY layer plus CNOT can undo.
    let prep = Circuit::from_gates(2, [Gate::ry(0), Gate::cnot(0, 1), Gate::ry(1)])
        .unwrap()
        .with_params(&[0.7, -1.1])
        .unwrap();
    let rho = prep.apply(&DensityMatrix::from_diagonal(&[0.6, 0.3, 0.1, 0.0]).unwrap()).unwrap();
    let ansatz = Circuit::from_gates(2, [Gate::ry(1), Gate::cnot(0, 1), Gate::ry(0)]).unwrap();
    let m = minimize(|th| cost_with_params(&rho, &ansatz, th).unwrap(), &[0.1, 0.1], &OptimizerBudget::new(400)).unwrap();
    assert!(m.value < 1e-10, "{}", m.value);
    let tuned = ansatz.with_params(&m.theta).unwrap();
    let out = eigenvalue_readout(&rho, &tuned).unwrap();
    let err = eigenvalue_error(&rho.eigenvalues(), &out.values(), 4).unwrap();
    assert!(err < 1e-10);

    // The top eigenvector prepared from the leading bitstring has the top eigenvalue.
    let psi = eigenvector_prepare(&tuned, &out.eigenvalues[0].bitstring).unwrap();
    let rho_psi = rho.matrix() * nalgebra::DVector::from_vec(psi.clone());
    let expect: f64 = psi.iter().zip(rho_psi.iter()).map(|(a, b)| (a.conj() * b).re).sum();
    assert!((expect - 0.6).abs() < 1e-6);
}

#[test]
fn agent_learns_on_environment_transitions() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let rho = ginibre_density_matrix(2, &mut r).unwrap();
    let mut env = Environment::new(EnvConfig::new(rho, 1e-5, 4, OptimizerBudget::new(30))).unwrap();
    let input = env.reset().len();
    let cfg = AgentConfig { batch_size: 4, hidden: vec![16], seed: 9, ..AgentConfig::default() };
    let mut agent = DdqnAgent::new(cfg, input, env.action_space().size()).unwrap();
    let mut losses = 0;
    for _ in 0..3 {
        let mut s: Vec<f64> = env.reset().flatten();
        loop {
            let a = agent.act(&s, true).unwrap();
            let o = env.step(a).unwrap();
            let next = o.state.flatten();
            let t = Transition { state: s, action: a, reward: o.reward, next_state: next.clone(), done: o.done };
            losses += agent.observe(t).unwrap().is_some() as usize;
            s = next;
            if o.done {
                break;
            }
        }
    }
    assert!(losses > 0);
    assert!(agent.epsilon() < 1.0);
}
