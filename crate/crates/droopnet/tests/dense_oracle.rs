//! Independent dense-linear-algebra oracle for the banded solver.
//!
//! Everything here restates the electrical problem from the grid definition
//! alone — dense matrices, LU factorization from `nalgebra`, explicit history
//! recurrences — without touching the production assembly or factorization
//! code, so agreement is evidence rather than tautology.

use droopnet::grid::{generate_grid, GridSpec, PdnGrid};
use droopnet::rng::stream;
use droopnet::sim::{dc_solve, simulate, CurrentTrace};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn grid_spec(seed: u64, with_inductance: bool) -> GridSpec {
    GridSpec {
        die_w_um: 100.0,
        die_h_um: 80.0,
        pitch_um: 20.0,
        res_per_um: 0.05,
        cap_min_f: 1e-15,
        cap_max_f: 5e-15,
        bump_count: 3,
        bump_res_ohm: 0.4,
        bump_ind_h: with_inductance.then_some(2e-12),
        load_count: 10,
        vdd_v: 1.0,
        seed,
    }
}

/// Dense conductance part: mesh edges plus bump branch conductances.
fn dense_conductance(grid: &PdnGrid, dt_s: Option<f64>) -> DMatrix<f64> {
    let n = grid.n_nodes();
    let mut a = DMatrix::zeros(n, n);
    for e in &grid.edges {
        a[(e.a, e.a)] += e.g_s;
        a[(e.b, e.b)] += e.g_s;
        a[(e.a, e.b)] -= e.g_s;
        a[(e.b, e.a)] -= e.g_s;
    }
    for b in &grid.bumps {
        let g = match (dt_s, b.ind_h) {
            (None, _) | (Some(_), None) => 1.0 / b.res_ohm,
            (Some(dt), Some(l)) => dt / (b.res_ohm * dt + l),
        };
        a[(b.node, b.node)] += g;
    }
    if let Some(dt) = dt_s {
        for (i, &c) in grid.node_caps_f.iter().enumerate() {
            a[(i, i)] += c / dt;
        }
    }
    a
}

fn random_trace(grid: &PdnGrid, seed: u64, n_stamps: usize, dt_s: f64) -> CurrentTrace {
    let mut r = stream(seed, 1234, 0);
    let currents: Vec<f64> = (0..n_stamps * grid.n_loads())
        .map(|_| r.gen_range(0.0..0.02))
        .collect();
    CurrentTrace { dt_s, n_loads: grid.n_loads(), currents_a: currents }
}

#[test]
fn dc_droop_matches_dense_lu_on_random_grids() {
    for seed in [1u64, 2, 3, 4, 5] {
        let grid = generate_grid(&grid_spec(seed, false)).unwrap();
        let mut r = stream(seed, 99, 0);
        let loads: Vec<f64> = (0..grid.n_loads()).map(|_| r.gen_range(0.0..0.05)).collect();
        let banded = dc_solve(&grid, &loads).unwrap();

        let a = dense_conductance(&grid, None);
        let mut rhs = DVector::zeros(grid.n_nodes());
        for (l, &node) in grid.loads.iter().enumerate() {
            rhs[node] += loads[l];
        }
        let dense = a.lu().solve(&rhs).expect("dense solve");

        let scale = dense.amax();
        for (i, (&b, &d)) in banded.iter().zip(dense.iter()).enumerate() {
            assert!(
                (b - d).abs() <= 1e-10 * scale,
                "seed {seed} node {i}: banded {b} vs dense {d}"
            );
        }
    }
}

/// Backward-Euler recurrence replayed densely, history terms included, for
/// grids both with and without bump inductance.
#[test]
fn transient_sequence_matches_dense_backward_euler() {
    for (seed, with_l) in [(7u64, false), (8, true), (9, true)] {
        let grid = generate_grid(&grid_spec(seed, with_l)).unwrap();
        let dt = 2e-12;
        let trace = random_trace(&grid, seed, 25, dt);
        let banded = simulate(&grid, &trace).unwrap();

        let a = dense_conductance(&grid, Some(dt));
        let lu = a.lu();
        let n = grid.n_nodes();
        let mut u = DVector::zeros(n);
        let mut hist = vec![0.0f64; grid.bumps.len()];
        let mut worst_rel = 0.0f64;
        for k in 0..trace.n_stamps() {
            let mut rhs = DVector::zeros(n);
            for i in 0..n {
                rhs[i] = grid.node_caps_f[i] / dt * u[i];
            }
            for (l, &node) in grid.loads.iter().enumerate() {
                rhs[node] += trace.currents_a[k * trace.n_loads + l];
            }
            for (bi, b) in grid.bumps.iter().enumerate() {
                rhs[b.node] -= hist[bi];
            }
            u = lu.solve(&rhs).expect("dense solve");
            for (bi, b) in grid.bumps.iter().enumerate() {
                if let Some(l) = b.ind_h {
                    let denom = b.res_ohm * dt + l;
                    let ib = dt / denom * u[b.node] + hist[bi];
                    hist[bi] = l / denom * ib;
                }
            }
            let scale = u.amax().max(1e-30);
            for (i, &bv) in banded[k].iter().enumerate() {
                worst_rel = worst_rel.max((bv - u[i]).abs() / scale);
            }
        }
        assert!(
            worst_rel <= 1e-9,
            "seed {seed} (inductance: {with_l}): worst relative gap {worst_rel}"
        );
    }
}

/// The charge balance at every node must close: conductance currents plus
/// capacitor currents plus bump currents equal the injected load current.
/// This checks the solution against Kirchhoff's law directly instead of
/// against another solver.
#[test]
fn solution_satisfies_kirchhoff_current_law() {
    let grid = generate_grid(&grid_spec(11, true)).unwrap();
    let dt = 1e-12;
    let trace = random_trace(&grid, 11, 10, dt);
    let droops = simulate(&grid, &trace).unwrap();

    let mut hist = vec![0.0f64; grid.bumps.len()];
    let mut prev = vec![0.0f64; grid.n_nodes()];
    for k in 0..trace.n_stamps() {
        let u = &droops[k];
        let mut mismatch = vec![0.0f64; grid.n_nodes()];
        // Injected load current enters the node.
        for (l, &node) in grid.loads.iter().enumerate() {
            mismatch[node] += trace.currents_a[k * trace.n_loads + l];
        }
        // Mesh edges carry g·(u_b − u_a) into node a.
        for e in &grid.edges {
            let flow = e.g_s * (u[e.b] - u[e.a]);
            mismatch[e.a] += flow;
            mismatch[e.b] -= flow;
        }
        // Capacitors absorb C/dt·(u_k − u_{k−1}).
        for i in 0..grid.n_nodes() {
            mismatch[i] -= grid.node_caps_f[i] / dt * (u[i] - prev[i]);
        }
        // Bump branches drain g_eq·u + history toward the supply.
        for (bi, b) in grid.bumps.iter().enumerate() {
            let (g_eq, ib) = match b.ind_h {
                None => (1.0 / b.res_ohm, u[b.node] / b.res_ohm),
                Some(l) => {
                    let denom = b.res_ohm * dt + l;
                    let g = dt / denom;
                    (g, g * u[b.node] + hist[bi])
                }
            };
            let _ = g_eq;
            mismatch[b.node] -= ib;
            if let Some(l) = b.ind_h {
                let denom = b.res_ohm * dt + l;
                hist[bi] = l / denom * ib;
            }
        }
        let i_scale: f64 = trace.stamp(k).iter().sum::<f64>().max(1e-12);
        for (i, &m) in mismatch.iter().enumerate() {
            assert!(
                m.abs() <= 1e-9 * i_scale,
                "stamp {k} node {i}: KCL residual {m} A"
            );
        }
        prev = u.clone();
    }
}
