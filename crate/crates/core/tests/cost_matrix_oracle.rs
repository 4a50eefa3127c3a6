//! Pairing costs against the numeric grid oracle.

use mcnoma::channel::{SystemParams, UserProfile};
use mcnoma::power::{oracle_min_power, solve_single, OracleOptions, VirtualUser};
use mcnoma::rng::seeded;
use mcnoma::scheduling::build_cost_matrix;
use rand::Rng;

#[test]
fn four_user_matrix_matches_oracle() {
    let params = SystemParams::default();
    let mut rng = seeded(404);
    let profiles: Vec<UserProfile> = (0..4)
        .map(|i| {
            UserProfile::new(i, rng.random_range(30.0..250.0), rng.random_range(0.1..10.0), rng.random_range(1e-3..0.1), &params)
                .unwrap()
        })
        .collect();
    let users = VirtualUser::expand(&profiles, 1).unwrap();
    let costs = build_cost_matrix(&users).unwrap();
    for i in 0..4 {
        assert_eq!(costs.get(i, i), solve_single(&users[i]).unwrap());
        for j in 0..4 {
            if i == j {
                continue;
            }
            let grid = oracle_min_power(&users[i], &users[j], None, 1e-6, &OracleOptions::default()).unwrap();
            let rel = (grid.total - costs.get(i, j)) / costs.get(i, j);
            assert!((-1e-6..1e-4).contains(&rel), "({i},{j}) {rel}");
        }
    }
}
