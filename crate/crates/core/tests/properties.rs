mod common;

#[test]
fn zero_data_gives_zero_solution_for_every_solver() {
    common::zero_data_gives_zero_solution_for_every_solver();
}

#[test]
fn direct_scheme_reproduces_affine_fields() {
    common::direct_scheme_reproduces_affine_fields();
}

#[test]
fn stabilization_blocks_are_symmetric_psd() {
    common::stabilization_blocks_are_symmetric_psd();
}

#[test]
fn manufactured_forces_pass_the_finite_difference_oracle() {
    common::manufactured_forces_pass_the_finite_difference_oracle();
}

#[test]
fn mixed_with_dirichlet_everywhere_matches_dual() {
    common::mixed_with_dirichlet_everywhere_matches_dual();
}

#[test]
fn masked_domain_area_converges_to_the_disc() {
    common::masked_domain_area_converges_to_the_disc();
}

#[test]
fn repeated_solves_are_bit_identical() {
    common::repeated_solves_are_bit_identical();
}

#[test]
fn interface_flux_mismatch_decreases_under_refinement() {
    common::interface_flux_mismatch_decreases_under_refinement();
}

#[test]
fn classification_invariants_on_random_level_sets() {
    common::classification::random_level_sets();
}
