mod common;

#[test]
fn rows_are_normalised_after_every_iteration() {
    common::check_normalization_every_iteration().unwrap();
}

#[test]
fn stdp_keeps_weights_in_bounds() {
    common::check_weight_bounds().unwrap();
}

#[test]
fn refractory_period_spaces_spikes() {
    common::check_refractory_spacing().unwrap();
}

#[test]
fn vfa_rows_sum_to_zero_or_one() {
    common::check_vfa_row_sums().unwrap();
}

#[test]
fn decoders_ignore_count_scaling() {
    common::check_argmax_scale_invariance().unwrap();
}

#[test]
fn deletion_counts_are_binomial() {
    common::check_deletion_binomial().unwrap();
}
