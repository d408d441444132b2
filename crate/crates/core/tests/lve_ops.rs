mod common;

#[test]
fn split_is_sound() {
    common::check_operator("split", 200).unwrap();
}

#[test]
fn ground_logvar_is_sound() {
    common::check_operator("ground_logvar", 200).unwrap();
}

#[test]
fn count_convert_is_sound() {
    common::check_operator("count_convert", 200).unwrap();
}

#[test]
fn count_convert_pair_is_sound() {
    common::check_operator("count_convert_pair", 200).unwrap();
}

#[test]
fn expand_is_sound() {
    common::check_operator("expand", 200).unwrap();
}

#[test]
fn multiply_is_sound() {
    common::check_operator("multiply", 200).unwrap();
}

#[test]
fn sum_out_atom_is_sound() {
    common::check_operator("sum_out_atom", 200).unwrap();
}

#[test]
fn sum_out_counting_is_sound() {
    common::check_operator("sum_out_counting", 200).unwrap();
}

#[test]
fn count_normalise_is_sound() {
    common::check_operator("count_normalise", 200).unwrap();
}

#[test]
fn merge_duplicates_is_sound() {
    common::check_operator("merge_duplicates", 200).unwrap();
}

#[test]
fn absorb_is_sound() {
    common::check_operator("absorb", 200).unwrap();
}
