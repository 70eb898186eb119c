#![allow(dead_code)]

use std::path::PathBuf;

use gridtab::pipeline::load_inputs;
use gridtab::{CleaningPolicy, MissingValues, Schema, Table};

pub fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn adult_schema_path() -> PathBuf {
    repo().join("configs/adult.toml")
}

pub fn adult_train_path() -> PathBuf {
    repo().join("data/adult/adult.data")
}

pub fn adult_test_path() -> PathBuf {
    repo().join("data/adult/adult.test")
}

pub fn positional(missing: MissingValues) -> CleaningPolicy {
    CleaningPolicy {
        has_header: false,
        missing,
        ..CleaningPolicy::default()
    }
}

pub fn adult(path: PathBuf, missing: MissingValues) -> (Schema, Table) {
    load_inputs(&adult_schema_path(), &path, &positional(missing)).expect("Adult loads")
}

pub fn adult_train() -> Table {
    adult(adult_train_path(), MissingValues::DropIncomplete).1
}

pub fn adult_test() -> Table {
    adult(adult_test_path(), MissingValues::DropIncomplete).1
}
