//! Canonical JSON documents: two-space indentation, keys in declaration
//! order, shortest round-trip floats, trailing newline.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn to_string<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("in-memory serialization cannot fail");
    text.push('\n');
    text
}

pub fn write<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_string(value)).map_err(|e| Error::io(path, e))
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, &e))
}
