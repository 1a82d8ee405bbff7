#![allow(dead_code)]

pub mod gradcheck;
pub mod gru_oracle;
pub mod knn_oracle;
pub mod protocol;
