pub mod chem;
pub mod tokenizer;
pub mod descriptors;
pub mod model;
pub mod training;
pub mod evalbench;
pub mod qsar;
pub mod synthetic;
pub mod checkpoint;
pub mod cli;
