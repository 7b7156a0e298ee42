pub mod density;
pub mod distance;
pub mod embed;
pub mod kernel;
pub mod linalg;
pub mod seqio;
pub mod init;
pub mod tsne;
pub mod eval;
pub mod io;
pub mod cli;
