pub mod arith;
pub mod classno;
pub mod cli;
pub mod criteria;
pub mod localfield;
pub mod oracle;
pub mod quadratic;
pub mod scan;
