//! Proving that a query to a definite logic program fails, by searching for a
//! finite pre-interpretation under which the query is false in the least model.

pub mod abduce;
pub mod abstraction;
pub mod clause;
pub mod conflict;
pub mod constraint;
pub mod encoding;
pub mod leastmodel;
pub mod oracle;
pub mod preinterp;
pub mod search;
pub mod solvers;
pub mod syntax;
