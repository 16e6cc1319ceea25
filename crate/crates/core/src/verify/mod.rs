//! Independent checks: a finite-difference oracle, the mass-balance audit
//! and the Neumann-exit comparison solver.

pub mod balance;
pub mod danckwerts;
pub mod fd;

pub use balance::{boundary_residuals, mass_balance, BalanceReport, BalanceSample, ColumnField};
pub use danckwerts::{danckwerts_error, danckwerts_solve, eigenvalue_table, DanckwertsError, EigenRow};
pub use fd::{fd_solve, FdExit, FdGrid, FdSolution};
