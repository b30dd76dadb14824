//! C entry point to the Clarabel interior-point solver for problems
//!   minimize c'x  subject to  A x + s = b,  s in K
//! with K a product of one nonnegative orthant and PSD triangle cones.

use std::os::raw::{c_double, c_int};
use std::panic;
use std::slice;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

#[repr(C)]
pub struct DdmsiConicInfo {
    pub status: c_int,
    pub iterations: c_int,
    pub obj_val: c_double,
    pub res_primal: c_double,
    pub res_dual: c_double,
    pub gap_rel: c_double,
    pub solve_time: c_double,
}

fn status_code(s: SolverStatus) -> c_int {
    match s {
        SolverStatus::Unsolved => 0,
        SolverStatus::Solved => 1,
        SolverStatus::PrimalInfeasible => 2,
        SolverStatus::DualInfeasible => 3,
        SolverStatus::AlmostSolved => 4,
        SolverStatus::AlmostPrimalInfeasible => 5,
        SolverStatus::AlmostDualInfeasible => 6,
        SolverStatus::MaxIterations => 7,
        SolverStatus::MaxTime => 8,
        SolverStatus::NumericalError => 9,
        SolverStatus::InsufficientProgress => 10,
        SolverStatus::CallbackTerminated => 11,
    }
}

/// Returns 0 on a completed run (inspect `info.status`), -1 on invalid input
/// and -2 if the solver panicked. `x_out` has n entries, `z_out` (the dual
/// cone variable) m entries.
///
/// # Safety
/// All pointers must reference arrays of the documented sizes.
#[no_mangle]
pub unsafe extern "C" fn ddmsi_conic_solve(
    n: usize,
    m: usize,
    colptr: *const usize,
    rowval: *const usize,
    nzval: *const c_double,
    b: *const c_double,
    c: *const c_double,
    nonneg: usize,
    psd_dims: *const usize,
    n_psd: usize,
    max_iter: c_int,
    tol: c_double,
    verbose: c_int,
    x_out: *mut c_double,
    z_out: *mut c_double,
    info: *mut DdmsiConicInfo,
) -> c_int {
    if colptr.is_null()
        || b.is_null()
        || c.is_null()
        || x_out.is_null()
        || z_out.is_null()
        || info.is_null()
    {
        return -1;
    }
    let colptr = slice::from_raw_parts(colptr, n + 1).to_vec();
    let nnz = colptr[n];
    let rowval = if nnz > 0 { slice::from_raw_parts(rowval, nnz).to_vec() } else { vec![] };
    let nzval = if nnz > 0 { slice::from_raw_parts(nzval, nnz).to_vec() } else { vec![] };
    let b = slice::from_raw_parts(b, m).to_vec();
    let q = slice::from_raw_parts(c, n).to_vec();
    let dims = if n_psd > 0 { slice::from_raw_parts(psd_dims, n_psd).to_vec() } else { vec![] };

    let result = panic::catch_unwind(move || {
        let a = CscMatrix::new(m, n, colptr, rowval, nzval);
        let p = CscMatrix::<f64>::zeros((n, n));
        let mut cones = Vec::new();
        if nonneg > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(nonneg));
        }
        for d in dims {
            cones.push(SupportedConeT::PSDTriangleConeT(d));
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(verbose != 0)
            .max_iter(max_iter.max(1) as u32)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .build()
            .ok()?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).ok()?;
        solver.solve();
        Some((
            solver.solution.x.clone(),
            solver.solution.z.clone(),
            DdmsiConicInfo {
                status: status_code(solver.solution.status),
                iterations: solver.solution.iterations as c_int,
                obj_val: solver.solution.obj_val,
                res_primal: solver.info.res_primal,
                res_dual: solver.info.res_dual,
                gap_rel: solver.info.gap_rel,
                solve_time: solver.solution.solve_time,
            },
        ))
    });
    match result {
        Ok(Some((x, z, i))) => {
            slice::from_raw_parts_mut(x_out, n).copy_from_slice(&x);
            slice::from_raw_parts_mut(z_out, m).copy_from_slice(&z);
            *info = i;
            0
        }
        Ok(None) => -1,
        Err(_) => -2,
    }
}
