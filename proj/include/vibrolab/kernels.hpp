// Per-grid-point kernels. Each has a serial reference path and an OpenMP
// path; both visit points independently so results agree bit for bit.
#pragma once

#include <complex>
#include <cstddef>

namespace vibro::kernels {

using cd = std::complex<double>;

enum class Exec { serial, parallel };

// psi is state-major: psi[n * n_points + i]. mats holds one row-major
// n_states x n_states complex matrix per point.
void apply_point_matrices(cd* psi, int n_states, std::size_t n_points, const cd* mats, Exec exec);

// Packed symmetric 2x2 variant: u[3*i] = (u00, u01, u11).
void apply_point_sym2(cd* psi, std::size_t n_points, const cd* u, Exec exec);

// frames: one row-major real n x n matrix per point, columns are adiabatic
// states in the diabatic basis. transpose=true maps diabatic -> adiabatic.
void apply_real_frames(cd* psi, int n_states, std::size_t n_points, const double* frames, bool transpose,
                       Exec exec);

// Same phase array applied to every state row.
void multiply_rows(cd* psi, int n_states, std::size_t n_points, const cd* phase, Exec exec);

// Closed-form exp(-i V dt) for V = [[a, c], [c, b]], written as (u00, u01, u11).
void sym2_propagator(double a, double b, double c, double dt, cd out[3]);

// Closed-form symmetric 2x2 eigen-solution. Columns: lower, upper.
void sym2_eigen(double a, double b, double c, double& e_lo, double& e_hi, double vec[4]);

}  // namespace vibro::kernels
