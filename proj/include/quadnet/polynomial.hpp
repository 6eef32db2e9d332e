#pragma once

#include <array>
#include <complex>
#include <vector>

// Small polynomial helpers used by the spectral solvers. Coefficients are
// stored in ascending order: c[0] + c[1] x + c[2] x^2 + ...
namespace quadnet::poly {

using cplx = std::complex<double>;
using Real = std::vector<double>;
using Complex = std::vector<cplx>;

Real multiply(const Real& a, const Real& b);
Real add(const Real& a, const Real& b);
Real scale(const Real& a, double s);
Real trim(const Real& a, double rel_tol = 0.0);

Complex to_complex(const Real& a);
Complex add(const Complex& a, const Complex& b);

cplx evaluate(const Complex& c, cplx x);
double evaluate(const Real& c, double x);
Real derivative(const Real& c);

// All roots of a complex polynomial (leading coefficient must be nonzero
// after trimming). Companion-matrix eigenvalues followed by Newton polishing.
std::vector<cplx> roots(const Complex& c);

// Real roots of a real polynomial: complex roots whose imaginary part is
// below `imag_tol` (relative to max(1, |root|)) are projected to the axis.
std::vector<double> real_roots(const Real& c, double imag_tol = 1e-9);

// Closed-form (Cardano) roots of a x^3 + b x^2 + c x + d, polished by one
// Newton step each. Requires a != 0.
std::array<cplx, 3> cubic_roots(cplx a, cplx b, cplx c, cplx d);

}  // namespace quadnet::poly
