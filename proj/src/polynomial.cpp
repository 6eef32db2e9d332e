#include "quadnet/polynomial.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "quadnet/errors.hpp"

namespace quadnet::poly {

Real multiply(const Real& a, const Real& b) {
  if (a.empty() || b.empty()) return {};
  Real out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

Real add(const Real& a, const Real& b) {
  Real out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
  return out;
}

Real scale(const Real& a, double s) {
  Real out(a);
  for (auto& v : out) v *= s;
  return out;
}

Real trim(const Real& a, double rel_tol) {
  double big = 0.0;
  for (double v : a) big = std::max(big, std::abs(v));
  Real out(a);
  while (!out.empty() && std::abs(out.back()) <= rel_tol * big) out.pop_back();
  return out;
}

Complex to_complex(const Real& a) { return Complex(a.begin(), a.end()); }

Complex add(const Complex& a, const Complex& b) {
  Complex out(std::max(a.size(), b.size()), cplx(0.0));
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
  return out;
}

cplx evaluate(const Complex& c, cplx x) {
  cplx acc(0.0);
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double evaluate(const Real& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

Real derivative(const Real& c) {
  if (c.size() <= 1) return {0.0};
  Real out(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i) out[i - 1] = c[i] * static_cast<double>(i);
  return out;
}

namespace {

Complex derivative(const Complex& c) {
  if (c.size() <= 1) return {cplx(0.0)};
  Complex out(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i) out[i - 1] = c[i] * static_cast<double>(i);
  return out;
}

cplx newton_polish(const Complex& c, const Complex& dc, cplx x, int steps) {
  for (int k = 0; k < steps; ++k) {
    const cplx f = evaluate(c, x);
    const cplx df = evaluate(dc, x);
    if (std::abs(df) == 0.0) break;
    const cplx next = x - f / df;
    if (!std::isfinite(next.real()) || !std::isfinite(next.imag())) break;
    // Accept the step only if it does not increase the residual.
    if (std::abs(evaluate(c, next)) > std::abs(f)) break;
    x = next;
  }
  return x;
}

}  // namespace

std::vector<cplx> roots(const Complex& c_in) {
  Complex c(c_in);
  while (!c.empty() && std::abs(c.back()) == 0.0) c.pop_back();
  if (c.size() <= 1) return {};
  const std::size_t n = c.size() - 1;
  if (n == 1) return {-c[0] / c[1]};

  Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n),
                                                       static_cast<Eigen::Index>(n));
  for (std::size_t i = 1; i < n; ++i)
    companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  for (std::size_t i = 0; i < n; ++i)
    companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n - 1)) = -c[i] / c[n];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::EigenFailure, "companion matrix eigenvalues did not converge");

  const Complex dc = derivative(c);
  std::vector<cplx> out;
  out.reserve(n);
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i)
    out.push_back(newton_polish(c, dc, solver.eigenvalues()(i), 3));
  return out;
}

std::vector<double> real_roots(const Real& c, double imag_tol) {
  std::vector<double> out;
  for (const auto& r : roots(to_complex(trim(c))))
    if (std::abs(r.imag()) <= imag_tol * std::max(1.0, std::abs(r))) out.push_back(r.real());
  std::sort(out.begin(), out.end());
  return out;
}

std::array<cplx, 3> cubic_roots(cplx a, cplx b, cplx c, cplx d) {
  b /= a;
  c /= a;
  d /= a;
  // Depressed cubic y^3 + p y + q with x = y - b/3.
  const cplx shift = -b / 3.0;
  const cplx p = c - b * b / 3.0;
  const cplx q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
  const cplx disc = std::sqrt(q * q / 4.0 + p * p * p / 27.0);
  cplx u3 = -q / 2.0 + disc;
  const cplx alt = -q / 2.0 - disc;
  if (std::abs(alt) > std::abs(u3)) u3 = alt;

  std::array<cplx, 3> y;
  if (std::abs(u3) == 0.0) {
    y = {cplx(0.0), cplx(0.0), cplx(0.0)};
  } else {
    const cplx u = std::pow(u3, 1.0 / 3.0);
    const cplx omega(-0.5, std::sqrt(3.0) / 2.0);
    cplx uk = u;
    for (int k = 0; k < 3; ++k) {
      y[static_cast<std::size_t>(k)] = uk - p / (3.0 * uk);
      uk *= omega;
    }
  }

  const Complex coeffs{d, c, b, cplx(1.0)};
  const Complex dcoeffs{c, 2.0 * b, cplx(3.0)};
  for (auto& v : y) v += shift;

  // Cardano loses the small roots when one root dominates, so keep only the
  // largest and recover the others from the backward-deflated quadratic.
  std::size_t big = 0;
  for (std::size_t k = 1; k < 3; ++k)
    if (std::abs(y[k]) > std::abs(y[big])) big = k;
  const cplx r = newton_polish(coeffs, dcoeffs, y[big], 3);
  std::array<cplx, 3> out{r, r, r};
  if (std::abs(r) > 0.0) {
    const cplx f = -d / r;
    const cplx e = (f - c) / r;
    const cplx sq = std::sqrt(e * e - 4.0 * f);
    cplx qq = -0.5 * (e + sq);
    const cplx alt = -0.5 * (e - sq);
    if (std::abs(alt) > std::abs(qq)) qq = alt;
    out[1] = qq;
    out[2] = std::abs(qq) > 0.0 ? f / qq : cplx(0.0);
  } else {
    for (std::size_t k = 0; k < 3; ++k) out[k] = y[k];
  }
  for (std::size_t k = 1; k < 3; ++k) out[k] = newton_polish(coeffs, dcoeffs, out[k], 2);
  return out;
}

}  // namespace quadnet::poly
