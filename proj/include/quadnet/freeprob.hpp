#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include "quadnet/polynomial.hpp"

// Free additive convolution of a prior spectrum with a scaled semicircle,
// computed through the algebraic self-consistency equation of its Stieltjes
// transform g(z) = E[1 / (X - z)].
namespace quadnet::freeprob {

using cplx = std::complex<double>;

struct Atom {
  double value = 1.0;
  double weight = 1.0;
};

// Limiting spectrum of S = (1/m) sum_k a_k w_k w_k^T with m / d = kappa.
// Marchenko-Pastur is the a_k = 1 case; a general finite law of a_k gives the
// free compound Poisson (generalized Marchenko-Pastur) spectrum.
class PriorSpectrum {
 public:
  static PriorSpectrum marchenko_pastur(double kappa);
  static PriorSpectrum compound_poisson(double kappa, std::vector<Atom> atoms);

  bool is_marchenko_pastur() const { return marchenko_pastur_; }
  double kappa() const { return kappa_; }
  const std::vector<Atom>& atoms() const { return atoms_; }

  double atom_mean() const;          // m_a
  double atom_second_moment() const; // c_a
  double mean() const { return atom_mean(); }
  double second_moment() const;      // Q0 = m_a^2 + c_a / kappa
  double variance() const { return second_moment() - mean() * mean(); }

  // R(s) = sum_k p_k kappa a_k / (kappa - s a_k).
  cplx r_transform(cplx s) const;

  // Inverse of the Stieltjes transform: z(g) = -t g + R(-g) - 1/g.
  cplx inverse_stieltjes(double t, cplx g) const;
  // d z / d g along real g, used to locate the support edges.
  double inverse_stieltjes_derivative(double t, double g) const;

  // Polynomial in g (ascending coefficients) whose roots contain g(z).
  poly::Complex self_consistency(double t, cplx z) const;
  // Polynomial in g whose real roots are the critical points of z(g).
  poly::Real critical_points(double t) const;

  // Crude bound on the support of the convolved measure.
  double support_radius(double t) const;

  std::string describe() const;

 private:
  PriorSpectrum(double kappa, std::vector<Atom> atoms, bool mp);

  double kappa_ = 1.0;
  std::vector<Atom> atoms_;
  bool marchenko_pastur_ = true;
  // (t g^2 + 1) P(g) + z g P(g) - g Q(g) with P = prod_k (kappa + a_k g).
  poly::Real p_;
  poly::Real q_;
  std::vector<poly::Real> p_without_;  // P / (kappa + a_k g), per nonzero atom
  std::vector<Atom> nonzero_atoms_;
};

struct SpectralOptions {
  double epsilon = 1e-8;         // Im z used for Stieltjes-Perron inversion
  int nodes_per_interval = 2001; // odd, composite Simpson in theta
};

struct StieltjesSolution {
  cplx z;
  cplx g;
  double residual = 0.0;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
};

// One support interval tabulated on x = l + (u - l) sin^2(theta).
struct Panel {
  Interval interval;
  std::vector<double> x;
  std::vector<double> density;
  std::vector<double> weight;  // quadrature weights in x (Jacobian included)
  std::vector<cplx> g;         // Stieltjes transform at x + i epsilon
};

class SpectralDensity {
 public:
  SpectralDensity(double t, std::vector<Panel> panels, double atom_mass_at_zero);

  double t() const { return t_; }
  const std::vector<Panel>& panels() const { return panels_; }
  std::vector<Interval> support() const;
  double atom_mass_at_zero() const { return atom_mass_at_zero_; }

  double continuous_mass() const;
  double mass() const { return continuous_mass() + atom_mass_at_zero_; }
  // E[X^k] including the atom at zero.
  double moment(int k) const;

  // Linear interpolation of the tabulated density (0 off the support).
  double interpolate(double x) const;

  // CSV with columns interval_index,x,density.
  void write_csv(std::ostream& out) const;

 private:
  double t_ = 0.0;
  std::vector<Panel> panels_;
  double atom_mass_at_zero_ = 0.0;
};

// All roots of the self-consistency polynomial at z.
std::vector<cplx> stieltjes_candidates(const PriorSpectrum& prior, double t, cplx z);

// The admissible root: Im g > 0, continuously connected to g ~ -1/z at
// infinity. Throws NoAdmissibleRoot when no root qualifies.
StieltjesSolution stieltjes(const PriorSpectrum& prior, double t, cplx z);

double self_consistency_residual(const PriorSpectrum& prior, double t, cplx z, cplx g);

std::vector<Interval> support_edges(const PriorSpectrum& prior, double t,
                                    const SpectralOptions& opts = {});

// Density of prior [+] semicircle(variance t). For t = 0 only the
// Marchenko-Pastur prior is supported (closed form plus atom at zero).
SpectralDensity density(const PriorSpectrum& prior, double t, const SpectralOptions& opts = {});

double cube_integral(const SpectralDensity& d);

// P.V. integral of rho(s) / (lambda - s) ds, i.e. -Re g(lambda + i epsilon).
double hilbert(const PriorSpectrum& prior, double t, double lambda,
               const SpectralOptions& opts = {});

// E_{X,Y ~ rho} log|X - Y|.
double log_potential(const SpectralDensity& d);

// d/dt of the log potential, (2 pi^2 / 3) * int rho_t^3.
double sigma_t_derivative(const PriorSpectrum& prior, double t, const SpectralOptions& opts = {});

}  // namespace quadnet::freeprob
