#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "quadnet/freeprob.hpp"

// Rotationally-invariant denoising of Y = S + sqrt(Delta) GOE.
namespace quadnet::matdenoise {

class DenoiseSpec {
 public:
  // `table_nodes` sets the per-interval resolution of the tabulated density
  // and Hilbert transform.
  DenoiseSpec(freeprob::PriorSpectrum prior, double delta, freeprob::SpectralOptions opts = {},
              int table_nodes = 4001);

  const freeprob::PriorSpectrum& prior() const { return prior_; }
  double delta() const { return delta_; }
  const freeprob::SpectralDensity& rho() const { return rho_; }
  const freeprob::SpectralOptions& options() const { return opts_; }

  // h_Delta(lambda): interpolated on the support, direct off it.
  double hilbert(double lambda) const;

 private:
  freeprob::PriorSpectrum prior_;
  double delta_;
  freeprob::SpectralOptions opts_;
  freeprob::SpectralDensity rho_;
};

// f_Delta(lambda) = lambda - 2 Delta h_Delta(lambda).
double shrink(const DenoiseSpec& spec, double lambda);

// U f_Delta(Lambda) U^T for R = U Lambda U^T. With `clamp_to_support`,
// eigenvalues beyond the outer edges of rho_Delta are moved onto them first.
Eigen::MatrixXd denoise_matrix(const DenoiseSpec& spec, const Eigen::MatrixXd& R, bool clamp_to_support = false);

// Delta - (4 pi^2 / 3) Delta^2 int rho^3.
double mmse_cube_form(const DenoiseSpec& spec);
// Delta - 4 Delta^2 int rho h^2.
double mmse_hilbert_form(const DenoiseSpec& spec);

// F_RIE(Delta); throws FormMismatch when the two forms differ by more than
// `tolerance`.
double mmse(const DenoiseSpec& spec, double tolerance = 1e-4);

// F_RIE(t) straight from the density, no Hilbert table. Used in inner loops.
double f_rie(const freeprob::PriorSpectrum& prior, double t, const freeprob::SpectralOptions& opts = {});

struct MonteCarloResult {
  double mean = 0.0;
  double standard_error = 0.0;
  int replicas = 0;
};

// (1/d) Tr[(S_hat - S)^2] averaged over replicas of S ~ prior at dimension d
// observed through sqrt(Delta) GOE noise.
MonteCarloResult monte_carlo_mse(const DenoiseSpec& spec, int d, int replicas, std::uint64_t seed);

}  // namespace quadnet::matdenoise
