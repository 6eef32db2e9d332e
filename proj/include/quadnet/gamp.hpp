#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "quadnet/model.hpp"
#include "quadnet/state_evolution.hpp"

// GAMP with a rotationally-invariant matrix denoiser for
// y_tilde_i = Tr[Z_i S] + sqrt(tilde_delta) xi_i.
namespace quadnet::gamp {

enum class Init {
  PriorMean,    // S_hat = m_a I, c_hat = 2 (Q0 - q_min)
  PriorSample,  // S_hat ~ prior, c_hat = 4 (Q0 - q_min)
};

// Estimate of A = -(2/d^2) sum_i d g_out / d omega.
enum class VarianceForm {
  Derivative,  // 2 n / (d^2 (tilde_delta + V)), the channel derivative
  Empirical,   // 2 sum_i g_i^2 / d^2
};

struct GampOptions {
  int max_iterations = 1000;
  double tolerance = 1e-6;  // relative Frobenius change of S_hat
  double damping = 0.5;     // weight of the previous (S_hat, c_hat), in [0, 0.5]
  VarianceForm variance = VarianceForm::Derivative;
  bool clamp_outliers = true;  // clamp eigenvalues of R to the support before shrinking
  double variance_floor = 1e-10;
  double min_effective_noise = 1e-9;
  bool onsager = true;      // off only to demonstrate what the memory term does
  Init init = Init::PriorMean;
  std::uint64_t init_seed = 0;
  int denoiser_table_nodes = 2001;
  freeprob::SpectralOptions spectral{};
  int divergence_window = 20;
};

struct ChannelGaussian {
  double tilde_delta = 0.0;
  double floor = 1e-10;
  double g_out(double y, double omega, double V) const { return (y - omega) / std::max(tilde_delta + V, floor); }
};

struct IterationRecord {
  int iter = 0;
  double mse = 0.0;  // NaN without ground truth
  double A = 0.0;
  double V = 0.0;
  double c_hat = 0.0;
};

struct GampState {
  Eigen::MatrixXd S_hat;
  double c_hat = 0.0;
  Eigen::VectorXd omega;
  double V = 0.0;
  double A = 0.0;
  Eigen::MatrixXd R;
  int iter = 0;
  std::vector<IterationRecord> trace;  // entry k describes S_hat^k
  bool converged = false;
};

struct GampResult {
  Eigen::MatrixXd S_hat;  // last iterate
  GampState state;
};

// Runs the algorithm. With `S_star` the per-iteration mse is recorded and a
// growing trace raises Diverged. Hitting max_iterations returns the last
// iterate with converged = false.
GampResult run(const model::ReducedDataset& data, const state_evolution::ProblemParams& params,
               const GampOptions& opts = {}, const Eigen::MatrixXd* S_star = nullptr);

void write_trace_csv(std::ostream& out, const GampState& state);

struct SETracePoint {
  double q = 0.0;
  double q_hat = 0.0;
};

// q_hat^t = 4 alpha / (tilde_delta + 2 (Q0 - q^t)), Q0 - q^{t+1} = F_RIE(1/q_hat^t).
std::vector<SETracePoint> state_evolution_iterate(const state_evolution::ProblemParams& params, double q_init,
                                                  int max_iterations = 10000, double tol = 1e-10,
                                                  const freeprob::SpectralOptions& opts = {});

}  // namespace quadnet::gamp
