#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "quadnet/errors.hpp"
#include "quadnet/freeprob.hpp"

// Asymptotic MMSE of the quadratic network: the fixed point in q_hat, the free
// entropy, thresholds and limiting closed forms.
namespace quadnet::state_evolution {

class ProblemParams {
 public:
  // Marchenko-Pastur prior.
  ProblemParams(double alpha, double kappa, double delta);
  // Generalized prior built from a law of second-layer weights.
  ProblemParams(double alpha, double kappa, double delta, std::vector<freeprob::Atom> second_layer);

  double alpha() const { return alpha_; }
  double kappa() const { return kappa_; }
  double delta() const { return delta_; }
  double tilde_delta() const { return 2.0 * delta_ * (2.0 + delta_) / kappa_; }
  double lambda() const { return delta_ * (2.0 + delta_); }
  double q0() const { return prior_.second_moment(); }
  double q_min() const { return prior_.mean() * prior_.mean(); }
  const freeprob::PriorSpectrum& prior() const { return prior_; }

  ProblemParams with_alpha(double alpha) const;

 private:
  double alpha_;
  double kappa_;
  double delta_;
  freeprob::PriorSpectrum prior_;
};

struct SolverOptions {
  freeprob::SpectralOptions spectral{};
  double t_min = 1e-8;          // smallest 1/q_hat probed before declaring perfect recovery
  double residual_tol = 1e-9;
  int max_iterations = 200;
  bool scan_multiple_roots = false;
  int scan_points = 40;
  bool compute_free_entropy = false;
  int free_entropy_nodes = 801;
};

struct SEFixedPoint {
  double q = 0.0;
  double q_hat = 0.0;  // +inf at perfect recovery
  double mmse = 0.0;
  double free_entropy = 0.0;  // NaN unless requested
  double residual = 0.0;
  int iterations = 0;
  double clip = 0.0;          // amount removed by clipping mmse into range
  bool perfect_recovery = false;
};

// Residual of the q_hat equation:
// (1 - 2 alpha) + tilde_delta q_hat / 2 - (4 pi^2 / (3 q_hat)) int mu_{1/q_hat}^3.
double qhat_residual(const ProblemParams& p, double q_hat, const freeprob::SpectralOptions& opts = {});

SEFixedPoint solve_qhat(const ProblemParams& p, const SolverOptions& opts = {});

// Minimizer t = 1/q_hat of the inner problem of I(q), i.e. F_RIE(t) = Q0 - q.
double inner_t(const ProblemParams& p, double q, const freeprob::SpectralOptions& opts = {});

// I(q) and F(q) = I(q) - (alpha/2) log[tilde_delta + 2 (Q0 - q)].
double inner_free_entropy(const ProblemParams& p, double q, const freeprob::SpectralOptions& opts = {});
double free_entropy(const ProblemParams& p, double q, const freeprob::SpectralOptions& opts = {});

double perfect_recovery_threshold(double kappa);
double mmse_slope_at_pr(double kappa);
double small_kappa_mmse(double alpha_tilde, double delta);
double large_kappa_mmse(double alpha, double delta);

struct SweepRow {
  double alpha = 0.0;
  double kappa = 0.0;
  double delta = 0.0;
  std::optional<SEFixedPoint> result;
  std::string status = "ok";
};

// One solve per cell, order preserved; failures are recorded in `status`.
std::vector<SweepRow> sweep(const std::vector<ProblemParams>& grid, const SolverOptions& opts = {},
                            int threads = 1);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// Smallest alpha in [lo, hi] where the mmse drops below `level`, by bisection.
double locate_threshold(const ProblemParams& base, double lo, double hi, double level = 1e-3,
                        double tol = 1e-4, const SolverOptions& opts = {});

}  // namespace quadnet::state_evolution
