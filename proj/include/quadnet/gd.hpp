#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "quadnet/model.hpp"

// Full-batch gradient descent on
// R(W) = 1/4 sum_i (y_i - f_W(x_i))^2 + lambda/2 |W|^2,
// f_W(x) = (1/m) sum_k (w_k . x)^2 / d.
namespace quadnet::gd {

struct GdConfig {
  double learning_rate = 0.2;
  double lambda = 0.0;
  long max_steps = 200000;
  double grad_tol = 1e-7;
  int n_inits = 1;
  std::uint64_t seed = 0;
  bool backtracking = false;  // halve the step whenever the risk would go up
  int trace_every = 100;
};

struct GdResult {
  Eigen::MatrixXd W;
  Eigen::MatrixXd S_hat;  // W^T W / m
  std::vector<double> loss_trace;
  long steps = 0;
  bool converged = false;
  double final_loss = 0.0;
  double grad_norm = 0.0;
};

double risk(const model::TeacherInstance& inst, const Eigen::MatrixXd& W, double lambda);
Eigen::MatrixXd gradient(const model::TeacherInstance& inst, const Eigen::MatrixXd& W, double lambda);

// Student width equals the teacher's m. W^0 has i.i.d. standard normal
// entries drawn from `init_seed`.
GdResult gd_run(const model::TeacherInstance& inst, const GdConfig& cfg, std::uint64_t init_seed);

struct AgdResult {
  Eigen::MatrixXd S_bar;
  double dispersion = 0.0;  // mean over inits of (1/d) Tr[(S_bar - S_hat)^2]
  std::vector<GdResult> runs;
};

// Mean of the S matrices and the mean of (1/d) Tr[(S_bar - S_k)^2].
double dispersion(const std::vector<Eigen::MatrixXd>& S_hats, Eigen::MatrixXd* S_bar = nullptr);

// cfg.n_inits runs with init seeds derived from cfg.seed.
AgdResult agd_run(const model::TeacherInstance& inst, const GdConfig& cfg, int threads = 1);

struct ScanRow {
  double alpha = 0.0;
  double dispersion = 0.0;  // averaged over datasets
  double relative = 0.0;    // dispersion / max over the scan
  bool below_absolute = false;  // < 1e-2
  bool below_relative = false;  // < 1e-3 of the max
};

struct ScanResult {
  std::vector<ScanRow> rows;
  std::optional<double> alpha_t_absolute;
  std::optional<double> alpha_t_relative;
};

// Dispersion over an increasing alpha grid; throws NotReached when no grid
// point qualifies under either rule.
ScanResult trivialization_scan(double kappa, double delta, const std::vector<double>& alpha_grid, int d,
                               int datasets, const GdConfig& cfg, int threads = 1);

}  // namespace quadnet::gd
