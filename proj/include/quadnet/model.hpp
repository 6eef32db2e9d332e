#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "quadnet/freeprob.hpp"

// Teacher network y = (1/m) sum_k a_k [(w_k . x)/sqrt(d) + sqrt(Delta) z_k]^2,
// its reduction to a matrix-sensing problem, and the error metric.
namespace quadnet::model {

using Rng = std::mt19937_64;

struct GenerateOptions {
  // Law of the second-layer weights a_k. Unset means a_k = 1.
  std::optional<std::vector<freeprob::Atom>> second_layer;
  // Upper bound on the bytes taken by the n x d input matrix.
  std::size_t memory_budget_bytes = std::size_t{2} << 30;
};

struct TeacherInstance {
  int d = 0;
  int m = 0;
  int n = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  double kappa = 0.0;  // m / d after rounding
  double alpha = 0.0;  // n / d^2 after rounding
  bool fixed_second_layer = true;
  Eigen::MatrixXd W;   // m x d
  Eigen::VectorXd a;   // m
  Eigen::MatrixXd S;   // d x d, W^T diag(a) W / m
  Eigen::MatrixXd X;   // n x d
  Eigen::VectorXd y;   // n
};

struct ReducedDataset {
  int d = 0;
  Eigen::MatrixXd X;        // rows x_i; Z_i = (x_i x_i^T - I)/sqrt(d) is never formed
  Eigen::VectorXd y_tilde;
  double alpha() const { return static_cast<double>(X.rows()) / (static_cast<double>(d) * d); }
};

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// Symmetric Gaussian matrix, off-diagonal variance 1/d, diagonal 2/d.
Eigen::MatrixXd sample_goe(int d, Rng& rng);

// W^T diag(a) W / m with W an m x d standard Gaussian matrix.
Eigen::MatrixXd sample_wishart(int d, int m, Rng& rng, const Eigen::VectorXd* a = nullptr);

TeacherInstance generate(int d, double kappa, double alpha, double delta, std::uint64_t seed,
                         const GenerateOptions& opts = {});

// y_tilde = sqrt(d) (y - mean(y)).
ReducedDataset reduce(const TeacherInstance& instance);

// Tr[Z_i S] for every row, as (x_i^T S x_i - Tr S) / sqrt(d).
Eigen::VectorXd sensing_traces(const Eigen::MatrixXd& X, const Eigen::MatrixXd& S);

// sum_i g_i Z_i, as (X^T diag(g) X - (sum g) I) / sqrt(d).
Eigen::MatrixXd sensing_adjoint(const Eigen::MatrixXd& X, const Eigen::VectorXd& g);

// kappa (1/d) Tr[(S_hat - S_star)^2].
double matrix_mse(const Eigen::MatrixXd& S_hat, const Eigen::MatrixXd& S_star, double kappa);

// Writes metadata.json, X.csv, y.csv and s_eigenvalues.csv into `dir`.
void export_instance(const TeacherInstance& instance, const std::filesystem::path& dir);

// Independent seed for stream `index` derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace quadnet::model
