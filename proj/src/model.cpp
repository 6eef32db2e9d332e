#include "quadnet/model.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "quadnet/errors.hpp"

namespace quadnet::model {

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  // Row-major fill so the stream order does not depend on Eigen's storage.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

Eigen::MatrixXd sample_goe(int d, Rng& rng) {
  const Eigen::MatrixXd a = standard_normal(d, d, rng);
  return (a + a.transpose()) / std::sqrt(2.0 * d);
}

Eigen::MatrixXd sample_wishart(int d, int m, Rng& rng, const Eigen::VectorXd* a) {
  const Eigen::MatrixXd w = standard_normal(m, d, rng);
  if (a) return w.transpose() * a->asDiagonal() * w / static_cast<double>(m);
  return w.transpose() * w / static_cast<double>(m);
}

TeacherInstance generate(int d, double kappa, double alpha, double delta, std::uint64_t seed,
                         const GenerateOptions& opts) {
  if (d < 2) throw Error(ErrorCode::InvalidArgument, "d must be at least 2");
  if (!(kappa > 0.0) || !(alpha > 0.0) || !(delta >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "kappa and alpha must be positive, delta nonnegative");
  const double dd = static_cast<double>(d);
  const auto m = static_cast<long long>(std::llround(kappa * dd));
  const auto n = static_cast<long long>(std::llround(alpha * dd * dd));
  if (m < 1 || n < 1) throw Error(ErrorCode::InvalidArgument, "rounded m and n must be at least 1");
  const double bytes = static_cast<double>(n) * dd * sizeof(double);
  if (bytes > static_cast<double>(opts.memory_budget_bytes) || n > std::numeric_limits<int>::max())
    throw Error(ErrorCode::DimensionOverflow, "n x d input matrix exceeds the memory budget");

  TeacherInstance inst;
  inst.d = d;
  inst.m = static_cast<int>(m);
  inst.n = static_cast<int>(n);
  inst.delta = delta;
  inst.seed = seed;
  inst.kappa = static_cast<double>(m) / dd;
  inst.alpha = static_cast<double>(n) / (dd * dd);
  inst.fixed_second_layer = !opts.second_layer.has_value();

  Rng rng(seed);
  inst.W = standard_normal(inst.m, d, rng);
  inst.a = Eigen::VectorXd::Ones(inst.m);
  if (opts.second_layer) {
    std::vector<double> weights;
    for (const auto& atom : *opts.second_layer) weights.push_back(atom.weight);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    for (int k = 0; k < inst.m; ++k) inst.a(k) = (*opts.second_layer)[pick(rng)].value;
  }
  inst.S = inst.W.transpose() * inst.a.asDiagonal() * inst.W / static_cast<double>(inst.m);
  inst.X = standard_normal(inst.n, d, rng);

  Eigen::MatrixXd pre = inst.X * inst.W.transpose() / std::sqrt(dd);  // n x m
  if (delta > 0.0) pre += std::sqrt(delta) * standard_normal(inst.n, inst.m, rng);
  inst.y = pre.array().square().matrix() * inst.a / static_cast<double>(inst.m);
  return inst;
}

ReducedDataset reduce(const TeacherInstance& inst) {
  ReducedDataset out;
  out.d = inst.d;
  out.X = inst.X;
  // The sample mean tracks Tr[S]/d + delta, removing the O(1/sqrt(m)) offset
  // a fixed center would leave in y_tilde.
  const double center = inst.y.mean();
  out.y_tilde = std::sqrt(static_cast<double>(inst.d)) * (inst.y.array() - center).matrix();
  return out;
}

Eigen::VectorXd sensing_traces(const Eigen::MatrixXd& X, const Eigen::MatrixXd& S) {
  const Eigen::MatrixXd xs = X * S;
  const Eigen::VectorXd quad = (xs.array() * X.array()).rowwise().sum();
  return (quad.array() - S.trace()) / std::sqrt(static_cast<double>(X.cols()));
}

Eigen::MatrixXd sensing_adjoint(const Eigen::MatrixXd& X, const Eigen::VectorXd& g) {
  Eigen::MatrixXd out = X.transpose() * g.asDiagonal() * X;
  out.diagonal().array() -= g.sum();
  return out / std::sqrt(static_cast<double>(X.cols()));
}

double matrix_mse(const Eigen::MatrixXd& S_hat, const Eigen::MatrixXd& S_star, double kappa) {
  if (S_hat.rows() != S_star.rows() || S_hat.cols() != S_star.cols())
    throw Error(ErrorCode::InvalidArgument, "matrix_mse: dimension mismatch");
  return kappa * (S_hat - S_star).squaredNorm() / static_cast<double>(S_star.rows());
}

namespace {

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& M) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << M(i, j);
    out << '\n';
  }
}

}  // namespace

void export_instance(const TeacherInstance& inst, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta = {{"d", inst.d},         {"m", inst.m},         {"n", inst.n},
                         {"delta", inst.delta}, {"seed", inst.seed},   {"kappa", inst.kappa},
                         {"alpha", inst.alpha}, {"fixed_second_layer", inst.fixed_second_layer}};
  std::ofstream(dir / "metadata.json") << meta.dump(2) << '\n';
  write_matrix(dir / "X.csv", inst.X);
  write_matrix(dir / "y.csv", inst.y);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inst.S, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "eigenvalues of S did not converge");
  write_matrix(dir / "s_eigenvalues.csv", eig.eigenvalues());
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace quadnet::model
