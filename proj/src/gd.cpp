#include "quadnet/gd.hpp"

#include <algorithm>
#include <cmath>

#include "quadnet/errors.hpp"
#include "quadnet/parallel.hpp"

namespace quadnet::gd {

namespace {

struct Eval {
  Eigen::MatrixXd H;  // X W^T
  Eigen::VectorXd r;  // y - f_W(x)
  double loss = 0.0;
};

Eval evaluate(const model::TeacherInstance& inst, const Eigen::MatrixXd& W, double lambda) {
  Eval e;
  e.H = inst.X * W.transpose();
  const double scale = 1.0 / (static_cast<double>(W.rows()) * inst.d);
  e.r = inst.y - scale * e.H.array().square().rowwise().sum().matrix();
  e.loss = 0.25 * e.r.squaredNorm() + 0.5 * lambda * W.squaredNorm();
  return e;
}

Eigen::MatrixXd gradient_from(const model::TeacherInstance& inst, const Eval& e, const Eigen::MatrixXd& W,
                              double lambda) {
  const double scale = 1.0 / (static_cast<double>(W.rows()) * inst.d);
  Eigen::MatrixXd g = -scale * (e.r.asDiagonal() * e.H).transpose() * inst.X;
  if (lambda != 0.0) g += lambda * W;
  return g;
}

}  // namespace

double risk(const model::TeacherInstance& inst, const Eigen::MatrixXd& W, double lambda) {
  return evaluate(inst, W, lambda).loss;
}

Eigen::MatrixXd gradient(const model::TeacherInstance& inst, const Eigen::MatrixXd& W, double lambda) {
  return gradient_from(inst, evaluate(inst, W, lambda), W, lambda);
}

GdResult gd_run(const model::TeacherInstance& inst, const GdConfig& cfg, std::uint64_t init_seed) {
  if (!(cfg.learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  if (cfg.lambda < 0.0) throw Error(ErrorCode::InvalidArgument, "lambda must be nonnegative");

  model::Rng rng(init_seed);
  GdResult out;
  out.W = model::standard_normal(inst.m, inst.d, rng);
  double lr = cfg.learning_rate;

  Eval e = evaluate(inst, out.W, cfg.lambda);
  const double initial = e.loss;
  Eigen::MatrixXd g = gradient_from(inst, e, out.W, cfg.lambda);
  out.loss_trace.push_back(e.loss);

  for (out.steps = 0; out.steps < cfg.max_steps; ++out.steps) {
    out.grad_norm = g.norm();
    if (out.grad_norm < cfg.grad_tol) {
      out.converged = true;
      break;
    }
    Eigen::MatrixXd next = out.W - lr * g;
    Eval en = evaluate(inst, next, cfg.lambda);
    if (cfg.backtracking) {
      while (en.loss > e.loss && lr > 1e-12) {
        lr *= 0.5;
        next = out.W - lr * g;
        en = evaluate(inst, next, cfg.lambda);
      }
    }
    if (!std::isfinite(en.loss) || en.loss > 1e6 * std::max(initial, 1e-300))
      throw Error(ErrorCode::Diverged, "gradient descent loss exploded");
    out.W = std::move(next);
    e = std::move(en);
    g = gradient_from(inst, e, out.W, cfg.lambda);
    if (cfg.trace_every > 0 && (out.steps + 1) % cfg.trace_every == 0) out.loss_trace.push_back(e.loss);
  }
  out.final_loss = e.loss;
  out.grad_norm = g.norm();
  out.S_hat = out.W.transpose() * out.W / static_cast<double>(inst.m);
  return out;
}

double dispersion(const std::vector<Eigen::MatrixXd>& S_hats, Eigen::MatrixXd* S_bar) {
  if (S_hats.empty()) throw Error(ErrorCode::InvalidArgument, "no matrices to average");
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(S_hats.front().rows(), S_hats.front().cols());
  for (const auto& S : S_hats) mean += S;
  mean /= static_cast<double>(S_hats.size());
  double out = 0.0;
  for (const auto& S : S_hats) out += (mean - S).squaredNorm() / static_cast<double>(S.rows());
  if (S_bar) *S_bar = std::move(mean);
  return out / static_cast<double>(S_hats.size());
}

AgdResult agd_run(const model::TeacherInstance& inst, const GdConfig& cfg, int threads) {
  if (cfg.n_inits < 2) throw Error(ErrorCode::InvalidArgument, "averaged GD needs at least two inits");
  AgdResult out;
  out.runs = parallel::map(
      static_cast<std::size_t>(cfg.n_inits),
      [&](std::size_t k) { return gd_run(inst, cfg, model::derive_seed(cfg.seed, k)); }, threads);
  std::vector<Eigen::MatrixXd> S;
  for (const auto& r : out.runs) S.push_back(r.S_hat);
  out.dispersion = dispersion(S, &out.S_bar);
  return out;
}

ScanResult trivialization_scan(double kappa, double delta, const std::vector<double>& alpha_grid, int d,
                               int datasets, const GdConfig& cfg, int threads) {
  if (alpha_grid.empty()) throw Error(ErrorCode::InvalidArgument, "alpha grid is empty");
  if (!std::is_sorted(alpha_grid.begin(), alpha_grid.end()))
    throw Error(ErrorCode::InvalidArgument, "alpha grid must be increasing");
  if (datasets < 1) throw Error(ErrorCode::InvalidArgument, "need at least one dataset");

  ScanResult out;
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    double total = 0.0;
    for (int s = 0; s < datasets; ++s) {
      const auto data_seed = model::derive_seed(cfg.seed, (i << 20) + static_cast<std::size_t>(s));
      const auto inst = model::generate(d, kappa, alpha_grid[i], delta, data_seed);
      GdConfig c = cfg;
      c.seed = model::derive_seed(data_seed, 1);
      total += agd_run(inst, c, threads).dispersion;
    }
    out.rows.push_back({alpha_grid[i], total / datasets, 0.0, false, false});
  }
  double peak = 0.0;
  for (const auto& r : out.rows) peak = std::max(peak, r.dispersion);
  for (auto& r : out.rows) {
    r.relative = peak > 0.0 ? r.dispersion / peak : 0.0;
    r.below_absolute = r.dispersion < 1e-2;
    r.below_relative = peak > 0.0 && r.dispersion < 1e-3 * peak;
    if (r.below_absolute && !out.alpha_t_absolute) out.alpha_t_absolute = r.alpha;
    if (r.below_relative && !out.alpha_t_relative) out.alpha_t_relative = r.alpha;
  }
  if (!out.alpha_t_absolute && !out.alpha_t_relative)
    throw Error(ErrorCode::NotReached, "dispersion never drops below either threshold");
  return out;
}

}  // namespace quadnet::gd
