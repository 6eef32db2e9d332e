#include "quadnet/matdenoise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "quadnet/errors.hpp"
#include "quadnet/model.hpp"

namespace quadnet::matdenoise {

namespace {

freeprob::SpectralOptions with_nodes(freeprob::SpectralOptions opts, int nodes) {
  opts.nodes_per_interval = nodes;
  return opts;
}

}  // namespace

DenoiseSpec::DenoiseSpec(freeprob::PriorSpectrum prior, double delta, freeprob::SpectralOptions opts,
                         int table_nodes)
    : prior_(std::move(prior)),
      delta_(delta),
      opts_(opts),
      rho_(freeprob::density(prior_, delta, with_nodes(opts, table_nodes))) {
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "denoising requires Delta > 0");
}

double DenoiseSpec::hilbert(double lambda) const {
  for (const auto& p : rho_.panels()) {
    if (lambda < p.interval.lower || lambda > p.interval.upper) continue;
    const auto it = std::upper_bound(p.x.begin(), p.x.end(), lambda);
    if (it == p.x.begin() || it == p.x.end()) break;
    const auto j = static_cast<std::size_t>(it - p.x.begin());
    const double x0 = p.x[j - 1], x1 = p.x[j];
    if (x1 == x0) return -p.g[j].real();
    const double w = (lambda - x0) / (x1 - x0);
    return -((1.0 - w) * p.g[j - 1].real() + w * p.g[j].real());
  }
  return freeprob::hilbert(prior_, delta_, lambda, opts_);
}

double shrink(const DenoiseSpec& spec, double lambda) {
  return lambda - 2.0 * spec.delta() * spec.hilbert(lambda);
}

Eigen::MatrixXd denoise_matrix(const DenoiseSpec& spec, const Eigen::MatrixXd& R, bool clamp_to_support) {
  if (R.rows() != R.cols()) throw Error(ErrorCode::InvalidArgument, "denoise_matrix: R must be square");
  if (!R.allFinite()) throw Error(ErrorCode::InvalidArgument, "denoise_matrix: R has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "eigendecomposition did not converge");
  Eigen::VectorXd f = eig.eigenvalues();
  double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
  if (clamp_to_support) {
    const auto sup = spec.rho().support();
    lo = sup.front().lower;
    hi = sup.back().upper;
  }
  for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = shrink(spec, std::clamp(f(i), lo, hi));
  const Eigen::MatrixXd& U = eig.eigenvectors();
  Eigen::MatrixXd out = U * f.asDiagonal() * U.transpose();
  return 0.5 * (out + out.transpose());
}

double mmse_cube_form(const DenoiseSpec& spec) {
  const double d = spec.delta();
  return d - 4.0 * std::numbers::pi * std::numbers::pi / 3.0 * d * d * freeprob::cube_integral(spec.rho());
}

double mmse_hilbert_form(const DenoiseSpec& spec) {
  double acc = 0.0;
  for (const auto& p : spec.rho().panels())
    for (std::size_t j = 0; j < p.x.size(); ++j) acc += p.weight[j] * p.density[j] * p.g[j].real() * p.g[j].real();
  const double d = spec.delta();
  return d - 4.0 * d * d * acc;
}

double mmse(const DenoiseSpec& spec, double tolerance) {
  const double cube = mmse_cube_form(spec);
  const double hil = mmse_hilbert_form(spec);
  if (std::abs(cube - hil) > tolerance)
    throw Error(ErrorCode::FormMismatch, "F_RIE forms differ by " + std::to_string(std::abs(cube - hil)) +
                                             " at Delta = " + std::to_string(spec.delta()));
  return cube;
}

double f_rie(const freeprob::PriorSpectrum& prior, double t, const freeprob::SpectralOptions& opts) {
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "F_RIE requires t > 0");
  const double c = freeprob::cube_integral(freeprob::density(prior, t, opts));
  return t - 4.0 * std::numbers::pi * std::numbers::pi / 3.0 * t * t * c;
}

MonteCarloResult monte_carlo_mse(const DenoiseSpec& spec, int d, int replicas, std::uint64_t seed) {
  if (d < 2 || replicas < 1) throw Error(ErrorCode::InvalidArgument, "need d >= 2 and at least one replica");
  const auto& prior = spec.prior();
  const int m = std::max(1, static_cast<int>(std::lround(prior.kappa() * d)));
  std::vector<double> values;
  for (int r = 0; r < replicas; ++r) {
    model::Rng rng(model::derive_seed(seed, static_cast<std::uint64_t>(r)));
    Eigen::VectorXd a = Eigen::VectorXd::Ones(m);
    if (!prior.is_marchenko_pastur()) {
      std::vector<double> w;
      for (const auto& atom : prior.atoms()) w.push_back(atom.weight);
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      for (int k = 0; k < m; ++k) a(k) = prior.atoms()[pick(rng)].value;
    }
    const Eigen::MatrixXd S = model::sample_wishart(d, m, rng, &a);
    const Eigen::MatrixXd Y = S + std::sqrt(spec.delta()) * model::sample_goe(d, rng);
    values.push_back((denoise_matrix(spec, Y) - S).squaredNorm() / d);
  }
  MonteCarloResult out;
  out.replicas = replicas;
  for (double v : values) out.mean += v;
  out.mean /= replicas;
  if (replicas > 1) {
    double var = 0.0;
    for (double v : values) var += (v - out.mean) * (v - out.mean);
    out.standard_error = std::sqrt(var / (replicas - 1) / replicas);
  }
  return out;
}

}  // namespace quadnet::matdenoise
