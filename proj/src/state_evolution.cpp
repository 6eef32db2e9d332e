#include "quadnet/state_evolution.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

#include "quadnet/matdenoise.hpp"
#include "quadnet/parallel.hpp"

namespace quadnet::state_evolution {

namespace {

constexpr double kPi = std::numbers::pi;

void check_params(double alpha, double kappa, double delta) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidArgument, "alpha must be >= 0");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw Error(ErrorCode::InvalidArgument, "kappa must be > 0");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw Error(ErrorCode::InvalidArgument, "delta must be >= 0");
}

double cube(const freeprob::PriorSpectrum& prior, double t, const freeprob::SpectralOptions& opts) {
  return freeprob::cube_integral(freeprob::density(prior, t, opts));
}

}  // namespace

ProblemParams::ProblemParams(double alpha, double kappa, double delta)
    : alpha_(alpha), kappa_(kappa), delta_(delta), prior_(freeprob::PriorSpectrum::marchenko_pastur(kappa)) {
  check_params(alpha, kappa, delta);
}

ProblemParams::ProblemParams(double alpha, double kappa, double delta, std::vector<freeprob::Atom> second_layer)
    : alpha_(alpha),
      kappa_(kappa),
      delta_(delta),
      prior_(freeprob::PriorSpectrum::compound_poisson(kappa, std::move(second_layer))) {
  check_params(alpha, kappa, delta);
  if (!(q0() > q_min())) throw Error(ErrorCode::InvalidArgument, "prior has zero variance");
}

ProblemParams ProblemParams::with_alpha(double alpha) const {
  ProblemParams out(*this);
  check_params(alpha, kappa_, delta_);
  out.alpha_ = alpha;
  return out;
}

double qhat_residual(const ProblemParams& p, double q_hat, const freeprob::SpectralOptions& opts) {
  const double t = 1.0 / q_hat;
  return (1.0 - 2.0 * p.alpha()) + p.tilde_delta() * q_hat / 2.0 - 4.0 * kPi * kPi / 3.0 * t * cube(p.prior(), t, opts);
}

namespace {

struct Root {
  double q_hat;
  double residual;
  int iterations;
};

// Brackets the root in u = log q_hat starting from q_hat = 2 alpha / Q0, then
// refines with TOMS 748. Returns nullopt when the residual stays negative up
// to q_hat = 1 / t_min.
std::optional<Root> bracket_and_solve(const ProblemParams& p, const SolverOptions& opts, double u_start) {
  int evaluations = 0;
  auto r = [&](double u) {
    ++evaluations;
    return qhat_residual(p, std::exp(u), opts.spectral);
  };
  const double u_max = std::log(1.0 / opts.t_min);
  const double u_min = std::log(1e-12);
  double a = std::min(u_start, u_max);
  double fa = r(a);
  double b = a, fb = fa;
  const double step = 1.0;
  if (fa < 0.0) {
    while (fb < 0.0) {
      if (b >= u_max) return std::nullopt;
      a = b;
      fa = fb;
      b = std::min(u_max, b + step);
      fb = r(b);
    }
  } else if (fa > 0.0) {
    while (fa > 0.0) {
      if (a <= u_min) throw Error(ErrorCode::NoConvergence, "q_hat residual positive down to q_hat = 1e-12");
      b = a;
      fb = fa;
      a = std::max(u_min, a - step);
      fa = r(a);
    }
  } else {
    return Root{std::exp(a), 0.0, evaluations};
  }
  if (fa == 0.0) return Root{std::exp(a), 0.0, evaluations};
  if (fb == 0.0) return Root{std::exp(b), 0.0, evaluations};

  std::uintmax_t iters = static_cast<std::uintmax_t>(opts.max_iterations);
  const auto [lo, hi] = boost::math::tools::toms748_solve(
      r, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), iters);
  if (iters >= static_cast<std::uintmax_t>(opts.max_iterations))
    throw Error(ErrorCode::NoConvergence, "q_hat root finder exhausted its iterations");
  double best = lo, fbest = std::abs(r(lo));
  for (double u : {hi, 0.5 * (lo + hi)}) {
    const double f = std::abs(r(u));
    if (f < fbest) {
      best = u;
      fbest = f;
    }
  }
  return Root{std::exp(best), fbest, evaluations};
}

double fixed_point_free_entropy(const ProblemParams& p, double q, double t, const SolverOptions& opts) {
  freeprob::SpectralOptions so = opts.spectral;
  so.nodes_per_interval = opts.free_entropy_nodes;
  const double sigma = freeprob::log_potential(freeprob::density(p.prior(), t, so));
  const double gap = p.q0() - q;
  const double inner = gap / (4.0 * t) - sigma / 2.0 + std::log(t) / 4.0 - 0.125;
  return inner - p.alpha() / 2.0 * std::log(p.tilde_delta() + 2.0 * gap);
}

SEFixedPoint finish(const ProblemParams& p, const Root& root, const SolverOptions& opts) {
  SEFixedPoint out;
  out.q_hat = root.q_hat;
  out.residual = root.residual;
  out.iterations = root.iterations;
  const double t = 1.0 / root.q_hat;
  const double kappa = p.kappa();
  double mmse = kappa * (2.0 * p.alpha() * t - p.tilde_delta() / 2.0);
  double q = p.q0() - mmse / kappa;
  const double slack = 1e-4 * (p.q0() - p.q_min());  // quadrature accuracy of the residual
  if (q < p.q_min() - slack || q > p.q0() + slack)
    throw Error(ErrorCode::OutOfRange, "overlap q = " + std::to_string(q) + " outside [q_min, Q0]");
  const double hi = kappa * (p.q0() - p.q_min());
  const double clipped = std::clamp(mmse, 0.0, hi);
  out.clip = clipped - mmse;
  out.mmse = clipped;
  out.q = p.q0() - clipped / kappa;
  out.free_entropy = opts.compute_free_entropy ? fixed_point_free_entropy(p, out.q, t, opts)
                                               : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace

SEFixedPoint solve_qhat(const ProblemParams& p, const SolverOptions& opts) {
  if (!(p.alpha() > 0.0)) throw Error(ErrorCode::InvalidArgument, "solve_qhat requires alpha > 0");

  std::vector<Root> roots;
  if (opts.scan_multiple_roots) {
    // Sign changes on a log grid; each bracket is solved independently.
    const double u_lo = std::log(1e-6), u_hi = std::log(1.0 / opts.t_min);
    double prev_u = u_lo, prev_f = qhat_residual(p, std::exp(u_lo), opts.spectral);
    for (int k = 1; k <= opts.scan_points; ++k) {
      const double u = u_lo + (u_hi - u_lo) * k / opts.scan_points;
      const double f = qhat_residual(p, std::exp(u), opts.spectral);
      if ((prev_f < 0.0) != (f < 0.0))
        if (auto root = bracket_and_solve(p, opts, prev_u)) roots.push_back(*root);
      prev_u = u;
      prev_f = f;
    }
  } else if (auto root = bracket_and_solve(p, opts, std::log(2.0 * p.alpha() / p.q0()))) {
    roots.push_back(*root);
  }

  if (roots.empty()) {
    if (p.tilde_delta() > 0.0)
      throw Error(ErrorCode::NoConvergence, "no q_hat root found with a noisy channel");
    SEFixedPoint out;
    out.q = p.q0();
    out.q_hat = std::numeric_limits<double>::infinity();
    out.mmse = 0.0;
    out.perfect_recovery = true;
    out.free_entropy = opts.compute_free_entropy ? std::numeric_limits<double>::infinity()
                                                 : std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  if (roots.size() == 1) return finish(p, roots.front(), opts);

  SolverOptions with_fe = opts;
  with_fe.compute_free_entropy = true;
  std::optional<SEFixedPoint> best;
  for (const auto& r : roots) {
    SEFixedPoint cand = finish(p, r, with_fe);
    if (!best || cand.free_entropy > best->free_entropy) best = cand;
  }
  if (!opts.compute_free_entropy) best->free_entropy = std::numeric_limits<double>::quiet_NaN();
  return *best;
}

double inner_t(const ProblemParams& p, double q, const freeprob::SpectralOptions& opts) {
  const double target = p.q0() - q;
  const double variance = p.q0() - p.q_min();
  if (!(target > 0.0)) throw Error(ErrorCode::InvalidArgument, "inner problem needs q < Q0");
  if (target >= variance) return std::numeric_limits<double>::infinity();
  auto f = [&](double u) { return matdenoise::f_rie(p.prior(), std::exp(u), opts) - target; };
  // F_RIE(t) <= t, so t = target is on the low side.
  double a = std::log(target), fa = f(a);
  double b = a, fb = fa;
  while (fb < 0.0) {
    a = b;
    fa = fb;
    b += 1.0;
    if (b > std::log(1e12)) throw Error(ErrorCode::NoConvergence, "inner t above 1e12");
    fb = f(b);
  }
  if (fa >= 0.0) return std::exp(a);
  std::uintmax_t iters = 200;
  const auto [lo, hi] = boost::math::tools::toms748_solve(f, a, b, fa, fb,
                                                          boost::math::tools::eps_tolerance<double>(52), iters);
  return std::exp(0.5 * (lo + hi));
}

double inner_free_entropy(const ProblemParams& p, double q, const freeprob::SpectralOptions& opts) {
  const double t = inner_t(p, q, opts);
  if (std::isinf(t)) return 0.0;
  const double sigma = freeprob::log_potential(freeprob::density(p.prior(), t, opts));
  return (p.q0() - q) / (4.0 * t) - sigma / 2.0 + std::log(t) / 4.0 - 0.125;
}

double free_entropy(const ProblemParams& p, double q, const freeprob::SpectralOptions& opts) {
  return inner_free_entropy(p, q, opts) - p.alpha() / 2.0 * std::log(p.tilde_delta() + 2.0 * (p.q0() - q));
}

double perfect_recovery_threshold(double kappa) {
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidArgument, "kappa must be > 0");
  return kappa <= 1.0 ? kappa - kappa * kappa / 2.0 : 0.5;
}

double mmse_slope_at_pr(double kappa) {
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidArgument, "kappa must be > 0");
  return kappa <= 1.0 ? -2.0 - 4.0 / kappa + 12.0 / (1.0 + kappa) : -2.0 + 2.0 / kappa;
}

double small_kappa_mmse(double alpha_tilde, double delta) {
  if (!(alpha_tilde >= 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha_tilde must be >= 0");
  const double lam = delta * (2.0 + delta);
  if (alpha_tilde <= (1.0 + lam) / 2.0) return 1.0;
  const double s = 1.0 - alpha_tilde;
  return std::max(0.0, -lam + 2.0 * alpha_tilde * (s + std::sqrt(s * s + lam)));
}

double large_kappa_mmse(double alpha, double delta) {
  if (!(alpha >= 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be >= 0");
  const double lam = delta * (2.0 + delta);
  const double b = 1.0 - 2.0 * alpha;
  if (lam == 0.0) return std::max(b, 0.0);
  return (b - lam + std::sqrt((b + lam) * (b + lam) + 8.0 * alpha * lam)) / 2.0;
}

std::vector<SweepRow> sweep(const std::vector<ProblemParams>& grid, const SolverOptions& opts, int threads) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "sweep grid is empty");
  return parallel::map(
      grid.size(),
      [&](std::size_t i) {
        const auto& p = grid[i];
        SweepRow row{p.alpha(), p.kappa(), p.delta(), std::nullopt, "ok"};
        try {
          row.result = solve_qhat(p, opts);
        } catch (const Error& e) {
          row.status = to_string(e.code());
        }
        return row;
      },
      threads);
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "alpha,kappa,delta,q,q_hat,mmse,free_entropy,residual,status\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.alpha << ',' << r.kappa << ',' << r.delta << ',';
    if (r.result)
      out << r.result->q << ',' << r.result->q_hat << ',' << r.result->mmse << ',' << r.result->free_entropy << ','
          << r.result->residual;
    else
      out << "nan,nan,nan,nan,nan";
    out << ',' << r.status << '\n';
  }
}

double locate_threshold(const ProblemParams& base, double lo, double hi, double level, double tol,
                        const SolverOptions& opts) {
  auto below = [&](double a) { return solve_qhat(base.with_alpha(a), opts).mmse < level; };
  if (below(lo)) return lo;
  if (!below(hi)) throw Error(ErrorCode::NotReached, "mmse stays above level on the bracket");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (below(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace quadnet::state_evolution
