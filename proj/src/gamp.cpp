#include "quadnet/gamp.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "quadnet/errors.hpp"
#include "quadnet/matdenoise.hpp"

namespace quadnet::gamp {

GampResult run(const model::ReducedDataset& data, const state_evolution::ProblemParams& params,
               const GampOptions& opts, const Eigen::MatrixXd* S_star) {
  const int d = data.d;
  const auto n = data.X.rows();
  if (n < 1 || data.X.cols() != d || data.y_tilde.size() != n)
    throw Error(ErrorCode::InvalidArgument, "gamp: inconsistent dataset dimensions");
  if (opts.damping < 0.0 || opts.damping > 0.5) throw Error(ErrorCode::InvalidArgument, "damping must be in [0, 0.5]");

  const auto& prior = params.prior();
  const double dd = static_cast<double>(d);
  const double variance = params.q0() - params.q_min();
  const ChannelGaussian channel{params.tilde_delta(), opts.variance_floor};
  const double nan = std::numeric_limits<double>::quiet_NaN();

  GampState st;
  if (opts.init == Init::PriorMean) {
    st.S_hat = prior.mean() * Eigen::MatrixXd::Identity(d, d);
    st.c_hat = 2.0 * variance;
  } else {
    model::Rng rng(opts.init_seed);
    const int m = std::max(1, static_cast<int>(std::lround(prior.kappa() * d)));
    Eigen::VectorXd a = Eigen::VectorXd::Ones(m);
    if (!prior.is_marchenko_pastur()) {
      std::vector<double> w;
      for (const auto& atom : prior.atoms()) w.push_back(atom.weight);
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      for (int k = 0; k < m; ++k) a(k) = prior.atoms()[pick(rng)].value;
    }
    st.S_hat = model::sample_wishart(d, m, rng, &a);
    st.c_hat = 4.0 * variance;
  }

  auto mse_of = [&](const Eigen::MatrixXd& S) { return S_star ? model::matrix_mse(S, *S_star, params.kappa()) : nan; };
  st.trace.push_back({0, mse_of(st.S_hat), nan, nan, st.c_hat});
  const double mse0 = st.trace.front().mse;

  Eigen::VectorXd g_prev = Eigen::VectorXd::Zero(n);
  int growing = 0;

  for (int it = 0; it < opts.max_iterations; ++it) {
    st.V = std::max(st.c_hat, opts.variance_floor);
    st.omega = model::sensing_traces(data.X, st.S_hat);
    if (opts.onsager) st.omega -= st.V * g_prev;
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) g(i) = channel.g_out(data.y_tilde(i), st.omega(i), st.V);

    st.A = opts.variance == VarianceForm::Derivative ? 2.0 * n / (dd * dd) / (params.tilde_delta() + st.V)
                                                     : 2.0 * g.squaredNorm() / (dd * dd);
    if (!(st.A > 0.0) || !std::isfinite(st.A)) throw Error(ErrorCode::Diverged, "gamp: A is not positive and finite");
    st.R = st.S_hat + model::sensing_adjoint(data.X, g) / (dd * st.A);

    const double noise = std::max(1.0 / (2.0 * st.A), opts.min_effective_noise);
    const matdenoise::DenoiseSpec spec(prior, noise, opts.spectral, opts.denoiser_table_nodes);
    Eigen::MatrixXd next = matdenoise::denoise_matrix(spec, st.R, opts.clamp_outliers);
    if (opts.damping > 0.0) next = (1.0 - opts.damping) * next + opts.damping * st.S_hat;
    double c_next = 2.0 * matdenoise::mmse_cube_form(spec);
    if (opts.damping > 0.0) c_next = (1.0 - opts.damping) * c_next + opts.damping * st.c_hat;

    const double change = (next - st.S_hat).norm() / std::max(st.S_hat.norm(), 1e-300);
    st.S_hat = std::move(next);
    st.c_hat = c_next;
    st.iter = it + 1;
    g_prev = std::move(g);
    st.trace.push_back({st.iter, mse_of(st.S_hat), st.A, st.V, st.c_hat});

    if (S_star) {
      growing = st.trace.back().mse > 10.0 * mse0 ? growing + 1 : 0;
      if (growing >= opts.divergence_window) throw Error(ErrorCode::Diverged, "gamp: mse grew tenfold for too long");
    }
    if (change < opts.tolerance) {
      st.converged = true;
      break;
    }
  }
  Eigen::MatrixXd out = st.S_hat;
  return {std::move(out), std::move(st)};
}

void write_trace_csv(std::ostream& out, const GampState& state) {
  out << "iter,mse,A,V,c_hat,converged\n" << std::setprecision(17);
  for (const auto& r : state.trace)
    out << r.iter << ',' << r.mse << ',' << r.A << ',' << r.V << ',' << r.c_hat << ',' << (state.converged ? 1 : 0)
        << '\n';
}

std::vector<SETracePoint> state_evolution_iterate(const state_evolution::ProblemParams& p, double q_init,
                                                  int max_iterations, double tol,
                                                  const freeprob::SpectralOptions& opts) {
  if (q_init < p.q_min() - 1e-12 || q_init > p.q0() + 1e-12)
    throw Error(ErrorCode::InvalidArgument, "q_init must lie in [q_min, Q0]");
  constexpr double t_floor = 1e-8;
  std::vector<SETracePoint> trace;
  double q = q_init;
  for (int it = 0; it < max_iterations; ++it) {
    const double gap = p.q0() - q;
    const double denom = p.tilde_delta() + 2.0 * gap;
    const double q_hat = denom > 0.0 ? 4.0 * p.alpha() / denom : std::numeric_limits<double>::infinity();
    trace.push_back({q, q_hat});
    const double t = 1.0 / q_hat;
    double f = 0.0;
    if (t >= t_floor) f = matdenoise::f_rie(p.prior(), t, opts);
    else if (t > 0.0) f = matdenoise::f_rie(p.prior(), t_floor, opts) * t / t_floor;
    const double q_next = p.q0() - f;
    if (std::abs(q_next - q) < tol) {
      q = q_next;
      const double g2 = p.tilde_delta() + 2.0 * (p.q0() - q);
      trace.push_back({q, g2 > 0.0 ? 4.0 * p.alpha() / g2 : std::numeric_limits<double>::infinity()});
      return trace;
    }
    q = q_next;
  }
  trace.push_back({q, 4.0 * p.alpha() / (p.tilde_delta() + 2.0 * (p.q0() - q))});
  return trace;
}

}  // namespace quadnet::gamp
