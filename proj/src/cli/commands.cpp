#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "quadnet/cli.hpp"
#include "quadnet/errors.hpp"
#include "quadnet/freeprob.hpp"
#include "quadnet/gamp.hpp"
#include "quadnet/gd.hpp"
#include "quadnet/matdenoise.hpp"
#include "quadnet/model.hpp"
#include "quadnet/parallel.hpp"
#include "quadnet/state_evolution.hpp"

namespace quadnet::cli {

namespace {

using Doubles = std::vector<double>;

double num(const json& cfg, const char* key) { return cfg.at(key).get<double>(); }
int integer(const json& cfg, const char* key) { return cfg.at(key).get<int>(); }

// Explicit list when non-empty, otherwise an inclusive linear grid.
Doubles grid(const json& cfg, const std::string& list, const std::string& prefix) {
  Doubles out = cfg.at(list).get<Doubles>();
  if (!out.empty()) return out;
  const double lo = cfg.at(prefix + "_min").get<double>();
  const double hi = cfg.at(prefix + "_max").get<double>();
  const int steps = cfg.at(prefix + "_steps").get<int>();
  if (steps < 1) throw UsageError(prefix + " grid is empty");
  if (steps == 1) return {lo};
  if (!(hi > lo)) throw UsageError(prefix + "_max must exceed " + prefix + "_min");
  for (int k = 0; k < steps; ++k) out.push_back(lo + (hi - lo) * k / (steps - 1));
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

freeprob::SpectralOptions spectral(const json& cfg) {
  freeprob::SpectralOptions o;
  o.epsilon = num(cfg, "epsilon");
  o.nodes_per_interval = integer(cfg, "nodes");
  require(o.epsilon > 0.0, "epsilon must be positive");
  require(o.nodes_per_interval >= 3 && o.nodes_per_interval % 2 == 1, "nodes must be odd and >= 3");
  return o;
}

const std::vector<OptionSpec> kSpectralOptions = {
    {"epsilon", 1e-8, "imaginary offset for Stieltjes inversion"},
    {"nodes", 2001, "quadrature nodes per support interval (odd)"},
};

std::vector<OptionSpec> with_spectral(std::vector<OptionSpec> v) {
  v.insert(v.end(), kSpectralOptions.begin(), kSpectralOptions.end());
  return v;
}

void write_fixed_point(std::ostream& out, const state_evolution::SweepRow& r) {
  if (r.result)
    out << r.result->mmse << ',' << r.result->q << ',' << r.result->q_hat << ',' << r.result->free_entropy;
  else
    out << "nan,nan,nan,nan";
}

std::vector<state_evolution::SweepRow> solve_grid(const Doubles& alphas, const Doubles& kappas, const Doubles& deltas,
                                                  const json& cfg, int threads) {
  std::vector<state_evolution::ProblemParams> cells;
  try {
    for (double k : kappas)
      for (double dl : deltas)
        for (double a : alphas) cells.emplace_back(a, k, dl);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  for (const auto& c : cells) require(c.alpha() > 0.0, "alpha values must be positive");
  state_evolution::SolverOptions so;
  so.spectral = spectral(cfg);
  so.compute_free_entropy = cfg.at("free_entropy").get<bool>();
  return state_evolution::sweep(cells, so, threads);
}

int cmd_se_curve(RunContext& ctx) {
  const auto& c = ctx.config;
  const Doubles alphas = grid(c, "alphas", "alpha");
  const Doubles kappas = c.at("kappas").get<Doubles>();
  const Doubles deltas = c.at("deltas").get<Doubles>();
  require(!alphas.empty() && !kappas.empty() && !deltas.empty(), "empty grid");
  const auto rows = solve_grid(alphas, kappas, deltas, c, ctx.threads);

  auto& out = *ctx.out;
  write_header(out, ctx.header);
  out << "alpha,kappa,delta,mmse,q,q_hat,free_entropy,status\n" << std::setprecision(17);
  int failures = 0;
  for (const auto& r : rows) {
    out << r.alpha << ',' << r.kappa << ',' << r.delta << ',';
    write_fixed_point(out, r);
    out << ',' << r.status << '\n';
    failures += r.result ? 0 : 1;
  }
  return failures ? 1 : 0;
}

int cmd_phase_diagram(RunContext& ctx) {
  const auto& c = ctx.config;
  const Doubles alphas = grid(c, "alphas", "alpha");
  const Doubles kappas = grid(c, "kappas", "kappa");
  const double delta = num(c, "delta");
  const auto rows = solve_grid(alphas, kappas, {delta}, c, ctx.threads);

  auto& out = *ctx.out;
  write_header(out, ctx.header);
  out << "alpha,kappa,delta,mmse,q,q_hat,free_entropy,alpha_pr,status\n" << std::setprecision(17);
  int failures = 0;
  for (const auto& r : rows) {
    out << r.alpha << ',' << r.kappa << ',' << r.delta << ',';
    write_fixed_point(out, r);
    out << ',' << state_evolution::perfect_recovery_threshold(r.kappa) << ',' << r.status << '\n';
    failures += r.result ? 0 : 1;
  }
  return failures ? 1 : 0;
}

int cmd_gamp(RunContext& ctx) {
  const auto& c = ctx.config;
  const int d = integer(c, "d"), seeds = integer(c, "seeds");
  const double kappa = num(c, "kappa"), alpha = num(c, "alpha"), delta = num(c, "delta");
  require(d >= 2, "d must be at least 2");
  require(seeds >= 1, "seeds must be at least 1");
  require(kappa > 0.0 && alpha > 0.0 && delta >= 0.0, "need kappa > 0, alpha > 0, delta >= 0");
  const std::string init = c.at("init").get<std::string>();
  require(init == "prior-mean" || init == "prior-sample", "init must be prior-mean or prior-sample");
  const std::string variance = c.at("variance").get<std::string>();
  require(variance == "derivative" || variance == "empirical", "variance must be derivative or empirical");

  const state_evolution::ProblemParams params(alpha, kappa, delta);
  gamp::GampOptions go;
  go.max_iterations = integer(c, "max_iterations");
  go.tolerance = num(c, "tolerance");
  go.damping = num(c, "damping");
  go.init = init == "prior-mean" ? gamp::Init::PriorMean : gamp::Init::PriorSample;
  go.variance = variance == "derivative" ? gamp::VarianceForm::Derivative : gamp::VarianceForm::Empirical;
  go.clamp_outliers = c.at("clamp").get<bool>();
  require(go.damping >= 0.0 && go.damping <= 0.5, "damping must be in [0, 0.5]");
  const std::string trace_prefix = c.at("trace_prefix").get<std::string>();
  const double se = state_evolution::solve_qhat(params).mmse;

  struct Row {
    std::uint64_t data_seed = 0;
    double mse = std::nan("");
    int iterations = 0;
    bool converged = false;
    std::string status = "ok";
  };
  const auto rows = parallel::map(
      static_cast<std::size_t>(seeds),
      [&](std::size_t k) {
        Row r;
        r.data_seed = model::derive_seed(ctx.seed, k);
        try {
          const auto inst = model::generate(d, kappa, alpha, delta, r.data_seed);
          gamp::GampOptions o = go;
          o.init_seed = model::derive_seed(r.data_seed, 1);
          const auto res = gamp::run(model::reduce(inst), params, o, &inst.S);
          r.mse = model::matrix_mse(res.S_hat, inst.S, kappa);
          r.iterations = res.state.iter;
          r.converged = res.state.converged;
          if (!trace_prefix.empty()) {
            std::ofstream tf(trace_prefix + std::to_string(k) + ".csv");
            gamp::write_trace_csv(tf, res.state);
          }
        } catch (const Error& e) {
          r.status = to_string(e.code());
        }
        return r;
      },
      ctx.threads);

  double sum = 0.0, sq = 0.0;
  int ok = 0;
  for (const auto& r : rows)
    if (r.status == "ok") {
      sum += r.mse;
      sq += r.mse * r.mse;
      ++ok;
    }
  const double mean = ok ? sum / ok : std::nan("");
  const double stderr_mean = ok > 1 ? std::sqrt(std::max(0.0, (sq - ok * mean * mean) / (ok - 1)) / ok) : std::nan("");

  auto& out = *ctx.out;
  write_header(out, ctx.header);
  out << "seed_index,data_seed,mse,iterations,converged,se_mmse,mean_mse,stderr,status\n" << std::setprecision(17);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    out << k << ',' << r.data_seed << ',' << r.mse << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << se
        << ',' << mean << ',' << stderr_mean << ',' << r.status << '\n';
  }
  return ok ? 0 : 1;
}

int cmd_denoise_mc(RunContext& ctx) {
  const auto& c = ctx.config;
  const double kappa = num(c, "kappa");
  const Doubles deltas = c.at("deltas").get<Doubles>();
  const int d = integer(c, "d"), replicas = integer(c, "replicas"), table = integer(c, "table_nodes");
  require(!deltas.empty(), "empty delta grid");
  require(kappa > 0.0, "kappa must be positive");
  require(d >= 2 && replicas >= 2, "need d >= 2 and replicas >= 2");
  for (double dl : deltas) require(dl > 0.0, "delta values must be positive");
  const auto prior = freeprob::PriorSpectrum::marchenko_pastur(kappa);
  const auto so = spectral(c);

  struct Row {
    double delta, mc, se, cube, hilbert;
  };
  const auto rows = parallel::map(
      deltas.size(),
      [&](std::size_t i) {
        const matdenoise::DenoiseSpec spec(prior, deltas[i], so, table);
        const auto mc = matdenoise::monte_carlo_mse(spec, d, replicas, model::derive_seed(ctx.seed, i));
        return Row{deltas[i], mc.mean, mc.standard_error, matdenoise::mmse_cube_form(spec),
                   matdenoise::mmse_hilbert_form(spec)};
      },
      ctx.threads);

  auto& out = *ctx.out;
  write_header(out, ctx.header);
  out << "kappa,delta,d,replicas,mc_mse,mc_stderr,f_rie,f_rie_hilbert,form_gap,z_score\n" << std::setprecision(17);
  for (const auto& r : rows)
    out << kappa << ',' << r.delta << ',' << d << ',' << replicas << ',' << r.mc << ',' << r.se << ',' << r.cube << ','
        << r.hilbert << ',' << std::abs(r.cube - r.hilbert) << ',' << (r.mc - r.cube) / r.se << '\n';
  return 0;
}

gd::GdConfig gd_config(const json& c, std::uint64_t seed) {
  gd::GdConfig g;
  g.learning_rate = num(c, "learning_rate");
  g.lambda = num(c, "lambda");
  g.max_steps = c.at("max_steps").get<long>();
  g.grad_tol = num(c, "grad_tol");
  g.n_inits = integer(c, "n_inits");
  g.backtracking = c.at("backtracking").get<bool>();
  g.seed = seed;
  require(g.learning_rate > 0.0, "learning_rate must be positive");
  require(g.lambda >= 0.0, "lambda must be nonnegative");
  require(g.max_steps >= 1, "max_steps must be positive");
  require(g.n_inits >= 1, "n_inits must be positive");
  return g;
}

const std::vector<OptionSpec> kGdOptions = {
    {"learning_rate", 0.07, "step size"},
    {"lambda", 0.0, "l2 penalty"},
    {"max_steps", 200000, "step cap"},
    {"grad_tol", 1e-7, "stop when the gradient norm drops below this"},
    {"backtracking", false, "halve the step whenever the risk increases"},
};

std::vector<OptionSpec> with_gd(std::vector<OptionSpec> v) {
  v.insert(v.end(), kGdOptions.begin(), kGdOptions.end());
  return v;
}

int cmd_gd(RunContext& ctx) {
  const auto& c = ctx.config;
  const int d = integer(c, "d"), datasets = integer(c, "datasets");
  const double kappa = num(c, "kappa"), delta = num(c, "delta");
  const Doubles alphas = c.at("alphas").get<Doubles>();
  require(!alphas.empty(), "empty alpha grid");
  require(d >= 2 && datasets >= 1, "need d >= 2 and datasets >= 1");
  require(kappa > 0.0 && delta >= 0.0, "need kappa > 0 and delta >= 0");
  const auto base = gd_config(c, ctx.seed);

  auto& out = *ctx.out;
  write_header(out, ctx.header);
  out << "alpha,dataset,data_seed,lambda,n_inits,gd_mse,agd_mse,dispersion,mmse,final_loss,steps,converged\n"
      << std::setprecision(17);
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const double mmse = state_evolution::solve_qhat({alphas[i], kappa, delta}).mmse;
    for (int s = 0; s < datasets; ++s) {
      const auto data_seed = model::derive_seed(ctx.seed, (i << 20) + static_cast<std::size_t>(s));
      const auto inst = model::generate(d, kappa, alphas[i], delta, data_seed);
      gd::GdConfig g = base;
      g.seed = model::derive_seed(data_seed, 1);
      std::vector<gd::GdResult> runs;
      double agd = std::nan(""), dispersion = std::nan("");
      if (g.n_inits >= 2) {
        auto res = gd::agd_run(inst, g, ctx.threads);
        agd = model::matrix_mse(res.S_bar, inst.S, kappa);
        dispersion = res.dispersion;
        runs = std::move(res.runs);
      } else {
        runs.push_back(gd::gd_run(inst, g, model::derive_seed(g.seed, 0)));
      }
      double mse = 0.0, loss = 0.0;
      long steps = 0;
      bool converged = true;
      for (const auto& r : runs) {
        mse += model::matrix_mse(r.S_hat, inst.S, kappa);
        loss += r.final_loss;
        steps = std::max(steps, r.steps);
        converged = converged && r.converged;
      }
      const double k = static_cast<double>(runs.size());
      out << alphas[i] << ',' << s << ',' << data_seed << ',' << g.lambda << ',' << g.n_inits << ',' << mse / k << ','
          << agd << ',' << dispersion << ',' << mmse << ',' << loss / k << ',' << steps << ',' << (converged ? 1 : 0)
          << '\n';
    }
  }
  return 0;
}

int cmd_gd_scan(RunContext& ctx) {
  const auto& c = ctx.config;
  const int d = integer(c, "d"), datasets = integer(c, "datasets");
  const double kappa = num(c, "kappa"), delta = num(c, "delta");
  const Doubles alphas = grid(c, "alphas", "alpha");
  require(d >= 2 && datasets >= 1, "need d >= 2 and datasets >= 1");
  const auto g = gd_config(c, ctx.seed);
  require(g.n_inits >= 2, "gd-scan needs n_inits >= 2");
  const auto scan = gd::trivialization_scan(kappa, delta, alphas, d, datasets, g, ctx.threads);

  auto& out = *ctx.out;
  write_header(out, ctx.header);
  out << "alpha,dispersion,relative,below_absolute,below_relative,alpha_t_absolute,alpha_t_relative\n"
      << std::setprecision(17);
  const double nan = std::nan("");
  for (const auto& r : scan.rows)
    out << r.alpha << ',' << r.dispersion << ',' << r.relative << ',' << (r.below_absolute ? 1 : 0) << ','
        << (r.below_relative ? 1 : 0) << ',' << scan.alpha_t_absolute.value_or(nan) << ','
        << scan.alpha_t_relative.value_or(nan) << '\n';
  return 0;
}

int cmd_density(RunContext& ctx) {
  const auto& c = ctx.config;
  const double kappa = num(c, "kappa"), t = num(c, "t");
  require(kappa > 0.0 && t > 0.0, "need kappa > 0 and t > 0");
  const auto rho = freeprob::density(freeprob::PriorSpectrum::marchenko_pastur(kappa), t, spectral(c));
  auto& out = *ctx.out;
  write_header(out, ctx.header);
  out << std::setprecision(17);
  rho.write_csv(out);
  return 0;
}

int cmd_generate(RunContext& ctx) {
  const auto& c = ctx.config;
  const int d = integer(c, "d");
  const double kappa = num(c, "kappa"), alpha = num(c, "alpha"), delta = num(c, "delta");
  require(d >= 2 && kappa > 0.0 && alpha > 0.0 && delta >= 0.0, "need d >= 2, kappa > 0, alpha > 0, delta >= 0");
  const std::filesystem::path dir = c.at("dir").get<std::string>();
  const auto inst = model::generate(d, kappa, alpha, delta, ctx.seed);
  model::export_instance(inst, dir);
  auto& out = *ctx.out;
  write_header(out, ctx.header);
  out << "dir,d,m,n\n" << dir.string() << ',' << inst.d << ',' << inst.m << ',' << inst.n << '\n';
  return 0;
}

}  // namespace

const std::vector<Command>& commands() {
  static const std::vector<Command> all = {
      {"se-curve",
       "asymptotic MMSE along an alpha grid for each kappa and delta",
       with_spectral({
           {"kappas", Doubles{0.5}, "width ratios m/d"},
           {"deltas", Doubles{0.0}, "label noise variances"},
           {"alphas", Doubles{}, "explicit alpha grid (overrides alpha_min/max/steps)"},
           {"alpha_min", 0.02, "first alpha"},
           {"alpha_max", 1.0, "last alpha"},
           {"alpha_steps", 50, "number of alpha points"},
           {"free_entropy", false, "also report the free entropy at the fixed point"},
       }),
       cmd_se_curve},
      {"phase-diagram",
       "MMSE over an (alpha, kappa) grid with the perfect-recovery line",
       with_spectral({
           {"kappas", Doubles{}, "explicit kappa grid"},
           {"kappa_min", 0.1, "first kappa"},
           {"kappa_max", 2.0, "last kappa"},
           {"kappa_steps", 20, "number of kappa points"},
           {"alphas", Doubles{}, "explicit alpha grid"},
           {"alpha_min", 0.02, "first alpha"},
           {"alpha_max", 1.0, "last alpha"},
           {"alpha_steps", 50, "number of alpha points"},
           {"delta", 0.0, "label noise variance"},
           {"free_entropy", false, "also report the free entropy"},
       }),
       cmd_phase_diagram},
      {"gamp",
       "GAMP-RIE on synthetic teachers, one row per seed",
       {
           {"d", 100, "input dimension"},
           {"kappa", 0.5, "width ratio m/d"},
           {"alpha", 0.3, "samples per d^2"},
           {"delta", 0.0, "label noise variance"},
           {"seeds", 8, "number of independent datasets"},
           {"damping", 0.5, "weight of the previous iterate"},
           {"variance", std::string("derivative"), "derivative or empirical estimate of A"},
           {"clamp", true, "clamp eigenvalues of R to the support before shrinking"},
           {"max_iterations", 1000, "iteration cap"},
           {"tolerance", 1e-6, "relative change for convergence"},
           {"init", std::string("prior-mean"), "prior-mean or prior-sample"},
           {"trace_prefix", std::string(""), "write per-seed traces to <prefix><k>.csv"},
       },
       cmd_gamp},
      {"denoise-mc",
       "Monte-Carlo check of the RIE denoiser against F_RIE",
       with_spectral({
           {"kappa", 0.5, "width ratio of the Wishart prior"},
           {"deltas", Doubles{0.1, 0.5, 1.0}, "noise variances"},
           {"d", 200, "matrix dimension"},
           {"replicas", 16, "Monte-Carlo replicas"},
           {"table_nodes", 4001, "nodes of the Hilbert-transform table"},
       }),
       cmd_denoise_mc},
      {"gd",
       "gradient descent and averaged GD against the MMSE",
       with_gd({
           {"d", 100, "input dimension"},
           {"kappa", 0.5, "width ratio m/d"},
           {"delta", 0.0, "label noise variance"},
           {"alphas", Doubles{0.3}, "sample complexities"},
           {"datasets", 1, "datasets per alpha"},
           {"n_inits", 1, "initializations per dataset (>= 2 enables averaging)"},
       }),
       cmd_gd},
      {"gd-scan",
       "dispersion of GD endpoints along an alpha grid",
       with_gd({
           {"d", 50, "input dimension"},
           {"kappa", 0.5, "width ratio m/d"},
           {"delta", 0.0, "label noise variance"},
           {"alphas", Doubles{}, "explicit alpha grid"},
           {"alpha_min", 0.1, "first alpha"},
           {"alpha_max", 0.6, "last alpha"},
           {"alpha_steps", 11, "number of alpha points"},
           {"datasets", 2, "datasets per alpha"},
           {"n_inits", 4, "initializations per dataset"},
       }),
       cmd_gd_scan},
      {"density",
       "spectral density of the Wishart prior plus sqrt(t) semicircle",
       with_spectral({
           {"kappa", 0.5, "width ratio"},
           {"t", 1.0, "semicircle variance"},
       }),
       cmd_density},
      {"generate",
       "sample a teacher and dataset and export it",
       {
           {"d", 50, "input dimension"},
           {"kappa", 0.5, "width ratio m/d"},
           {"alpha", 0.3, "samples per d^2"},
           {"delta", 0.0, "label noise variance"},
           {"dir", std::string("instance"), "output directory"},
       },
       cmd_generate},
  };
  return all;
}

}  // namespace quadnet::cli
