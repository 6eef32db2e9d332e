// Acceptance checks, one PASS/FAIL line per criterion.
//   acceptance [C1 ... C10 | all] [--slow]
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "quadnet/cli.hpp"
#include "quadnet/freeprob.hpp"
#include "quadnet/gamp.hpp"
#include "quadnet/gd.hpp"
#include "quadnet/matdenoise.hpp"
#include "quadnet/state_evolution.hpp"

using namespace quadnet;
using state_evolution::ProblemParams;

namespace {

bool slow = false;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double pv_oracle(const freeprob::SpectralDensity& rho, double lambda, double h = 1e-5) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double s) { return rho.interpolate(s) / (lambda - s); };
  double total = 0.0;
  for (const auto& iv : rho.support()) {
    if (lambda - h > iv.lower)
      total += gauss_kronrod<double, 61>::integrate(f, iv.lower, std::min(iv.upper, lambda - h), 12, 1e-12);
    if (lambda + h < iv.upper)
      total += gauss_kronrod<double, 61>::integrate(f, std::max(iv.lower, lambda + h), iv.upper, 12, 1e-12);
  }
  return total;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double mmse_at(double alpha, double kappa, double delta) {
  return state_evolution::solve_qhat(ProblemParams(alpha, kappa, delta)).mmse;
}

Outcome c1() {
  double worst = 0.0;
  std::string d;
  for (double kappa : {0.25, 0.5, 1.0, 2.0}) {
    const double want = state_evolution::perfect_recovery_threshold(kappa);
    const double got = state_evolution::locate_threshold(ProblemParams(0.1, kappa, 0.0), 0.05, 0.9, 1e-3, 1e-5);
    worst = std::max(worst, std::abs(got - want));
    d += " k=" + fmt("%g", kappa) + ":" + fmt("%.5f", got);
  }
  return {worst <= 0.01, "max |alpha_c - alpha_PR| = " + fmt("%.2e", worst) + " (tol 0.01);" + d};
}

Outcome c2() {
  double worst = 0.0;
  std::string d;
  for (double kappa : {0.3, 0.5, 0.7, 1.5, 3.0}) {
    const double a = state_evolution::perfect_recovery_threshold(kappa);
    const double h = 1e-3;
    // one-sided, second order, from below the threshold
    const double fd = (3.0 * mmse_at(a, kappa, 0.0) - 4.0 * mmse_at(a - h, kappa, 0.0) + mmse_at(a - 2 * h, kappa, 0.0)) /
                      (2.0 * h);
    const double want = state_evolution::mmse_slope_at_pr(kappa);
    const double rel = std::abs(fd - want) / std::abs(want);
    worst = std::max(worst, rel);
    d += " k=" + fmt("%g", kappa) + ":" + fmt("%.4f", fd) + "/" + fmt("%.4f", want);
  }
  return {worst <= 0.05, "max relative slope error = " + fmt("%.2e", worst) + " (tol 0.05);" + d};
}

Outcome c3() {
  bool ok = true;
  std::string d;
  double worst_small = 0.0, worst_large = 0.0;
  for (double at : {0.6, 0.8, 1.2}) {
    const double got = mmse_at(at * 0.01, 0.01, 0.0);
    const double want = state_evolution::small_kappa_mmse(at, 0.0);
    worst_small = std::max(worst_small, std::abs(got - want));
    d += " k=0.01,at=" + fmt("%g", at) + ":" + fmt("%.4f", got) + "/" + fmt("%.4f", want);
  }
  for (double a : {0.1, 0.3, 0.45}) {
    const double got = mmse_at(a, 50.0, 0.0);
    worst_large = std::max(worst_large, std::abs(got - std::max(1.0 - 2.0 * a, 0.0)));
  }
  const double zero = std::abs(mmse_at(1e-7, 0.5, 0.0) - 1.0);
  ok = worst_small <= 0.02 && worst_large <= 0.02 && zero <= 1e-3;
  return {ok, "small-kappa err " + fmt("%.4f", worst_small) + ", large-kappa err " + fmt("%.4f", worst_large) +
                  ", alpha->0 err " + fmt("%.1e", zero) + " (tol 0.02, 0.02, 1e-3);" + d};
}

Outcome c4() {
  double worst_q = 0.0;
  int argmax_bad = 0;
  for (double alpha : {0.05, 0.15, 0.25, 0.35, 0.45})
    for (double kappa : {0.5, 1.0, 2.0}) {
      const ProblemParams p(alpha, kappa, 0.0625);
      const auto fp = state_evolution::solve_qhat(p);
      const auto tr = gamp::state_evolution_iterate(p, p.q_min(), 100000, 1e-13);
      worst_q = std::max(worst_q, std::abs(tr.back().q - fp.q));
      const int n = 200;
      const double lo = p.q_min(), hi = p.q0();
      const double step = (hi - lo) / n;
      double best = -1e300, arg = lo;
      for (int i = 0; i < n; ++i) {
        const double q = lo + (i + 0.5) * step;
        const double f = state_evolution::free_entropy(p, q);
        if (f > best) {
          best = f;
          arg = q;
        }
      }
      if (std::abs(arg - fp.q) > step) ++argmax_bad;
    }
  return {worst_q <= 1e-5 && argmax_bad == 0,
          "max |q_iter - q_solve| = " + fmt("%.2e", worst_q) + " (tol 1e-5); argmax off-grid-step at " +
              std::to_string(argmax_bad) + "/15 points"};
}

Outcome c5() {
  bool ok = true;
  double worst_z = 0.0, worst_form = 0.0;
  std::string d;
  std::uint64_t seed = 500;
  for (double kappa : {0.5, 1.0})
    for (double delta : {0.1, 0.5, 1.0}) {
      const matdenoise::DenoiseSpec spec(freeprob::PriorSpectrum::marchenko_pastur(kappa), delta);
      const double a = matdenoise::mmse_cube_form(spec), b = matdenoise::mmse_hilbert_form(spec);
      const auto mc = matdenoise::monte_carlo_mse(spec, 500, 16, seed++);
      const double z = std::abs(mc.mean - a) / mc.standard_error;
      worst_z = std::max(worst_z, z);
      worst_form = std::max(worst_form, std::abs(a - b));
      ok = ok && z <= 3.0 && std::abs(a - b) <= 1e-4;
      d += " k=" + fmt("%g", kappa) + ",D=" + fmt("%g", delta) + ":" + fmt("%+.2f", (mc.mean - a) / mc.standard_error);
    }
  return {ok, "max |z| = " + fmt("%.2f", worst_z) + " (tol 3), max form gap = " + fmt("%.2e", worst_form) +
                  " (tol 1e-4); z per point" + d};
}

Outcome c6() {
  bool ok = true;
  std::string d;
  struct Point {
    double alpha, delta;
  };
  for (const auto& [alpha, delta] :
       std::vector<Point>{{0.15, 0}, {0.25, 0}, {0.35, 0}, {0.45, 0}, {0.2, 0.0625}, {0.4, 0.0625}, {0.6, 0.0625}}) {
    const ProblemParams p(alpha, 0.5, delta);
    const double se = state_evolution::solve_qhat(p).mmse;
    std::vector<double> mse;
    for (int s = 0; s < 8; ++s) {
      const auto data_seed = model::derive_seed(6000 + static_cast<std::uint64_t>(alpha * 1000 + delta * 1e4), s);
      const auto inst = model::generate(100, 0.5, alpha, delta, data_seed);
      gamp::GampOptions o;
      o.max_iterations = 400;
      o.init_seed = model::derive_seed(data_seed, 1);
      try {
        mse.push_back(model::matrix_mse(gamp::run(model::reduce(inst), p, o, &inst.S).S_hat, inst.S, 0.5));
      } catch (const std::exception&) {
        mse.push_back(std::nan(""));
      }
    }
    double s1 = 0, s2 = 0;
    for (double m : mse) s1 += m, s2 += m * m;
    const double mean = s1 / 8.0;
    const double se_err = std::sqrt(std::max(0.0, s2 / 8.0 - mean * mean) / 7.0);
    const double tol = std::max(0.03, 3.0 * se_err);
    const bool here = std::abs(mean - se) <= tol;
    ok = ok && here;
    d += " a=" + fmt("%g", alpha) + (delta > 0 ? "n" : "") + ":" + fmt("%.3f", mean) + "/" + fmt("%.3f", se) +
         (here ? "" : "!");
  }
  return {ok, "mean GAMP mse / SE mmse, tol max(0.03, 3 stderr);" + d};
}

Outcome c7() {
  // noisy point of C6; the recursion is undamped, so is GAMP here
  const ProblemParams p(0.4, 0.5, 0.0625);
  const auto se = gamp::state_evolution_iterate(p, p.q_min(), 10, 0.0);
  const int seeds = 2;
  std::vector<double> mean(11, 0.0);
  for (int s = 0; s < seeds; ++s) {
    const auto inst = model::generate(200, 0.5, p.alpha(), p.delta(), model::derive_seed(7000, s));
    gamp::GampOptions o;
    o.damping = 0.0;
    o.max_iterations = 10;
    o.tolerance = 0.0;
    const auto r = gamp::run(model::reduce(inst), p, o, &inst.S);
    for (int t = 1; t <= 10 && t < static_cast<int>(r.state.trace.size()); ++t) mean[t] += r.state.trace[t].mse / seeds;
  }
  double worst = 0.0;
  std::string d;
  for (int t = 1; t <= 10 && t < static_cast<int>(se.size()); ++t) {
    const double want = p.kappa() * (p.q0() - se[t].q);
    worst = std::max(worst, std::abs(mean[t] - want));
    d += " " + fmt("%.3f", mean[t]) + "/" + fmt("%.3f", want);
  }
  return {worst <= 0.05, "max |gamp - SE| over iterations 1-10 = " + fmt("%.4f", worst) + " (tol 0.05);" + d};
}

Outcome c8() {
  using freeprob::PriorSpectrum;
  const std::vector<PriorSpectrum> priors = {PriorSpectrum::marchenko_pastur(0.5), PriorSpectrum::marchenko_pastur(2.0),
                                             PriorSpectrum::compound_poisson(1.0, {{1.0, 0.5}, {2.0, 0.5}})};
  double e_mass = 0, e_m2 = 0, e_cube = 0, e_sig = 0, e_hil = 0;
  freeprob::SpectralOptions fine, finest;
  fine.nodes_per_interval = 8001;
  finest.nodes_per_interval = 32001;
  for (const auto& prior : priors)
    for (double t : {0.05, 0.5, 2.0}) {
      const auto rho = freeprob::density(prior, t);
      e_mass = std::max(e_mass, std::abs(rho.mass() - 1.0));
      e_m2 = std::max(e_m2, std::abs(rho.moment(2) - prior.second_moment() - t));
      const double c = freeprob::cube_integral(rho), cf = freeprob::cube_integral(freeprob::density(prior, t, fine));
      e_cube = std::max(e_cube, std::abs(c - cf) / cf);
      const double h = 1e-3 * t;
      const double fd = (freeprob::log_potential(freeprob::density(prior, t + h)) -
                         freeprob::log_potential(freeprob::density(prior, t - h))) /
                        (2 * h);
      e_sig = std::max(e_sig, std::abs(freeprob::sigma_t_derivative(prior, t) - fd) / std::abs(fd));
      const auto oracle_rho = freeprob::density(prior, t, finest);
      for (const auto& iv : oracle_rho.support())
        for (double u : {0.1, 0.37, 0.5, 0.81}) {
          const double x = iv.lower + u * iv.width();
          e_hil = std::max(e_hil, std::abs(freeprob::hilbert(prior, t, x) - pv_oracle(oracle_rho, x)));
        }
    }
  // Hilbert transform: semicircle closed form x / (2t) inside the support
  const auto sc = PriorSpectrum::compound_poisson(1.0, {{0.0, 1.0}});
  for (double t : {0.05, 0.5, 2.0})
    for (double u : {-0.9, -0.4, 0.1, 0.6, 0.95}) {
      const double x = 2.0 * std::sqrt(t) * u;
      e_hil = std::max(e_hil, std::abs(freeprob::hilbert(sc, t, x) - x / (2.0 * t)));
    }
  const bool ok = e_mass <= 1e-4 && e_m2 <= 1e-3 && e_cube <= 1e-5 && e_hil <= 1e-4 && e_sig <= 1e-3;
  return {ok, "mass " + fmt("%.1e", e_mass) + " second moment " + fmt("%.1e", e_m2) + " cube " + fmt("%.1e", e_cube) +
                  " hilbert " + fmt("%.1e", e_hil) + " sigma_t " + fmt("%.1e", e_sig)};
}

Outcome c9() {
  const int d = slow ? 200 : 30;
  const int inits = slow ? 16 : 4;
  const double mmse = mmse_at(0.3, 0.5, 0.0);
  const auto inst = model::generate(d, 0.5, 0.3, 0.0, 9000);
  gd::GdConfig cfg;
  cfg.learning_rate = 0.07;
  cfg.max_steps = slow ? 200000 : 50000;
  cfg.n_inits = inits;
  cfg.seed = 9001;
  const auto agd = gd::agd_run(inst, cfg);
  double gd_mse = 0.0;
  for (const auto& r : agd.runs) gd_mse += model::matrix_mse(r.S_hat, inst.S, inst.kappa) / inits;
  const double agd_mse = model::matrix_mse(agd.S_bar, inst.S, inst.kappa);
  const double ratio = gd_mse / mmse;

  std::vector<double> grid;
  for (double a = 0.25; a <= 0.5 + 1e-9; a += 0.025) grid.push_back(a);
  gd::GdConfig sc = cfg;
  sc.n_inits = slow ? 8 : 3;
  std::string scan = "not reached";
  double alpha_t = std::nan("");
  try {
    const auto r = gd::trivialization_scan(0.5, 0.0, grid, slow ? 100 : 30, 1, sc);
    alpha_t = r.alpha_t_absolute ? *r.alpha_t_absolute : *r.alpha_t_relative;
    scan = fmt("%.3f", alpha_t);
  } catch (const std::exception&) {
  }
  const bool ok = ratio >= 1.7 && ratio <= 2.3 && std::abs(agd_mse - mmse) <= 0.05 &&
                  std::abs(alpha_t - state_evolution::perfect_recovery_threshold(0.5)) <= 0.025;
  return {ok, std::string(slow ? "full" : "reduced") + " scale d=" + std::to_string(d) + ": GD/MMSE = " +
                  fmt("%.2f", ratio) + " (want [1.7, 2.3]), |AGD - MMSE| = " + fmt("%.3f", std::abs(agd_mse - mmse)) +
                  " (tol 0.05), alpha_T = " + scan + " vs alpha_PR 0.375; report only"};
}

std::string cli_run(std::vector<std::string> args, const std::filesystem::path& out) {
  args.insert(args.begin(), "quadnet");
  args.push_back("--out");
  args.push_back(out.string());
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  if (cli::main(static_cast<int>(argv.size()), argv.data()) != 0) return "<exit nonzero>";
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c10() {
  const auto dir = std::filesystem::temp_directory_path();
  const std::vector<std::vector<std::string>> runs = {
      {"se-curve", "--kappas", "0.5,2", "--alpha_steps", "6"},
      {"phase-diagram", "--kappas", "0.5,1", "--alphas", "0.1,0.3"},
      {"density", "--kappa", "0.5", "--t", "0.3"},
      {"--seed", "5", "gamp", "--d", "30", "--seeds", "2", "--max_iterations", "20"},
      {"--seed", "5", "denoise-mc", "--d", "60", "--replicas", "3", "--deltas", "0.5"},
      {"--seed", "5", "gd", "--d", "12", "--n_inits", "2", "--max_steps", "500"},
  };
  int bad = 0;
  std::string d;
  for (const auto& args : runs) {
    const auto a = cli_run(args, dir / "quadnet_det_a.csv");
    const auto b = cli_run(args, dir / "quadnet_det_b.csv");
    const bool same = a == b && a.rfind("# ", 0) == 0;
    if (!same) {
      ++bad;
      d += " " + args[args[0] == "--seed" ? 2 : 0];
    }
  }
  return {bad == 0, std::to_string(runs.size() - bad) + "/" + std::to_string(runs.size()) +
                        " commands bit-identical across runs" + (bad ? ";" + d : "")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"C1", c1}, {"C2", c2}, {"C3", c3}, {"C4", c4}, {"C5", c5},
      {"C6", c6}, {"C7", c7}, {"C8", c8}, {"C9", c9}, {"C10", c10}};
  std::vector<std::string> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--slow")
      slow = true;
    else if (a != "all")
      wanted.push_back(a);
  }
  int failed = 0;
  for (const auto& [name, fn] : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass && name != "C9") ++failed;
  }
  return failed == 0 ? 0 : 1;
}
