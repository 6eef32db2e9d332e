#include "quadnet/freeprob.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "quadnet/errors.hpp"

namespace quadnet::freeprob {

namespace {

constexpr double kPi = std::numbers::pi;

double sqr(double v) { return v * v; }

}  // namespace

// ---------------------------------------------------------------------------
// PriorSpectrum

PriorSpectrum::PriorSpectrum(double kappa, std::vector<Atom> atoms, bool mp)
    : kappa_(kappa), marchenko_pastur_(mp) {
  if (!(kappa > 0.0) || !std::isfinite(kappa))
    throw Error(ErrorCode::InvalidArgument, "kappa must be a positive finite number");
  if (atoms.empty()) throw Error(ErrorCode::InvalidArgument, "atom list is empty");

  // Merge duplicate values so the polynomial degree stays minimal.
  std::map<double, double> merged;
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!std::isfinite(a.value) || !std::isfinite(a.weight) || a.weight < 0.0)
      throw Error(ErrorCode::InvalidArgument, "atoms must be finite with nonnegative weight");
    merged[a.value] += a.weight;
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidArgument, "atom weights must sum to 1");
  for (const auto& [value, weight] : merged) {
    if (weight == 0.0) continue;
    atoms_.push_back({value, weight});
    if (value != 0.0) nonzero_atoms_.push_back({value, weight});
  }

  p_ = {1.0};
  for (const auto& a : nonzero_atoms_) p_ = poly::multiply(p_, {kappa_, a.value});
  q_ = {0.0};
  for (std::size_t k = 0; k < nonzero_atoms_.size(); ++k) {
    poly::Real without{1.0};
    for (std::size_t j = 0; j < nonzero_atoms_.size(); ++j)
      if (j != k) without = poly::multiply(without, {kappa_, nonzero_atoms_[j].value});
    const auto& a = nonzero_atoms_[k];
    q_ = poly::add(q_, poly::scale(without, a.weight * kappa_ * a.value));
    p_without_.push_back(std::move(without));
  }
}

PriorSpectrum PriorSpectrum::marchenko_pastur(double kappa) {
  return PriorSpectrum(kappa, {{1.0, 1.0}}, true);
}

PriorSpectrum PriorSpectrum::compound_poisson(double kappa, std::vector<Atom> atoms) {
  return PriorSpectrum(kappa, std::move(atoms), false);
}

double PriorSpectrum::atom_mean() const {
  double m = 0.0;
  for (const auto& a : atoms_) m += a.weight * a.value;
  return m;
}

double PriorSpectrum::atom_second_moment() const {
  double c = 0.0;
  for (const auto& a : atoms_) c += a.weight * a.value * a.value;
  return c;
}

double PriorSpectrum::second_moment() const {
  return sqr(atom_mean()) + atom_second_moment() / kappa_;
}

cplx PriorSpectrum::r_transform(cplx s) const {
  cplx r(0.0);
  for (const auto& a : nonzero_atoms_) r += a.weight * kappa_ * a.value / (kappa_ - s * a.value);
  return r;
}

cplx PriorSpectrum::inverse_stieltjes(double t, cplx g) const {
  return -t * g + r_transform(-g) - 1.0 / g;
}

double PriorSpectrum::inverse_stieltjes_derivative(double t, double g) const {
  double d = -t + 1.0 / (g * g);
  for (const auto& a : nonzero_atoms_) d -= a.weight * kappa_ * sqr(a.value) / sqr(kappa_ + a.value * g);
  return d;
}

poly::Complex PriorSpectrum::self_consistency(double t, cplx z) const {
  // (t g^2 + 1) P(g) - g Q(g) + z g P(g)
  poly::Real fixed = poly::add(poly::multiply({1.0, 0.0, t}, p_), poly::scale(poly::multiply({0.0, 1.0}, q_), -1.0));
  poly::Complex out = poly::to_complex(fixed);
  const poly::Real gp = poly::multiply({0.0, 1.0}, p_);
  if (out.size() < gp.size()) out.resize(gp.size(), cplx(0.0));
  for (std::size_t i = 0; i < gp.size(); ++i) out[i] += z * gp[i];
  while (!out.empty() && out.back() == cplx(0.0)) out.pop_back();
  return out;
}

poly::Real PriorSpectrum::critical_points(double t) const {
  // g^2 P^2 z'(g) = P^2 - t g^2 P^2 - g^2 sum_k p_k kappa a_k^2 P_k^2
  const poly::Real p2 = poly::multiply(p_, p_);
  poly::Real out = poly::add(p2, poly::scale(poly::multiply({0.0, 0.0, t}, p2), -1.0));
  for (std::size_t k = 0; k < nonzero_atoms_.size(); ++k) {
    const auto& a = nonzero_atoms_[k];
    const poly::Real pk2 = poly::multiply(p_without_[k], p_without_[k]);
    out = poly::add(out, poly::scale(poly::multiply({0.0, 0.0, 1.0}, pk2), -a.weight * kappa_ * sqr(a.value)));
  }
  return poly::trim(out);
}

double PriorSpectrum::support_radius(double t) const {
  double amax = 0.0;
  for (const auto& a : atoms_) amax = std::max(amax, std::abs(a.value));
  return amax * sqr(1.0 + 1.0 / std::sqrt(kappa_)) + 2.0 * std::sqrt(std::max(t, 0.0));
}

std::string PriorSpectrum::describe() const {
  std::ostringstream os;
  os << std::setprecision(17);
  if (marchenko_pastur_) {
    os << "MarchenkoPastur(kappa=" << kappa_ << ")";
  } else {
    os << "CompoundPoisson(kappa=" << kappa_ << ", atoms=[";
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      os << (i ? ", " : "") << "(" << atoms_[i].value << ", " << atoms_[i].weight << ")";
    os << "])";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Stieltjes transform

std::vector<cplx> stieltjes_candidates(const PriorSpectrum& prior, double t, cplx z) {
  const poly::Complex c = prior.self_consistency(t, z);
  if (c.size() == 4) {
    const auto r = poly::cubic_roots(c[3], c[2], c[1], c[0]);
    return {r.begin(), r.end()};
  }
  return poly::roots(c);
}

double self_consistency_residual(const PriorSpectrum& prior, double t, cplx z, cplx g) {
  return std::abs(z - prior.inverse_stieltjes(t, g));
}

namespace {

cplx nearest(const std::vector<cplx>& roots, cplx target) {
  cplx best = roots.front();
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& r : roots) {
    const double d2 = std::abs(r - target);
    if (d2 < dist) {
      dist = d2;
      best = r;
    }
  }
  return best;
}

// Newton on z(g) - z = 0, keeping the step only when the residual shrinks.
cplx polish(const PriorSpectrum& prior, double t, cplx z, cplx g) {
  for (int k = 0; k < 2; ++k) {
    const cplx f = prior.inverse_stieltjes(t, g) - z;
    cplx df = -t + 1.0 / (g * g);
    for (const auto& a : prior.atoms())
      if (a.value != 0.0) {
        const cplx den = prior.kappa() + a.value * g;
        df -= a.weight * prior.kappa() * a.value * a.value / (den * den);
      }
    if (std::abs(df) == 0.0) break;
    const cplx next = g - f / df;
    if (!(std::abs(prior.inverse_stieltjes(t, next) - z) < std::abs(f))) break;
    g = next;
  }
  return g;
}

// Follows the physical branch from far up the imaginary axis, where it is
// the root closest to -1/z, down to the requested point.
cplx follow_branch(const PriorSpectrum& prior, double t, cplx z) {
  const double x = z.real();
  const double y_target = z.imag();
  double y = std::max(y_target, 16.0 * (prior.support_radius(t) + std::abs(x) + 1.0));
  cplx zc(x, y);
  cplx g = nearest(stieltjes_candidates(prior, t, zc), -1.0 / zc);
  while (y > y_target) {
    y = std::max(y_target, 0.6 * y);
    zc = cplx(x, y);
    g = nearest(stieltjes_candidates(prior, t, zc), g);
  }
  return g;
}

bool nevanlinna_consistent(cplx z, cplx g) {
  // Im g >= Im z |g|^2 holds for the Stieltjes transform of any probability
  // measure (Cauchy-Schwarz); spurious roots usually violate it.
  return g.imag() >= (1.0 - 1e-3) * z.imag() * std::norm(g);
}

}  // namespace

StieltjesSolution stieltjes(const PriorSpectrum& prior, double t, cplx z) {
  if (!(z.imag() > 0.0)) throw Error(ErrorCode::InvalidArgument, "stieltjes requires Im z > 0");
  if (t < 0.0) throw Error(ErrorCode::InvalidArgument, "t must be nonnegative");

  const auto roots = stieltjes_candidates(prior, t, z);
  std::vector<cplx> admissible;
  for (const auto& r : roots)
    if (r.imag() > 0.0) admissible.push_back(r);

  cplx g;
  if (admissible.size() == 1 && nevanlinna_consistent(z, admissible.front())) {
    g = admissible.front();
  } else {
    g = follow_branch(prior, t, z);
    // Far from the support Im g can round to a hair below zero.
    if (g.imag() < -1e-13 * std::abs(g))
      throw Error(ErrorCode::NoAdmissibleRoot, "no root with Im g > 0 at z = (" +
                                                   std::to_string(z.real()) + ", " +
                                                   std::to_string(z.imag()) + ")");
  }
  g = polish(prior, t, z, g);
  return {z, g, self_consistency_residual(prior, t, z, g)};
}

// ---------------------------------------------------------------------------
// Support

namespace {

double density_at(const PriorSpectrum& prior, double t, double x, double eps) {
  return std::max(0.0, stieltjes(prior, t, cplx(x, eps)).g.imag()) / kPi;
}

std::vector<Interval> mp_t0_support(const PriorSpectrum& prior) {
  const double k = prior.kappa();
  return {{sqr(1.0 - 1.0 / std::sqrt(k)), sqr(1.0 + 1.0 / std::sqrt(k))}};
}

// Marks the support on a uniform scan and refines each transition by
// bisection on the density.
std::vector<Interval> scan_support(const PriorSpectrum& prior, double t, double eps) {
  const double radius = 1.05 * prior.support_radius(t) + 1e-12;
  const int n = 4000;
  std::vector<double> xs(n + 1), rho(n + 1);
  double peak = 0.0;
  for (int i = 0; i <= n; ++i) {
    xs[i] = -radius + 2.0 * radius * i / n;
    rho[i] = density_at(prior, t, xs[i], eps);
    peak = std::max(peak, rho[i]);
  }
  const double threshold = 1e-6 * peak;
  auto inside = [&](double x) { return density_at(prior, t, x, eps) > threshold; };
  auto refine = [&](double a, double b) {
    const bool in_a = inside(a);
    while (b - a > 1e-10 * std::max(1.0, radius)) {
      const double mid = 0.5 * (a + b);
      (inside(mid) == in_a ? a : b) = mid;
    }
    return 0.5 * (a + b);
  };

  std::vector<Interval> out;
  double lower = 0.0;
  bool open = false;
  for (int i = 1; i <= n; ++i) {
    const bool prev = rho[i - 1] > threshold;
    const bool cur = rho[i] > threshold;
    if (!prev && cur) {
      lower = refine(xs[i - 1], xs[i]);
      open = true;
    } else if (prev && !cur && open) {
      out.push_back({lower, refine(xs[i - 1], xs[i])});
      open = false;
    }
  }
  if (open || out.empty())
    throw Error(ErrorCode::EdgeDetectionFailed, "support scan did not close for " + prior.describe());
  return out;
}

}  // namespace

std::vector<Interval> support_edges(const PriorSpectrum& prior, double t, const SpectralOptions& opts) {
  if (t == 0.0) {
    if (!prior.is_marchenko_pastur())
      throw Error(ErrorCode::InvalidArgument, "t = 0 is only supported for the Marchenko-Pastur prior");
    return mp_t0_support(prior);
  }
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "t must be positive");

  const double scale = std::max(prior.support_radius(t), 1e-300);

  // Edges are images of the real critical points of the inverse map z(g).
  std::vector<double> candidates;
  for (double g : poly::real_roots(prior.critical_points(t), 1e-7)) {
    for (int k = 0; k < 4; ++k) {
      // Newton on z'(g) = 0 using a centered difference for z''.
      const double h = 1e-6 * std::max(std::abs(g), 1e-12);
      const double d0 = prior.inverse_stieltjes_derivative(t, g);
      const double d2 = (prior.inverse_stieltjes_derivative(t, g + h) -
                         prior.inverse_stieltjes_derivative(t, g - h)) / (2.0 * h);
      if (d2 == 0.0 || !std::isfinite(d2)) break;
      const double next = g - d0 / d2;
      if (!std::isfinite(next) ||
          std::abs(prior.inverse_stieltjes_derivative(t, next)) >= std::abs(d0))
        break;
      g = next;
    }
    if (g == 0.0) continue;
    const double x = prior.inverse_stieltjes(t, cplx(g, 0.0)).real();
    if (std::isfinite(x)) candidates.push_back(x);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end(),
                               [&](double a, double b) { return std::abs(a - b) < 1e-13 * scale; }),
                   candidates.end());

  // Keep candidates where the density switches on or off.
  struct Edge {
    double x;
    bool opens;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double delta = 1e-5 * scale;
    if (i > 0) delta = std::min(delta, 0.25 * (candidates[i] - candidates[i - 1]));
    if (i + 1 < candidates.size()) delta = std::min(delta, 0.25 * (candidates[i + 1] - candidates[i]));
    const double left = density_at(prior, t, candidates[i] - delta, opts.epsilon);
    const double right = density_at(prior, t, candidates[i] + delta, opts.epsilon);
    if (right > 100.0 * left && right > 0.0) edges.push_back({candidates[i], true});
    else if (left > 100.0 * right && left > 0.0) edges.push_back({candidates[i], false});
  }

  std::vector<Interval> out;
  bool consistent = !edges.empty() && edges.size() % 2 == 0;
  for (std::size_t i = 0; consistent && i < edges.size(); i += 2) {
    if (!edges[i].opens || edges[i + 1].opens) consistent = false;
    else out.push_back({edges[i].x, edges[i + 1].x});
  }
  if (!consistent) return scan_support(prior, t, opts.epsilon);
  return out;
}

// ---------------------------------------------------------------------------
// SpectralDensity

SpectralDensity::SpectralDensity(double t, std::vector<Panel> panels, double atom_mass_at_zero)
    : t_(t), panels_(std::move(panels)), atom_mass_at_zero_(atom_mass_at_zero) {}

std::vector<Interval> SpectralDensity::support() const {
  std::vector<Interval> out;
  for (const auto& p : panels_) out.push_back(p.interval);
  return out;
}

double SpectralDensity::continuous_mass() const { return moment(0) - atom_mass_at_zero_; }

double SpectralDensity::moment(int k) const {
  double m = (k == 0) ? atom_mass_at_zero_ : 0.0;
  for (const auto& p : panels_)
    for (std::size_t j = 0; j < p.x.size(); ++j) m += p.weight[j] * p.density[j] * std::pow(p.x[j], k);
  return m;
}

double SpectralDensity::interpolate(double x) const {
  for (const auto& p : panels_) {
    if (x < p.interval.lower || x > p.interval.upper) continue;
    const auto it = std::upper_bound(p.x.begin(), p.x.end(), x);
    if (it == p.x.begin()) return p.density.front();
    if (it == p.x.end()) return p.density.back();
    const std::size_t j = static_cast<std::size_t>(it - p.x.begin());
    const double x0 = p.x[j - 1], x1 = p.x[j];
    if (x1 == x0) return p.density[j];
    const double w = (x - x0) / (x1 - x0);
    return (1.0 - w) * p.density[j - 1] + w * p.density[j];
  }
  return 0.0;
}

void SpectralDensity::write_csv(std::ostream& out) const {
  out << "interval_index,x,density\n" << std::setprecision(17);
  for (std::size_t i = 0; i < panels_.size(); ++i)
    for (std::size_t j = 0; j < panels_[i].x.size(); ++j)
      out << i << ',' << panels_[i].x[j] << ',' << panels_[i].density[j] << '\n';
}

namespace {

// Nodes x = l + (u - l) sin^2(theta), theta in [0, pi/2], Simpson weights.
Panel make_panel(Interval iv, int nodes) {
  if (nodes < 3 || nodes % 2 == 0)
    throw Error(ErrorCode::InvalidArgument, "nodes_per_interval must be odd and >= 3");
  Panel p;
  p.interval = iv;
  const auto n = static_cast<std::size_t>(nodes);
  p.x.resize(n);
  p.weight.resize(n);
  p.density.assign(n, 0.0);
  p.g.assign(n, cplx(0.0));
  const double h = (kPi / 2.0) / static_cast<double>(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    const double theta = h * static_cast<double>(j);
    const double s = std::sin(theta);
    p.x[j] = iv.lower + iv.width() * s * s;
    const double simpson = (j == 0 || j == n - 1) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    p.weight[j] = simpson * h / 3.0 * iv.width() * std::sin(2.0 * theta);
  }
  p.x.front() = iv.lower;
  p.x.back() = iv.upper;
  return p;
}

// Fills g and density along a panel, tracking the physical root node by node
// from the robustly-selected midpoint.
void fill_panel(const PriorSpectrum& prior, double t, double eps, Panel& p) {
  const std::size_t n = p.x.size();
  const std::size_t mid = n / 2;
  p.g[mid] = stieltjes(prior, t, cplx(p.x[mid], eps)).g;

  auto step = [&](std::size_t j, cplx previous) {
    const cplx z(p.x[j], eps);
    std::vector<cplx> upper;
    for (const auto& r : stieltjes_candidates(prior, t, z))
      if (r.imag() > 0.0) upper.push_back(r);
    p.g[j] = upper.empty() ? stieltjes(prior, t, z).g : nearest(upper, previous);
  };
  for (std::size_t j = mid + 1; j < n; ++j) step(j, p.g[j - 1]);
  for (std::size_t j = mid; j-- > 0;) step(j, p.g[j + 1]);

  for (std::size_t j = 1; j + 1 < n; ++j) p.density[j] = std::max(0.0, p.g[j].imag()) / kPi;
  p.density.front() = 0.0;
  p.density.back() = 0.0;
}

SpectralDensity mp_closed_form(const PriorSpectrum& prior, const SpectralOptions& opts) {
  const double k = prior.kappa();
  const Interval iv = mp_t0_support(prior).front();
  Panel p = make_panel(iv, opts.nodes_per_interval);
  for (std::size_t j = 1; j + 1 < p.x.size(); ++j) {
    const double x = p.x[j];
    p.density[j] = x > 0.0 ? k * std::sqrt(std::max(0.0, (iv.upper - x) * (x - iv.lower))) / (2.0 * kPi * x) : 0.0;
    p.g[j] = stieltjes(prior, 0.0, cplx(x, opts.epsilon)).g;
  }
  return SpectralDensity(0.0, {std::move(p)}, k < 1.0 ? 1.0 - k : 0.0);
}

}  // namespace

SpectralDensity density(const PriorSpectrum& prior, double t, const SpectralOptions& opts) {
  if (t == 0.0) {
    if (!prior.is_marchenko_pastur())
      throw Error(ErrorCode::InvalidArgument, "t = 0 is only supported for the Marchenko-Pastur prior");
    return mp_closed_form(prior, opts);
  }
  if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "t must be positive");
  std::vector<Panel> panels;
  for (const auto& iv : support_edges(prior, t, opts)) {
    Panel p = make_panel(iv, opts.nodes_per_interval);
    fill_panel(prior, t, opts.epsilon, p);
    panels.push_back(std::move(p));
  }
  return SpectralDensity(t, std::move(panels), 0.0);
}

double cube_integral(const SpectralDensity& d) {
  double acc = 0.0;
  for (const auto& p : d.panels())
    for (std::size_t j = 0; j < p.x.size(); ++j) acc += p.weight[j] * p.density[j] * p.density[j] * p.density[j];
  return acc;
}

double hilbert(const PriorSpectrum& prior, double t, double lambda, const SpectralOptions& opts) {
  return -stieltjes(prior, t, cplx(lambda, opts.epsilon)).g.real();
}

double log_potential(const SpectralDensity& d) {
  if (d.atom_mass_at_zero() > 0.0)
    throw Error(ErrorCode::InvalidArgument, "log potential diverges in the presence of an atom");

  // Inner integral: exact antiderivatives of log|u| and u log|u| against the
  // piecewise-linear interpolant of the density, so the singular line costs
  // nothing special.
  auto g1 = [](double u) { return u == 0.0 ? 0.0 : u * std::log(std::abs(u)) - u; };
  auto g2 = [](double u) { return u == 0.0 ? 0.0 : 0.5 * u * u * std::log(std::abs(u)) - 0.25 * u * u; };

  std::vector<std::vector<double>> slopes;
  for (const auto& p : d.panels()) {
    std::vector<double> s(p.x.size() - 1, 0.0);
    for (std::size_t k = 0; k + 1 < p.x.size(); ++k) {
      const double dx = p.x[k + 1] - p.x[k];
      s[k] = dx > 0.0 ? (p.density[k + 1] - p.density[k]) / dx : 0.0;
    }
    slopes.push_back(std::move(s));
  }

  std::vector<double> a1, a2;
  double total = 0.0;
  for (const auto& outer : d.panels()) {
    for (std::size_t i = 0; i < outer.x.size(); ++i) {
      const double w = outer.weight[i] * outer.density[i];
      if (w == 0.0) continue;
      const double x = outer.x[i];
      double inner = 0.0;
      for (std::size_t pi = 0; pi < d.panels().size(); ++pi) {
        const auto& p = d.panels()[pi];
        const auto& s = slopes[pi];
        const std::size_t n = p.x.size();
        a1.resize(n);
        a2.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
          const double u = p.x[k] - x;
          a1[k] = g1(u);
          a2[k] = g2(u);
        }
        for (std::size_t k = 0; k + 1 < n; ++k) {
          if (p.x[k + 1] == p.x[k]) continue;
          const double u0 = p.x[k] - x;
          // rho(u) = rho_k + s_k (u - u0) on the segment.
          inner += (p.density[k] - s[k] * u0) * (a1[k + 1] - a1[k]) + s[k] * (a2[k + 1] - a2[k]);
        }
      }
      total += w * inner;
    }
  }
  return total;
}

double sigma_t_derivative(const PriorSpectrum& prior, double t, const SpectralOptions& opts) {
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "t must be positive");
  return 2.0 * kPi * kPi / 3.0 * cube_integral(density(prior, t, opts));
}

}  // namespace quadnet::freeprob
