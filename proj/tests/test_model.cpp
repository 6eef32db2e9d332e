#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "quadnet/errors.hpp"
#include "quadnet/model.hpp"

using namespace quadnet;

namespace {

Eigen::MatrixXd explicit_Z(const Eigen::VectorXd& x) {
  const double d = static_cast<double>(x.size());
  return (x * x.transpose() - Eigen::MatrixXd::Identity(x.size(), x.size())) / std::sqrt(d);
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("shapes and rounding") {
    const auto inst = model::generate(20, 0.5, 0.3, 0.0, 1);
    CHECK(inst.m == 10);
    CHECK(inst.n == 120);
    CHECK(inst.W.rows() == 10);
    CHECK(inst.W.cols() == 20);
    CHECK(inst.X.rows() == 120);
    CHECK(inst.y.size() == 120);
    CHECK(inst.S.rows() == 20);
    CHECK((inst.S - inst.S.transpose()).norm() < 1e-12);
    CHECK(inst.kappa == doctest::Approx(0.5));
  }

  TEST_CASE("noiseless labels are quadratic forms of S") {
    const auto inst = model::generate(15, 1.0, 0.5, 0.0, 2);
    for (int i = 0; i < 5; ++i) {
      const Eigen::VectorXd x = inst.X.row(i).transpose();
      CHECK(inst.y(i) == doctest::Approx(x.dot(inst.S * x) / 15.0).epsilon(1e-10));
    }
  }

  TEST_CASE("same seed same data") {
    const auto a = model::generate(12, 0.5, 0.4, 0.1, 99);
    const auto b = model::generate(12, 0.5, 0.4, 0.1, 99);
    const auto c = model::generate(12, 0.5, 0.4, 0.1, 100);
    CHECK(a.X == b.X);
    CHECK(a.y == b.y);
    CHECK(a.X != c.X);
  }

  TEST_CASE("memory budget") {
    model::GenerateOptions opts;
    opts.memory_budget_bytes = 1024;
    CHECK_THROWS_AS(model::generate(50, 0.5, 1.0, 0.0, 1, opts), Error);
    try {
      model::generate(50, 0.5, 1.0, 0.0, 1, opts);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DimensionOverflow);
    }
  }

  TEST_CASE("matrix-free sensing matches explicit Z") {
    const auto inst = model::generate(10, 1.0, 0.3, 0.0, 5);
    model::Rng rng(1);
    const Eigen::MatrixXd A = model::standard_normal(10, 10, rng);
    const Eigen::MatrixXd S = A + A.transpose();
    const Eigen::VectorXd tr = model::sensing_traces(inst.X, S);
    Eigen::VectorXd g = model::standard_normal(inst.n, 1, rng);
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(10, 10);
    for (int i = 0; i < inst.n; ++i) {
      const Eigen::MatrixXd Z = explicit_Z(inst.X.row(i).transpose());
      CHECK(tr(i) == doctest::Approx((Z * S).trace()).epsilon(1e-10));
      adj += g(i) * Z;
    }
    CHECK((model::sensing_adjoint(inst.X, g) - adj).norm() < 1e-9 * adj.norm());
  }

  TEST_CASE("reduced labels are centered") {
    const auto inst = model::generate(20, 0.5, 0.3, 0.0, 7);
    const auto data = model::reduce(inst);
    CHECK(data.d == 20);
    CHECK(std::abs(data.y_tilde.mean()) < 1e-10);
    CHECK(data.alpha() == doctest::Approx(0.3));
  }

  TEST_CASE("goe variances") {
    model::Rng rng(4);
    const int d = 300;
    const Eigen::MatrixXd G = model::sample_goe(d, rng);
    CHECK((G - G.transpose()).norm() == 0.0);
    const double off = (G.squaredNorm() - G.diagonal().squaredNorm()) / (d * (d - 1.0));
    const double diag = G.diagonal().squaredNorm() / d;
    CHECK(off * d == doctest::Approx(1.0).epsilon(0.03));
    CHECK(diag * d == doctest::Approx(2.0).epsilon(0.25));
  }

  TEST_CASE("mse normalization") {
    const auto inst = model::generate(200, 0.5, 0.01, 0.0, 8);
    const Eigen::MatrixXd guess = Eigen::MatrixXd::Identity(200, 200);
    CHECK(model::matrix_mse(guess, inst.S, 0.5) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(model::matrix_mse(inst.S, inst.S, 0.5) == 0.0);
  }

  TEST_CASE("derived seeds differ") {
    CHECK(model::derive_seed(1, 0) != model::derive_seed(1, 1));
    CHECK(model::derive_seed(1, 0) != model::derive_seed(2, 0));
    CHECK(model::derive_seed(5, 3) == model::derive_seed(5, 3));
  }

  TEST_CASE("export writes the expected files") {
    const auto dir = std::filesystem::temp_directory_path() / "quadnet_export_test";
    std::filesystem::remove_all(dir);
    model::export_instance(model::generate(6, 0.5, 0.5, 0.0, 3), dir);
    for (const char* f : {"metadata.json", "X.csv", "y.csv", "s_eigenvalues.csv"})
      CHECK(std::filesystem::exists(dir / f));
    std::ifstream in(dir / "y.csv");
    int lines = 0;
    for (std::string s; std::getline(in, s);) ++lines;
    CHECK(lines >= 18);
    std::filesystem::remove_all(dir);
  }
}
