#include <doctest.h>

#include <Eigen/Dense>

#include "quadnet/errors.hpp"
#include "quadnet/matdenoise.hpp"
#include "quadnet/model.hpp"

using namespace quadnet;
using freeprob::PriorSpectrum;

TEST_SUITE("matdenoise") {
  TEST_CASE("zero prior shrinks everything to zero") {
    const matdenoise::DenoiseSpec spec(PriorSpectrum::compound_poisson(1.0, {{0.0, 1.0}}), 0.7);
    for (double x : {-1.5, -0.3, 0.0, 0.9, 1.6}) CHECK(std::abs(matdenoise::shrink(spec, x)) < 1e-5);
  }

  TEST_CASE("vanishing noise is the identity") {
    const matdenoise::DenoiseSpec spec(PriorSpectrum::marchenko_pastur(2.0), 1e-5);
    for (double x : {0.3, 1.0, 2.0}) CHECK(matdenoise::shrink(spec, x) == doctest::Approx(x).epsilon(1e-2));
  }

  TEST_CASE("multiples of the identity stay diagonal") {
    const matdenoise::DenoiseSpec spec(PriorSpectrum::marchenko_pastur(0.5), 0.5);
    const Eigen::MatrixXd out = matdenoise::denoise_matrix(spec, 1.3 * Eigen::MatrixXd::Identity(6, 6));
    const double f = matdenoise::shrink(spec, 1.3);
    CHECK((out - f * Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-10);
  }

  TEST_CASE("rotational equivariance") {
    model::Rng rng(3);
    const matdenoise::DenoiseSpec spec(PriorSpectrum::marchenko_pastur(1.0), 0.3);
    const Eigen::MatrixXd R = model::sample_wishart(20, 20, rng) + std::sqrt(0.3) * model::sample_goe(20, rng);
    const Eigen::MatrixXd O = Eigen::HouseholderQR<Eigen::MatrixXd>(model::standard_normal(20, 20, rng)).householderQ();
    const Eigen::MatrixXd a = matdenoise::denoise_matrix(spec, O * R * O.transpose());
    const Eigen::MatrixXd b = O * matdenoise::denoise_matrix(spec, R) * O.transpose();
    CHECK((a - b).norm() < 1e-9 * b.norm());
  }

  TEST_CASE("both mmse forms agree") {
    for (double kappa : {0.5, 1.0, 3.0})
      for (double delta : {0.05, 0.5, 2.0}) {
        CAPTURE(kappa);
        CAPTURE(delta);
        const matdenoise::DenoiseSpec spec(PriorSpectrum::marchenko_pastur(kappa), delta);
        CHECK(std::abs(matdenoise::mmse_cube_form(spec) - matdenoise::mmse_hilbert_form(spec)) < 1e-4);
        CHECK(matdenoise::f_rie(PriorSpectrum::marchenko_pastur(kappa), delta) ==
              doctest::Approx(matdenoise::mmse(spec)).epsilon(1e-6));
      }
  }

  TEST_CASE("mmse is monotone and bounded") {
    const auto prior = PriorSpectrum::marchenko_pastur(0.5);
    double prev = 0.0;
    for (double delta : {0.01, 0.1, 0.5, 1.0, 5.0, 50.0}) {
      const double m = matdenoise::f_rie(prior, delta);
      CHECK(m > prev);
      CHECK(m <= delta + 1e-12);
      CHECK(m <= prior.variance() + 1e-9);
      prev = m;
    }
    CHECK(matdenoise::f_rie(prior, 1e4) == doctest::Approx(prior.variance()).epsilon(1e-3));
  }

  TEST_CASE("monte carlo agrees with the formula") {
    const matdenoise::DenoiseSpec spec(PriorSpectrum::marchenko_pastur(1.0), 0.5);
    const auto mc = matdenoise::monte_carlo_mse(spec, 200, 8, 11);
    CHECK(mc.replicas == 8);
    CHECK(std::abs(mc.mean - matdenoise::mmse(spec)) < 3.0 * mc.standard_error + 2e-3);
  }

  TEST_CASE("bad inputs") {
    CHECK_THROWS_AS(matdenoise::DenoiseSpec(PriorSpectrum::marchenko_pastur(1.0), -1.0), Error);
    const matdenoise::DenoiseSpec spec(PriorSpectrum::marchenko_pastur(1.0), 0.5);
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(3, 3);
    R(0, 1) = std::nan("");
    CHECK_THROWS_AS(matdenoise::denoise_matrix(spec, R), Error);
  }
}
