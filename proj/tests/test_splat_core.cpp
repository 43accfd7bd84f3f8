#include <doctest.h>

#include <Eigen/Cholesky>
#include <random>

#include "beamsplit/errors.hpp"
#include "beamsplit/gaussian.hpp"
#include "beamsplit/sh.hpp"

using namespace beamsplit;

namespace {

// Cofactor expansion, independent of Eigen's determinant.
double det3(const Eigen::Matrix3d& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

Eigen::Vector4d random_unit_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

}  // namespace

TEST_CASE("covariance_from_params identity case") {
  const Eigen::Matrix3d cov = covariance_from_params(
      Eigen::Vector4d(1, 0, 0, 0), Eigen::Vector3d::Zero());
  CHECK((cov - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("covariance_from_params axis-aligned scaling") {
  const Eigen::Matrix3d cov = covariance_from_params(
      Eigen::Vector4d(1, 0, 0, 0), Eigen::Vector3d(std::log(2.0), 0, 0));
  Eigen::Matrix3d expected = Eigen::Matrix3d::Identity();
  expected(0, 0) = 4.0;
  CHECK((cov - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance determinant equals exp(2 sum s)") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector4d q = random_unit_quat(rng);
    const Eigen::Vector3d s(u(rng), u(rng), u(rng));
    const Eigen::Matrix3d cov = covariance_from_params(q, s);
    const double expected = std::exp(2.0 * s.sum());
    CHECK(det3(cov) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("covariance passes Cholesky for random unit quaternions") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector4d q = random_unit_quat(rng);
    const Eigen::Vector3d s(u(rng), u(rng), u(rng));
    const Eigen::Matrix3d cov = covariance_from_params(q, s);
    Eigen::LLT<Eigen::Matrix3d> llt(cov);
    CHECK(llt.info() == Eigen::Success);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("covariance_from_params rejects bad input") {
  CHECK_THROWS_AS(covariance_from_params(Eigen::Vector4d(2, 0, 0, 0),
                                         Eigen::Vector3d::Zero()),
                  invalid_parameter_error);
  Eigen::Vector3d bad_scale(std::nan(""), 0, 0);
  CHECK_THROWS_AS(
      covariance_from_params(Eigen::Vector4d(1, 0, 0, 0), bad_scale),
      invalid_parameter_error);
}

TEST_CASE("covariance_from_params_backward matches finite differences") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector4d q = random_unit_quat(rng);
    const Eigen::Vector3d s(u(rng), u(rng), u(rng));
    Eigen::Matrix3d weight;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) weight(i, j) = u(rng);
    weight = ((weight + weight.transpose()) / 2).eval();

    auto f = [&](const Eigen::Vector4d& qq, const Eigen::Vector3d& ss) {
      const Eigen::Vector4d qn = qq.normalized();
      return (weight.array() * covariance_from_params(qn, ss).array()).sum();
    };

    Eigen::Vector4d g_q = Eigen::Vector4d::Zero();
    Eigen::Vector3d g_s = Eigen::Vector3d::Zero();
    covariance_from_params_backward(q, s, weight, g_q, g_s);

    const double h = 1e-6;
    for (int k = 0; k < 4; ++k) {
      Eigen::Vector4d qp = q, qm = q;
      qp[k] += h;
      qm[k] -= h;
      const double fd = (f(qp, s) - f(qm, s)) / (2 * h);
      CHECK(g_q[k] == doctest::Approx(fd).epsilon(1e-5));
    }
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d sp = s, sm = s;
      sp[k] += h;
      sm[k] -= h;
      const double fd = (f(q, sp) - f(q, sm)) / (2 * h);
      CHECK(g_s[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("eval_gaussian closed form at the mean") {
  const Eigen::Vector3d mu(0.3, -0.2, 1.0);
  const double v = eval_gaussian(mu, Eigen::Matrix3d::Identity(), mu);
  CHECK(v == doctest::Approx(0.063494).epsilon(1e-5));
  CHECK(v == doctest::Approx(std::pow(2 * M_PI, -1.5)).epsilon(1e-12));
}

TEST_CASE("eval_gaussian peak scales with the determinant") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector4d q = random_unit_quat(rng);
    const Eigen::Vector3d s(u(rng), u(rng), u(rng));
    const Eigen::Matrix3d cov = covariance_from_params(q, s);
    const Eigen::Vector3d mu(u(rng), u(rng), u(rng));
    const double expected =
        std::pow(2 * M_PI, -1.5) / std::sqrt(det3(cov));
    CHECK(eval_gaussian(mu, cov, mu) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("eval_gaussian symmetry about the mean") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::Matrix3d cov =
      covariance_from_params(random_unit_quat(rng),
                             Eigen::Vector3d(0.2, -0.3, 0.1));
  const Eigen::Vector3d mu(0.5, 0.1, -0.4);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d d(u(rng), u(rng), u(rng));
    CHECK(eval_gaussian(mu, cov, mu + d) ==
          doctest::Approx(eval_gaussian(mu, cov, mu - d)).epsilon(1e-12));
  }
}

TEST_CASE("eval_gaussian rejects a singular covariance") {
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  CHECK_THROWS_AS(
      eval_gaussian(Eigen::Vector3d::Zero(), cov, Eigen::Vector3d::Zero()),
      degenerate_covariance_error);
}

TEST_CASE("eval_gaussian integrates to one (importance-sampled MC)") {
  // Proposal N(mu, 1.5^2 I); the weighted average of G/q estimates the
  // integral of G over R^3.
  std::mt19937_64 rng(123);
  std::normal_distribution<double> n(0.0, 1.5);
  const Eigen::Vector3d mu(0.1, 0.2, -0.1);
  const Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
  const double sigma_q = 1.5;
  const double q_norm = std::pow(2 * M_PI * sigma_q * sigma_q, -1.5);
  double sum = 0.0;
  const int samples = 1000000;
  for (int i = 0; i < samples; ++i) {
    const Eigen::Vector3d x = mu + Eigen::Vector3d(n(rng), n(rng), n(rng));
    const double q =
        q_norm * std::exp(-0.5 * (x - mu).squaredNorm() / (sigma_q * sigma_q));
    sum += eval_gaussian(mu, cov, x) / q;
  }
  CHECK(sum / samples == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("eval_sh degree-0 constant") {
  SHCoeffs sh(0, 3);
  sh.dc(0) = 1.0;
  const Eigen::Vector3d a = eval_sh(sh, Eigen::Vector3d(0, 0, 1));
  const Eigen::Vector3d b =
      eval_sh(sh, Eigen::Vector3d(1, 1, 1).normalized());
  CHECK(a.x() == doctest::Approx(0.2820948).epsilon(1e-7));
  CHECK(a.y() == 0.0);
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("eval_sh zero coefficients give zero") {
  SHCoeffs sh(1, 3);
  CHECK(eval_sh(sh, Eigen::Vector3d(0, 1, 0)).norm() == 0.0);
}

TEST_CASE("eval_sh odd band cancels under direction negation") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  SHCoeffs sh(1, 3);
  for (auto& c : sh.coeffs) c = n(rng);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Vector3d dir =
        Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    const Eigen::Vector3d sum = eval_sh(sh, dir) + eval_sh(sh, -dir);
    for (int c = 0; c < 3; ++c) {
      CHECK(sum[c] == doctest::Approx(2.0 * kSH0 * sh.dc(c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("eval_sh is exactly linear in the coefficients") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  SHCoeffs c1(1, 3), c2(1, 3);
  for (auto& c : c1.coeffs) c = n(rng);
  for (auto& c : c2.coeffs) c = n(rng);
  const double a = 1.7, b = -0.6;
  SHCoeffs mix(1, 3);
  for (std::size_t i = 0; i < mix.coeffs.size(); ++i) {
    mix.coeffs[i] = a * c1.coeffs[i] + b * c2.coeffs[i];
  }
  const Eigen::Vector3d dir = Eigen::Vector3d(0.3, -0.5, 0.8).normalized();
  const Eigen::Vector3d lhs = eval_sh(mix, dir);
  const Eigen::Vector3d rhs = a * eval_sh(c1, dir) + b * eval_sh(c2, dir);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("eval_sh rejects non-unit directions") {
  SHCoeffs sh(0, 3);
  CHECK_THROWS_AS(eval_sh(sh, Eigen::Vector3d(0, 0, 2)),
                  invalid_parameter_error);
}
