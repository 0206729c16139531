#include <doctest.h>

#include "ctsmc/expm.hpp"
#include "ctsmc/oracle.hpp"
#include "test_support.hpp"

using namespace ctsmc;
using test::seq;

TEST_CASE("small_expm matches the symmetric closed form") {
  ContextModel m = test::symmetric_model();
  Eigen::MatrixXd q = generator_from_rates(m.base.front());
  for (double t : {0.1, 0.25, 1.0}) {
    Eigen::MatrixXd p = small_expm(q, t);
    double diag = 0.25 + 0.75 * std::exp(-4.0 * t);
    double off = 0.25 - 0.25 * std::exp(-4.0 * t);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        CHECK(std::abs(p(r, c) - (r == c ? diag : off)) <= 1e-10);
  }
}

TEST_CASE("small_expm: identity at T=0, uniform at large T, stochastic rows") {
  ContextModel m = test::symmetric_model();
  Eigen::MatrixXd q = generator_from_rates(m.base.front());
  Eigen::MatrixXd p0 = small_expm(q, 0.0);
  CHECK((p0 - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-14);
  Eigen::MatrixXd pinf = small_expm(q, 100.0);
  CHECK((pinf.array() - 0.25).abs().maxCoeff() <= 1e-10);
  Rng rng(41);
  ContextModel rm = test::random_ism(rng);
  Eigen::MatrixXd pr = small_expm(generator_from_rates(rm.base.front()), 0.7);
  for (int r = 0; r < 4; ++r) CHECK(std::abs(pr.row(r).sum() - 1.0) <= 1e-12);
}

TEST_CASE("small_expm rejects non-generators") {
  Eigen::MatrixXd bad(2, 2);
  bad << -1.0, 0.5, 1.0, -1.0;  // rows do not sum to zero
  CHECK_THROWS_AS(small_expm(bad, 1.0), ValidationError);
  Eigen::MatrixXd neg(2, 2);
  neg << 1.0, -1.0, 1.0, -1.0;  // negative off-diagonal
  CHECK_THROWS_AS(small_expm(neg, 1.0), ValidationError);
}

TEST_CASE("exact_marginal: T=0 degenerates to the indicator") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT");
  CHECK(exact_marginal(m, x, x, 0.0, 1.0, 1e-12).p == doctest::Approx(1.0));
  CHECK(exact_marginal(m, x, seq(m, "ACGA"), 0.0, 1.0, 1e-12).p == doctest::Approx(0.0));
}

TEST_CASE("exact_marginal factorizes for independent sites") {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    ContextModel m = test::random_ism(rng);
    int n = 2 + static_cast<int>(rng.uniform_index(4));
    std::vector<uint8_t> xs(static_cast<size_t>(n)), ys(static_cast<size_t>(n));
    for (auto& b : xs) b = static_cast<uint8_t>(rng.uniform_index(4));
    for (auto& b : ys) b = static_cast<uint8_t>(rng.uniform_index(4));
    Sequence x{xs}, y{ys};
    double t = 0.1 + rng.uniform();
    double p = exact_marginal(m, x, y, t, 1.0, 1e-12).p;
    Eigen::MatrixXd site = small_expm(generator_from_rates(m.base.front()), t);
    double prod = 1.0;
    for (int i = 0; i < n; ++i) prod *= site(x[i], y[i]);
    CHECK(p == doctest::Approx(prod).epsilon(1e-8));
  }
}

TEST_CASE("lambda=1 CpG model equals the factorized product") {
  ContextModel m = test::cpg(1.0);
  Sequence x = seq(m, "AC"), y = seq(m, "GT");
  double p = exact_marginal(m, x, y, 0.3, 1.0, 1e-12).p;
  Eigen::MatrixXd site = small_expm(generator_from_rates(m.base.front()), 0.3);
  CHECK(p == doctest::Approx(site(x[0], y[0]) * site(x[1], y[1])).epsilon(1e-10));
}

TEST_CASE("CpG n=4 regression fixture, cross-checked against dense expm") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  auto res = exact_marginal(m, x, y, 0.25, 1.0, 1e-12);
  CHECK(res.p == doctest::Approx(2.733456217681295e-02).epsilon(1e-10));
  CHECK(res.truncation_order > 0);
  CHECK(res.lambda > 0.0);

  Eigen::MatrixXd qd = dense_generator(m, 4, 1.0);
  Eigen::MatrixXd pd = dense_expm(0.25 * qd);
  StateSpace ss(4, 4, 65536);
  double dense = pd(ss.encode(x.sym.data()), ss.encode(y.sym.data()));
  CHECK(std::abs(dense - res.p) <= 1e-9);
}

TEST_CASE("probability conservation over the full state space") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT");
  double tol = 1e-10;
  auto dist = exact_distribution(m, x, 0.25, 1.0, tol);
  double total = 0.0;
  for (double p : dist.p) {
    CHECK(p >= 0.0);
    total += p;
  }
  CHECK(std::abs(total - 1.0) <= 4 * tol);
}

TEST_CASE("uniformization agrees with dense scaling-and-squaring on random DSMs") {
  Rng rng(23);
  for (int rep = 0; rep < 3; ++rep) {
    ContextModel m = test::random_dsm(rng, 0.5, 2.0);
    int n = 3;
    std::vector<uint8_t> xs(static_cast<size_t>(n)), ys(static_cast<size_t>(n));
    for (auto& b : xs) b = static_cast<uint8_t>(rng.uniform_index(4));
    for (auto& b : ys) b = static_cast<uint8_t>(rng.uniform_index(4));
    Sequence x{xs}, y{ys};
    double t = 0.2 + 0.3 * rng.uniform();
    double beta = rng.uniform();
    double p = exact_marginal(m, x, y, t, beta, 1e-12).p;
    Eigen::MatrixXd pd = dense_expm(t * dense_generator(m, n, beta));
    StateSpace ss(n, 4, 65536);
    CHECK(std::abs(pd(ss.encode(x.sym.data()), ss.encode(y.sym.data())) - p) <= 1e-9);
  }
}

TEST_CASE("monotone truncation: tighter tolerance only adds mass") {
  ContextModel m = test::cpg(3.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "TCGA");
  double loose = exact_marginal(m, x, y, 0.4, 1.0, 1e-3).p;
  double tight = exact_marginal(m, x, y, 0.4, 1.0, 1e-12).p;
  CHECK(tight >= loose - 1e-15);
  CHECK(tight - loose <= 1e-3);
}

TEST_CASE("cap and tolerance validation") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGTACGTACGT");  // 4^12 over the default cap
  CHECK_THROWS_AS(exact_marginal(m, x, x, 0.1, 1.0, 1e-10), CapExceeded);
  Sequence ok = seq(m, "ACGT");
  CHECK_THROWS_AS(exact_marginal(m, ok, ok, 0.1, 1.0, 0.0), ValidationError);
}

TEST_CASE("state indexing is site-major") {
  StateSpace ss(3, 4, 65536);
  uint8_t sym[3] = {1, 0, 2};
  CHECK(ss.encode(sym) == 1 + 0 * 4 + 2 * 16);
  uint8_t back[3];
  ss.decode(33, back);
  CHECK(ss.encode(back) == 33);
}

TEST_CASE("conditional jump distribution on the symmetric model") {
  ContextModel m = test::symmetric_model();
  Eigen::MatrixXd q = generator_from_rates(m.base.front());
  auto dist = conditional_jump_dist(q, 0.25, 0, 0, 1e-12);
  double p_xx = 0.25 + 0.75 * std::exp(-1.0);
  CHECK(dist[0] == doctest::Approx(std::exp(-0.75) / p_xx).epsilon(1e-7));
  double total = 0.0;
  for (double c : dist) total += c;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));

  auto moved = conditional_jump_dist(q, 0.25, 0, 2, 1e-12);
  CHECK(moved[0] == 0.0);
  total = 0.0;
  for (double c : moved) total += c;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("conditional jump distribution normalizes for random generators") {
  Rng rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    ContextModel m = test::random_ism(rng);
    Eigen::MatrixXd q = generator_from_rates(m.base.front());
    double t = 0.1 + rng.uniform();
    int xi = static_cast<int>(rng.uniform_index(4));
    int yi = static_cast<int>(rng.uniform_index(4));
    auto dist = conditional_jump_dist(q, t, xi, yi, 1e-10);
    double total = 0.0;
    for (double c : dist) total += c;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("exact chi-square: degenerate cases give exactly 1") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  CHECK(exact_chi_square(m, x, y, 0.25, 0.5, 0.5, 1e-10).l2 == doctest::Approx(1.0).epsilon(1e-8));
  ContextModel ism = test::symmetric_model();
  CHECK(exact_chi_square(ism, x, y, 0.25, 0.2, 0.9, 1e-10).l2 == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("exact chi-square on the n=4 fixture stays under the stage bound") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  auto full = exact_chi_square(m, x, y, 0.25, 0.0, 1.0, 1e-10);
  CHECK(full.l2 == doctest::Approx(1.205099321).epsilon(1e-6));
  CHECK(full.l2 >= 1.0);
  auto half = exact_chi_square(m, x, y, 0.25, 0.0, 0.5, 1e-10);
  CHECK(half.l2 >= 1.0);
  CHECK(half.l2 <= full.l2);
}

TEST_CASE("tilted-operator route against dense exponentiation") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "AC"), y = seq(m, "AT");
  double t = 0.3, b0 = 0.25, b1 = 0.75;
  auto res = exact_chi_square(m, x, y, t, b0, b1, 1e-12);
  StateSpace ss(2, 4, 65536);
  TemperedModelView vt(m, 2 * b1 - b0), v0(m, b0), v1(m, b1);
  Eigen::MatrixXd tilt = Eigen::MatrixXd::Zero(16, 16);
  uint8_t buf[2];
  for (int64_t z = 0; z < 16; ++z) {
    ss.decode(z, buf);
    int64_t w = 1;
    for (int i = 0; i < 2; ++i) {
      uint8_t cur = buf[static_cast<size_t>(i)];
      for (uint8_t b = 0; b < 4; ++b) {
        if (b == cur) continue;
        tilt(z, z + (static_cast<int64_t>(b) - cur) * w) = site_rate(vt, buf, 2, i, b);
      }
      w *= 4;
    }
    tilt(z, z) = -(2.0 * total_rate(v1, buf, 2) - total_rate(v0, buf, 2));
  }
  Eigen::MatrixXd e = dense_expm(t * tilt);
  double tilted = e(ss.encode(x.sym.data()), ss.encode(y.sym.data()));
  CHECK(res.tilted == doctest::Approx(tilted).epsilon(1e-9));
  CHECK(res.l2 == doctest::Approx(tilted * res.z_prev / (res.z_next * res.z_next)).epsilon(1e-12));
}
