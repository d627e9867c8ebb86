#include <ssdl/graph.hpp>

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace ssdl;
using Catch::Approx;

namespace {

Matrix cols2(std::initializer_list<std::pair<double, double>> pts) {
  Matrix X(2, static_cast<Index>(pts.size()));
  Index j = 0;
  for (auto [a, b] : pts) X.col(j++) << a, b;
  return X;
}

double trace_of(const SparseMatrix& L) {
  double t = 0.0;
  for (Index i = 0; i < L.rows(); ++i) t += L.coeff(i, i);
  return t;
}

void check_laplacian(const NeighborGraph& g, double target, std::mt19937_64& rng) {
  const Matrix L(g.L);
  const Index n = L.rows();
  CHECK((L - L.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((L * Vector::Ones(n)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(trace_of(g.L) == Approx(target).margin(1e-8));
  for (int t = 0; t < 10; ++t) {
    const Vector x = oracle::random_matrix(n, 1, rng);
    CHECK(x.dot(L * x) >= -1e-8 * x.squaredNorm());
  }
}

}  // namespace

TEST_CASE("knn of three collinear points") {
  const Matrix X = cols2({{0, 0}, {1, 0}, {5, 0}});
  const auto knn = knn_indices(X, 1);
  CHECK(knn[0] == IndexList{1});
  CHECK(knn[1] == IndexList{0});
  CHECK(knn[2] == IndexList{1});
}

TEST_CASE("knn distance ties go to the lower index") {
  Matrix X = Matrix::Zero(2, 8);
  for (Index j = 1; j < 8; ++j) X.col(j) << 10.0 + j, 10.0;
  X.col(3) << 1, 0;
  X.col(7) << 0, 1;
  CHECK(knn_indices(X, 1)[0] == IndexList{3});
}

TEST_CASE("knn rejects k >= N") {
  const Matrix X = cols2({{0, 0}, {1, 0}, {5, 0}});
  CHECK_THROWS_AS(knn_indices(X, 3), InvalidConfiguration);
}

TEST_CASE("knn matches the brute-force oracle") {
  std::mt19937_64 rng(11);
  for (Index N : {20, 57, 200}) {
    const Matrix X = oracle::random_matrix(4, N, rng);
    for (Index k : {1, 5, 9}) {
      const auto knn = knn_indices(X, k);
      for (Index i = 0; i < N; ++i) {
        CHECK(knn[static_cast<std::size_t>(i)] == oracle::brute_knn(X, i, k));
        CHECK(std::find(knn[static_cast<std::size_t>(i)].begin(), knn[static_cast<std::size_t>(i)].end(), i) ==
              knn[static_cast<std::size_t>(i)].end());
      }
    }
  }
}

TEST_CASE("barycentric weights") {
  SECTION("midpoint") {
    Vector t(2);
    t << 1, 0;
    const Vector w = barycentric_weights(t, cols2({{0, 0}, {2, 0}}));
    CHECK(w(0) == Approx(0.5).margin(1e-12));
    CHECK(w(1) == Approx(0.5).margin(1e-12));
  }
  SECTION("target equal to a neighbour") {
    Vector t(2);
    t << 3, 4;
    const Matrix N = cols2({{3, 4}, {0, 0}});
    const Vector w = barycentric_weights(t, N);
    // the regularizer keeps the solve total, so the weight on the coincident neighbour is near but not at one
    const double reg = kGramRegularization * 25.0 / 2.0;
    const Vector ref = oracle::lagrange_barycentric(t, N, reg);
    CHECK((w - ref).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(w(0) == Approx(1.0).margin(1e-3));
    CHECK(w(1) == Approx(0.0).margin(1e-3));
  }
  SECTION("matches the Lagrange system") {
    Vector t(2);
    t << 1, 1;
    const Matrix N = cols2({{1, 0}, {0, 1}, {2, 2}});
    const Vector w = barycentric_weights(t, N);
    Matrix Z = (-N).colwise() + t;
    const double reg = kGramRegularization * (Z.transpose() * Z).trace() / 3.0;
    const Vector ref = oracle::lagrange_barycentric(t, N, reg);
    CHECK((w - ref).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SECTION("all neighbours coincide with the target") {
    Vector t(2);
    t << 1, 1;
    const Vector w = barycentric_weights(t, cols2({{1, 1}, {1, 1}, {1, 1}, {1, 1}}));
    CHECK((w.array() - 0.25).abs().maxCoeff() == 0.0);
  }
  SECTION("always sums to one") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const Matrix N = oracle::random_matrix(5, 1 + trial % 8, rng);
      const Vector t = oracle::random_matrix(5, 1, rng);
      CHECK(std::abs(barycentric_weights(t, N).sum() - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("LLE graph of two samples") {
  const Matrix X = cols2({{0, 0}, {1, 1}});
  const NeighborGraph g = build_lle_graph(X, 1, 4.0);
  const Matrix V(g.V);
  CHECK(V(0, 1) == 1.0);
  CHECK(V(1, 0) == 1.0);
  CHECK(V(0, 0) == 0.0);
  const Matrix raw = Matrix(g.L) / g.omega;
  Matrix expected(2, 2);
  expected << 2, -2, -2, 2;
  CHECK((raw - expected).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(g.omega == Approx(1.0));
}

TEST_CASE("LLE graph invariants and the trace identity") {
  std::mt19937_64 rng(5);
  const Matrix X = oracle::random_matrix(6, 30, rng);
  const NeighborGraph g = build_lle_graph(X, 6, 30.0);
  check_laplacian(g, 30.0, rng);
  const Matrix V(g.V);
  for (Index i = 0; i < 30; ++i) {
    CHECK(std::abs(V.row(i).sum() - 1.0) <= 1e-10);
    CHECK(V(i, i) == 0.0);
  }
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix A = oracle::random_matrix(4, 30, rng);
    double direct = 0.0;
    for (Index i = 0; i < 30; ++i) {
      Vector r = A.col(i);
      for (Index j : g.indices[static_cast<std::size_t>(i)]) r -= V(i, j) * A.col(j);
      direct += r.squaredNorm();
    }
    const double via_laplacian = (A * Matrix(g.L) * A.transpose()).trace();
    CHECK(std::abs(via_laplacian - g.omega * direct) <= 1e-8 * std::abs(via_laplacian));
  }
}

TEST_CASE("Gaussian knn Laplacian") {
  SECTION("two nodes") {
    const Matrix X = cols2({{0, 0}, {3, 4}});
    GaussianGraphParams gp;
    gp.k = 1;
    gp.sigma = 2.0;
    const NeighborGraph g = build_gaussian_knn_laplacian(X, gp, 1.0);
    const double w = std::exp(-25.0 / 8.0);
    const Matrix raw = Matrix(g.L) / g.omega;
    CHECK(raw(0, 1) == Approx(-w));
    CHECK(raw(0, 0) == Approx(w));
  }
  SECTION("huge sigma gives unit weights") {
    std::mt19937_64 rng(1);
    const Matrix X = oracle::random_matrix(3, 10, rng);
    GaussianGraphParams gp;
    gp.k = 2;
    gp.sigma = 1e9;
    const NeighborGraph g = build_gaussian_knn_laplacian(X, gp, 10.0);
    const Matrix raw = Matrix(g.L) / g.omega;
    for (Index i = 0; i < 10; ++i)
      for (Index j = 0; j < 10; ++j)
        if (i != j && raw(i, j) != 0.0) CHECK(raw(i, j) == Approx(-1.0).epsilon(1e-12));
  }
  SECTION("matches a dense construction") {
    std::mt19937_64 rng(2);
    const Matrix X = oracle::random_matrix(3, 20, rng);
    GaussianGraphParams gp;
    gp.k = 4;
    gp.sigma = 1.5;
    const NeighborGraph g = build_gaussian_knn_laplacian(X, gp, 20.0);
    Matrix W = Matrix::Zero(20, 20);
    for (Index i = 0; i < 20; ++i)
      for (Index j : oracle::brute_knn(X, i, 4)) {
        const double w = std::exp(-(X.col(i) - X.col(j)).squaredNorm() / (2 * 1.5 * 1.5));
        W(i, j) = w;
        W(j, i) = w;
      }
    Matrix L = Matrix(W.rowwise().sum().asDiagonal()) - W;
    L *= 20.0 / L.trace();
    CHECK((Matrix(g.L) - L).cwiseAbs().maxCoeff() <= 1e-10);
    check_laplacian(g, 20.0, rng);
  }
}

TEST_CASE("threshold Laplacian") {
  std::mt19937_64 rng(4);
  const Matrix X = oracle::random_matrix(3, 20, rng);
  GaussianGraphParams gp;
  gp.sigma = 2.0;
  SECTION("support matches the sorted distance quantile") {
    gp.zeta = 0.3;
    double kappa = 0.0;
    const NeighborGraph g = build_threshold_laplacian(X, gp, 20.0, &kappa);
    std::vector<double> d;
    for (Index i = 0; i < 20; ++i)
      for (Index j = i + 1; j < 20; ++j) d.push_back((X.col(i) - X.col(j)).norm());
    std::sort(d.begin(), d.end());
    const double pos = 0.3 * (d.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double ref = d[lo] + (pos - lo) * (d[lo + 1] - d[lo]);
    CHECK(kappa == Approx(ref).epsilon(1e-14));
    const Matrix L(g.L);
    for (Index i = 0; i < 20; ++i)
      for (Index j = 0; j < 20; ++j)
        if (i != j) CHECK((L(i, j) != 0.0) == ((X.col(i) - X.col(j)).norm() < ref));
    check_laplacian(g, 20.0, rng);
  }
  SECTION("zeta = 1 connects every pair") {
    gp.zeta = 1.0;
    const Matrix L(build_threshold_laplacian(X, gp, 20.0).L);
    for (Index i = 0; i < 20; ++i)
      for (Index j = 0; j < 20; ++j)
        if (i != j) CHECK(L(i, j) < 0.0);
  }
  SECTION("no qualifying pair leaves a flagged zero Laplacian") {
    // distances 1, 1, 2: the 0.4 quantile is exactly 1 and the strict comparison admits no pair
    const Matrix Y = cols2({{0, 0}, {1, 0}, {2, 0}});
    gp.zeta = 0.4;
    double kappa = 0.0;
    const NeighborGraph g = build_threshold_laplacian(Y, gp, 3.0, &kappa);
    CHECK(kappa == 1.0);
    CHECK(g.degenerate);
    CHECK(g.omega == 0.0);
    CHECK(g.L.nonZeros() == 0);
  }
  SECTION("invalid zeta") {
    gp.zeta = 0.0;
    CHECK_THROWS_AS(build_threshold_laplacian(X, gp, 20.0), InvalidConfiguration);
  }
}
