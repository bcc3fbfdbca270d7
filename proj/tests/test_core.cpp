#include "gmmproj/density.hpp"
#include "gmmproj/error.hpp"
#include "gmmproj/linalg.hpp"
#include "gmmproj/sampling.hpp"
#include "gmmproj/serialize.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace gmmproj;
using namespace gmmproj::testing;

TEST_CASE("gaussian_pdf closed forms") {
  // The 1e-9 diagonal loading shifts the value at the 1e-9 level.
  CHECK(gaussian_pdf(isotropic(1), Vector::Zero(1)) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-8));
  CHECK(gaussian_pdf(isotropic(2), Vector::Ones(2)) == doctest::Approx(std::exp(-1.0) / (2.0 * std::numbers::pi)).epsilon(1e-9));
  CHECK(gaussian_pdf(isotropic(2), Vector::Ones(2)) == doctest::Approx(0.058550).epsilon(1e-5));

  Rng rng(3);
  const Gaussian g = random_gaussian(4, rng);
  const double expected = std::pow(2.0 * std::numbers::pi, -2.0) / std::sqrt(g.cov().determinant());
  // The 1e-9 loading perturbs the determinant at the 1e-9 level.
  CHECK(gaussian_pdf(g, g.mean()) == doctest::Approx(expected).epsilon(1e-7));
}

TEST_CASE("mixture_pdf examples") {
  const MixtureModel bimodal({{0.5, Gaussian(Vector::Constant(1, -2.0), Matrix::Identity(1, 1))},
                              {0.5, Gaussian(Vector::Constant(1, 2.0), Matrix::Identity(1, 1))}});
  CHECK(mixture_pdf(bimodal, Vector::Zero(1)) == doctest::Approx(0.053991).epsilon(1e-5));

  Rng rng(5);
  const Gaussian g = random_gaussian(3, rng);
  const Vector x = random_vector(3, rng);
  CHECK(mixture_pdf(MixtureModel::single(g), x) == doctest::Approx(gaussian_pdf(g, x)).epsilon(1e-14));

  SUBCASE("far tails underflow to zero without NaN") {
    const Vector far = Vector::Constant(1, 100.0);
    const double p = mixture_pdf(bimodal, far);
    CHECK(p >= 0.0);
    CHECK(std::isfinite(mixture_log_pdf(bimodal, far)));
    CHECK_FALSE(std::isnan(p));
  }
}

TEST_CASE("mixture_pdf is linear in the weights") {
  Rng rng(11);
  const Gaussian a = random_gaussian(2, rng), b = random_gaussian(2, rng);
  const Vector x = random_vector(2, rng);
  for (double w : {0.0, 0.2, 0.7, 1.0}) {
    const MixtureModel m({{w, a}, {1.0 - w, b}});
    CHECK(mixture_pdf(m, x) == doctest::Approx(w * gaussian_pdf(a, x) + (1 - w) * gaussian_pdf(b, x)).epsilon(1e-12));
  }
}

TEST_CASE("mixture density integrates to one over +-8 sigma") {
  Rng rng(17);
  const MixtureModel m = random_mixture(2, 3, rng, 1.0);
  // Box covering +-8 sigma of every component.
  double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
  for (const auto& c : m.components()) {
    for (int a = 0; a < 2; ++a) {
      const double s = 8.0 * std::sqrt(c.gaussian.cov()(a, a));
      lo[a] = std::min(lo[a], c.gaussian.mean()(a) - s);
      hi[a] = std::max(hi[a], c.gaussian.mean()(a) + s);
    }
  }
  const Index n = 200000;
  Matrix pts(n, 2);
  for (Index i = 0; i < n; ++i) {
    for (int a = 0; a < 2; ++a) pts(i, a) = lo[a] + (hi[a] - lo[a]) * rng.uniform();
  }
  const Vector logp = MixtureDensity(m).log_pdf_rows(pts);
  const double integral = logp.array().exp().mean() * (hi[0] - lo[0]) * (hi[1] - lo[1]);
  // Monte-Carlo standard error is a few 1e-3 at this n; the quasi-exact
  // check below uses a fine midpoint rule instead.
  CHECK(integral == doctest::Approx(1.0).epsilon(0.02));

  const int grid = 1500;
  double acc = 0.0;
  const double dx = (hi[0] - lo[0]) / grid, dy = (hi[1] - lo[1]) / grid;
  Matrix centers(grid * grid, 2);
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      centers(i * grid + j, 0) = lo[0] + (i + 0.5) * dx;
      centers(i * grid + j, 1) = lo[1] + (j + 0.5) * dy;
    }
  }
  acc = MixtureDensity(m).log_pdf_rows(centers).array().exp().sum() * dx * dy;
  CHECK(std::abs(acc - 1.0) < 1e-3);
}

TEST_CASE("density errors") {
  CHECK_THROWS_AS(gaussian_pdf(isotropic(2), Vector::Zero(3)), ValidationError);
  CHECK_THROWS_AS(gaussian_pdf(Gaussian(Vector::Zero(2), Matrix::Zero(2, 2)), Vector::Zero(2)), SingularModelError);
}

TEST_CASE("Gaussian validation") {
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(Gaussian(Vector::Zero(2), asym), ValidationError);
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(Gaussian(Vector::Zero(2), indefinite), ValidationError);
  CHECK_THROWS_AS(Gaussian(Vector::Zero(3), Matrix::Identity(2, 2)), ValidationError);
  Vector nan = Vector::Zero(2);
  nan(0) = std::nan("");
  CHECK_THROWS_AS(Gaussian(nan, Matrix::Identity(2, 2)), ValidationError);
  // PSD boundary: rank-deficient covariances are valid.
  CHECK_NOTHROW(Gaussian(Vector::Zero(2), Matrix::Zero(2, 2)));

  try {
    Gaussian(Vector::Zero(2), indefinite);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
    CHECK_FALSE(e.code().empty());
  }
}

TEST_CASE("MixtureModel weight rules") {
  const Gaussian g = isotropic(2);
  CHECK_THROWS_AS(MixtureModel({}), ValidationError);
  CHECK_THROWS_AS(MixtureModel({{-0.1, g}, {1.1, g}}), ValidationError);
  CHECK_THROWS_AS(MixtureModel({{0.5, g}, {0.4, g}}), ValidationError);
  CHECK_THROWS_AS(MixtureModel({{0.5, g}, {0.5, isotropic(3)}}), ValidationError);

  const MixtureModel drift({{0.5 + 4e-7, g}, {0.5, g}});
  CHECK(std::abs(drift.weights().sum() - 1.0) < 1e-12);
  const MixtureModel exact({{0.25, g}, {0.75, g}});
  CHECK(exact[0].weight == 0.25);
}

TEST_CASE("ProjectionMatrix invariants") {
  Matrix not_orthonormal = Matrix::Identity(3, 2);
  not_orthonormal(0, 0) = 1.1;
  CHECK_THROWS_AS(ProjectionMatrix(not_orthonormal, Vector::Ones(2)), ValidationError);
  CHECK_THROWS_AS(ProjectionMatrix(Matrix::Identity(3, 2), Vector::LinSpaced(2, 1.0, 2.0)), ValidationError);
  CHECK_THROWS_AS(ProjectionMatrix(Matrix::Identity(2, 3), Vector::Ones(3)), ValidationError);
  CHECK_NOTHROW(ProjectionMatrix::identity(4));

  SUBCASE("sign convention") {
    Matrix b(3, 2);
    b << 0.6, -0.8, 0.0, 0.0, -0.8, -0.6;
    normalize_column_signs(b);
    CHECK(b(2, 0) == doctest::Approx(0.8));
    CHECK(b(0, 1) == doctest::Approx(0.8));
    Matrix tie(2, 1);
    tie << -std::sqrt(0.5), std::sqrt(0.5);
    normalize_column_signs(tie);
    CHECK(tie(0, 0) > 0.0);  // tie resolved toward the lowest index
  }
}

TEST_CASE("LabeledDataset and ImportanceWeights") {
  Matrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  const LabeledDataset ds(x, {0, 1, 0}, {"a", "b"});
  CHECK(ds.class_counts() == std::vector<std::size_t>{2, 1});
  CHECK(ds.class_samples(0).rows() == 2);
  CHECK(ds.class_samples(0)(1, 1) == 6.0);
  CHECK_THROWS_AS(LabeledDataset(x, {0, 2, 0}, {"a", "b"}), ValidationError);
  CHECK_THROWS_AS(LabeledDataset(x, {0, 0, 0}, {"a", "b"}), ValidationError);  // empty class
  x(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(LabeledDataset(x, {0, 1, 0}, {"a", "b"}), ValidationError);

  CHECK(ImportanceWeights::from_counts({900, 100})[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(ImportanceWeights::equal(4)[3] == 0.25);
  CHECK_THROWS_AS(ImportanceWeights(Vector::Constant(2, 0.6)), ValidationError);
  CHECK_THROWS_AS(ImportanceWeights::normalized(Vector::Zero(3)), ValidationError);
  Vector neg(2);
  neg << -0.5, 1.5;
  CHECK_THROWS_AS(ImportanceWeights{neg}, ValidationError);
}

TEST_CASE("DensityGrid geometry and normalization") {
  const DensityGrid g = DensityGrid::over({-1, 1, 0, 4}, Matrix::Constant(4, 8, 2.0));
  CHECK(g.dx() == 0.5);
  CHECK(g.dy() == 0.5);
  CHECK(g.center_x(0) == -0.75);
  CHECK(g.mass() == doctest::Approx(16.0));
  CHECK(g.normalized().mass() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(DensityGrid::over({0, 1, 0, 1}, Matrix::Zero(2, 2)).normalized(), NumericalError);
  CHECK_THROWS_AS(DensityGrid::over({0, 1, 0, 1}, Matrix::Constant(2, 2, -1.0)), ValidationError);
  CHECK_THROWS_AS(DensityGrid::over({0, 0, 0, 1}, Matrix::Ones(2, 2)), ValidationError);
}

TEST_CASE("regularized Cholesky and eigenpairs") {
  CHECK(diagonal_loading(Matrix::Identity(4, 4) * 2.0, 1e-9) == doctest::Approx(2e-9));
  const Matrix l = regularized_cholesky(Matrix::Zero(2, 2) + Matrix::Constant(2, 2, 1.0));  // rank one
  CHECK(l.allFinite());
  CHECK_THROWS_AS(regularized_cholesky(Matrix::Zero(3, 3)), SingularModelError);

  Rng rng(2);
  const Matrix s = random_spd(30, rng);
  const auto pairs = top_eigenpairs(s, 5);
  Eigen::SelfAdjointEigenSolver<Matrix> full(s);
  for (Index i = 0; i < 5; ++i) {
    CHECK(pairs.values(i) == doctest::Approx(full.eigenvalues()(29 - i)).epsilon(1e-12));
    CHECK((s * pairs.vectors.col(i) - pairs.values(i) * pairs.vectors.col(i)).norm() < 1e-10);
  }
}

TEST_CASE("eigenpairs of a large matrix go through blocked kernels") {
  CHECK(linalg_backend_ok());
  Rng rng(4);
  const Matrix s = random_spd(600, rng);
  const auto pairs = top_eigenpairs(s, 3);
  CHECK((pairs.vectors.transpose() * pairs.vectors - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  for (Index i = 0; i < 3; ++i) {
    CHECK((s * pairs.vectors.col(i) - pairs.values(i) * pairs.vectors.col(i)).norm() < 1e-9 * s.norm());
  }
  CHECK(pairs.values(0) >= pairs.values(1));
}

TEST_CASE("mirror_lower copies the strict lower triangle upward") {
  Rng rng(12);
  for (Index n : {1, 5, 64, 65, 200}) {
    Matrix m = random_matrix(n, n, rng);
    Matrix expect = m.triangularView<Eigen::Lower>();
    expect.triangularView<Eigen::StrictlyUpper>() = m.transpose().triangularView<Eigen::StrictlyUpper>();
    mirror_lower(m);
    CHECK(m == expect);
  }
}

TEST_CASE("Krylov and dense eigensolvers agree above the switch dimension") {
  Rng rng(8);
  const Index n = kKrylovMinDim + 100;
  const Matrix q = Eigen::HouseholderQR<Matrix>(random_matrix(n, n, rng)).householderQ();
  auto check_against_full = [&](const Matrix& s, Index count) {
    const auto pairs = top_eigenpairs(s, count);
    Eigen::SelfAdjointEigenSolver<Matrix> full(s);
    const double top = full.eigenvalues()(n - 1);
    for (Index i = 0; i < count; ++i) {
      CHECK(std::abs(pairs.values(i) - full.eigenvalues()(n - 1 - i)) <= 1e-12 * top);
    }
    return pairs;
  };

  SUBCASE("low rank plus noise floor") {
    const Matrix b = random_matrix(n, 6, rng);
    Matrix s = b * b.transpose();
    s.diagonal().array() += 0.3;
    const auto pairs = check_against_full(s, 3);
    Eigen::SelfAdjointEigenSolver<Matrix> full(s);
    for (Index i = 0; i < 3; ++i) {
      CHECK(std::abs(std::abs(pairs.vectors.col(i).dot(full.eigenvectors().col(n - 1 - i))) - 1.0) < 1e-12);
    }
  }
  SUBCASE("top eigenvalue repeated across the whole wanted range") {
    Vector spectrum = Vector::LinSpaced(n, 0.0, 1.0);
    spectrum.tail(4).setConstant(5.0);
    const Matrix s = q * spectrum.asDiagonal() * q.transpose();
    const auto pairs = check_against_full(s, 3);
    // Any orthonormal triple inside the eigenspace is valid.
    const Matrix space = q.rightCols(4);
    CHECK((space * (space.transpose() * pairs.vectors) - pairs.vectors).norm() < 1e-10);
  }
  SUBCASE("exact low rank plus identity exhausts the Krylov space early") {
    const Matrix f = random_matrix(n, 30, rng);
    Matrix s = f * f.transpose();
    s.diagonal().array() += 1.0;
    const auto pairs = check_against_full(s, 3);
    for (Index i = 0; i < 3; ++i) {
      CHECK((s * pairs.vectors.col(i) - pairs.values(i) * pairs.vectors.col(i)).norm() < 1e-12 * pairs.values(0));
    }
  }
  SUBCASE("tightly clustered bulk falls back without losing accuracy") {
    const Matrix a = random_matrix(n, n, rng);
    const Matrix s = a * a.transpose() / static_cast<double>(n);
    check_against_full(s, 3);
  }
}

TEST_CASE("model JSON round trip preserves values to 1e-15") {
  Rng rng(23);
  const MixtureModel m = random_mixture(5, 3, rng);
  const MixtureModel back = mixture_from_json(json::parse(to_json(m).dump()));
  REQUIRE(back.size() == m.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    CHECK(back[k].weight == m[k].weight);
    CHECK(max_rel_diff(back[k].gaussian.cov(), m[k].gaussian.cov()) <= 1e-15);
    CHECK(max_rel_diff(back[k].gaussian.mean(), m[k].gaussian.mean()) <= 1e-15);
  }
  const json j = to_json(m);
  CHECK(j["components"][0]["cov"].size() == 5);  // full, not triangular
  CHECK_THROWS_AS(mixture_from_json(json::parse(R"({"components": [{"weight": 1, "mean": [0], "cov": [[-1]]}]})")),
                  ValidationError);
  CHECK_THROWS_AS(mixture_from_json(json::parse(R"({"components": []})")), ValidationError);
}
