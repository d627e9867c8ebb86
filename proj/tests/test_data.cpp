#include <ssdl/data.hpp>

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

using namespace ssdl;
using Catch::Approx;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ssdl_data_" + name);
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) buf.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

/// Two 2x3 images with labels 1 and 0.
struct IdxFixture {
  std::vector<unsigned char> images, labels;
  IdxFixture() {
    put_u32(images, 2051);
    put_u32(images, 2);
    put_u32(images, 2);
    put_u32(images, 3);
    for (unsigned char v = 0; v < 12; ++v) images.push_back(static_cast<unsigned char>(v * 20));
    put_u32(labels, 2049);
    put_u32(labels, 2);
    labels.push_back(1);
    labels.push_back(0);
  }
};

LabeledDataset grouped(Index per_class, int classes, Index n = 2) {
  LabeledDataset ds;
  ds.class_count = classes;
  ds.X.resize(n, per_class * classes);
  for (Index i = 0; i < ds.X.cols(); ++i) {
    ds.X.col(i).setConstant(static_cast<double>(i));
    ds.y.push_back(static_cast<int>(i % classes));
  }
  return ds;
}

}  // namespace

TEST_CASE("IDX loading") {
  const IdxFixture fx;
  const auto img = temp_file("images.idx");
  const auto lab = temp_file("labels.idx");
  write_bytes(img, fx.images);
  write_bytes(lab, fx.labels);

  SECTION("pixels and labels round trip") {
    const LabeledDataset ds = load_idx(img.string(), lab.string());
    REQUIRE(ds.X.rows() == 6);
    REQUIRE(ds.X.cols() == 2);
    CHECK(ds.y == std::vector<int>{1, 0});
    CHECK(ds.class_count == 2);
    for (Index i = 0; i < 2; ++i)
      for (Index r = 0; r < 2; ++r)
        for (Index c = 0; c < 3; ++c) CHECK(ds.X(c * 2 + r, i) == 20.0 * static_cast<double>(i * 6 + r * 3 + c));
  }
  SECTION("wrong magic") {
    auto bad = fx.images;
    bad[3] = 0x04;
    write_bytes(img, bad);
    CHECK_THROWS_AS(load_idx(img.string(), lab.string()), BadMagic);
    CHECK_THROWS_AS(load_idx(lab.string(), lab.string()), BadMagic);
  }
  SECTION("label and image counts disagree") {
    auto bad = fx.labels;
    bad[7] = 3;
    bad.push_back(1);
    write_bytes(lab, bad);
    CHECK_THROWS_AS(load_idx(img.string(), lab.string()), ShapeMismatch);
  }
  SECTION("truncated payloads") {
    auto short_images = fx.images;
    short_images.pop_back();
    write_bytes(img, short_images);
    CHECK_THROWS_AS(load_idx(img.string(), lab.string()), TruncatedFile);
    write_bytes(img, std::vector<unsigned char>(fx.images.begin(), fx.images.begin() + 10));
    CHECK_THROWS_AS(load_idx(img.string(), lab.string()), TruncatedFile);
    write_bytes(img, fx.images);
    auto short_labels = fx.labels;
    short_labels.pop_back();
    write_bytes(lab, short_labels);
    CHECK_THROWS_AS(load_idx(img.string(), lab.string()), TruncatedFile);
  }
  SECTION("missing file") { CHECK_THROWS_AS(load_idx(temp_file("absent").string(), lab.string()), IoError); }
  std::filesystem::remove(img);
  std::filesystem::remove(lab);
}

TEST_CASE("delimited loading") {
  const auto path = temp_file("table.csv");
  SECTION("three rows with the label last") {
    write_text(path, "# comment\n1.5,2,0\n\n3,4e-1,1\n-5, 6 ,1\n");
    const LabeledDataset ds = load_delimited(path.string(), -1);
    REQUIRE(ds.X.rows() == 2);
    REQUIRE(ds.X.cols() == 3);
    CHECK(ds.X(0, 0) == 1.5);
    CHECK(ds.X(1, 1) == 0.4);
    CHECK(ds.X(0, 2) == -5.0);
    CHECK(ds.X(1, 2) == 6.0);
    CHECK(ds.y == std::vector<int>{0, 1, 1});
    CHECK(ds.class_count == 2);
  }
  SECTION("label first, tab separated, with a header") {
    write_text(path, "label\ta\tb\n2\t1\t2\n0\t3\t4\n1\t5\t6\n");
    const LabeledDataset ds = load_delimited(path.string(), 0, '\t', true);
    CHECK(ds.X.cols() == 3);
    CHECK(ds.y == std::vector<int>{2, 0, 1});
    CHECK(ds.X(1, 2) == 6.0);
  }
  SECTION("a non-numeric cell names its row and column") {
    write_text(path, "1,2,0\n3,x,1\n");
    try {
      load_delimited(path.string(), -1);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.row() == 2);
      CHECK(e.column() == 2);
    }
  }
  SECTION("missing label column") {
    write_text(path, "1,2,0\n3,4,1\n");
    CHECK_THROWS_AS(load_delimited(path.string(), 5), FormatError);
    CHECK_THROWS_AS(load_delimited(path.string(), -4), FormatError);
  }
  SECTION("ragged rows") {
    write_text(path, "1,2,0\n3,1\n");
    CHECK_THROWS_AS(load_delimited(path.string(), -1), FormatError);
  }
  SECTION("fractional or negative label") {
    write_text(path, "1,2,0.5\n");
    CHECK_THROWS_AS(load_delimited(path.string(), -1), ParseError);
    write_text(path, "1,2,-1\n");
    CHECK_THROWS_AS(load_delimited(path.string(), -1), ParseError);
  }
  SECTION("a class with no samples") {
    write_text(path, "1,2,0\n3,4,2\n");
    CHECK_THROWS_AS(load_delimited(path.string(), -1), FormatError);
  }
  SECTION("unlabelled matrix") {
    write_text(path, "1 2 3\n4 5 6\n");
    const Matrix X = load_delimited_matrix(path.string(), ' ');
    CHECK(X.rows() == 3);
    CHECK(X.cols() == 2);
    CHECK(X(2, 1) == 6.0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("preprocessing") {
  std::mt19937_64 rng(1);
  SECTION("normalize then scale restores a norm-five column") {
    Matrix X(2, 1);
    X << 3, 4;
    const Matrix Y = preprocess(X, {PreprocessStep::l2_normalize(), PreprocessStep::scale(5.0)});
    CHECK(Y(0, 0) == Approx(3.0).epsilon(1e-15));
    CHECK(Y(1, 0) == Approx(4.0).epsilon(1e-15));
  }
  SECTION("standardization moments and idempotence") {
    Matrix X = oracle::random_matrix(6, 50, rng, 3.0);
    X.row(2).array() += 10.0;
    X.row(4).setConstant(7.0);
    const Matrix S = preprocess(X, {PreprocessStep::standardize()});
    for (Index f = 0; f < 6; ++f) {
      double mean = 0.0, sq = 0.0;
      for (Index j = 0; j < 50; ++j) mean += S(f, j);
      mean /= 50.0;
      for (Index j = 0; j < 50; ++j) sq += (S(f, j) - mean) * (S(f, j) - mean);
      CHECK(std::abs(mean) <= 1e-12);
      if (f == 4) CHECK(sq == 0.0);
      else CHECK(std::sqrt(sq / 50.0) == Approx(1.0).epsilon(1e-12));
    }
    const Matrix twice = preprocess(S, {PreprocessStep::standardize()});
    CHECK((twice - S).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("unit columns and zero columns") {
    Matrix X = oracle::random_matrix(4, 10, rng);
    X.col(3).setZero();
    const Matrix N = preprocess(X, {PreprocessStep::l2_normalize()});
    for (Index j = 0; j < 10; ++j) {
      if (j == 3) CHECK(N.col(j).isZero(0.0));
      else CHECK(std::abs(N.col(j).norm() - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("Gaussian noise") {
  std::mt19937_64 rng(2);
  const Matrix X = oracle::random_matrix(50, 400, rng, 2.0);
  CHECK(add_gaussian_noise(X, 0.0, 1) == X);
  const double sigma = 0.6;
  const Matrix Y = add_gaussian_noise(X, sigma, 3);
  const Matrix diff = Y - X;
  const double mean = diff.mean();
  const double sd = std::sqrt((diff.array() - mean).square().sum() / static_cast<double>(diff.size() - 1));
  const double target = sigma * X.array().square().mean();
  CHECK(std::abs(sd - target) <= 0.02 * target);
  CHECK(std::abs(mean) <= 0.05 * target);
  CHECK(add_gaussian_noise(X, sigma, 3) == Y);
  CHECK(add_gaussian_noise(X, sigma, 4) != Y);
  CHECK_THROWS_AS(add_gaussian_noise(X, -1.0, 0), InvalidConfiguration);
}

TEST_CASE("random projection") {
  std::mt19937_64 rng(3);
  const Matrix X = oracle::random_matrix(8, 5, rng);
  SECTION("reproducible linear map") {
    const Matrix R = projection_matrix(8, 8, 11);
    CHECK(random_projection(X, 8, 11) == R * X);
    CHECK(random_projection(X, 8, 11) == random_projection(X, 8, 11));
    const Matrix Y = oracle::random_matrix(8, 5, rng);
    CHECK((random_projection(X + 2.0 * Y, 8, 11) - (random_projection(X, 8, 11) + 2.0 * random_projection(Y, 8, 11)))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
  }
  SECTION("zero input") { CHECK(random_projection(Matrix::Zero(8, 3), 4, 5).isZero(0.0)); }
  SECTION("norms are preserved on average over seeds") {
    const Vector x = X.col(0);
    double total = 0.0;
    const int seeds = 4000;
    for (int s = 0; s < seeds; ++s) total += random_projection(Matrix(x), 4, static_cast<std::uint64_t>(s)).squaredNorm();
    CHECK(total / seeds == Approx(x.squaredNorm()).epsilon(0.05));
  }
}

TEST_CASE("stratified split") {
  SECTION("one of each role per class partitions a three-per-class set") {
    const LabeledDataset ds = grouped(3, 4);
    const DataSplit s = split(ds, SplitSpec{1, 1, 1, 9});
    std::set<Index> all;
    for (const auto* ids : {&s.labelled_ids, &s.unlabelled_ids, &s.test_ids})
      for (Index i : *ids) CHECK(all.insert(i).second);
    CHECK(all.size() == 12);
  }
  SECTION("counts per class match and samples carry their labels") {
    const LabeledDataset ds = grouped(20, 3, 4);
    const DataSplit s = split(ds, SplitSpec{4, 5, 6, 2});
    CHECK(s.X_l.cols() == 12);
    CHECK(s.X_u.cols() == 15);
    CHECK(s.X_test.cols() == 18);
    CHECK(s.Y.Y.cols() == 12);
    for (int c = 0; c < 3; ++c) {
      CHECK(std::count(s.y_l.begin(), s.y_l.end(), c) == 4);
      CHECK(std::count(s.y_u.begin(), s.y_u.end(), c) == 5);
      CHECK(std::count(s.y_test.begin(), s.y_test.end(), c) == 6);
    }
    for (std::size_t i = 0; i < s.y_l.size(); ++i) {
      CHECK(s.X_l(0, static_cast<Index>(i)) == static_cast<double>(s.labelled_ids[i]));
      CHECK(ds.y[static_cast<std::size_t>(s.labelled_ids[i])] == s.y_l[i]);
      CHECK(s.Y.Y(s.y_l[i], static_cast<Index>(i)) == 1.0);
    }
    for (std::size_t i = 0; i < s.y_test.size(); ++i)
      CHECK(ds.y[static_cast<std::size_t>(s.test_ids[i])] == s.y_test[i]);
    const Matrix T = s.training_samples();
    CHECK(T.cols() == 27);
    CHECK(T.rightCols(15) == s.X_u);
  }
  SECTION("same seed, same indices; different seed, different indices") {
    const LabeledDataset ds = grouped(20, 3);
    const DataSplit a = split(ds, SplitSpec{4, 5, 6, 2});
    const DataSplit b = split(ds, SplitSpec{4, 5, 6, 2});
    const DataSplit c = split(ds, SplitSpec{4, 5, 6, 3});
    CHECK(a.labelled_ids == b.labelled_ids);
    CHECK(a.unlabelled_ids == b.unlabelled_ids);
    CHECK(a.test_ids == b.test_ids);
    CHECK(a.labelled_ids != c.labelled_ids);
  }
  SECTION("growing the unlabelled count keeps labelled and test sets") {
    const LabeledDataset ds = grouped(20, 3);
    const DataSplit a = split(ds, SplitSpec{4, 0, 6, 2});
    const DataSplit b = split(ds, SplitSpec{4, 8, 6, 2});
    CHECK(a.labelled_ids == b.labelled_ids);
    CHECK(a.test_ids == b.test_ids);
  }
  SECTION("an infeasible split names the short class") {
    LabeledDataset ds = grouped(5, 3);
    ds.y[0] = 1;  // class 0 now has four samples
    try {
      split(ds, SplitSpec{2, 2, 1, 0});
      FAIL("expected a configuration error");
    } catch (const InvalidConfiguration& e) {
      CHECK(std::string(e.what()).find("class 0") != std::string::npos);
    }
  }
}
