#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "srgf/dataio.hpp"
#include "srgf/gcn.hpp"

using namespace srgf;
using srgf::testing::gradcheck;
using srgf::testing::random_matrix;

using srgf::testing::dense_normalized;
using srgf::testing::eval;
using srgf::testing::make_dataset;
using srgf::testing::random_dataset;

TEST_CASE("cgprop examples") {
  const auto ds = make_dataset(1, 1, {{0, 0}});
  const auto adj = data::build_normalized_adjacency(ds);
  const Matrix e{{1, 0}, {0, 1}};
  CHECK(eval([&](ad::Tape& t) { return gcn::cgprop(adj, t.constant(e)); }) == Matrix{{0, 1}, {1, 0}});
  CHECK(eval([&](ad::Tape& t) { return gcn::cgprop(adj, t.constant(Matrix(2, 3))); }) == Matrix(2, 3));
  CHECK_THROWS_AS(eval([&](ad::Tape& t) { return gcn::cgprop(adj, t.constant(Matrix(3, 2))); }), ShapeError);
}

TEST_CASE("two cgprop layers keep user rows in the user subspace") {
  Rng rng(3);
  const auto ds = random_dataset(rng, 3, 4);
  const auto adj = data::build_normalized_adjacency(ds);
  const Matrix a = dense_normalized(ds);
  const Matrix e = random_matrix(rng, 7, 3);
  const Matrix two = eval([&](ad::Tape& t) { return gcn::cgprop(adj, gcn::cgprop(adj, t.constant(e))); });
  CHECK(max_abs_diff(two, matmul(a, matmul(a, e))) < 1e-10);
  // (A^2) has no user-item entries on a bipartite graph.
  const Matrix a2 = matmul(a, a);
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t c = 3; c < 7; ++c) CHECK(a2(u, c) == 0.0);
}

TEST_CASE("cgprop and mgprop equal the dense product on random graphs") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t users = 1 + rng.below(4);
    const std::size_t items = 1 + rng.below(8 - users);
    const auto ds = random_dataset(rng, users, items);
    const auto adj = data::build_normalized_adjacency(ds);
    const Matrix a = dense_normalized(ds);
    const Matrix e = random_matrix(rng, users + items, 3);
    CHECK(max_abs_diff(eval([&](ad::Tape& t) { return gcn::cgprop(adj, t.constant(e)); }), matmul(a, e)) < 1e-10);
    CHECK(max_abs_diff(eval([&](ad::Tape& t) { return gcn::mgprop(adj, t.constant(e)); }), matmul(a, e)) < 1e-10);
  }
}

TEST_CASE("layer_combine") {
  CHECK(eval([](ad::Tape& t) {
          return gcn::layer_combine({t.constant(Matrix{{2}}), t.constant(Matrix{{4}})});
        }) == Matrix{{3}});
  const Matrix one{{1, -2}, {3, 4}};
  CHECK(eval([&](ad::Tape& t) { return gcn::layer_combine({t.constant(one)}); }) == one);
  CHECK_THROWS_AS(gcn::layer_combine({}), ShapeError);

  Rng rng(5);
  for (std::size_t s = 1; s <= 4; ++s) {
    std::vector<Matrix> layers;
    for (std::size_t k = 0; k <= s; ++k) layers.push_back(random_matrix(rng, 3, 3));
    const Matrix mean = eval([&](ad::Tape& t) {
      std::vector<ad::Var> vs;
      for (const Matrix& m : layers) vs.push_back(t.constant(m));
      return gcn::layer_combine(vs);
    });
    for (std::size_t i = 0; i < 9; ++i) {
      double total = 0.0, lo = 1e9, hi = -1e9;
      for (const Matrix& m : layers) {
        total += m.values()[i];
        lo = std::min(lo, m.values()[i]);
        hi = std::max(hi, m.values()[i]);
      }
      CHECK(std::abs(mean.values()[i] - total / static_cast<double>(s + 1)) < 1e-12);
      CHECK(mean.values()[i] >= lo - 1e-12);
      CHECK(mean.values()[i] <= hi + 1e-12);
    }
  }
}

TEST_CASE("collaborative_embeddings averages the propagated stack") {
  Rng rng(8);
  const auto ds = random_dataset(rng, 3, 3);
  const auto adj = data::build_normalized_adjacency(ds);
  const Matrix a = dense_normalized(ds);
  const Matrix e = random_matrix(rng, 6, 4);
  const Matrix expected = (e + matmul(a, e) + matmul(a, matmul(a, e))) * (1.0 / 3.0);
  CHECK(max_abs_diff(eval([&](ad::Tape& t) { return gcn::collaborative_embeddings(adj, t.constant(e), 2); }),
                     expected) < 1e-12);
}

TEST_CASE("transform_modal") {
  const Matrix f{{1, 2}, {3, 4}};
  CHECK(eval([&](ad::Tape& t) { return gcn::transform_modal(t.constant(f), t.constant(Matrix::identity(2))); }) ==
        f);
  CHECK(eval([&](ad::Tape& t) { return gcn::transform_modal(t.constant(f), t.constant(Matrix(2, 5))); }) ==
        Matrix(2, 5));
  const Matrix x{{1, 0, 2}, {-1, 3, 1}};
  const Matrix w{{1, 2}, {0, 1}, {4, -1}};
  CHECK(eval([&](ad::Tape& t) { return gcn::transform_modal(t.constant(x), t.constant(w)); }) ==
        Matrix{{9, 0}, {3, 0}});
  CHECK_THROWS_AS(eval([&](ad::Tape& t) { return gcn::transform_modal(t.constant(x), t.constant(f)); }), ShapeError);
}

TEST_CASE("init_user_modal") {
  const auto ds = make_dataset(3, 3, {{0, 0}, {0, 1}, {1, 2}});
  const SparseMatrix mean = data::user_mean_operator(ds);
  const Matrix items{{1, 3}, {3, 5}, {7, -1}};
  const Matrix users = eval([&](ad::Tape& t) { return gcn::init_user_modal(mean, t.constant(items)); });
  CHECK(users == Matrix{{2, 4}, {7, -1}, {0, 0}});
}

TEST_CASE("modal_embeddings") {
  Rng rng(21);
  const auto ds = random_dataset(rng, 3, 4);
  const auto adj = data::build_normalized_adjacency(ds);
  const SparseMatrix mean = data::user_mean_operator(ds);
  const Matrix feats = random_matrix(rng, 4, 5);
  const Matrix w = random_matrix(rng, 5, 3);

  const Matrix projected = matmul(feats, w);
  Matrix initial(7, 3);
  for (std::size_t u = 0; u < 3; ++u) {
    const auto& nbrs = ds.train_items()[u];
    for (std::size_t i : nbrs)
      for (std::size_t c = 0; c < 3; ++c) initial(u, c) += projected(i, c) / static_cast<double>(nbrs.size());
  }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 3; ++c) initial(3 + i, c) = projected(i, c);

  auto run = [&](std::size_t k) {
    return eval([&](ad::Tape& t) { return gcn::modal_embeddings(adj, mean, t.constant(feats), t.constant(w), k); });
  };
  CHECK(max_abs_diff(run(0), initial) < 1e-12);
  CHECK(max_abs_diff(run(1), matmul(dense_normalized(ds), initial)) < 1e-10);
}

TEST_CASE("mcl_loss examples") {
  const Matrix same{{1, 0}, {1, 0}};
  const double two = eval([&](ad::Tape& t) {
                       return gcn::mcl_loss(t.constant(same), t.constant(Matrix{{2, 0}, {0.5, 0}}), 0.2);
                     })(0, 0);
  CHECK(two == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(std::abs(2.0 * std::log(2.0) - 1.3863) < 1e-4);

  const double single = eval([&](ad::Tape& t) {
                          return gcn::mcl_loss(t.constant(Matrix{{1, 2}}), t.constant(Matrix{{-3, 1}}), 0.2);
                        })(0, 0);
  CHECK(std::abs(single) < 1e-12);

  Rng rng(4);
  const Matrix a = random_matrix(rng, 4, 3);
  const Matrix b = random_matrix(rng, 4, 3);
  Matrix scaled = a;
  for (std::size_t c = 0; c < 3; ++c) scaled(2, c) *= 7.5;
  const auto loss = [&](const Matrix& x) {
    return eval([&](ad::Tape& t) { return gcn::mcl_loss(t.constant(x), t.constant(b), 0.2); })(0, 0);
  };
  CHECK(loss(scaled) == doctest::Approx(loss(a)).epsilon(1e-12));

  CHECK_THROWS(eval([&](ad::Tape& t) { return gcn::mcl_loss(t.constant(a), t.constant(b), 0.0); }));
  CHECK_THROWS_AS(eval([&](ad::Tape& t) { return gcn::mcl_loss(t.constant(a), t.constant(same), 0.2); }),
                  ShapeError);
}

TEST_CASE("zero rows count as zero cosine") {
  const Matrix a{{0, 0}, {1, 0}};
  const Matrix b{{1, 1}, {0, 1}};
  const double loss = eval([&](ad::Tape& t) { return gcn::mcl_loss(t.constant(a), t.constant(b), 0.5); })(0, 0);
  CHECK(loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mcl_loss matches the definitional sum") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    const Matrix a = random_matrix(rng, n, 3);
    const Matrix b = random_matrix(rng, n, 3);
    const double tau = 0.2;
    std::vector<double> s(n);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        dot += a(r, c) * b(r, c);
        na += a(r, c) * a(r, c);
        nb += b(r, c) * b(r, c);
      }
      s[r] = dot / std::sqrt(na * nb);
    }
    double denom = 0.0;
    for (double v : s) denom += std::exp(v / tau);
    double expected = 0.0;
    for (double v : s) expected -= std::log(std::exp(v / tau) / denom);
    const double got = eval([&](ad::Tape& t) { return gcn::mcl_loss(t.constant(a), t.constant(b), tau); })(0, 0);
    CHECK(got == doctest::Approx(expected).epsilon(1e-10));

    double batch = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double total = 0.0;
      for (std::size_t q = 0; q < n; ++q) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t c = 0; c < 3; ++c) {
          dot += a(r, c) * b(q, c);
          na += a(r, c) * a(r, c);
          nb += b(q, c) * b(q, c);
        }
        total += std::exp(dot / std::sqrt(na * nb) / tau);
      }
      batch -= std::log(std::exp(s[r] / tau) / total);
    }
    const double in_batch = eval([&](ad::Tape& t) {
                              return gcn::mcl_loss(t.constant(a), t.constant(b), tau, NceDenominator::InBatch);
                            })(0, 0);
    CHECK(in_batch == doctest::Approx(batch).epsilon(1e-10));
  }
}

TEST_CASE("mcl_loss falls as a positive pair aligns") {
  // Only the first positive similarity moves; every cross pair stays at zero.
  const Matrix a{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}};
  for (auto denominator : {NceDenominator::PositivePairs, NceDenominator::InBatch}) {
    double previous = 1e9;
    for (int step = 0; step <= 10; ++step) {
      const double angle = 1.5 * (1.0 - step / 10.0);
      const Matrix b{{std::cos(angle), 0, 0, std::sin(angle)}, {0, 1, 0, 0}, {0, 0, 1, 0}};
      const double loss = eval([&](ad::Tape& t) {
                            return gcn::mcl_loss(t.constant(a), t.constant(b), 0.2, denominator);
                          })(0, 0);
      CHECK(loss < previous);
      previous = loss;
    }
  }
}

TEST_CASE("mcl_loss and propagation gradients pass finite differences") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = random_matrix(rng, 4, 3);
    const Matrix b = random_matrix(rng, 4, 3);
    CHECK(gradcheck([](ad::Tape&, const std::vector<ad::Var>& v) { return gcn::mcl_loss(v[0], v[1], 0.2); },
                    {a, b}) < 1e-4);
    CHECK(gradcheck(
              [](ad::Tape&, const std::vector<ad::Var>& v) {
                return gcn::mcl_loss(v[0], v[1], 0.2, NceDenominator::InBatch);
              },
              {a, b}) < 1e-4);
  }
  const auto ds = random_dataset(rng, 3, 4);
  const auto adj = data::build_normalized_adjacency(ds);
  const SparseMatrix mean = data::user_mean_operator(ds);
  const Matrix feats = random_matrix(rng, 4, 5);
  const Matrix w = random_matrix(rng, 5, 3);
  const Matrix ids = random_matrix(rng, 7, 3);
  const Matrix probe = random_matrix(rng, 7, 3);
  CHECK(gradcheck(
            [&](ad::Tape& t, const std::vector<ad::Var>& v) {
              const ad::Var m = gcn::modal_embeddings(adj, mean, t.constant(feats), v[0], 1);
              const ad::Var c = gcn::collaborative_embeddings(adj, v[1], 2);
              return ad::sum(ad::hadamard(ad::add(m, c), t.constant(probe)));
            },
            {w, ids}) < 1e-4);
}
