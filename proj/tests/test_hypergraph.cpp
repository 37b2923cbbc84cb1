#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "srgf/hypergraph.hpp"

using namespace srgf;
using srgf::testing::dense_normalized;
using srgf::testing::eval;
using srgf::testing::gradcheck;
using srgf::testing::random_dataset;
using srgf::testing::random_matrix;

namespace {

Matrix plain_softmax(const Matrix& h, double tau) {
  Matrix out(h.rows(), h.cols());
  for (std::size_t r = 0; r < h.rows(); ++r) {
    double hi = -1e300;
    for (std::size_t c = 0; c < h.cols(); ++c) hi = std::max(hi, h(r, c) / tau);
    double total = 0.0;
    for (std::size_t c = 0; c < h.cols(); ++c) total += std::exp(h(r, c) / tau - hi);
    for (std::size_t c = 0; c < h.cols(); ++c) out(r, c) = std::exp(h(r, c) / tau - hi) / total;
  }
  return out;
}

Matrix row_sums(const Matrix& m) {
  Matrix out(m.rows(), 1);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, 0) += m(r, c);
  return out;
}

// User x item block of the dense normalized adjacency.
Matrix dense_user_item(const data::InteractionDataset& ds) {
  const Matrix a = dense_normalized(ds);
  Matrix out(ds.user_count(), ds.item_count());
  for (std::size_t u = 0; u < ds.user_count(); ++u)
    for (std::size_t i = 0; i < ds.item_count(); ++i) out(u, i) = a(u, ds.user_count() + i);
  return out;
}

}  // namespace

TEST_CASE("hyperedge_dependencies examples") {
  const Matrix e{{1, 0}, {0, 1}};
  const Matrix v{{1, 2}, {3, 4}};
  const SparseMatrix au = SparseMatrix::from_dense(Matrix{{1, 1}});
  ad::Tape t;
  const auto deps = hyper::hyperedge_dependencies(t.constant(e), t.constant(v), au);
  CHECK(deps.items.value() == Matrix{{1, 3}, {2, 4}});
  CHECK(deps.users.value() == Matrix{{3, 7}});

  const auto zero = hyper::hyperedge_dependencies(t.constant(e), t.constant(Matrix(5, 2)), au);
  CHECK(zero.items.value() == Matrix(2, 5));
  CHECK(zero.users.value() == Matrix(1, 5));

  CHECK_THROWS_AS(hyper::hyperedge_dependencies(t.constant(e), t.constant(Matrix(2, 3)), au), ShapeError);
  CHECK_THROWS_AS(hyper::hyperedge_dependencies(t.constant(e), t.constant(v), SparseMatrix(1, 3)), ShapeError);
}

TEST_CASE("user dependencies use the normalized user-item block") {
  Rng rng(6);
  const auto ds = random_dataset(rng, 3, 5);
  const auto adj = data::build_normalized_adjacency(ds);
  const Matrix feats = random_matrix(rng, 5, 4);
  const Matrix v = random_matrix(rng, 3, 4);
  ad::Tape t;
  const auto deps = hyper::hyperedge_dependencies(t.constant(feats), t.constant(v), adj.user_item);
  const Matrix hi = matmul(feats, v.transposed());
  CHECK(max_abs_diff(deps.items.value(), hi) < 1e-12);
  CHECK(max_abs_diff(deps.users.value(), matmul(dense_user_item(ds), hi)) < 1e-12);
}

TEST_CASE("gumbel_softmax_rows rows sum to one across draws") {
  Rng rng(99);
  SampledNoise noise(1234);
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const Matrix h = random_matrix(rng, 3, 5, -4.0, 4.0);
    const double tau = 0.01 + rng.uniform() * 2.0;
    const Matrix out = eval([&](ad::Tape& t) {
      return hyper::gumbel_softmax_rows(t.constant(h), tau, noise.logistic_noise(3, 5));
    });
    for (std::size_t r = 0; r < 3; ++r) worst = std::max(worst, std::abs(row_sums(out)(r, 0) - 1.0));
    CHECK(out.all_finite());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("gumbel_softmax_rows without noise is a tempered softmax") {
  Rng rng(7);
  ExpectedNoise expected;
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix h = random_matrix(rng, 4, 6, -3.0, 3.0);
    const Matrix noise = expected.logistic_noise(4, 6);
    const Matrix out = eval([&](ad::Tape& t) { return hyper::gumbel_softmax_rows(t.constant(h), 0.2, noise); });
    CHECK(max_abs_diff(out, plain_softmax(h, 0.2)) < 1e-12);
  }
  // log(0.5) - log(1 - 0.5) vanishes.
  CHECK(std::log(0.5) - std::log1p(-0.5) == 0.0);

  const Matrix flat(2, 4, 1.7);
  const Matrix uniform = eval([&](ad::Tape& t) {
    return hyper::gumbel_softmax_rows(t.constant(flat), 0.2, Matrix(2, 4));
  });
  CHECK(max_abs_diff(uniform, Matrix(2, 4, 0.25)) < 1e-15);
  CHECK_THROWS(eval([&](ad::Tape& t) { return hyper::gumbel_softmax_rows(t.constant(flat), 0.0, Matrix(2, 4)); }));
}

TEST_CASE("gumbel_softmax_rows approaches one-hot at low temperature") {
  SampledNoise noise(5);
  const Matrix h{{0, 20, 40}, {40, 0, 20}, {20, 40, 0}};
  const Matrix fixed = noise.logistic_noise(3, 3);
  const Matrix out = eval([&](ad::Tape& t) { return hyper::gumbel_softmax_rows(t.constant(h), 0.01, fixed); });
  for (std::size_t r = 0; r < 3; ++r) {
    double hi = 0.0;
    for (std::size_t c = 0; c < 3; ++c) hi = std::max(hi, out(r, c));
    CHECK(hi > 0.99);
  }
}

TEST_CASE("dropout") {
  Rng rng(8);
  const Matrix x = random_matrix(rng, 20, 10);
  ExpectedNoise off;
  CHECK(eval([&](ad::Tape& t) { return hyper::dropout(t.constant(x), 0.2, off); }) == x);

  SampledNoise on(3);
  SampledNoise replay(3);
  const Matrix dropped = eval([&](ad::Tape& t) { return hyper::dropout(t.constant(x), 0.2, on); });
  const Matrix mask = replay.dropout_mask(20, 10, 0.2);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK((mask.values()[i] == 0.0 || mask.values()[i] == doctest::Approx(1.25)));
    CHECK(dropped.values()[i] == doctest::Approx(x.values()[i] * mask.values()[i]));
    zeros += mask.values()[i] == 0.0 ? 1 : 0;
  }
  CHECK(zeros > 10);
  CHECK(zeros < 80);
}

TEST_CASE("propagate_items") {
  ExpectedNoise off;
  const Matrix e{{1, 2}, {3, 4}, {5, 6}};
  CHECK(eval([&](ad::Tape& t) {
          return hyper::propagate_items(t.constant(Matrix::identity(3)), t.constant(e), 0.0, off);
        }) == e);
  Rng rng(2);
  const Matrix h = random_matrix(rng, 3, 2, 0.0, 1.0);
  CHECK(eval([&](ad::Tape& t) { return hyper::propagate_items(t.constant(h), t.constant(Matrix(3, 2)), 0.0, off); }) ==
        Matrix(3, 2));
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t items = 1 + rng.below(6);
    const Matrix hh = random_matrix(rng, items, 3, 0.0, 1.0);
    const Matrix ee = random_matrix(rng, items, 4);
    const Matrix got =
        eval([&](ad::Tape& t) { return hyper::propagate_items(t.constant(hh), t.constant(ee), 0.0, off); });
    CHECK(max_abs_diff(got, matmul(matmul(hh, hh.transposed()), ee)) < 1e-10);
  }
}

TEST_CASE("propagate_users") {
  ExpectedNoise off;
  const Matrix e{{1, 2}, {3, 4}};
  const Matrix id = Matrix::identity(2);
  CHECK(eval([&](ad::Tape& t) {
          return hyper::propagate_users(t.constant(id), t.constant(id), t.constant(e), 0.0, off);
        }) == e);
  const Matrix hu{{0.2, 0.8}, {0.5, 0.5}, {1.0, 0.0}};
  const Matrix hi{{0.1, 0.9}, {0.6, 0.4}};
  const Matrix oracle = matmul(matmul(hu, hi.transposed()), e);
  CHECK(max_abs_diff(eval([&](ad::Tape& t) {
                       return hyper::propagate_users(t.constant(hu), t.constant(hi), t.constant(e), 0.0, off);
                     }),
                     oracle) < 1e-10);
  CHECK(eval([&](ad::Tape& t) {
          return hyper::propagate_users(t.constant(Matrix(3, 2)), t.constant(hi), t.constant(e), 0.0, off);
        }) == Matrix(3, 2));
  CHECK_THROWS_AS(eval([&](ad::Tape& t) {
                    return hyper::propagate_users(t.constant(Matrix(3, 3)), t.constant(hi), t.constant(e), 0.0, off);
                  }),
                  ShapeError);
}

TEST_CASE("dropout applies to both dependency factors") {
  Rng rng(10);
  const Matrix hu = random_matrix(rng, 3, 4, 0.0, 1.0);
  const Matrix hi = random_matrix(rng, 5, 4, 0.0, 1.0);
  const Matrix e = random_matrix(rng, 5, 2);
  SampledNoise noise(77);
  SampledNoise replay(77);
  const Matrix got =
      eval([&](ad::Tape& t) { return hyper::propagate_users(t.constant(hu), t.constant(hi), t.constant(e), 0.2, noise); });
  Matrix left = hu;
  const Matrix ml = replay.dropout_mask(3, 4, 0.2);
  for (std::size_t i = 0; i < left.size(); ++i) left.values()[i] *= ml.values()[i];
  Matrix right = hi;
  const Matrix mr = replay.dropout_mask(5, 4, 0.2);
  for (std::size_t i = 0; i < right.size(); ++i) right.values()[i] *= mr.values()[i];
  CHECK(max_abs_diff(got, matmul(matmul(left, right.transposed()), e)) < 1e-12);
}

TEST_CASE("hypergraph_layers") {
  Rng rng(13);
  ExpectedNoise off;
  const Matrix hu = random_matrix(rng, 3, 2, 0.0, 1.0);
  const Matrix hi = random_matrix(rng, 4, 2, 0.0, 1.0);
  const Matrix e = random_matrix(rng, 4, 3);
  ad::Tape t;
  const auto out = hyper::hypergraph_layers(t.constant(hu), t.constant(hi), t.constant(e), 2, 0.0, off);
  const Matrix step = matmul(hi, hi.transposed());
  const Matrix e1 = matmul(step, e);
  CHECK(max_abs_diff(out.items.value(), matmul(step, e1)) < 1e-10);
  CHECK(max_abs_diff(out.users.value(), matmul(matmul(hu, hi.transposed()), e1)) < 1e-10);
  CHECK_THROWS(hyper::hypergraph_layers(t.constant(hu), t.constant(hi), t.constant(e), 0, 0.0, off));
}

TEST_CASE("fuse_local") {
  Rng rng(14);
  const Matrix u1 = random_matrix(rng, 2, 3), i1 = random_matrix(rng, 3, 3);
  const Matrix u2 = random_matrix(rng, 2, 3), i2 = random_matrix(rng, 3, 3);
  ad::Tape t;
  const hyper::LocalEmbeddings a{t.constant(u1), t.constant(i1)};
  const hyper::LocalEmbeddings b{t.constant(u2), t.constant(i2)};
  const Matrix single = hyper::fuse_local({a}).value();
  CHECK(single == Matrix{{u1(0, 0), u1(0, 1), u1(0, 2)},
                         {u1(1, 0), u1(1, 1), u1(1, 2)},
                         {i1(0, 0), i1(0, 1), i1(0, 2)},
                         {i1(1, 0), i1(1, 1), i1(1, 2)},
                         {i1(2, 0), i1(2, 1), i1(2, 2)}});
  CHECK(hyper::fuse_local({a, a}).value() == single * 2.0);
  const Matrix both = hyper::fuse_local({a, b}).value();
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      const double expected = r < 2 ? u1(r, c) + u2(r, c) : i1(r - 2, c) + i2(r - 2, c);
      CHECK(both(r, c) == expected);
    }
  const hyper::LocalEmbeddings wrong{t.constant(u2), t.constant(Matrix(4, 3))};
  CHECK_THROWS_AS(hyper::fuse_local({a, wrong}), ShapeError);
  CHECK_THROWS_AS(hyper::fuse_local({}), ShapeError);
}

TEST_CASE("hcl_loss examples") {
  const Matrix m{{1, 1}, {2, 2}};
  CHECK(eval([&](ad::Tape& t) { return hyper::hcl_loss(t.constant(m), t.constant(m), 0.2); })(0, 0) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(std::abs(eval([&](ad::Tape& t) {
                   return hyper::hcl_loss(t.constant(Matrix{{1, 2}}), t.constant(Matrix{{0, 1}}), 0.2);
                 })(0, 0)) < 1e-12);
  Rng rng(15);
  const Matrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 3, 4);
  Matrix scaled = b;
  for (std::size_t c = 0; c < 4; ++c) scaled(1, c) *= 0.01;
  const auto loss = [&](const Matrix& x) {
    return eval([&](ad::Tape& t) { return hyper::hcl_loss(t.constant(a), t.constant(x), 0.2); })(0, 0);
  };
  CHECK(loss(scaled) == doctest::Approx(loss(b)).epsilon(1e-12));
  CHECK(gradcheck([](ad::Tape&, const std::vector<ad::Var>& v) { return hyper::hcl_loss(v[0], v[1], 0.2); },
                  {a, b}) < 1e-4);
}

TEST_CASE("hypergraph pipeline gradients with frozen noise") {
  Rng rng(16);
  const auto ds = random_dataset(rng, 3, 4);
  const auto adj = data::build_normalized_adjacency(ds);
  const Matrix fv = random_matrix(rng, 4, 5), ft = random_matrix(rng, 4, 3);
  const Matrix vv = random_matrix(rng, 2, 5), vt = random_matrix(rng, 2, 3);
  const Matrix items = random_matrix(rng, 4, 3);
  const auto build = [&](ad::Tape& t, const std::vector<ad::Var>& v) {
    SampledNoise noise(2024);
    std::vector<hyper::LocalEmbeddings> locals;
    const Matrix* feats[] = {&fv, &ft};
    for (std::size_t m = 0; m < 2; ++m) {
      const auto deps = hyper::hyperedge_dependencies(t.constant(*feats[m]), v[m], adj.user_item);
      const ad::Var ri = hyper::gumbel_softmax_rows(deps.items, 0.2, noise.logistic_noise(4, 2));
      const ad::Var ru = hyper::gumbel_softmax_rows(deps.users, 0.2, noise.logistic_noise(3, 2));
      locals.push_back(hyper::hypergraph_layers(ru, ri, v[2], 2, 0.2, noise));
    }
    const ad::Var fused = hyper::fuse_local(locals);
    return ad::add(ad::add(hyper::hcl_loss(locals[0].users, locals[1].users, 0.2),
                           hyper::hcl_loss(locals[0].items, locals[1].items, 0.2)),
                   ad::scale(ad::sum_squares(fused), 0.1));
  };
  CHECK(gradcheck(build, {vv, vt, items}) < 1e-4);

  ad::Tape t1, t2;
  const double first = ad::scalar(build(t1, {t1.leaf(vv), t1.leaf(vt), t1.leaf(items)}));
  const double second = ad::scalar(build(t2, {t2.leaf(vv), t2.leaf(vt), t2.leaf(items)}));
  CHECK(first == second);
}
