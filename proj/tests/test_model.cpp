#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "srgf/model.hpp"

using namespace srgf;
using srgf::testing::eval;
using srgf::testing::gradcheck;
using srgf::testing::random_matrix;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg = preset_config("baby");
  cfg.dim = 4;
  cfg.heads = 4;
  cfg.hyperedges = 3;
  cfg.attention = attn::AttentionMode::Dense;
  return cfg;
}

// 4 users, 4 items, two 3-d modalities.
testing::PlantedData tiny_data() {
  auto ds = testing::make_dataset(4, 4, {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}, {2, 3}, {3, 3}, {3, 0}});
  Rng rng(44);
  testing::PlantedData out{ds, {}};
  out.features.push_back({"visual", random_matrix(rng, 4, 3)});
  out.features.push_back({"textual", random_matrix(rng, 4, 3)});
  return out;
}

std::vector<std::string> names(const Model& m) {
  std::vector<std::string> out;
  for (const auto& p : m.parameters()) out.push_back(p.name);
  return out;
}

}  // namespace

TEST_CASE("final_embeddings") {
  Rng rng(1);
  const Matrix lge = random_matrix(rng, 5, 3), str = random_matrix(rng, 5, 3);
  CHECK(eval([&](ad::Tape& t) { return final_embeddings(t.constant(lge), t.constant(Matrix(5, 3))); }) == lge);
  const Matrix once = eval([&](ad::Tape& t) { return final_embeddings(t.constant(lge), t.constant(str)); });
  const Matrix twice =
      eval([&](ad::Tape& t) { return final_embeddings(t.constant(lge * 2.0), t.constant(str * 2.0)); });
  CHECK(max_abs_diff(twice, once * 2.0) < 1e-15);
  for (std::size_t k = 0; k < once.size(); ++k) CHECK(once.values()[k] == lge.values()[k] + str.values()[k]);
  CHECK_THROWS_AS(eval([&](ad::Tape& t) { return final_embeddings(t.constant(lge), t.constant(Matrix(4, 3))); }),
                  ShapeError);
}

TEST_CASE("bpr_loss examples") {
  // user 0, items 0 and 1 with equal scores.
  const Matrix e{{1, 0}, {0.5, 2}, {0.5, -1}};
  const std::vector<data::BprTriple> neutral{{0, 0, 1}};
  const double plain = eval([&](ad::Tape& t) { return bpr_loss(t.constant(e), 1, neutral, 0.0, {}); })(0, 0);
  CHECK(plain == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(std::abs(std::log(2.0) - 0.6931) < 1e-4);

  const double reg = eval([&](ad::Tape& t) {
                       return bpr_loss(t.constant(e), 1, neutral, 0.1, {t.constant(Matrix{{0.6, 0.8}})});
                     })(0, 0);
  CHECK(reg == doctest::Approx(std::log(2.0) + 0.1).epsilon(1e-14));

  const Matrix far{{1, 0}, {1000, 0}, {-1000, 0}};
  const Matrix theta{{3, 4}};
  const double saturated = eval([&](ad::Tape& t) {
                             return bpr_loss(t.constant(far), 1, neutral, 0.01, {t.constant(theta)});
                           })(0, 0);
  CHECK(saturated == doctest::Approx(0.01 * 25.0).epsilon(1e-12));

  // r+ = 1, r- = 2: the difference form sees a wrong ranking, the printed form does not.
  const Matrix ranked{{1, 0}, {1, 0}, {2, 0}};
  const double diff = eval([&](ad::Tape& t) { return bpr_loss(t.constant(ranked), 1, neutral, 0.0, {}); })(0, 0);
  const double sum = eval([&](ad::Tape& t) { return bpr_loss(t.constant(ranked), 1, neutral, 0.0, {}, true); })(0, 0);
  CHECK(diff == doctest::Approx(std::log1p(std::exp(1.0))).epsilon(1e-14));
  CHECK(sum == doctest::Approx(std::log1p(std::exp(-3.0))).epsilon(1e-14));
}

TEST_CASE("bpr_loss sums over triples") {
  Rng rng(2);
  const Matrix e = random_matrix(rng, 6, 3);
  const std::vector<data::BprTriple> triples{{0, 0, 1}, {1, 2, 0}, {2, 1, 2}, {0, 2, 1}};
  double expected = 0.0;
  for (const auto& tr : triples) {
    double rp = 0, rn = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      rp += e(tr.user, c) * e(3 + tr.positive, c);
      rn += e(tr.user, c) * e(3 + tr.negative, c);
    }
    expected -= std::log(1.0 / (1.0 + std::exp(-(rp - rn))));
  }
  CHECK(eval([&](ad::Tape& t) { return bpr_loss(t.constant(e), 3, triples, 0.0, {}); })(0, 0) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS(eval([&](ad::Tape& t) { return bpr_loss(t.constant(e), 3, {}, 0.0, {}); }));
  CHECK(gradcheck([&](ad::Tape&, const std::vector<ad::Var>& v) { return bpr_loss(v[0], 3, triples, 0.1, {v[0]}); },
                  {e}) < 1e-4);
}

TEST_CASE("joint_loss") {
  ad::Tape t;
  const ad::Var bpr = t.constant(Matrix{{2.5}});
  const ad::Var hu = t.constant(Matrix{{3.0}}), hi = t.constant(Matrix{{5.0}});
  const ad::Var mu = t.constant(Matrix{{7.0}}), mi = t.constant(Matrix{{11.0}});
  CHECK(ad::scalar(joint_loss(bpr, hu, hi, mu, mi, 0.0, 0.0)) == 2.5);
  CHECK(ad::scalar(joint_loss(bpr, hu, hi, mu, mi, 1e-3, 1e-6)) == doctest::Approx(2.5 + 8e-3 + 18e-6).epsilon(1e-15));
  CHECK(ad::scalar(joint_loss(bpr, std::nullopt, std::nullopt, mu, std::nullopt, 0.5, 2.0)) == 16.5);
  CHECK(preset_config("baby").gamma == 1e-6);
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const double c[5] = {rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0, 5)};
    const double l2 = rng.uniform(), g = rng.uniform();
    ad::Tape tt;
    const double got = ad::scalar(joint_loss(tt.constant(Matrix{{c[0]}}), tt.constant(Matrix{{c[1]}}),
                                             tt.constant(Matrix{{c[2]}}), tt.constant(Matrix{{c[3]}}),
                                             tt.constant(Matrix{{c[4]}}), l2, g));
    CHECK(got == doctest::Approx(c[0] + l2 * (c[1] + c[2]) + g * (c[3] + c[4])).epsilon(1e-14));
  }
}

TEST_CASE("predict_scores") {
  const Matrix e{{1, 0}, {0.5, 2}, {0, 3}};
  CHECK(predict_scores(e, 1, 0, {0})[0] == 0.5);
  CHECK(predict_scores(e, 1, 0, {1})[0] == 0.0);
  CHECK_THROWS_AS(predict_scores(e, 1, 1, {0}), std::out_of_range);
  CHECK_THROWS_AS(predict_scores(e, 1, 0, {2}), std::out_of_range);

  Rng rng(4);
  const Matrix r = random_matrix(rng, 6, 3);
  Matrix padded(6, 5);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t c = 0; c < 3; ++c) padded(i, c) = r(i, c);
  for (std::size_t u = 0; u < 2; ++u) CHECK(predict_scores(r, 2, u, {0, 1, 2, 3}) == predict_scores(padded, 2, u, {0, 1, 2, 3}));
}

TEST_CASE("ablation flags remove parameters") {
  const auto data = tiny_data();
  const auto build = [&](const std::string& tag) {
    TrainConfig cfg = tiny_config();
    cfg.ablation = parse_ablation(tag);
    return Model(cfg, GraphContext::build(data.dataset, data.features, cfg.ablation));
  };
  const Model full = build("full");
  CHECK(names(full) == std::vector<std::string>{"E_id", "W_visual", "V_visual", "W_textual", "V_textual", "W_Q", "W_K",
                                                "W_V"});
  const Model no_gt = build("w/GT");
  CHECK(no_gt.parameter_count() < full.parameter_count());
  CHECK(no_gt.find("W_Q") == nullptr);
  CHECK(build("w/MCL").find("W_visual") == nullptr);
  CHECK(build("w/h").find("V_textual") == nullptr);
  const Model no_v = build("w/v");
  CHECK(no_v.find("V_visual") == nullptr);
  CHECK(no_v.find("V_textual") != nullptr);
  CHECK(no_v.find("W_textual") == nullptr);
  CHECK(names(build("w/GT+w/MCL+w/v+w/t+w/h")) == std::vector<std::string>{"E_id"});

  for (const std::string tag : {"full", "w/GT", "w/MCL", "w/v", "w/t", "w/h", "w/GT+w/MCL+w/v+w/t+w/h"}) {
    const Model m = build(tag);
    CHECK(m.parameter_count() <= full.parameter_count());
    for (const auto& p : m.parameters()) {
      const Parameter* q = full.find(p.name);
      REQUIRE(q != nullptr);
      CHECK(q->value.same_shape(p.value));
    }
  }
}

TEST_CASE("all ablations together reduce to propagated ids") {
  const auto data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.ablation = parse_ablation("w/GT+w/MCL+w/v+w/t+w/h");
  const Model m(cfg, GraphContext::build(data.dataset, data.features, cfg.ablation));
  const Matrix a = testing::dense_normalized(data.dataset);
  const Matrix& e = m.parameters()[0].value;
  const Matrix expected = (e + matmul(a, e) + matmul(a, matmul(a, e))) * (1.0 / 3.0);
  CHECK(max_abs_diff(m.embeddings(), expected) < 1e-12);
}

TEST_CASE("initialization is Xavier-uniform and float32-exact") {
  const auto data = tiny_data();
  const Model m(tiny_config(), GraphContext::build(data.dataset, data.features, {}));
  for (const auto& p : m.parameters()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
    for (double v : p.value.values()) {
      CHECK(std::abs(v) <= bound);
      CHECK(v == static_cast<double>(static_cast<float>(v)));
    }
  }
  const Model again(tiny_config(), GraphContext::build(data.dataset, data.features, {}));
  CHECK(m.parameters()[0].value == again.parameters()[0].value);
}

TEST_CASE("joint loss gradient matches finite differences for every parameter group") {
  const auto data = tiny_data();
  for (const std::string tag : {"full", "w/GT", "w/h"}) {
    TrainConfig cfg = tiny_config();
    cfg.ablation = parse_ablation(tag);
    cfg.lambda2 = 0.3;
    cfg.gamma = 0.2;
    const Model model(cfg, GraphContext::build(data.dataset, data.features, cfg.ablation));
    const std::vector<data::BprTriple> triples{{0, 0, 2}, {1, 2, 3}, {2, 3, 0}, {3, 0, 1}};
    std::vector<Matrix> inputs;
    for (const auto& p : model.parameters()) inputs.push_back(p.value);
    const auto build = [&](ad::Tape&, const std::vector<ad::Var>& v) {
      SampledNoise noise(99);
      const Forward f = model.forward(*v[0].tape(), v, noise);
      std::vector<ad::Var> reg{batch_id_rows(f.id, 4, triples)};
      reg.insert(reg.end(), f.projections.begin(), f.projections.end());
      const ad::Var bpr = bpr_loss(f.final, 4, triples, 0.05, reg);
      return joint_loss(bpr, f.hcl_users, f.hcl_items, f.mcl_users, f.mcl_items, cfg.lambda2, cfg.gamma);
    };
    CAPTURE(tag);
    CHECK(gradcheck(build, inputs) < 1e-3);
  }
}
