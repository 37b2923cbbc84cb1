#include "srgf/trainer.hpp"

#include <cmath>
#include <stdexcept>

#include "srgf/log.hpp"
#include "srgf/metrics.hpp"

namespace srgf {

bool EarlyStopping::update(double metric) {
  improved_ = !seen_ || metric > best_;
  if (improved_) {
    best_ = metric;
    seen_ = true;
    stale_ = 0;
    return false;
  }
  ++stale_;
  return stale_ >= patience_;
}

Trainer::Trainer(Model& model, const data::InteractionDataset& ds)
    : model_(model), ds_(ds), sampler_(Rng(model.config().seed).fork(2)), noise_(Rng(model.config().seed).fork(3)) {
  if (ds.user_count() != model.graph().users || ds.item_count() != model.graph().items) {
    throw ShapeError("Trainer: dataset does not match the model graph");
  }
}

namespace {

std::string snapshot(const Model& model, std::size_t epoch, std::size_t batch, double bpr, double total) {
  std::string out = "non-finite training state at epoch " + std::to_string(epoch) + " batch " +
                    std::to_string(batch) + ": bpr=" + log::num(bpr) + " total=" + log::num(total);
  for (const auto& p : model.parameters()) {
    out += " |" + p.name + "|=" + log::num(frobenius_norm(p.value));
    if (!p.value.all_finite()) out += "(non-finite)";
  }
  return out;
}

double value_or_zero(const std::optional<ad::Var>& v) { return v ? ad::scalar(*v) : 0.0; }

}  // namespace

EpochStats Trainer::train_epoch() {
  const TrainConfig& cfg = model_.config();
  ++epoch_;
  const std::size_t samples = cfg.samples_per_epoch > 0 ? cfg.samples_per_epoch : ds_.train().size();
  const auto triples = data::sample_bpr_triples(ds_, samples, sampler_);

  EpochStats stats;
  stats.epoch = epoch_;
  std::vector<Matrix*> params;
  for (auto& p : model_.parameters()) params.push_back(&p.value);

  std::size_t batch_no = 0;
  for (std::size_t begin = 0; begin < triples.size(); begin += cfg.batch_size, ++batch_no) {
    const std::size_t end = std::min(triples.size(), begin + cfg.batch_size);
    const std::vector<data::BprTriple> batch(triples.begin() + static_cast<std::ptrdiff_t>(begin),
                                             triples.begin() + static_cast<std::ptrdiff_t>(end));
    ad::Tape tape;
    const auto leaves = model_.leaves(tape);
    SampledNoise noise(noise_.next());
    auto fail = [&](double bpr_value, double total_value, const std::string& cause) {
      std::string msg = snapshot(model_, epoch_, batch_no, bpr_value, total_value);
      if (!cause.empty()) msg += " cause: " + cause;
      log::error("numeric_failure", {{"detail", msg}});
      throw NumericError(msg);
    };
    std::optional<Forward> forward;
    try {
      forward.emplace(model_.forward(tape, leaves, noise));
    } catch (const std::domain_error& e) {
      fail(std::nan(""), std::nan(""), e.what());
    }
    const Forward& f = *forward;

    std::vector<ad::Var> reg{batch_id_rows(f.id, ds_.user_count(), batch)};
    reg.insert(reg.end(), f.projections.begin(), f.projections.end());
    const ad::Var bpr = bpr_loss(f.final, ds_.user_count(), batch, cfg.lambda1, reg, cfg.bpr_sum_margin);
    const ad::Var total =
        joint_loss(bpr, f.hcl_users, f.hcl_items, f.mcl_users, f.mcl_items, cfg.lambda2, cfg.gamma);

    const double total_value = ad::scalar(total);
    if (!std::isfinite(total_value)) fail(ad::scalar(bpr), total_value, "");
    stats.bpr += ad::scalar(bpr);
    stats.hcl += value_or_zero(f.hcl_users) + value_or_zero(f.hcl_items);
    stats.mcl += value_or_zero(f.mcl_users) + value_or_zero(f.mcl_items);
    stats.total += total_value;

    tape.backward(total);
    std::vector<Matrix> grads;
    grads.reserve(leaves.size());
    for (const ad::Var& leaf : leaves) grads.push_back(tape.gradient(leaf));
    adam_step(model_.optimizer(), params, grads);

    for (Matrix* p : params) round_to_float(*p);
    for (Matrix& m : model_.optimizer().first_moment) round_to_float(m);
    for (Matrix& m : model_.optimizer().second_moment) round_to_float(m);
    for (const Matrix* p : params) {
      if (!p->all_finite()) fail(ad::scalar(bpr), total_value, "parameter update");
    }
  }
  return stats;
}

double Trainer::probe_loss(const std::vector<data::BprTriple>& triples) const {
  const TrainConfig& cfg = model_.config();
  ad::Tape tape;
  const auto leaves = model_.leaves(tape);
  ExpectedNoise noise;
  const Forward f = model_.forward(tape, leaves, noise);
  std::vector<ad::Var> reg{batch_id_rows(f.id, ds_.user_count(), triples)};
  reg.insert(reg.end(), f.projections.begin(), f.projections.end());
  const ad::Var bpr = bpr_loss(f.final, ds_.user_count(), triples, cfg.lambda1, reg, cfg.bpr_sum_margin);
  return ad::scalar(joint_loss(bpr, f.hcl_users, f.hcl_items, f.mcl_users, f.mcl_items, cfg.lambda2, cfg.gamma));
}

std::optional<double> Trainer::validation_recall() const {
  bool any = false;
  for (const auto& v : ds_.val_items()) any = any || !v.empty();
  if (!any) return std::nullopt;
  const auto m = eval::evaluate_topn(model_.embeddings(), ds_.user_count(), ds_.train_items(), ds_.val_items(), {20});
  return m.recall_at(20);
}

TrainReport Trainer::fit() {
  return fit([this](const Model&) { return validation_recall(); });
}

TrainReport Trainer::fit(const Validator& validator) {
  const TrainConfig& cfg = model_.config();
  TrainReport report;
  EarlyStopping stopper(cfg.patience);
  std::vector<Parameter> best_params = model_.parameters();
  AdamState best_adam = model_.optimizer();
  bool warned = false;

  for (std::size_t e = 0; e < cfg.max_epochs; ++e) {
    EpochStats stats = train_epoch();
    stats.val_recall = validator(model_);
    report.epochs.push_back(stats);

    std::vector<log::Field> fields{{"epoch", log::num(stats.epoch)},
                                   {"bpr", log::num(stats.bpr)},
                                   {"hcl", log::num(stats.hcl)},
                                   {"mcl", log::num(stats.mcl)},
                                   {"total", log::num(stats.total)}};
    if (!stats.val_recall) {
      if (!warned) log::warn("no_validation", {{"detail", "empty validation set; training for max_epochs"}});
      warned = true;
      report.best_epoch = stats.epoch;
      report.best_trace.push_back(0.0);
      log::emit(log::Level::Info, "epoch", fields);
      continue;
    }
    const bool stop = stopper.update(*stats.val_recall);
    if (stopper.improved()) {
      best_params = model_.parameters();
      best_adam = model_.optimizer();
      report.best_epoch = stats.epoch;
    }
    report.best_val = stopper.best();
    report.best_trace.push_back(stopper.best());
    fields.push_back({"val_r20", log::num(*stats.val_recall)});
    fields.push_back({"best", log::num(stopper.best())});
    log::emit(log::Level::Info, "epoch", fields);
    if (stop) {
      report.stop_reason = "early_stop";
      break;
    }
  }
  if (report.stop_reason.empty()) report.stop_reason = "max_epochs";
  if (!warned) {
    model_.parameters() = best_params;
    model_.optimizer() = best_adam;
  }
  log::info("fit_done", {{"best_epoch", log::num(report.best_epoch)},
                         {"best_val_r20", log::num(report.best_val)},
                         {"stop", report.stop_reason}});
  return report;
}

}  // namespace srgf
