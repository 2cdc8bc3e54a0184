// SPDX-License-Identifier: Apache-2.0
#include "form/training.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace form {

using nlohmann::json;

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw ParamError("learning rate must be positive");
  if (batch_size < 1) throw ParamError("batch size must be >= 1");
  if (epochs < 0) throw ParamError("epochs must be >= 0");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw ParamError("validation fraction must be in [0, 1)");
  }
}

std::vector<Example> make_examples(const std::vector<ConversationThread>& threads,
                                   std::vector<EncodedThread> encoded) {
  if (threads.size() != encoded.size()) throw ParamError("threads/encodings size mismatch");
  std::vector<Example> out;
  out.reserve(threads.size());
  for (std::size_t i = 0; i < threads.size(); ++i) {
    out.push_back(Example{std::move(encoded[i]), threads[i].label});
  }
  return out;
}

LossBreakdown example_loss(const FormModel& model, const Example& example) {
  Tape tape;
  FormModel::Forward fwd = model.forward(tape, example.encoded);
  FormModel::Loss loss = model.loss(tape, fwd, example.label);
  LossBreakdown out;
  out.total = tape.value(loss.total)(0, 0);
  out.selection = tape.value(loss.selection)(0, 0);
  if (loss.reason.valid()) out.reason = tape.value(loss.reason)(0, 0);
  return out;
}

namespace {

int predict_example(const FormModel& model, const Example& ex) {
  Tape tape;
  FormModel::Forward fwd = model.forward(tape, ex.encoded);
  return model.predict_class(tape, fwd);
}

double accuracy_on(const FormModel& model, const std::vector<const Example*>& examples) {
  if (examples.empty()) return 0.0;
  int correct = 0;
  for (const Example* ex : examples) {
    if (predict_example(model, *ex) == static_cast<int>(ex->label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

}  // namespace

TrainResult train(const std::vector<Example>& train_examples, const ModelConfig& model_config,
                  const TrainConfig& config) {
  config.validate();
  if (train_examples.empty()) throw ParamError("empty training split");

  FormModel model(model_config, config.seed);

  // Deterministic validation carve-out from the tail of a seeded shuffle.
  std::vector<std::size_t> order(train_examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed ^ 0x5eedf01dull);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val =
      std::min(train_examples.size() - 1,
               static_cast<std::size_t>(config.validation_fraction *
                                        static_cast<double>(train_examples.size())));
  std::vector<const Example*> fit_set, val_set;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Example* ex = &train_examples[order[i]];
    if (i < order.size() - n_val) {
      fit_set.push_back(ex);
    } else {
      val_set.push_back(ex);
    }
  }

  TrainResult result{model_config, std::move(model), ParamStore{}, 0.0, -1, {}, {}};
  FormModel& m = result.final_model;
  AdamOptimizer opt(config.learning_rate);

  std::vector<std::size_t> batch_order(fit_set.size());
  std::iota(batch_order.begin(), batch_order.end(), 0);

  const auto snapshot_params = [](const FormModel& from, ParamStore& to) {
    to = from.params();
  };
  // Track the best validation epoch; fall back to train accuracy when the
  // validation carve-out is empty (tiny corpora).
  const auto validation_accuracy = [&]() {
    return val_set.empty() ? accuracy_on(m, fit_set) : accuracy_on(m, val_set);
  };

  snapshot_params(m, result.best_params);
  result.best_validation_accuracy = config.epochs > 0 ? -1.0 : validation_accuracy();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(batch_order.begin(), batch_order.end(), rng);
    double loss_sum = 0.0;
    std::size_t at = 0;
    while (at < batch_order.size()) {
      const std::size_t take =
          std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                batch_order.size() - at);
      std::unordered_map<std::string, Matrix> grads;
      for (const auto& name : m.params().names()) {
        const Matrix& p = m.params().at(name);
        grads.emplace(name, Matrix::Zero(p.rows(), p.cols()));
      }
      for (std::size_t b = 0; b < take; ++b) {
        const Example& ex = *fit_set[batch_order[at + b]];
        Tape tape;
        FormModel::Forward fwd = m.forward(tape, ex.encoded);
        FormModel::Loss loss = m.loss(tape, fwd, ex.label);
        tape.backward(loss.total);
        loss_sum += tape.value(loss.total)(0, 0);
        for (const auto& name : m.params().names()) {
          grads.at(name) += tape.grad(fwd.bound.at(name));
        }
      }
      for (auto& [name, g] : grads) g /= static_cast<double>(take);
      opt.step(m.params(), grads);
      at += take;
    }
    result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(fit_set.size()));

    const double val_acc = validation_accuracy();
    if (val_acc > result.best_validation_accuracy) {
      result.best_validation_accuracy = val_acc;
      result.best_epoch = epoch;
      snapshot_params(m, result.best_params);
    }
  }

  std::vector<const Example*> all;
  for (const Example& ex : train_examples) all.push_back(&ex);
  std::vector<int> gold, pred;
  for (const Example* ex : all) {
    gold.push_back(static_cast<int>(ex->label));
    pred.push_back(predict_example(m, *ex));
  }
  result.train_report = EvalReport::from_pairs(gold, pred);
  return result;
}

EvalReport evaluate(const FormModel& model, const std::vector<Example>& examples,
                    int fold_index) {
  std::vector<int> gold, pred;
  gold.reserve(examples.size());
  pred.reserve(examples.size());
  for (const Example& ex : examples) {
    gold.push_back(static_cast<int>(ex.label));
    pred.push_back(predict_example(model, ex));
  }
  return EvalReport::from_pairs(gold, pred, fold_index);
}

namespace {

std::vector<Example> subset_by_ids(const std::vector<Example>& corpus,
                                   const std::vector<std::string>& ids) {
  std::set<std::string> wanted(ids.begin(), ids.end());
  std::vector<Example> out;
  for (const Example& ex : corpus) {
    if (wanted.count(ex.encoded.thread_id)) out.push_back(ex);
  }
  return out;
}

}  // namespace

FoldOutcome train_fold(const std::vector<Example>& corpus, const FoldSplit& fold,
                       const ModelConfig& model_config, const TrainConfig& config) {
  const std::vector<Example> train_set = subset_by_ids(corpus, fold.train_ids);
  const std::vector<Example> test_set = subset_by_ids(corpus, fold.test_ids);
  if (train_set.empty()) {
    throw ParamError("fold " + std::to_string(fold.fold_index) + " has an empty training split");
  }
  FoldOutcome out{train(train_set, model_config, config), {}};
  // Test-time parameters are the best-validation snapshot.
  FormModel best(model_config, config.seed);
  best.params() = out.training.best_params;
  out.test_report = evaluate(best, test_set, fold.fold_index);
  return out;
}

CrossValidationResult cross_validate(const std::vector<Example>& corpus,
                                     const std::vector<FoldSplit>& folds,
                                     const ModelConfig& model_config, const TrainConfig& config) {
  CrossValidationResult out;
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> pooled{};
  for (const FoldSplit& fold : folds) {
    out.folds.push_back(train_fold(corpus, fold, model_config, config));
    const EvalReport& r = out.folds.back().test_report;
    out.mean_accuracy += r.accuracy;
    for (int c = 0; c < kNumClasses; ++c) out.mean_f1[static_cast<std::size_t>(c)] += r.f1[static_cast<std::size_t>(c)];
    for (int g = 0; g < kNumClasses; ++g) {
      for (int p = 0; p < kNumClasses; ++p) {
        pooled[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)] +=
            r.confusion[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
      }
    }
  }
  const double n = static_cast<double>(folds.size());
  if (!folds.empty()) {
    out.mean_accuracy /= n;
    for (double& f : out.mean_f1) f /= n;
  }
  out.pooled = EvalReport::from_confusion(pooled);
  return out;
}

std::vector<AblationRow> run_ablations(const std::vector<Example>& corpus, const FoldSplit& fold,
                                       const ModelConfig& model_config,
                                       const TrainConfig& config) {
  const Ablation variants[] = {Ablation::kNone, Ablation::kNoVisual,
                               Ablation::kNoFineReasoning, Ablation::kNoSelectionLoss};
  std::vector<AblationRow> rows;
  for (Ablation a : variants) {
    ModelConfig mc = model_config;
    mc.ablation = a;
    rows.push_back(AblationRow{a, train_fold(corpus, fold, mc, config).test_report});
  }
  return rows;
}

std::vector<SweepRow> sweep_top_k(const std::vector<Example>& corpus, const FoldSplit& fold,
                                  const ModelConfig& model_config, const TrainConfig& config,
                                  const std::vector<int>& k_values) {
  if (k_values.empty()) throw ParamError("sweep: k list is empty");
  std::vector<int> ks;
  for (int k : k_values) {
    if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  }
  std::vector<SweepRow> rows;
  for (int k : ks) {
    ModelConfig mc = model_config;
    mc.top_k = k;
    rows.push_back(SweepRow{k, train_fold(corpus, fold, mc, config).test_report});
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "k,accuracy,f1_false,f1_true,f1_unverified,f1_nonrumor\n";
  for (const auto& r : rows) {
    out << r.k << "," << r.report.accuracy;
    for (double f : r.report.f1) out << "," << f;
    out << "\n";
  }
  return out.str();
}

std::string reports_to_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "fold,accuracy,f1_false,f1_true,f1_unverified,f1_nonrumor\n";
  for (const auto& r : reports) {
    out << r.fold_index << "," << r.accuracy;
    for (double f : r.f1) out << "," << f;
    out << "\n";
  }
  return out.str();
}

json report_to_json(const EvalReport& report) {
  json j;
  j["fold"] = report.fold_index;
  j["accuracy"] = report.accuracy;
  j["f1"] = {{"false", report.f1[0]},
             {"true", report.f1[1]},
             {"unverified", report.f1[2]},
             {"non-rumor", report.f1[3]}};
  j["confusion"] = json::array();
  for (const auto& row : report.confusion) {
    j["confusion"].push_back(row);
  }
  return j;
}

json model_config_to_json(const ModelConfig& config) {
  return json{{"d_t", config.d_t},       {"d_i", config.d_i},
              {"d", config.d},           {"d_h", config.d_h},
              {"top_k", config.top_k},   {"ablation", to_string(config.ablation)},
              {"mask_padding", config.mask_padding}, {"untie_wz", config.untie_wz}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.d_t = j.at("d_t");
  c.d_i = j.at("d_i");
  c.d = j.at("d");
  c.d_h = j.at("d_h");
  c.top_k = j.at("top_k");
  c.ablation = ablation_from_string(j.at("ablation"));
  c.mask_padding = j.at("mask_padding");
  c.untie_wz = j.at("untie_wz");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const FormModel& model) {
  json meta;
  meta["model_config"] = model_config_to_json(model.config());
  model.params().save(path, meta);
}

FormModel load_checkpoint(const std::filesystem::path& path) {
  const json meta = ParamStore::load_meta(path);
  if (!meta.contains("model_config")) {
    throw ConfigError("checkpoint " + path.string() + " lacks a model_config manifest entry");
  }
  FormModel model(model_config_from_json(meta["model_config"]), /*seed=*/0);
  model.params().load(path);
  return model;
}

}  // namespace form
