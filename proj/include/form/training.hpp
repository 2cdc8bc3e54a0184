// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "form/encoders.hpp"
#include "form/metrics.hpp"
#include "form/model.hpp"

namespace form {

struct TrainConfig {
  double learning_rate = 5e-5;
  int batch_size = 4;
  int epochs = 50;
  std::uint64_t seed = 1;
  // Fraction of the training split held out for best-epoch selection.
  double validation_fraction = 0.1;
  bool deterministic = true;
  void validate() const;
};

// One thread ready for the trainer.
struct Example {
  EncodedThread encoded;
  RumorLabel label = RumorLabel::kNonRumor;
};

std::vector<Example> make_examples(const std::vector<ConversationThread>& threads,
                                   std::vector<EncodedThread> encoded);

// Loss for one example (forward + loss on a throwaway tape).
struct LossBreakdown {
  double total = 0.0;
  double selection = 0.0;
  double reason = 0.0;
};
LossBreakdown example_loss(const FormModel& model, const Example& example);

struct TrainResult {
  ModelConfig model_config;
  // Parameters at the last epoch and at the best validation epoch.
  FormModel final_model;
  ParamStore best_params;
  double best_validation_accuracy = 0.0;
  int best_epoch = -1;
  std::vector<double> epoch_mean_loss;
  EvalReport train_report;  // final-epoch parameters on the train split
};

// Joint training of both loss terms with Adam. Deterministic for a fixed
// seed: initialization, batching order and the validation split all derive
// from config.seed.
TrainResult train(const std::vector<Example>& train_examples, const ModelConfig& model_config,
                  const TrainConfig& config);

EvalReport evaluate(const FormModel& model, const std::vector<Example>& examples,
                    int fold_index = -1);

// Train on fold.train_ids, evaluate on fold.test_ids (best-epoch params).
struct FoldOutcome {
  TrainResult training;
  EvalReport test_report;
};
FoldOutcome train_fold(const std::vector<Example>& corpus, const FoldSplit& fold,
                       const ModelConfig& model_config, const TrainConfig& config);

// Full-protocol run: every fold, mean-over-folds and concatenated-prediction
// scoring side by side.
struct CrossValidationResult {
  std::vector<FoldOutcome> folds;
  EvalReport pooled;            // confusion summed over folds
  double mean_accuracy = 0.0;   // mean of per-fold accuracies
  std::array<double, kNumClasses> mean_f1{};
};
CrossValidationResult cross_validate(const std::vector<Example>& corpus,
                                     const std::vector<FoldSplit>& folds,
                                     const ModelConfig& model_config, const TrainConfig& config);

// Ablation table: the full model plus the three reduced variants, trained
// under identical settings.
struct AblationRow {
  Ablation ablation;
  EvalReport report;
};
std::vector<AblationRow> run_ablations(const std::vector<Example>& corpus, const FoldSplit& fold,
                                       const ModelConfig& model_config, const TrainConfig& config);

// Accuracy as a function of the selection budget k; duplicates are dropped
// keeping first occurrence.
struct SweepRow {
  int k;
  EvalReport report;
};
std::vector<SweepRow> sweep_top_k(const std::vector<Example>& corpus, const FoldSplit& fold,
                                  const ModelConfig& model_config, const TrainConfig& config,
                                  const std::vector<int>& k_values);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);
std::string reports_to_csv(const std::vector<EvalReport>& reports);
nlohmann::json report_to_json(const EvalReport& report);

// Checkpoint helpers: parameters + model config echoed into the manifest.
void save_checkpoint(const std::filesystem::path& path, const FormModel& model);
FormModel load_checkpoint(const std::filesystem::path& path);
nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace form
