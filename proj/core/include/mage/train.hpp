#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mage/babi.hpp"
#include "mage/model.hpp"
#include "mage/params.hpp"

namespace mage {

/// Raised when training hits a non-finite loss; carries a diagnostic dump.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  double clip_norm = 5.0;
  int epochs = 200;
  int batch_size = 1;
  int patience = 20;       // epochs without validation improvement
  bool stop_at_zero = true;  // no improvement is possible below zero error
  std::uint64_t seed = 1;
  double valid_fraction = 0.1;  // last stories of the training file
  bool link_question = true;    // question mentions join coreference chains
  std::string train_path;
  std::string test_path;
  std::string out_dir;  // checkpoint + result record, empty to skip
};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<double> train_loss;   // per epoch
  std::vector<double> valid_error;  // per epoch
  int best_epoch = -1;              // earliest minimum, 0-based
  double best_valid = 1.0;
  double test_error = 1.0;
};

/// Bias-corrected adaptive moment update over a parameter store's gradients.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParameterStore& store);
  int steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;  // aligned with store iteration order
};

/// Scales all gradients so the global norm is at most max_norm.
/// Returns the pre-clip norm.
double clip_gradients(ParameterStore& store, double max_norm);

/// Parsed splits plus the vocabulary/candidates/lexicon derived from training.
struct TaskData {
  std::vector<BabiExample> train, valid, test;
  Vocab vocab;
  std::vector<std::string> candidates;
  std::set<std::string> lexicon;
};

TaskData load_task(const TrainConfig& cfg);

RunResult train_run(const TrainConfig& cfg, const TaskData& data);
RunResult train_run(const TrainConfig& cfg);

/// Error rate of a model over examples (fraction of argmax mismatches).
double evaluate_split(const ReaderModel& model, const std::vector<ReaderModel::Prepared>& prepared);

/// Rebuilds the model from the config, loads the checkpoint and scores a split.
double evaluate_checkpoint(const TrainConfig& cfg, const std::string& checkpoint_path,
                           const std::string& split_path);

/// Runs one training per seed; returns the result with the lowest validation
/// error (ties break to the lowest seed).
RunResult multi_seed(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds);

std::string format_result_record(const TrainConfig& cfg, const RunResult& r);

std::vector<ReaderModel::Prepared> prepare_examples(const ReaderModel& model,
                                                    const std::vector<BabiExample>& examples,
                                                    const std::set<std::string>& lexicon,
                                                    bool link_question);

}  // namespace mage
