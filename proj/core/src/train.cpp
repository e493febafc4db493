#include "mage/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace mage {

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ParameterStore& store) {
  if (m_.empty()) {
    for (Index i = 0; i < store.size(); ++i) {
      m_.push_back(Tensor::zeros(store.at(i).value.shape()));
      v_.push_back(Tensor::zeros(store.at(i).value.shape()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (Index i = 0; i < store.size(); ++i) {
    Parameter& p = store.at(i);
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (Index j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double clip_gradients(ParameterStore& store, double max_norm) {
  const double norm = store.grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Index i = 0; i < store.size(); ++i) {
      Tensor& g = store.at(i).grad;
      for (Index j = 0; j < g.size(); ++j) g[j] *= s;
    }
  }
  return norm;
}

TaskData load_task(const TrainConfig& cfg) {
  const BabiFile train_file = parse_babi(cfg.train_path);
  if (train_file.examples.empty()) throw std::runtime_error("empty training file: " + cfg.train_path);

  TaskData data;
  data.vocab = Vocab::build(train_file.examples);
  data.candidates = build_candidates(train_file.examples);
  data.lexicon = derive_entity_lexicon(train_file);

  // Validation split: the last fraction of the training stories.
  const int n_stories = train_file.n_stories;
  const int valid_from =
      n_stories - std::max(1, static_cast<int>(std::floor(n_stories * cfg.valid_fraction)));
  for (const auto& ex : train_file.examples)
    (ex.story_index >= valid_from ? data.valid : data.train).push_back(ex);

  if (!cfg.test_path.empty()) {
    data.test = parse_babi(cfg.test_path).examples;
  }
  return data;
}

std::vector<ReaderModel::Prepared> prepare_examples(const ReaderModel& model,
                                                    const std::vector<BabiExample>& examples,
                                                    const std::set<std::string>& lexicon,
                                                    bool link_question) {
  std::vector<ReaderModel::Prepared> out;
  out.reserve(examples.size());
  for (const auto& ex : examples)
    out.push_back(model.prepare(ex, extract_coref(ex, lexicon, link_question)));
  return out;
}

double evaluate_split(const ReaderModel& model, const std::vector<ReaderModel::Prepared>& prepared) {
  if (prepared.empty()) return 0.0;
  Index errors = 0;
  Tape tape;
  for (const auto& p : prepared) {
    tape.reset();
    const auto out = model.forward(tape, p);
    if (!out.correct) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(prepared.size());
}

namespace {

std::vector<Tensor> snapshot(const ParameterStore& store) {
  std::vector<Tensor> vals;
  vals.reserve(store.size());
  for (Index i = 0; i < store.size(); ++i) vals.push_back(store.at(i).value);
  return vals;
}

void restore(ParameterStore& store, const std::vector<Tensor>& vals) {
  for (Index i = 0; i < store.size(); ++i) store.at(i).value = vals[i];
}

}  // namespace

RunResult train_run(const TrainConfig& cfg, const TaskData& data) {
  cfg.model.validate();
  if (cfg.batch_size != 1)
    throw std::invalid_argument("batch size is fixed at one graph per step");

  ReaderModel model(cfg.model, data.vocab, data.candidates, cfg.seed);
  const auto train_prep = prepare_examples(model, data.train, data.lexicon, cfg.link_question);
  const auto valid_prep = prepare_examples(model, data.valid, data.lexicon, cfg.link_question);
  const auto test_prep = prepare_examples(model, data.test, data.lexicon, cfg.link_question);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  Adam adam(cfg.lr);
  Tape tape;

  RunResult result;
  result.seed = cfg.seed;
  std::vector<Tensor> best_params = snapshot(model.store());
  int since_best = 0;

  std::vector<Index> order(train_prep.size());
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    Index loss_count = 0;
    for (Index idx : order) {
      const auto& prep = train_prep[idx];
      tape.reset();
      const auto out = model.forward(tape, prep);
      if (!out.has_loss) continue;
      const double loss = tape.value(out.loss).item();
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << ", example " << idx
           << "; grad norm=" << model.store().grad_norm();
        throw NumericalError(os.str());
      }
      loss_sum += loss;
      ++loss_count;
      model.store().zero_grads();
      tape.backward(out.loss);
      clip_gradients(model.store(), cfg.clip_norm);
      adam.step(model.store());
    }
    result.train_loss.push_back(loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0);

    const double verr = evaluate_split(model, valid_prep);
    result.valid_error.push_back(verr);
    if (result.best_epoch < 0 || verr < result.best_valid) {
      result.best_valid = verr;
      result.best_epoch = epoch;
      best_params = snapshot(model.store());
      since_best = 0;
    } else {
      ++since_best;
    }
    if (cfg.stop_at_zero && result.best_valid == 0.0) break;
    if (since_best >= cfg.patience) break;
  }

  restore(model.store(), best_params);
  result.test_error = test_prep.empty() ? 1.0 : evaluate_split(model, test_prep);

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    model.store().save(cfg.out_dir + "/model.ckpt");
    std::ofstream os(cfg.out_dir + "/result.txt");
    os << format_result_record(cfg, result);
  }
  return result;
}

RunResult train_run(const TrainConfig& cfg) { return train_run(cfg, load_task(cfg)); }

double evaluate_checkpoint(const TrainConfig& cfg, const std::string& checkpoint_path,
                           const std::string& split_path) {
  const TaskData data = load_task(cfg);
  ReaderModel model(cfg.model, data.vocab, data.candidates, cfg.seed);
  model.store().load(checkpoint_path);
  const auto split = parse_babi(split_path).examples;
  const auto prepared = prepare_examples(model, split, data.lexicon, cfg.link_question);
  return evaluate_split(model, prepared);
}

RunResult multi_seed(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("multi_seed: need at least one seed");
  const TaskData data = load_task(cfg);
  RunResult best;
  bool have = false;
  for (const auto seed : seeds) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = seed;
    if (!cfg.out_dir.empty()) run_cfg.out_dir = cfg.out_dir + "/seed" + std::to_string(seed);
    const RunResult r = train_run(run_cfg, data);
    // selection looks at validation only, never test; ties go to the lowest seed
    if (!have || r.best_valid < best.best_valid ||
        (r.best_valid == best.best_valid && r.seed < best.seed)) {
      best = r;
      have = true;
    }
  }
  return best;
}

std::string format_result_record(const TrainConfig& cfg, const RunResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << "encoder=" << to_string(cfg.model.encoder) << '\n'
     << "head=" << to_string(cfg.model.head) << '\n'
     << "d_emb=" << cfg.model.d_emb << '\n'
     << "seq_dim=" << cfg.model.seq_dim << '\n'
     << "coref_dim=" << cfg.model.coref_dim << '\n'
     << "layers=" << cfg.model.layers << '\n'
     << "m_max=" << cfg.model.m_max << '\n'
     << "interpolate_with_memory=" << (cfg.model.interpolate_with_memory ? 1 : 0) << '\n'
     << "lr=" << cfg.lr << '\n'
     << "clip_norm=" << cfg.clip_norm << '\n'
     << "epochs=" << cfg.epochs << '\n'
     << "batch_size=" << cfg.batch_size << '\n'
     << "patience=" << cfg.patience << '\n'
     << "seed=" << r.seed << '\n'
     << "train=" << cfg.train_path << '\n'
     << "test=" << cfg.test_path << '\n';
  for (std::size_t e = 0; e < r.train_loss.size(); ++e)
    os << "epoch_" << e << "=train_loss:" << r.train_loss[e] << ",valid_error:" << r.valid_error[e]
       << '\n';
  os << "best_epoch=" << r.best_epoch << '\n'
     << "best_valid=" << r.best_valid << '\n'
     << "test_error=" << r.test_error << '\n';
  return os.str();
}

}  // namespace mage
