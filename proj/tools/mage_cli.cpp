// Command line for training and probing DAG-encoded readers on bAbi-style
// task files: train / eval / mix-gen / graph-dump / grad-check / story-gen.
// Exit codes: 0 success, 2 parse or config error, 3 numerical abort.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mage/babi.hpp"
#include "mage/babi_mix.hpp"
#include "mage/babi_sim.hpp"
#include "mage/graph_io.hpp"
#include "mage/model.hpp"
#include "mage/train.hpp"
#include "mage/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct CliConfig {
  mage::TrainConfig train;
  std::string encoder = "mage";
  std::string head = "classify";
  int seeds = 1;
  std::string config_path;
};

// Line-based key=value file; keys are the option names without the leading
// dashes. Values given on the command line override the file.
void apply_config_file(CliConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  auto to_bool = [](const std::string& v) { return v == "1" || v == "true" || v == "on"; };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "encoder") cfg.encoder = value;
    else if (key == "head") cfg.head = value;
    else if (key == "d-emb") cfg.train.model.d_emb = std::stoul(value);
    else if (key == "seq-dim") cfg.train.model.seq_dim = std::stoul(value);
    else if (key == "coref-dim") cfg.train.model.coref_dim = std::stoul(value);
    else if (key == "layers") cfg.train.model.layers = std::stoul(value);
    else if (key == "m-max") cfg.train.model.m_max = std::stoul(value);
    else if (key == "interpolate-with-memory") cfg.train.model.interpolate_with_memory = to_bool(value);
    else if (key == "lr") cfg.train.lr = std::stod(value);
    else if (key == "clip-norm") cfg.train.clip_norm = std::stod(value);
    else if (key == "epochs") cfg.train.epochs = std::stoi(value);
    else if (key == "batch-size") cfg.train.batch_size = std::stoi(value);
    else if (key == "patience") cfg.train.patience = std::stoi(value);
    else if (key == "seed") cfg.train.seed = std::stoull(value);
    else if (key == "seeds") cfg.seeds = std::stoi(value);
    else if (key == "valid-fraction") cfg.train.valid_fraction = std::stod(value);
    else if (key == "link-question") cfg.train.link_question = to_bool(value);
    else if (key == "stop-at-zero") cfg.train.stop_at_zero = to_bool(value);
    else if (key == "train") cfg.train.train_path = value;
    else if (key == "test") cfg.train.test_path = value;
    else if (key == "out") cfg.train.out_dir = value;
    else
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
}

void add_model_options(CLI::App* cmd, CliConfig& cfg) {
  cmd->add_option("--encoder", cfg.encoder, "bigru|onehot|mage|mage-shared");
  cmd->add_option("--head", cfg.head, "classify|extractive");
  cmd->add_option("--d-emb", cfg.train.model.d_emb, "embedding width");
  cmd->add_option("--seq-dim", cfg.train.model.seq_dim, "sequential state width per direction");
  cmd->add_option("--coref-dim", cfg.train.model.coref_dim, "coreference state width per direction");
  cmd->add_option("--layers", cfg.train.model.layers, "stacked encoder layers");
  cmd->add_option("--m-max", cfg.train.model.m_max, "one-hot feature width cap");
  cmd->add_flag("--interpolate-with-memory", cfg.train.model.interpolate_with_memory,
                "interpolate the state with the incoming memory instead of the previous position");
  cmd->add_option("--lr", cfg.train.lr, "learning rate");
  cmd->add_option("--clip-norm", cfg.train.clip_norm, "global gradient-norm clip");
  cmd->add_option("--epochs", cfg.train.epochs, "epoch cap");
  cmd->add_option("--batch-size", cfg.train.batch_size, "examples per step (fixed at 1)");
  cmd->add_option("--patience", cfg.train.patience, "epochs without validation improvement");
  cmd->add_option("--seed", cfg.train.seed, "base RNG seed");
  cmd->add_option("--valid-fraction", cfg.train.valid_fraction,
                  "trailing fraction of training stories held out for validation");
  cmd->add_flag("!--no-link-question", cfg.train.link_question,
                "drop the question-to-story coreference links");
  cmd->add_flag("!--no-stop-at-zero", cfg.train.stop_at_zero,
                "keep training after validation error reaches zero");
  cmd->add_option("--train", cfg.train.train_path, "training task file");
  cmd->add_option("--test", cfg.train.test_path, "test task file");
  cmd->add_option("--out", cfg.train.out_dir, "output directory (checkpoint + result record)");
  cmd->add_option("--config", cfg.config_path,
                  "line-based key=value config file (applied before flags)");
}

void finish_config(CliConfig& cfg) {
  cfg.train.model.encoder = mage::encoder_from_string(cfg.encoder);
  cfg.train.model.head = mage::head_from_string(cfg.head);
}

int cmd_train(CliConfig& cfg) {
  finish_config(cfg);
  if (cfg.train.train_path.empty()) throw CLI::ValidationError("--train", "training file required");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < cfg.seeds; ++i) seeds.push_back(cfg.train.seed + static_cast<std::uint64_t>(i));
  const mage::RunResult r = mage::multi_seed(cfg.train, seeds);
  std::cout << "seed=" << r.seed << " best_epoch=" << r.best_epoch << " best_valid=" << r.best_valid
            << " test_error=" << r.test_error << '\n';
  if (!cfg.train.out_dir.empty()) {
    std::ofstream os(cfg.train.out_dir + "/selected.txt");
    os << mage::format_result_record(cfg.train, r);
    std::cout << "checkpoint: " << cfg.train.out_dir << "/seed" << r.seed << "/model.ckpt\n";
  }
  return kOk;
}

int cmd_eval(CliConfig& cfg, const std::string& checkpoint, const std::string& split,
             const std::string& probe_path, int probe_limit) {
  finish_config(cfg);
  const mage::TaskData data = mage::load_task(cfg.train);
  mage::ReaderModel model(cfg.train.model, data.vocab, data.candidates, cfg.train.seed);
  model.store().load(checkpoint);

  const auto file = mage::parse_babi(split);
  const auto prepared =
      mage::prepare_examples(model, file.examples, data.lexicon, cfg.train.link_question);
  const double err = mage::evaluate_split(model, prepared);
  std::cout << "examples=" << prepared.size() << " error=" << err << '\n';

  if (!probe_path.empty()) {
    std::ofstream os(probe_path);
    if (!os) throw std::runtime_error("cannot open probe output: " + probe_path);
    mage::Tape tape;
    const int limit = std::min<int>(probe_limit, static_cast<int>(prepared.size()));
    for (int i = 0; i < limit; ++i) {
      tape.reset();
      const auto rows = model.probe(tape, prepared[i]);
      os << "# example " << i << " answer=" << prepared[i].answer << '\n'
         << mage::format_probe_table(rows, model.candidates()) << '\n';
    }
    std::cout << "probe tables written to " << probe_path << '\n';
  }
  return kOk;
}

int cmd_mix_gen(int task, std::uint64_t seed, const std::string& out_dir,
                const std::string& data_dir) {
  const std::string in_path = data_dir + "/qa" + std::to_string(task) + "_train.txt";
  std::ifstream is(in_path);
  if (!is) throw std::runtime_error("cannot open task file: " + in_path);
  std::ostringstream buf;
  buf << is.rdbuf();

  std::filesystem::create_directories(out_dir);
  const std::string out_path = out_dir + "/qa" + std::to_string(task) + "_mix_train.txt";
  const std::string mixed = mage::generate_babi_mix(buf.str(), mage::MixConfig{}, seed);
  std::ofstream os(out_path);
  os << mixed;
  std::cout << "wrote " << out_path << '\n';
  return kOk;
}

int cmd_graph_dump(const std::string& input, const std::string& out_path) {
  const auto file = mage::parse_babi(input);
  const auto lexicon = mage::derive_entity_lexicon(file);

  mage::EdgeTypeRegistry registry;
  const auto coref = registry.register_edge_type("coref").first;
  mage::Vocab vocab = mage::Vocab::build(file.examples);

  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot open output: " + out_path);
  for (const auto& ex : file.examples) {
    const auto ann = mage::extract_coref(ex, lexicon);
    const auto built = mage::build_example_graph(ex, ann, registry, coref, vocab);
    std::vector<std::string> token_strings;
    for (auto id : built.graph.tokens) token_strings.push_back(vocab.token(id));
    mage::write_graph_dump_line(os, mage::to_dump_record(built.graph, built.layout, token_strings, registry));
  }
  std::cout << "wrote " << file.examples.size() << " graphs to " << out_path << '\n';
  return kOk;
}

int cmd_grad_check(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : mage::grad_check_all(seed)) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  max_rel_err=" << r.max_rel_error
              << "  (threshold " << r.threshold << ")\n";
    ok = ok && r.pass;
  }
  return ok ? kOk : kNumericalError;
}

int cmd_story_gen(const mage::StoryGenConfig& cfg, const std::string& out) {
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot open output: " + out);
  os << mage::generate_babi_stories(cfg);
  std::cout << "wrote " << cfg.stories << " task-" << cfg.task << " stories to " << out << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"typed-edge DAG recurrent reader"};
  app.require_subcommand(1);

  CliConfig cfg;

  auto* train = app.add_subcommand("train", "train a reader on a task file");
  add_model_options(train, cfg);
  train->add_option("--seeds", cfg.seeds, "run this many seeds, report best-validation run");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_model_options(eval, cfg);
  std::string checkpoint, split, probe_path;
  int probe_limit = 5;
  eval->add_option("--checkpoint", checkpoint, "MAGECKPT file")->required();
  eval->add_option("--split", split, "task file to score")->required();
  eval->add_option("--probe", probe_path, "write per-sentence candidate tables here");
  eval->add_option("--probe-limit", probe_limit, "examples to probe");

  auto* mix = app.add_subcommand("mix-gen", "interleave entity-renamed story pairs");
  int mix_task = 1;
  std::uint64_t mix_seed = 1;
  std::string mix_out = "mix", mix_data = "data";
  mix->add_option("--task", mix_task, "task number")->required();
  mix->add_option("--seed", mix_seed, "RNG seed");
  mix->add_option("--out", mix_out, "output directory")->required();
  mix->add_option("--data-dir", mix_data, "directory holding qa<N>_train.txt");

  auto* dump = app.add_subcommand("graph-dump", "write example graphs as JSON lines");
  std::string dump_in, dump_out;
  dump->add_option("--input", dump_in, "bAbi task file")->required();
  dump->add_option("--out", dump_out, "output path")->required();

  auto* check = app.add_subcommand("grad-check", "gradient checks for ops and a full encode");
  std::uint64_t check_seed = 7;
  check->add_option("--seed", check_seed, "RNG seed");

  auto* gen = app.add_subcommand("story-gen", "generate task-1/2 style story files");
  mage::StoryGenConfig gen_cfg;
  std::string gen_out;
  gen->add_option("--task", gen_cfg.task, "1 or 2");
  gen->add_option("--stories", gen_cfg.stories, "story blocks to generate");
  gen->add_option("--seed", gen_cfg.seed, "RNG seed");
  gen->add_option("--questions", gen_cfg.questions_per_story, "questions per story");
  gen->add_option("--statements", gen_cfg.statements_per_question, "statements per question");
  gen->add_option("--out", gen_out, "output file")->required();

  try {
    // the config file seeds the defaults; explicit flags then override
    for (int i = 1; i < argc; ++i) {
      const std::string arg = argv[i];
      if (arg == "--config" && i + 1 < argc) apply_config_file(cfg, argv[i + 1]);
      else if (arg.rfind("--config=", 0) == 0) apply_config_file(cfg, arg.substr(9));
    }
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (train->parsed()) return cmd_train(cfg);
    if (eval->parsed()) return cmd_eval(cfg, checkpoint, split, probe_path, probe_limit);
    if (mix->parsed()) return cmd_mix_gen(mix_task, mix_seed, mix_out, mix_data);
    if (dump->parsed()) return cmd_graph_dump(dump_in, dump_out);
    if (check->parsed()) return cmd_grad_check(check_seed);
    if (gen->parsed()) return cmd_story_gen(gen_cfg, gen_out);
  } catch (const mage::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}
