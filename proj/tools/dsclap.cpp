// Command-line driver: gen / pretrain / finetune / eval / sweep.
//
// Settings come from (lowest to highest precedence) built-in defaults, the
// --config file, the DSCLAP_SEED environment variable, then explicit flags.
// Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numerical
// failure.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsclap/dsclap.hpp"

namespace {

using namespace dsclap;

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ----------------------------------------------------------------------------
// Run settings and the config file
// ----------------------------------------------------------------------------

struct RunSettings {
  TrainConfig train;
  GeneratorConfig gen;
  std::string task_name;  // empty until set by config or flag
  std::string freeze_name = "none";
  double cer = 0.187;
  std::string data_path;
  std::string test_path;
  std::string ckpt_path;
  std::string out_dir;
  std::vector<std::size_t> sizes;
  bool parallel = false;
  std::size_t n = 1000;
  std::size_t classes = 15;
  std::size_t latent_dim = 3;
};

Task parse_task(const std::string& name) { return task_from_string(name); }

FreezeMask parse_freeze(const std::string& name) {
  if (name == "none") return {true, true};
  if (name == "audio") return {false, true};
  if (name == "text") return {true, false};
  if (name == "both") return {false, false};
  throw InvalidArgument("unknown freeze mask: " + name +
                        " (expected none, audio, text, or both)");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string_view piece(text.data() + pos,
                           (comma == std::string::npos ? text.size() : comma) - pos);
    std::uint64_t value = 0;
    auto res = std::from_chars(piece.data(), piece.data() + piece.size(), value);
    if (piece.empty() || res.ec != std::errc{} ||
        res.ptr != piece.data() + piece.size())
      throw InvalidArgument("malformed seed list: " + text);
    out.push_back(value);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw InvalidArgument("empty seed list");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (std::uint64_t v : parse_seed_list(text))
    out.push_back(static_cast<std::size_t>(v));
  return out;
}

struct ConfigEntry {
  std::string value;
  std::size_t line = 0;
  std::size_t column = 0;  // 1-based column of the value
};

[[noreturn]] void config_error(const std::string& path, std::size_t line,
                               std::size_t column, const std::string& what) {
  throw DataFormatError(path + " line " + std::to_string(line) + ", column " +
                        std::to_string(column) + ": " + what);
}

/// Flat `key = value` document; blank lines and #-comments are skipped.
std::map<std::string, ConfigEntry> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataFormatError("cannot open file for reading: " + path);

  std::map<std::string, ConfigEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;

    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      config_error(path, line_no, line.size() + 1, "expected 'key = value'");

    std::size_t key_end = line.find_last_not_of(" \t", eq ? eq - 1 : 0);
    if (eq == 0 || key_end == std::string::npos || key_end < first)
      config_error(path, line_no, 1, "missing key before '='");
    std::string key = line.substr(first, key_end - first + 1);

    std::size_t val_begin = line.find_first_not_of(" \t", eq + 1);
    if (val_begin == std::string::npos)
      config_error(path, line_no, line.size() + 1, "missing value after '='");
    std::size_t val_end = line.find_last_not_of(" \t");
    std::string value = line.substr(val_begin, val_end - val_begin + 1);

    if (entries.count(key))
      config_error(path, line_no, first + 1, "duplicate key '" + key + "'");
    entries[key] = {value, line_no, val_begin + 1};
  }
  return entries;
}

void apply_config(RunSettings& s, const std::string& path) {
  auto entries = read_config_file(path);

  auto bad_value = [&](const ConfigEntry& e, const std::string& what) {
    config_error(path, e.line, e.column, what);
  };
  auto to_double = [&](const ConfigEntry& e) {
    double v = 0.0;
    auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (res.ec != std::errc{} || res.ptr != e.value.data() + e.value.size())
      bad_value(e, "malformed number '" + e.value + "'");
    return v;
  };
  auto to_size = [&](const ConfigEntry& e) {
    std::size_t v = 0;
    auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (res.ec != std::errc{} || res.ptr != e.value.data() + e.value.size())
      bad_value(e, "malformed integer '" + e.value + "'");
    return v;
  };
  auto to_u64 = [&](const ConfigEntry& e) {
    std::uint64_t v = 0;
    auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (res.ec != std::errc{} || res.ptr != e.value.data() + e.value.size())
      bad_value(e, "malformed integer '" + e.value + "'");
    return v;
  };
  auto to_bool = [&](const ConfigEntry& e) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    bad_value(e, "malformed boolean '" + e.value + "'");
    return false;
  };

  using Setter = std::function<void(const ConfigEntry&)>;
  const std::map<std::string, Setter> setters = {
      {"learning_rate", [&](auto& e) { s.train.learning_rate = to_double(e); }},
      {"batch_size", [&](auto& e) { s.train.batch_size = to_size(e); }},
      {"epochs", [&](auto& e) { s.train.epochs = to_size(e); }},
      {"lambda", [&](auto& e) { s.train.lambda_weight = to_double(e); }},
      {"gamma", [&](auto& e) { s.train.gamma_weight = to_double(e); }},
      {"hard_negatives", [&](auto& e) { s.train.hard_negatives = to_size(e); }},
      {"seed", [&](auto& e) { s.train.seed = to_u64(e); }},
      {"seeds", [&](auto& e) { s.train.seeds = parse_seed_list(e.value); }},
      {"weight_decay", [&](auto& e) { s.train.weight_decay = to_double(e); }},
      {"beta1", [&](auto& e) { s.train.beta1 = to_double(e); }},
      {"beta2", [&](auto& e) { s.train.beta2 = to_double(e); }},
      {"epsilon", [&](auto& e) { s.train.epsilon = to_double(e); }},
      {"embed_dim", [&](auto& e) { s.train.model.embed_dim = to_size(e); }},
      {"proj_dim", [&](auto& e) { s.train.model.proj_dim = to_size(e); }},
      {"vocab_size", [&](auto& e) { s.train.model.vocab_size = to_size(e); }},
      {"frame_window", [&](auto& e) { s.train.model.frame_window = to_size(e); }},
      {"frame_stride", [&](auto& e) { s.train.model.frame_stride = to_size(e); }},
      {"max_audio_len", [&](auto& e) { s.train.model.max_audio_len = to_size(e); }},
      {"max_text_len", [&](auto& e) { s.train.model.max_text_len = to_size(e); }},
      {"task", [&](auto& e) { s.task_name = e.value; }},
      {"freeze", [&](auto& e) { s.freeze_name = e.value; }},
      {"cer", [&](auto& e) { s.cer = to_double(e); }},
      {"data", [&](auto& e) { s.data_path = e.value; }},
      {"test", [&](auto& e) { s.test_path = e.value; }},
      {"ckpt", [&](auto& e) { s.ckpt_path = e.value; }},
      {"out", [&](auto& e) { s.out_dir = e.value; }},
      {"sizes", [&](auto& e) { s.sizes = parse_size_list(e.value); }},
      {"parallel", [&](auto& e) { s.parallel = to_bool(e); }},
      {"n", [&](auto& e) { s.n = to_size(e); }},
      {"classes", [&](auto& e) { s.classes = to_size(e); }},
      {"latent_dim", [&](auto& e) { s.latent_dim = to_size(e); }},
      {"labeled", [&](auto& e) { s.gen.labeled = to_bool(e); }},
      {"noise_level", [&](auto& e) { s.gen.noise_level = to_double(e); }},
      {"token_variation", [&](auto& e) { s.gen.token_variation = to_double(e); }},
      {"latent_noise", [&](auto& e) { s.gen.latent_noise = to_double(e); }},
      {"audio_len_base", [&](auto& e) { s.gen.audio_len_base = to_size(e); }},
      {"audio_len_jitter", [&](auto& e) { s.gen.audio_len_jitter = to_size(e); }},
      {"template_min", [&](auto& e) { s.gen.template_min = to_size(e); }},
      {"template_max", [&](auto& e) { s.gen.template_max = to_size(e); }},
  };

  for (const auto& [key, entry] : entries) {
    auto it = setters.find(key);
    if (it == setters.end())
      config_error(path, entry.line, 1, "unknown key '" + key + "'");
    it->second(entry);
  }
}

void apply_env_seed(RunSettings& s) {
  const char* env = std::getenv("DSCLAP_SEED");
  if (!env) return;
  std::string_view text(env);
  std::uint64_t value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc{} ||
      res.ptr != text.data() + text.size())
    throw InvalidArgument("malformed DSCLAP_SEED: " + std::string(text));
  s.train.seed = value;
}

// ----------------------------------------------------------------------------
// Output helpers
// ----------------------------------------------------------------------------

void ensure_out_dir(const std::string& dir) {
  if (dir.empty()) throw InvalidArgument("missing --out directory");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw DataFormatError("cannot create output directory: " + dir + " (" +
                          ec.message() + ")");
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void print_metrics_table(std::ostream& out, Task task,
                         const std::vector<std::pair<std::string, Metrics>>& rows) {
  const char* extra = task == Task::mdsd ? "frr" : "macro_f1";
  out << "seed\tacc\t" << extra << "\n";

  double acc_sum = 0.0;
  double extra_sum = 0.0;
  std::size_t extra_count = 0;
  auto extra_of = [&](const Metrics& m) {
    return task == Task::mdsd ? m.frr : m.macro_f1;
  };
  for (const auto& [name, m] : rows) {
    out << name << '\t' << fmt(m.accuracy) << '\t';
    if (auto v = extra_of(m)) {
      out << fmt(*v);
      extra_sum += *v;
      ++extra_count;
    } else {
      out << '-';
    }
    out << '\n';
    acc_sum += m.accuracy;
  }
  out << "mean\t" << fmt(acc_sum / static_cast<double>(rows.size())) << '\t';
  if (extra_count)
    out << fmt(extra_sum / static_cast<double>(extra_count));
  else
    out << '-';
  out << '\n';
}

Checkpoint load_or_init(const RunSettings& s) {
  if (!s.ckpt_path.empty()) return load_checkpoint(s.ckpt_path);
  Checkpoint ckpt;
  ckpt.config = s.train;
  ckpt.model.encoder =
      init_encoder_params(s.train.model, derive_seed(s.train.seed, "init"));
  return ckpt;
}

// ----------------------------------------------------------------------------
// Subcommands
// ----------------------------------------------------------------------------

int cmd_gen(const RunSettings& s) {
  if (!(s.cer >= 0.0 && s.cer <= 1.0))
    throw InvalidArgument("target CER must be in [0, 1]");
  ensure_out_dir(s.out_dir);

  std::vector<PairedSample> manual =
      generate_pairs(s.train.seed, s.n, s.classes, s.latent_dim, s.gen);
  std::vector<PairedSample> asr = manual;
  for (std::size_t i = 0; i < asr.size(); ++i) {
    asr[i].text = inject_cer(asr[i].text, s.cer,
                             derive_seed(s.train.seed, "cer", i),
                             s.gen.vocab_size, s.train.model.max_text_len);
    asr[i].source = Source::asr;
  }

  std::string manual_path = join_path(s.out_dir, "manual.txt");
  std::string asr_path = join_path(s.out_dir, "asr.txt");
  write_dataset(manual_path, manual);
  write_dataset(asr_path, asr);

  std::cout << "wrote " << s.n << " pairs: " << manual_path << " and "
            << asr_path << " (cer target " << fmt(s.cer) << ")\n";
  return 0;
}

int cmd_pretrain(const RunSettings& s) {
  if (s.data_path.empty()) throw InvalidArgument("missing --data path");
  std::vector<PairedSample> data = read_dataset(s.data_path);
  ensure_out_dir(s.out_dir);

  PretrainResult result = pretrain(s.train, data);

  std::string ckpt_path = join_path(s.out_dir, "checkpoint.dsck");
  save_checkpoint(ckpt_path, result.checkpoint);

  std::string log_path = join_path(s.out_dir, "loss_log.tsv");
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw DataFormatError("cannot open file for writing: " + log_path);
  log << "epoch\tstep\taudio_nce\ttext_nce\taudio_match\ttext_match\ttotal\tscale\n";
  for (const LossLogRecord& r : result.log)
    log << r.epoch << '\t' << r.step << '\t' << fmt(r.audio_nce) << '\t'
        << fmt(r.text_nce) << '\t' << fmt(r.audio_match) << '\t'
        << fmt(r.text_match) << '\t' << fmt(r.total) << '\t' << fmt(r.scale)
        << '\n';
  if (!log.flush()) throw DataFormatError("write failed: " + log_path);

  std::cout << "pretrained epochs=" << result.checkpoint.epochs_completed
            << " steps=" << result.checkpoint.global_step;
  if (!result.log.empty())
    std::cout << " final_total=" << fmt(result.log.back().total)
              << " scale=" << fmt(result.log.back().scale);
  std::cout << " checkpoint=" << ckpt_path << "\n";
  return 0;
}

int cmd_finetune(const RunSettings& s) {
  if (s.data_path.empty()) throw InvalidArgument("missing --data path");
  if (s.test_path.empty()) throw InvalidArgument("missing --test path");
  if (s.task_name.empty() || s.task_name == "none")
    throw InvalidArgument("finetune requires --task mdsd or mcic");
  Task task = parse_task(s.task_name);
  FreezeMask freeze = parse_freeze(s.freeze_name);

  std::vector<PairedSample> train = read_dataset(s.data_path);
  std::vector<PairedSample> test = read_dataset(s.test_path);
  Checkpoint ckpt = load_or_init(s);
  if (!s.out_dir.empty()) ensure_out_dir(s.out_dir);

  std::vector<std::pair<std::string, Metrics>> rows;
  for (std::uint64_t seed : s.train.seeds) {
    Model model = finetune(ckpt, task, freeze, train, s.train, seed);
    rows.emplace_back(std::to_string(seed), evaluate(model, test, task));
    if (!s.out_dir.empty()) {
      Checkpoint tuned;
      tuned.model = model;
      tuned.config = s.train;
      tuned.config.seed = seed;
      tuned.task = task;
      save_checkpoint(
          join_path(s.out_dir, "finetuned_" + std::to_string(seed) + ".dsck"),
          tuned);
    }
  }
  print_metrics_table(std::cout, task, rows);
  return 0;
}

int cmd_eval(const RunSettings& s) {
  if (s.ckpt_path.empty()) throw InvalidArgument("missing --ckpt path");
  if (s.data_path.empty()) throw InvalidArgument("missing --data path");
  Checkpoint ckpt = load_checkpoint(s.ckpt_path);
  if (!has_classifier(ckpt.model))
    throw InvalidArgument("checkpoint has no classifier; run finetune first");

  Task task = ckpt.task;
  if (!s.task_name.empty()) task = parse_task(s.task_name);
  if (task == Task::none)
    throw InvalidArgument("checkpoint records no task; pass --task");

  std::vector<PairedSample> test = read_dataset(s.data_path);
  Metrics metrics = evaluate(ckpt.model, test, task);
  print_metrics_table(std::cout, task,
                      {{std::to_string(ckpt.config.seed), metrics}});
  return 0;
}

int cmd_sweep(const RunSettings& s) {
  if (s.data_path.empty()) throw InvalidArgument("missing --data path");
  if (s.test_path.empty()) throw InvalidArgument("missing --test path");
  if (s.sizes.empty()) throw InvalidArgument("missing --sizes list");
  if (s.task_name.empty() || s.task_name == "none")
    throw InvalidArgument("sweep requires --task mdsd or mcic");
  Task task = parse_task(s.task_name);
  FreezeMask freeze = parse_freeze(s.freeze_name);

  std::vector<PairedSample> train = read_dataset(s.data_path);
  std::vector<PairedSample> test = read_dataset(s.test_path);
  Checkpoint ckpt = load_or_init(s);

  std::vector<SweepRow> rows = data_size_sweep(ckpt, s.sizes, task, freeze,
                                               train, test, s.train, s.parallel);
  std::cout << "size\tmean\tmin\tmax\n";
  for (const SweepRow& row : rows)
    std::cout << row.size << '\t' << fmt(row.mean) << '\t' << fmt(row.min)
              << '\t' << fmt(row.max) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dsclap: contrastive language-audio pretraining on synthetic pairs"};
  app.require_subcommand(1);

  RunSettings flags;
  std::string config_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key = value settings file");
    sub->add_option("--seed", flags.train.seed, "master RNG seed");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate aligned manual/asr datasets");
  add_common(gen);
  gen->add_option("--n", flags.n, "number of pairs");
  gen->add_option("--classes", flags.classes, "latent class count");
  gen->add_option("--cer", flags.cer, "target character error rate for the asr file");
  gen->add_option("--out", flags.out_dir, "output directory");
  gen->add_option("--latent-dim", flags.latent_dim, "latent vector width");
  gen->add_flag("--labeled", flags.gen.labeled, "emit class labels");

  CLI::App* pre = app.add_subcommand("pretrain", "contrastive pretraining");
  add_common(pre);
  pre->add_option("--data", flags.data_path, "training dataset file");
  pre->add_option("--out", flags.out_dir, "output directory");
  pre->add_option("--epochs", flags.train.epochs, "training epochs");
  pre->add_option("--batch-size", flags.train.batch_size, "contrastive batch size");
  pre->add_option("--lr", flags.train.learning_rate, "learning rate");
  pre->add_option("--lambda", flags.train.lambda_weight, "InfoNCE weight");
  pre->add_option("--gamma", flags.train.gamma_weight, "matching-loss weight");
  pre->add_option("--hard-negatives", flags.train.hard_negatives,
                  "mined negatives per anchor");

  std::string seeds_text;
  CLI::App* fin = app.add_subcommand("finetune", "supervised task head training");
  add_common(fin);
  fin->add_option("--ckpt", flags.ckpt_path, "pretrained checkpoint (omit for random init)");
  fin->add_option("--data", flags.data_path, "labeled training dataset");
  fin->add_option("--test", flags.test_path, "labeled test dataset");
  fin->add_option("--task", flags.task_name, "mdsd or mcic");
  fin->add_option("--freeze", flags.freeze_name, "none, audio, text, or both");
  fin->add_option("--seeds", seeds_text, "comma-separated fine-tune seeds");
  fin->add_option("--epochs", flags.train.epochs, "training epochs");
  fin->add_option("--batch-size", flags.train.batch_size, "batch size");
  fin->add_option("--lr", flags.train.learning_rate, "learning rate");
  fin->add_option("--out", flags.out_dir, "directory for fine-tuned checkpoints");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a fine-tuned checkpoint");
  add_common(ev);
  ev->add_option("--ckpt", flags.ckpt_path, "fine-tuned checkpoint");
  ev->add_option("--data", flags.data_path, "labeled test dataset");
  ev->add_option("--task", flags.task_name, "override the checkpoint's task");

  std::string sizes_text;
  CLI::App* sw = app.add_subcommand("sweep", "training-set size sweep");
  add_common(sw);
  sw->add_option("--ckpt", flags.ckpt_path, "pretrained checkpoint (omit for random init)");
  sw->add_option("--data", flags.data_path, "labeled training dataset");
  sw->add_option("--test", flags.test_path, "labeled test dataset");
  sw->add_option("--task", flags.task_name, "mdsd or mcic");
  sw->add_option("--freeze", flags.freeze_name, "none, audio, text, or both");
  sw->add_option("--sizes", sizes_text, "comma-separated training sizes");
  sw->add_option("--seeds", seeds_text, "comma-separated fine-tune seeds");
  sw->add_option("--epochs", flags.train.epochs, "training epochs");
  sw->add_option("--batch-size", flags.train.batch_size, "batch size");
  sw->add_option("--lr", flags.train.learning_rate, "learning rate");
  sw->add_flag("--parallel", flags.parallel, "run fine-tunes concurrently");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();

  try {
    // Defaults, then config file, then environment, then explicit flags.
    RunSettings s;
    if (!config_path.empty()) apply_config(s, config_path);
    apply_env_seed(s);

    auto flag_set = [&](const std::string& name) {
      const CLI::Option* opt = active->get_option_no_throw(name);
      return opt != nullptr && opt->count() > 0;
    };
    if (flag_set("--seed")) s.train.seed = flags.train.seed;
    if (flag_set("--n")) s.n = flags.n;
    if (flag_set("--classes")) s.classes = flags.classes;
    if (flag_set("--cer")) s.cer = flags.cer;
    if (flag_set("--out")) s.out_dir = flags.out_dir;
    if (flag_set("--latent-dim")) s.latent_dim = flags.latent_dim;
    if (flag_set("--labeled")) s.gen.labeled = flags.gen.labeled;
    if (flag_set("--data")) s.data_path = flags.data_path;
    if (flag_set("--test")) s.test_path = flags.test_path;
    if (flag_set("--ckpt")) s.ckpt_path = flags.ckpt_path;
    if (flag_set("--task")) s.task_name = flags.task_name;
    if (flag_set("--freeze")) s.freeze_name = flags.freeze_name;
    if (flag_set("--epochs")) s.train.epochs = flags.train.epochs;
    if (flag_set("--batch-size")) s.train.batch_size = flags.train.batch_size;
    if (flag_set("--lr")) s.train.learning_rate = flags.train.learning_rate;
    if (flag_set("--lambda")) s.train.lambda_weight = flags.train.lambda_weight;
    if (flag_set("--gamma")) s.train.gamma_weight = flags.train.gamma_weight;
    if (flag_set("--hard-negatives"))
      s.train.hard_negatives = flags.train.hard_negatives;
    if (flag_set("--seeds")) s.train.seeds = parse_seed_list(seeds_text);
    if (flag_set("--sizes")) s.sizes = parse_size_list(sizes_text);
    if (flag_set("--parallel")) s.parallel = flags.parallel;

    validate(s.train);

    if (active->get_name() == "gen") return cmd_gen(s);
    if (active->get_name() == "pretrain") return cmd_pretrain(s);
    if (active->get_name() == "finetune") return cmd_finetune(s);
    if (active->get_name() == "eval") return cmd_eval(s);
    if (active->get_name() == "sweep") return cmd_sweep(s);
    throw InvalidArgument("unknown subcommand");
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
