// Command-line front end for the property-cache relation extraction pipeline:
// synthesize data, fit topics, train, evaluate, benchmark, sweep, gradcheck.

#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphcache/bench.hpp"
#include "graphcache/trainer.hpp"

namespace fs = std::filesystem;
using namespace graphcache;

namespace {

// Bad command-line or config-file usage; exit code 1.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CommonTrainFlags {
  TrainConfig cfg;
  std::string train_path, dev_path, test_path, out_dir, lda_path;
  std::string config_path;
  bool no_topics = false, no_types = false;
  std::string scope = "connected";
};

void add_config_flags(CLI::App* cmd, CommonTrainFlags& f) {
  cmd->add_option("--topics", f.cfg.K, "number of LDA topics (K)");
  cmd->add_option("--top-p", f.cfg.P, "topics connected per sentence (P)");
  cmd->add_option("--d", f.cfg.d, "representation width");
  cmd->add_option("--d-e", f.cfg.d_e, "word embedding width");
  cmd->add_option("--d-h", f.cfg.d_h, "head hidden width");
  cmd->add_option("--batch-size", f.cfg.batch_size, "training batch size (B)");
  cmd->add_option("--epochs", f.cfg.epochs, "training epochs");
  cmd->add_option("--lr", f.cfg.learning_rate, "SGD learning rate");
  cmd->add_option("--seed", f.cfg.seed, "master seed");
  cmd->add_option("--negative-label", f.cfg.negative_label,
                  "override the detected negative label");
  cmd->add_flag("--no-topics", f.no_topics, "disable topic caches");
  cmd->add_flag("--no-types", f.no_types, "disable entity-type caches");
  cmd->add_option("--attention-scope", f.scope,
                  "attend over connected topics or all of them")
      ->check(CLI::IsMember({"connected", "all"}));
  cmd->add_option("--resync", f.cfg.resync_interval,
                  "hard-recompute caches every R steps (0 = never)");
  cmd->add_option("--lda-alpha", f.cfg.lda_alpha,
                  "LDA document prior (negative = 50/K)");
  cmd->add_option("--lda-beta", f.cfg.lda_beta, "LDA word prior");
  cmd->add_option("--lda-iters", f.cfg.lda_iters, "Gibbs sweeps");
  cmd->add_option("--min-count", f.cfg.min_count, "vocabulary cutoff");
  cmd->add_flag("--assert-mode", f.cfg.assert_mode,
                "verify cache/oracle equality every step");
  cmd->add_option("--config", f.config_path,
                  "key=value file; flags take precedence");
}

// Fills options from a plain key=value file. A flag given on the command
// line wins over the file; unknown keys are rejected.
void apply_config_file(const CLI::App* cmd, CommonTrainFlags& f) {
  if (f.config_path.empty()) return;
  std::ifstream in(f.config_path);
  if (!in) throw DataError("cannot open config file: " + f.config_path);

  auto to_int = [](const std::string& k, const std::string& v) {
    try {
      return std::stoi(v);
    } catch (const std::exception&) {
      throw UsageError("config key '" + k + "' needs an integer, got '" + v + "'");
    }
  };
  auto to_double = [](const std::string& k, const std::string& v) {
    try {
      return std::stod(v);
    } catch (const std::exception&) {
      throw UsageError("config key '" + k + "' needs a number, got '" + v + "'");
    }
  };
  auto to_bool = [](const std::string& k, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw UsageError("config key '" + k + "' needs a boolean, got '" + v + "'");
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) +
                       ": expected key=value");
    std::string key = line.substr(first, eq - first);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string value = line.substr(eq + 1);
    const auto vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    while (!value.empty() && (value.back() == ' ' || value.back() == '\t' ||
                              value.back() == '\r'))
      value.pop_back();

    // a flag on the command line beats the file
    auto overridden = [&](const std::string& flag) {
      try {
        return cmd->count("--" + flag) > 0;
      } catch (const CLI::OptionNotFound&) {
        return false;  // unknown keys fall through to the rejection below
      }
    };
    if (overridden(key)) continue;

    if (key == "topics") f.cfg.K = to_int(key, value);
    else if (key == "top-p") f.cfg.P = to_int(key, value);
    else if (key == "d") f.cfg.d = to_int(key, value);
    else if (key == "d-e") f.cfg.d_e = to_int(key, value);
    else if (key == "d-h") f.cfg.d_h = to_int(key, value);
    else if (key == "batch-size") f.cfg.batch_size = to_int(key, value);
    else if (key == "epochs") f.cfg.epochs = to_int(key, value);
    else if (key == "lr") f.cfg.learning_rate = to_double(key, value);
    else if (key == "seed") f.cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "negative-label") f.cfg.negative_label = value;
    else if (key == "no-topics") f.no_topics = to_bool(key, value);
    else if (key == "no-types") f.no_types = to_bool(key, value);
    else if (key == "attention-scope") {
      if (value != "connected" && value != "all")
        throw UsageError("attention-scope must be connected or all");
      f.scope = value;
    }
    else if (key == "resync") f.cfg.resync_interval = to_int(key, value);
    else if (key == "lda-alpha") f.cfg.lda_alpha = to_double(key, value);
    else if (key == "lda-beta") f.cfg.lda_beta = to_double(key, value);
    else if (key == "lda-iters") f.cfg.lda_iters = to_int(key, value);
    else if (key == "min-count") f.cfg.min_count = to_int(key, value);
    else if (key == "assert-mode") f.cfg.assert_mode = to_bool(key, value);
    else if (key == "train") f.train_path = value;
    else if (key == "dev") f.dev_path = value;
    else if (key == "test") f.test_path = value;
    else if (key == "out") f.out_dir = value;
    else if (key == "lda") f.lda_path = value;
    else throw UsageError("unknown config key: " + key);
  }
}

TrainConfig resolve_config(CommonTrainFlags& f) {
  if (f.no_topics) f.cfg.use_topics = false;
  if (f.no_types) f.cfg.use_types = false;
  f.cfg.attention_scope =
      f.scope == "all" ? AttentionScope::All : AttentionScope::Connected;
  return f.cfg;
}

void require_paths(const CommonTrainFlags& f) {
  if (f.train_path.empty()) throw UsageError("--train is required");
  if (f.dev_path.empty()) throw UsageError("--dev is required");
  if (f.test_path.empty()) throw UsageError("--test is required");
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << body;
}

void write_train_artifacts(const TrainResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  save_checkpoint(to_checkpoint(result.model, result.state),
                  (dir / "checkpoint.bin").string());
  if (result.config.use_topics)
    save_lda(result.topics, (dir / "topics.lda").string());
  write_text(dir / "manifest.json", result.manifest.dump(2) + "\n");
}

struct LoadedModel {
  TrainConfig cfg;
  ModelParams model;
  CacheState state;
  TopicModel topics;
  Vocabulary vocab;
  PropertyLookup lookup;
  std::vector<std::string> labels;
  std::string negative_label;
};

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.K = j.at("K").get<int>();
  c.P = j.at("P").get<int>();
  c.d = j.at("d").get<int>();
  c.d_e = j.at("d_e").get<int>();
  c.d_h = j.at("d_h").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.negative_label = j.at("negative_label").get<std::string>();
  c.use_topics = j.at("use_topics").get<bool>();
  c.use_types = j.at("use_types").get<bool>();
  c.attention_scope = j.at("attention_scope").get<std::string>() == "all"
                          ? AttentionScope::All
                          : AttentionScope::Connected;
  c.resync_interval = j.at("resync_interval").get<int>();
  c.lda_alpha = j.at("lda_alpha").get<double>();
  c.lda_beta = j.at("lda_beta").get<double>();
  c.lda_iters = j.at("lda_iters").get<int>();
  c.min_count = j.at("min_count").get<int>();
  return c;
}

LoadedModel load_model_dir(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json man;
  try {
    in >> man;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest: " + std::string(e.what()));
  }

  LoadedModel lm;
  lm.cfg = config_from_json(man.at("config"));
  lm.labels = man.at("labels").get<std::vector<std::string>>();
  lm.negative_label = man.at("negative_label").get<std::string>();

  lm.vocab.min_count = lm.cfg.min_count;
  lm.vocab.words = man.at("vocab").get<std::vector<std::string>>();
  for (std::size_t i = 1; i < lm.vocab.words.size(); ++i)
    lm.vocab.index.emplace(lm.vocab.words[i], static_cast<int>(i));

  std::vector<PropertyId> props;
  for (const auto& p : man.at("properties")) {
    if (p.at("kind") == "topic")
      props.push_back(PropertyId{PropertyKind::Topic, p.at("topic").get<int>(), {}});
    else
      props.push_back(PropertyId{PropertyKind::TypePair, -1,
                                 p.at("key").get<std::string>()});
  }
  lm.lookup = PropertyLookup::from_properties(props);

  from_checkpoint(load_checkpoint((dir / "checkpoint.bin").string()), lm.model,
                  lm.state);
  if (lm.cfg.use_topics) lm.topics = load_lda((dir / "topics.lda").string());
  return lm;
}

void print_metrics(const std::string& name, const MetricsReport& m) {
  std::cout << name << ": precision " << m.precision << "  recall " << m.recall
            << "  f1 " << m.f1 << "  accuracy " << m.accuracy << "  (n=" << m.n
            << ")\n";
}

std::vector<std::vector<std::string>> docs_of(const Dataset& ds) {
  std::vector<std::vector<std::string>> docs;
  for (const auto& inst : ds.instances) docs.push_back(inst.tokens);
  return docs;
}

// ---------------------------------------------------------------- synth ---

void cmd_synth(CLI::App* app) {
  auto spec = std::make_shared<SynthSpec>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto out = std::make_shared<std::string>();

  app->add_option("--out", *out, "output directory")->required();
  app->add_option("--seed", *seed, "generator seed");
  app->add_option("--n-train", spec->n_train, "train instances");
  app->add_option("--n-dev", spec->n_dev, "dev instances");
  app->add_option("--n-test", spec->n_test, "test instances");
  app->add_option("--true-topics", spec->n_topics_true, "planted topic count");
  app->add_option("--type-labels", spec->n_type_labels, "entity type count");
  app->add_option("--relations", spec->n_relations,
                  "relation count excluding the negative label");
  app->add_option("--context-len", spec->context_len, "context tokens");
  app->add_option("--noise-rate", spec->noise_rate, "label flip probability");
  app->add_option("--pool-split", spec->entity_pool_split,
                  "test-only entity name fraction");

  app->callback([spec, seed, out]() {
    SynthResult r = generate_synthetic(*spec, *seed);
    fs::create_directories(*out);
    save_jsonl(r.train, (fs::path(*out) / "train.jsonl").string());
    save_jsonl(r.dev, (fs::path(*out) / "dev.jsonl").string());
    save_jsonl(r.test, (fs::path(*out) / "test.jsonl").string());
    write_synth_manifest(r, (fs::path(*out) / "manifest.json").string());
    std::cout << "wrote " << r.train.size() << "/" << r.dev.size() << "/"
              << r.test.size() << " instances to " << *out << "\n";
  });
}

// --------------------------------------------------------------- topics ---

void cmd_topics(CLI::App* app) {
  app->require_subcommand(1);

  auto* fit = app->add_subcommand("fit", "fit a topic model on a corpus");
  {
    auto data = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto K = std::make_shared<int>(50);
    auto alpha = std::make_shared<double>(-1.0);
    auto beta = std::make_shared<double>(0.01);
    auto iters = std::make_shared<int>(200);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto min_count = std::make_shared<int>(1);
    fit->add_option("--data", *data, "training JSONL")->required();
    fit->add_option("--out", *out, "output model file")->required();
    fit->add_option("--topics", *K, "number of topics (K)");
    fit->add_option("--alpha", *alpha, "document prior (negative = 50/K)");
    fit->add_option("--beta", *beta, "word prior");
    fit->add_option("--iters", *iters, "Gibbs sweeps");
    fit->add_option("--seed", *seed, "sampler seed");
    fit->add_option("--min-count", *min_count, "vocabulary cutoff");
    fit->callback([=]() {
      Dataset ds = load_jsonl(*data);
      Vocabulary vocab = build_vocab(ds, *min_count);
      const double a = *alpha < 0 ? 50.0 / *K : *alpha;
      TopicModel m = fit_lda(docs_of(ds), vocab, *K, a, *beta, *iters, *seed);
      save_lda(m, *out);
      std::cout << "fitted K=" << m.K << " over |V|=" << m.vocab_size
                << ", wrote " << *out << "\n";
    });
  }

  auto* show = app->add_subcommand("show", "print a topic's top words");
  {
    auto model = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto topic = std::make_shared<int>(-1);
    auto top_n = std::make_shared<int>(10);
    auto min_count = std::make_shared<int>(1);
    show->add_option("--model", *model, "fitted model file")->required();
    show->add_option("--data", *data, "the corpus the model was fitted on")
        ->required();
    show->add_option("--topic", *topic, "topic id (default: all)");
    show->add_option("--top-n", *top_n, "words per topic");
    show->add_option("--min-count", *min_count, "vocabulary cutoff used at fit");
    show->callback([=]() {
      TopicModel m = load_lda(*model);
      Dataset ds = load_jsonl(*data);
      Vocabulary vocab = build_vocab(ds, *min_count);
      if (vocab.size() != m.vocab_size)
        throw DataError("vocabulary does not match the model (size " +
                        std::to_string(vocab.size()) + " vs " +
                        std::to_string(m.vocab_size) + ")");
      auto print_topic = [&](int k) {
        std::cout << "topic " << k << ":";
        for (const auto& w : top_words(m, vocab, k, *top_n)) std::cout << ' ' << w;
        std::cout << '\n';
      };
      if (*topic >= 0)
        print_topic(*topic);
      else
        for (int k = 0; k < m.K; ++k) print_topic(k);
    });
  }
}

// ---------------------------------------------------------------- train ---

void cmd_train(CLI::App* app) {
  auto f = std::make_shared<CommonTrainFlags>();
  app->add_option("--train", f->train_path, "training JSONL");
  app->add_option("--dev", f->dev_path, "development JSONL");
  app->add_option("--test", f->test_path, "test JSONL");
  app->add_option("--out", f->out_dir, "output directory for the checkpoint");
  app->add_option("--lda", f->lda_path, "reuse a fitted topic model");
  add_config_flags(app, *f);

  app->callback([f, app]() {
    apply_config_file(app, *f);
    require_paths(*f);
    TrainConfig cfg = resolve_config(*f);
    Dataset train_ds = load_jsonl(f->train_path, cfg.negative_label);
    Dataset dev_ds = load_jsonl(f->dev_path);
    Dataset test_ds = load_jsonl(f->test_path);

    TopicModel pretrained;
    const TopicModel* lda = nullptr;
    if (!f->lda_path.empty()) {
      pretrained = load_lda(f->lda_path);
      lda = &pretrained;
    }
    TrainResult result = train(cfg, train_ds, dev_ds, test_ds, lda, &std::cout);
    std::cout << "best epoch " << result.best_epoch << "\n";
    print_metrics("test", result.test_metrics);
    if (!f->out_dir.empty()) {
      write_train_artifacts(result, f->out_dir);
      std::cout << "wrote checkpoint to " << f->out_dir << "\n";
    }
  });
}

// ----------------------------------------------------------------- eval ---

void cmd_eval(CLI::App* app) {
  auto model_dir = std::make_shared<std::string>();
  auto data_path = std::make_shared<std::string>();
  auto unseen_train = std::make_shared<std::string>();
  auto negative = std::make_shared<std::string>();

  app->add_option("--model", *model_dir, "model directory from train --out")
      ->required();
  app->add_option("--data", *data_path, "evaluation JSONL")->required();
  app->add_option("--unseen-filter", *unseen_train,
                  "drop instances whose entities occur in this train file");
  app->add_option("--negative-label", *negative,
                  "override the negative label for the metric");

  app->callback([=]() {
    LoadedModel lm = load_model_dir(*model_dir);
    Dataset data = load_jsonl(*data_path);
    if (!unseen_train->empty()) {
      Dataset train_ds = load_jsonl(*unseen_train);
      const std::size_t before = data.size();
      data = filter_unseen(train_ds, data);
      std::cout << "unseen filter kept " << data.size() << " of " << before
                << " instances\n";
      if (data.instances.empty()) throw DataError("no instances left after filtering");
    }
    TopicAssignment assign;
    if (lm.cfg.use_topics)
      assign = assign_topics(lm.topics, docs_of(data), lm.vocab, lm.cfg.P,
                             mix_seed(lm.cfg.seed + 2));
    const std::string neg = negative->empty() ? lm.negative_label : *negative;
    MetricsReport m = evaluate_dataset(
        lm.model, lm.lookup, lm.state, data,
        lm.cfg.use_topics ? &assign : nullptr, lm.vocab, lm.cfg, lm.labels, neg);
    print_metrics("eval", m);
  });
}

// ---------------------------------------------------------------- bench ---

void cmd_bench(CLI::App* app) {
  auto cfg = std::make_shared<BenchConfig>();
  auto sizes = std::make_shared<std::vector<std::size_t>>();
  auto out = std::make_shared<std::string>();

  app->add_option("--sizes", *sizes, "dataset sizes, ascending")
      ->delimiter(',')
      ->required();
  app->add_option("--batch-size", cfg->batch_size, "batch size (B)");
  app->add_option("--top-p", cfg->P, "topics per sentence (P)");
  app->add_option("--topics", cfg->K, "topic cache count (K)");
  app->add_option("--d", cfg->d, "representation width");
  app->add_option("--seed", cfg->seed, "seed");
  app->add_option("--warmup", cfg->warmup_steps, "warm-up steps");
  app->add_option("--measured-cached", cfg->measured_steps_cached,
                  "measured steps per chunk, cached mode");
  app->add_option("--measured-full", cfg->measured_steps_full,
                  "measured steps per chunk, full mode");
  app->add_option("--reps", cfg->repetitions, "chunks (median reported)");
  app->add_option("--out", *out, "directory for bench.csv / bench.json");

  app->callback([=]() {
    auto rows = bench(*cfg, *sizes);
    std::cout << std::left << std::setw(9) << "n" << std::setw(8) << "mode"
              << std::setw(16) << "sec/step" << std::setw(14) << "edges/step"
              << "|E|\n";
    for (const auto& r : rows)
      std::cout << std::left << std::setw(9) << r.n << std::setw(8) << r.mode
                << std::setw(16) << r.mean_step_seconds << std::setw(14)
                << r.edge_touches_per_step << r.n_edges << "\n";
    if (!out->empty()) {
      fs::create_directories(*out);
      write_text(fs::path(*out) / "bench.csv", bench_csv(rows));
      nlohmann::ordered_json j = nlohmann::ordered_json::array();
      for (const auto& r : rows)
        j.push_back({{"n", r.n},
                     {"mode", r.mode},
                     {"mean_step_seconds", r.mean_step_seconds},
                     {"edge_touches_per_step", r.edge_touches_per_step},
                     {"n_edges", r.n_edges}});
      write_text(fs::path(*out) / "bench.json", j.dump(2) + "\n");
      std::cout << "wrote " << *out << "/bench.{csv,json}\n";
    }
  });
}

// ---------------------------------------------------------------- sweep ---

void cmd_sweep(CLI::App* app) {
  auto f = std::make_shared<CommonTrainFlags>();
  auto grid = std::make_shared<std::string>("fig4");
  auto ks = std::make_shared<std::vector<int>>();
  auto ps = std::make_shared<std::vector<int>>();
  auto jobs = std::make_shared<int>(1);

  app->add_option("--train", f->train_path, "training JSONL");
  app->add_option("--dev", f->dev_path, "development JSONL");
  app->add_option("--test", f->test_path, "test JSONL");
  app->add_option("--out", f->out_dir, "output directory");
  app->add_option("--grid", *grid, "preset grid name (fig4)");
  app->add_option("--ks", *ks, "custom K values")->delimiter(',');
  app->add_option("--ps", *ps, "custom P values")->delimiter(',');
  app->add_option("--jobs", *jobs, "concurrent runs");
  add_config_flags(app, *f);

  app->callback([=]() {
    apply_config_file(app, *f);
    require_paths(*f);
    if (f->out_dir.empty()) throw UsageError("--out is required");
    if (ks->empty() || ps->empty()) {
      if (*grid != "fig4")
        throw DataError("unknown grid preset: " + *grid);
      if (ks->empty()) *ks = {10, 20, 30, 40, 50, 60};
      if (ps->empty()) *ps = {1, 2, 3, 4, 5, 6};
    }
    TrainConfig base = resolve_config(*f);
    Dataset train_ds = load_jsonl(f->train_path, base.negative_label);
    Dataset dev_ds = load_jsonl(f->dev_path);
    Dataset test_ds = load_jsonl(f->test_path);

    struct Cell {
      int K, P;
      double dev_f1 = 0, test_f1 = 0, test_acc = 0;
    };
    std::vector<Cell> cells;
    for (int K : *ks)
      for (int P : *ps) cells.push_back({K, P});

    fs::create_directories(f->out_dir);
    auto run_cell = [&](Cell& cell) {
      TrainConfig cfg = base;
      cfg.K = cell.K;
      cfg.P = cell.P;
      TrainResult result = train(cfg, train_ds, dev_ds, test_ds);
      fs::path dir = fs::path(f->out_dir) /
                     ("K" + std::to_string(cell.K) + "_P" + std::to_string(cell.P));
      write_train_artifacts(result, dir);
      cell.dev_f1 = result.manifest["epochs"].empty()
                        ? 0.0
                        : result.manifest["epochs"].back()["dev"]["f1"].get<double>();
      cell.test_f1 = result.test_metrics.f1;
      cell.test_acc = result.test_metrics.accuracy;
      std::cout << "K=" << cell.K << " P=" << cell.P
                << "  test_f1 " << cell.test_f1 << "\n";
    };

    const int n_jobs = std::max(1, *jobs);
    for (std::size_t start = 0; start < cells.size();
         start += static_cast<std::size_t>(n_jobs)) {
      std::vector<std::future<void>> running;
      const std::size_t end =
          std::min(cells.size(), start + static_cast<std::size_t>(n_jobs));
      for (std::size_t i = start; i < end; ++i)
        running.push_back(std::async(std::launch::async, run_cell,
                                     std::ref(cells[i])));
      for (auto& fut : running) fut.get();
    }

    std::ostringstream csv;
    csv << "K,P,dev_f1,test_f1,test_accuracy\n";
    for (const auto& c : cells)
      csv << c.K << ',' << c.P << ',' << c.dev_f1 << ',' << c.test_f1 << ','
          << c.test_acc << '\n';
    write_text(fs::path(f->out_dir) / "sweep.csv", csv.str());
    std::cout << "wrote " << f->out_dir << "/sweep.csv\n";
  });
}

// ------------------------------------------------------------- gradcheck --

void cmd_gradcheck(CLI::App* app) {
  auto seed = std::make_shared<std::uint64_t>(0);
  auto epsilon = std::make_shared<double>(1e-5);
  auto trials = std::make_shared<int>(20);

  app->add_option("--seed", *seed, "base seed");
  app->add_option("--epsilon", *epsilon, "finite-difference step");
  app->add_option("--trials", *trials, "number of random configurations");

  app->callback([=]() {
    double worst = 0.0;
    for (int t = 0; t < *trials; ++t) {
      double err = grad_check_random_config(*seed + static_cast<std::uint64_t>(t),
                                            *epsilon);
      worst = std::max(worst, err);
      std::cout << "config " << t << ": max rel error " << err << "\n";
    }
    std::cout << "worst over " << *trials << " configs: " << worst << "\n";
    if (worst > 1e-4)
      throw InvariantError("gradient check exceeded tolerance 1e-4");
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dataset-level property caches for relation extraction"};
  app.require_subcommand(1);

  cmd_synth(app.add_subcommand("synth", "generate a synthetic corpus"));
  cmd_topics(app.add_subcommand("topics", "fit or inspect the topic model"));
  cmd_train(app.add_subcommand("train", "train a model"));
  cmd_eval(app.add_subcommand("eval", "evaluate a trained model"));
  cmd_bench(app.add_subcommand("bench", "time cached vs full aggregation"));
  cmd_sweep(app.add_subcommand("sweep", "train over a K x P grid"));
  cmd_gradcheck(app.add_subcommand(
      "gradcheck", "verify analytic gradients against finite differences"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
