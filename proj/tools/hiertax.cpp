// hiertax: command-line driver.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "hiertax/baselines.hpp"
#include "hiertax/dataset.hpp"
#include "hiertax/encoding.hpp"
#include "hiertax/error.hpp"
#include "hiertax/hybrid.hpp"
#include "hiertax/inference.hpp"
#include "hiertax/metrics.hpp"
#include "hiertax/rng.hpp"
#include "hiertax/sampling.hpp"
#include "hiertax/scorer.hpp"
#include "hiertax/stopper.hpp"
#include "hiertax/taxonomy.hpp"
#include "hiertax/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace hiertax;

namespace {

constexpr const char* kVersion = "0.1.0";

enum class Level { Error = 0, Warn, Info, Debug };
Level g_level = Level::Info;

void log(Level level, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= g_level) std::cerr << "hiertax: " << names[static_cast<int>(level)] << ": " << msg << '\n';
}

// Runtime failure after a partial output was written.
class PartialRunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

/// Writes to a temporary sibling and renames over the target on commit.
class AtomicFile {
 public:
  explicit AtomicFile(std::string path)
      : path_(std::move(path)), tmp_(path_ + ".tmp." + std::to_string(::getpid())) {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write '" + tmp_ + "'");
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }

  std::ostream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) throw std::runtime_error("write to '" + tmp_ + "' failed");
    out_.close();
    fs::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  std::string path_;
  std::string tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

void write_atomic(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  AtomicFile f(path);
  fn(f.stream());
  f.commit();
}

ordered_json resolved_options(const CLI::App& app) {
  ordered_json j = ordered_json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      std::string v;
      for (std::size_t i = 0; i < res.size(); ++i) v += (i ? "," : "") + res[i];
      j[name] = v;
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

struct RunContext {
  const CLI::App* root = nullptr;
  std::vector<const CLI::App*> commands;  // subcommand chain
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;

  void input(const std::string& path) {
    if (!path.empty()) inputs.push_back(path);
  }

  /// `<output>.manifest.json` for every output.
  void manifest(const std::vector<std::string>& outputs, const ordered_json& extra = {}) const {
    ordered_json m;
    m["tool"] = "hiertax";
    m["version"] = kVersion;
    std::string cmd;
    for (const CLI::App* c : commands) cmd += (cmd.empty() ? "" : " ") + c->get_name();
    m["command"] = cmd;
    m["seed"] = seed;
    ordered_json opts = resolved_options(*root);
    for (const CLI::App* c : commands) {
      const ordered_json sub = resolved_options(*c);
      for (const auto& [k, v] : sub.items()) opts[k] = v;
    }
    m["options"] = std::move(opts);
    auto ins = ordered_json::array();
    for (const std::string& p : inputs) ins.push_back({{"path", p}, {"fnv1a64", file_hash(p)}});
    m["inputs"] = std::move(ins);
    auto outs = ordered_json::array();
    for (const std::string& p : outputs) outs.push_back({{"path", p}, {"fnv1a64", file_hash(p)}});
    m["outputs"] = std::move(outs);
    if (!extra.is_null()) m["run"] = extra;
    for (const std::string& p : outputs) {
      write_atomic(p + ".manifest.json", [&](std::ostream& os) { os << m.dump(2) << '\n'; });
    }
  }
};

std::vector<RecordLine> load_record_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return read_record_lines(in);
}

std::vector<TenderRecord> strict_records(const std::string& path) {
  std::vector<TenderRecord> out;
  for (RecordLine& l : load_record_lines(path)) {
    if (!l.record) throw FormatError(path + ":" + std::to_string(l.line) + ": " + l.error);
    out.push_back(std::move(*l.record));
  }
  return out;
}

Taxonomy load_taxonomy(const std::string& path, const std::string& default_lang) {
  TaxonomyParseOptions opts;
  opts.default_lang = default_lang;
  return Taxonomy::load(path, opts);
}

std::optional<StopperWeights> load_optional_stopper(const std::string& source) {
  if (source.empty() || source == "off") return std::nullopt;
  return load_stopper(source);
}

// Global options.
struct GlobalOptions {
  std::uint64_t seed = 0;
  std::size_t parallel = 1;
  std::string log_level = "info";
};

// Inference options shared by the classify commands.
struct InferenceFlags {
  double threshold = 0.5;
  std::string stopper = "off";
  std::string lang = "en";
  std::size_t max_results = 0;
  bool keep_exhausted = false;
  bool strict = false;
  std::string trace;

  void add(CLI::App* app) {
    app->add_option("--threshold", threshold, "Acceptance threshold in (0, 1)");
    app->add_option("--stopper", stopper, "Stopper weights JSON, or 'off'");
    app->add_option("--lang", lang, "Description language");
    app->add_option("--max-results", max_results, "Keep the best N labels (0 = all)");
    app->add_flag("--keep-exhausted", keep_exhausted,
                  "Return a node whose children all fall below the threshold");
    app->add_flag("--strict", strict, "Abort on the first record error");
    app->add_option("--trace", trace, "Write traversal traces (JSON lines)");
  }

  InferenceConfig config(bool stopper_loaded) const {
    InferenceConfig cfg;
    cfg.threshold = threshold;
    cfg.use_stopper = stopper_loaded;
    cfg.lang = lang;
    if (max_results > 0) cfg.max_results = max_results;
    cfg.keep_exhausted_nodes = keep_exhausted;
    cfg.validate();
    return cfg;
  }
};

struct ScorerFlags {
  std::string scorer = "lexical";
  double noise = 0.0;
  double timeout = 30.0;
  std::size_t max_batch = 64;
  int retries = 2;

  void add(CLI::App* app) {
    app->add_option("--scorer", scorer, "lexical | oracle | remote:<url>");
    app->add_option("--noise", noise, "Oracle scorer noise in [0, 0.5)");
    app->add_option("--timeout", timeout, "Remote scorer timeout in seconds");
    app->add_option("--max-batch", max_batch, "Remote scorer candidates per request");
    app->add_option("--retries", retries, "Remote scorer retries after a transport failure");
  }

  ScorerProvider provider(const Taxonomy& tax, std::uint64_t seed) const {
    if (scorer == "lexical") {
      auto lex = std::make_shared<const LexicalScorer>();
      return [lex](const TenderRecord&) { return lex; };
    }
    if (scorer == "oracle") {
      const double n = noise;
      return [&tax, n, seed](const TenderRecord& rec) -> std::shared_ptr<const PairScorer> {
        if (!rec.cpv) throw FormatError("oracle scorer needs a cpv label on record " + rec.id);
        return std::make_shared<const OracleScorer>(tax, *rec.cpv, n, seed);
      };
    }
    if (scorer == "remote" || scorer.rfind("remote:", 0) == 0) {
      std::string url = scorer.size() > 7 ? scorer.substr(7) : std::string();
      if (url.empty()) {
        const char* env = std::getenv("HIERTAX_SCORER_URL");
        if (env == nullptr || *env == '\0') {
          throw DomainError("--scorer remote: needs a URL or HIERTAX_SCORER_URL");
        }
        url = env;
      }
      RemoteScorerOptions opts;
      opts.endpoint = url;
      opts.timeout_seconds = timeout;
      opts.max_batch = max_batch;
      opts.retries = retries;
      auto remote = std::make_shared<const RemoteScorer>(opts);
      return [remote](const TenderRecord&) { return remote; };
    }
    throw DomainError("unknown scorer '" + scorer + "'");
  }
};

/// Writes predictions (and traces), the manifest, and turns an aborted run
/// into PartialRunError after the completed prefix is on disk.
void finish_classification(RunContext& ctx, const CorpusResult& result, const std::string& out,
                           const std::string& trace_path) {
  write_atomic(out, [&](std::ostream& os) { write_predictions_jsonl(os, result); });
  std::vector<std::string> outputs{out};
  if (!trace_path.empty()) {
    write_atomic(trace_path, [&](std::ostream& os) {
      for (const CorpusEntry& e : result.entries) {
        if (e.trace) os << trace_to_json(*e.trace).dump() << '\n';
      }
    });
    outputs.push_back(trace_path);
  }
  std::size_t errors = 0, abstained = 0;
  for (const CorpusEntry& e : result.entries) {
    if (!e.result) {
      ++errors;
    } else if (e.result->abstained) {
      ++abstained;
    }
  }
  ordered_json run;
  run["records_written"] = result.entries.size();
  run["record_errors"] = errors;
  run["abstained"] = abstained;
  run["scorer_calls"] = result.scorer_calls;
  run["aborted"] = result.aborted;
  ctx.manifest(outputs, run);
  log(Level::Info, std::to_string(result.entries.size()) + " predictions, " +
                       std::to_string(abstained) + " abstained, " + std::to_string(errors) +
                       " errors, " + std::to_string(result.scorer_calls) + " scorer calls");
  if (result.aborted) {
    std::string cause = "unknown error";
    if (result.abort_cause) {
      try {
        std::rethrow_exception(result.abort_cause);
      } catch (const std::exception& e) {
        cause = e.what();
      }
    }
    throw PartialRunError("run aborted after " + std::to_string(result.entries.size()) +
                          " records: " + cause);
  }
}

std::vector<int> parse_k_list(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || k < 1) throw DomainError("bad --k entry '" + item + "'");
    ks.push_back(k);
  }
  if (ks.empty()) throw DomainError("--k is empty");
  return ks;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical zero-shot classification over a code taxonomy", "hiertax"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "Config file (TOML or INI); command-line flags take precedence");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--parallel", g.parallel, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "error | warn | info | debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  RunContext ctx;
  ctx.root = &app;
  std::function<void()> action;

  // taxonomy stats
  auto* tax_cmd = app.add_subcommand("taxonomy", "Taxonomy tools")->require_subcommand(1);
  struct {
    std::string file, out, lang;
  } ts;
  auto* ts_cmd = tax_cmd->add_subcommand("stats", "Structure statistics as CSV");
  ts_cmd->add_option("--file", ts.file, "Taxonomy CSV")->required()->check(CLI::ExistingFile);
  ts_cmd->add_option("--out", ts.out, "Output CSV")->required();
  ts_cmd->add_option("--lang", ts.lang, "Language for description word counts");
  ts_cmd->callback([&] {
    ctx.commands = {tax_cmd, ts_cmd};
    action = [&] {
      ctx.input(ts.file);
      const auto t0 = std::chrono::steady_clock::now();
      const Taxonomy tax = Taxonomy::load(ts.file);
      const TaxonomyStats st = taxonomy_stats(tax, ts.lang);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_atomic(ts.out, [&](std::ostream& os) { write_stats_csv(os, st); });
      ctx.manifest({ts.out});
      std::cout << "classes " << st.n_classes << "\nleaves " << st.n_leaves << "\nroots "
                << st.n_roots << "\nmax_depth " << st.max_depth << "\nmean_children "
                << st.mean_children << "\nsd_children " << st.sd_children << "\nseconds " << secs
                << '\n';
    };
  });

  // split
  struct {
    std::string data, train_out, test_out, seen_out;
    double test_fraction = 0.2;
    std::size_t unseen = 0;
  } sp;
  auto* sp_cmd = app.add_subcommand("split", "Train/test split with held-out classes");
  sp_cmd->add_option("--data", sp.data, "Records (JSON lines)")->required()->check(CLI::ExistingFile);
  sp_cmd->add_option("--test-fraction", sp.test_fraction, "Share of records sent to test");
  sp_cmd->add_option("--unseen", sp.unseen, "Classes held out of training entirely");
  sp_cmd->add_option("--train-out", sp.train_out, "Training records")->required();
  sp_cmd->add_option("--test-out", sp.test_out, "Test records")->required();
  sp_cmd->add_option("--seen-out", sp.seen_out, "Seen class list")->required();
  sp_cmd->callback([&] {
    ctx.commands = {sp_cmd};
    action = [&] {
      ctx.input(sp.data);
      const auto records = strict_records(sp.data);
      const DatasetSplit s = split_dataset(records, sp.test_fraction, sp.unseen, g.seed);
      // Records are copied through verbatim.
      std::map<std::string, std::string> raw;
      for (const RecordLine& l : load_record_lines(sp.data)) raw[l.record->id] = l.raw;
      const auto dump = [&](const std::vector<TenderRecord>& rs) {
        return [&](std::ostream& os) {
          for (const TenderRecord& r : rs) os << raw.at(r.id) << '\n';
        };
      };
      if (raw.size() != records.size()) throw FormatError("record ids must be unique for split");
      write_atomic(sp.train_out, dump(s.train));
      write_atomic(sp.test_out, dump(s.test));
      write_atomic(sp.seen_out, [&](std::ostream& os) { write_code_set(os, s.seen); });
      ordered_json run;
      run["train"] = s.train.size();
      run["test"] = s.test.size();
      std::vector<std::string> unseen;
      for (const LabelCode& c : s.unseen) unseen.push_back(c.str());
      run["unseen_classes"] = unseen;
      ctx.manifest({sp.train_out, sp.test_out, sp.seen_out}, run);
    };
  });

  // pairs generate
  auto* pairs_cmd = app.add_subcommand("pairs", "Training pairs")->require_subcommand(1);
  struct {
    std::string data, taxonomy, out, lang = "en";
    std::uint64_t epoch = 0;
    bool skip_invalid = false;
  } pg;
  auto* pg_cmd = pairs_cmd->add_subcommand("generate", "One exclusive-sibling pair per record");
  pg_cmd->add_option("--data", pg.data, "Records (JSON lines)")->required()->check(CLI::ExistingFile);
  pg_cmd->add_option("--taxonomy", pg.taxonomy, "Taxonomy CSV")->required()->check(CLI::ExistingFile);
  pg_cmd->add_option("--epoch", pg.epoch, "Epoch number");
  pg_cmd->add_option("--lang", pg.lang, "Description language");
  pg_cmd->add_flag("--skip-invalid", pg.skip_invalid, "Skip bad records with a warning");
  pg_cmd->add_option("--out", pg.out, "Pairs (JSON lines)")->required();
  pg_cmd->callback([&] {
    ctx.commands = {pairs_cmd, pg_cmd};
    action = [&] {
      ctx.input(pg.data);
      ctx.input(pg.taxonomy);
      const Taxonomy tax = load_taxonomy(pg.taxonomy, pg.lang);
      std::vector<TenderRecord> records;
      for (RecordLine& l : load_record_lines(pg.data)) {
        if (l.record) {
          records.push_back(std::move(*l.record));
        } else if (pg.skip_invalid) {
          log(Level::Warn, "line " + std::to_string(l.line) + ": " + l.error);
        } else {
          throw FormatError(pg.data + ":" + std::to_string(l.line) + ": " + l.error);
        }
      }
      EpochOptions opts;
      opts.seed = g.seed;
      opts.epoch = pg.epoch;
      opts.skip_invalid = pg.skip_invalid;
      opts.parallelism = g.parallel;
      opts.sampling.lang = pg.lang;
      const EpochResult r = generate_epoch(records, tax, opts);
      for (const std::string& w : r.warnings) log(Level::Warn, w);
      write_atomic(pg.out, [&](std::ostream& os) { write_pairs_jsonl(os, r.pairs); });
      std::size_t positives = 0;
      for (const TrainingPair& p : r.pairs) positives += p.polarity ? 1 : 0;
      ctx.manifest({pg.out}, {{"pairs", r.pairs.size()}, {"positives", positives}});
    };
  });

  // stopper train
  auto* stop_cmd = app.add_subcommand("stopper", "Stopper model")->require_subcommand(1);
  struct {
    std::string traces, out, taxonomy;
    StopperTrainOptions opts;
  } st;
  auto* st_cmd = stop_cmd->add_subcommand("train", "Fit the stopper on traversal traces");
  st_cmd->add_option("--traces", st.traces, "Traces (JSON lines)")->required()->check(CLI::ExistingFile);
  st_cmd->add_option("--taxonomy", st.taxonomy, "Taxonomy CSV, for traces without truth chains");
  st_cmd->add_option("--hidden", st.opts.hidden, "Hidden units")->check(CLI::PositiveNumber);
  st_cmd->add_option("--lr", st.opts.learning_rate, "Learning rate");
  st_cmd->add_option("--epochs", st.opts.epochs, "Full-batch epochs");
  st_cmd->add_option("--out", st.out, "Weights JSON")->required();
  st_cmd->callback([&] {
    ctx.commands = {stop_cmd, st_cmd};
    action = [&] {
      ctx.input(st.traces);
      std::optional<Taxonomy> tax;
      if (!st.taxonomy.empty()) {
        ctx.input(st.taxonomy);
        tax = Taxonomy::load(st.taxonomy);
      }
      std::vector<TraversalTrace> traces;
      std::ifstream in(st.traces);
      std::string line;
      std::size_t n = 0;
      while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          traces.push_back(trace_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
          throw FormatError(st.traces + ":" + std::to_string(n) + ": " + e.what());
        }
      }
      const auto examples = build_stopper_dataset(traces, tax ? &*tax : nullptr);
      st.opts.seed = g.seed;
      const StopperTrainResult r = train_stopper(examples, st.opts);
      write_atomic(st.out, [&](std::ostream& os) { os << stopper_to_json(r.weights).dump() << '\n'; });
      const double acc = stopper_accuracy(examples, r.weights);
      ctx.manifest({st.out}, {{"examples", examples.size()},
                             {"final_loss", r.loss_history.back()},
                             {"training_accuracy", acc}});
      log(Level::Info, std::to_string(examples.size()) + " examples, loss " +
                           std::to_string(r.loss_history.back()) + ", accuracy " + std::to_string(acc));
    };
  });

  // classify
  struct {
    std::string data, taxonomy, out;
    InferenceFlags inf;
    ScorerFlags sc;
  } cl;
  auto* cl_cmd = app.add_subcommand("classify", "Zero-shot hierarchical classification");
  cl_cmd->add_option("--data", cl.data, "Records (JSON lines)")->required()->check(CLI::ExistingFile);
  cl_cmd->add_option("--taxonomy", cl.taxonomy, "Taxonomy CSV")->required()->check(CLI::ExistingFile);
  cl_cmd->add_option("--out", cl.out, "Predictions (JSON lines)")->required();
  cl.inf.add(cl_cmd);
  cl.sc.add(cl_cmd);
  cl_cmd->callback([&] {
    ctx.commands = {cl_cmd};
    action = [&] {
      ctx.input(cl.data);
      ctx.input(cl.taxonomy);
      const Taxonomy tax = load_taxonomy(cl.taxonomy, cl.inf.lang);
      const auto stopper = load_optional_stopper(cl.inf.stopper);
      if (stopper) ctx.input(cl.inf.stopper);
      const InferenceConfig cfg = cl.inf.config(stopper.has_value());
      const ScorerProvider scorers = cl.sc.provider(tax, g.seed);
      const auto lines = load_record_lines(cl.data);
      CorpusOptions copts;
      copts.parallelism = g.parallel;
      copts.strict = cl.inf.strict;
      copts.collect_traces = !cl.inf.trace.empty();
      const CorpusResult r =
          classify_corpus(lines, tax, scorers, stopper ? &*stopper : nullptr, cfg, copts);
      finish_classification(ctx, r, cl.out, cl.inf.trace);
    };
  });

  // baseline train / classify
  auto* bl_cmd = app.add_subcommand("baseline", "Supervised baselines")->require_subcommand(1);
  struct {
    std::string data, taxonomy, out, strategy = "topdown";
    BaselineOptions opts;
  } bt;
  auto* bt_cmd = bl_cmd->add_subcommand("train", "Fit features, projection and classifiers");
  bt_cmd->add_option("--strategy", bt.strategy, "bigbang | topdown | pernode")
      ->check(CLI::IsMember({"bigbang", "topdown", "pernode"}));
  bt_cmd->add_option("--data", bt.data, "Training records")->required()->check(CLI::ExistingFile);
  bt_cmd->add_option("--taxonomy", bt.taxonomy, "Taxonomy CSV")->required()->check(CLI::ExistingFile);
  bt_cmd->add_option("--dim", bt.opts.dim, "Projection dimension");
  bt_cmd->add_option("--min-df", bt.opts.min_df, "Minimum document frequency of a term");
  bt_cmd->add_option("--l2", bt.opts.logistic.l2, "L2 penalty");
  bt_cmd->add_option("--max-iter", bt.opts.logistic.max_iterations, "Optimizer iterations");
  bt_cmd->add_option("--out", bt.out, "Model file")->required();
  bt_cmd->callback([&] {
    ctx.commands = {bl_cmd, bt_cmd};
    action = [&] {
      ctx.input(bt.data);
      ctx.input(bt.taxonomy);
      const Taxonomy tax = Taxonomy::load(bt.taxonomy);
      const auto records = strict_records(bt.data);
      bt.opts.strategy = parse_strategy(bt.strategy);
      bt.opts.parallelism = g.parallel;
      bt.opts.svd.seed = g.seed;
      const BaselineModel model = train_baseline(records, tax, bt.opts);
      write_atomic(bt.out, [&](std::ostream& os) { save_baseline(os, model); });
      ctx.manifest({bt.out}, {{"records", records.size()},
                             {"features", model.features.cols()},
                             {"classifiers", model.classifier.coverage()},
                             {"seen_classes", model.classifier.seen_classes.size()}});
      log(Level::Info, std::to_string(model.classifier.coverage()) + " classifiers over " +
                           std::to_string(tax.size()) + " taxonomy nodes");
    };
  });

  struct {
    std::string model, data, taxonomy, out;
    InferenceFlags inf;
  } bc;
  auto* bc_cmd = bl_cmd->add_subcommand("classify", "Predict with a trained baseline");
  bc_cmd->add_option("--model", bc.model, "Model file")->required()->check(CLI::ExistingFile);
  bc_cmd->add_option("--data", bc.data, "Records (JSON lines)")->required()->check(CLI::ExistingFile);
  bc_cmd->add_option("--taxonomy", bc.taxonomy, "Taxonomy CSV")->required()->check(CLI::ExistingFile);
  bc_cmd->add_option("--out", bc.out, "Predictions (JSON lines)")->required();
  bc.inf.add(bc_cmd);
  bc_cmd->callback([&] {
    ctx.commands = {bl_cmd, bc_cmd};
    action = [&] {
      ctx.input(bc.model);
      ctx.input(bc.data);
      ctx.input(bc.taxonomy);
      const Taxonomy tax = load_taxonomy(bc.taxonomy, bc.inf.lang);
      const BaselineModel model = load_baseline(bc.model);
      const auto stopper = load_optional_stopper(bc.inf.stopper);
      if (stopper) ctx.input(bc.inf.stopper);
      const InferenceConfig cfg = bc.inf.config(stopper.has_value());
      CorpusOptions copts;
      copts.parallelism = g.parallel;
      copts.strict = bc.inf.strict;
      copts.collect_traces = !bc.inf.trace.empty();
      const RecordPredictor one = [&](const TenderRecord& rec, TraversalTrace* trace) {
        return baseline_predict(model, rec, tax, cfg, stopper ? &*stopper : nullptr, trace);
      };
      finish_classification(ctx, run_corpus(load_record_lines(bc.data), one, copts), bc.out,
                            bc.inf.trace);
    };
  });

  // hybrid classify
  auto* hy_cmd = app.add_subcommand("hybrid", "Baseline plus zero-shot for unseen classes")
                     ->require_subcommand(1);
  struct {
    std::string model, data, taxonomy, out;
    InferenceFlags inf;
    ScorerFlags sc;
  } hc;
  auto* hc_cmd = hy_cmd->add_subcommand("classify", "Predict with the hybrid");
  hc_cmd->add_option("--model", hc.model, "Baseline model file")->required()->check(CLI::ExistingFile);
  hc_cmd->add_option("--data", hc.data, "Records (JSON lines)")->required()->check(CLI::ExistingFile);
  hc_cmd->add_option("--taxonomy", hc.taxonomy, "Taxonomy CSV")->required()->check(CLI::ExistingFile);
  hc_cmd->add_option("--out", hc.out, "Predictions (JSON lines)")->required();
  hc.inf.add(hc_cmd);
  hc.sc.add(hc_cmd);
  hc_cmd->callback([&] {
    ctx.commands = {hy_cmd, hc_cmd};
    action = [&] {
      ctx.input(hc.model);
      ctx.input(hc.data);
      ctx.input(hc.taxonomy);
      const Taxonomy tax = load_taxonomy(hc.taxonomy, hc.inf.lang);
      const BaselineModel model = load_baseline(hc.model);
      const auto stopper = load_optional_stopper(hc.inf.stopper);
      if (stopper) ctx.input(hc.inf.stopper);
      const InferenceConfig cfg = hc.inf.config(stopper.has_value());
      const ScorerProvider scorers = hc.sc.provider(tax, g.seed);
      const HybridClassifier hybrid(model, tax);
      CorpusOptions copts;
      copts.parallelism = g.parallel;
      copts.strict = hc.inf.strict;
      const RecordPredictor one = [&](const TenderRecord& rec, TraversalTrace*) {
        return hybrid.predict(rec, *scorers(rec), cfg, stopper ? &*stopper : nullptr);
      };
      finish_classification(ctx, run_corpus(load_record_lines(hc.data), one, copts), hc.out, "");
    };
  });

  // evaluate
  struct {
    std::string pred, truth, taxonomy, train, seen, out, per_depth, k = "1,2,3,4,5";
  } ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Hierarchical precision and recall report");
  ev_cmd->add_option("--pred", ev.pred, "Predictions (JSON lines)")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--truth", ev.truth, "Labeled records")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--taxonomy", ev.taxonomy, "Taxonomy CSV")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--train", ev.train, "Training records, for frequencies")->check(CLI::ExistingFile);
  ev_cmd->add_option("--seen-classes", ev.seen, "Seen class list")->check(CLI::ExistingFile);
  ev_cmd->add_option("--k", ev.k, "Comma-separated k values");
  ev_cmd->add_option("--per-depth-csv", ev.per_depth, "Per-depth table (default <out>.per_depth.csv)");
  ev_cmd->add_option("--out", ev.out, "Report JSON")->required();
  ev_cmd->callback([&] {
    ctx.commands = {ev_cmd};
    action = [&] {
      for (const std::string& p : {ev.pred, ev.truth, ev.taxonomy, ev.train, ev.seen}) ctx.input(p);
      const Taxonomy tax = Taxonomy::load(ev.taxonomy);
      const std::vector<int> ks = parse_k_list(ev.k);

      std::map<std::string, PredictionResult> preds;
      {
        std::ifstream in(ev.pred);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
          ++n;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          nlohmann::json j;
          try {
            j = nlohmann::json::parse(line);
          } catch (const nlohmann::json::exception& e) {
            throw FormatError(ev.pred + ":" + std::to_string(n) + ": " + e.what());
          }
          auto [id, r] = prediction_from_json(j);
          preds[id] = std::move(r);
        }
      }

      std::map<LabelCode, std::size_t> freq;
      std::set<LabelCode> seen_from_train;
      if (!ev.train.empty()) {
        for (const TenderRecord& r : strict_records(ev.train)) {
          if (!r.cpv) continue;
          const LabelCode c = tax.canonical(*r.cpv);
          ++freq[c];
          seen_from_train.insert(c);
        }
      }
      std::unordered_set<LabelCode> seen;
      if (!ev.seen.empty()) {
        std::ifstream in(ev.seen);
        for (const LabelCode& c : read_code_set(in)) seen.insert(c);
      } else {
        seen.insert(seen_from_train.begin(), seen_from_train.end());
      }

      std::vector<EvaluationInstance> instances;
      std::size_t missing = 0;
      for (const TenderRecord& r : strict_records(ev.truth)) {
        if (!r.cpv) continue;
        EvaluationInstance inst;
        inst.record_id = r.id;
        inst.ground_truth = tax.canonical(*r.cpv);
        if (const auto it = preds.find(r.id); it != preds.end()) {
          for (const RankedLabel& l : it->second.ranked) inst.ranked.push_back(l.code);
        } else {
          ++missing;
        }
        instances.push_back(std::move(inst));
      }
      if (missing > 0) {
        log(Level::Warn, std::to_string(missing) + " records have no prediction; scored as abstentions");
      }
      const EvaluationReport rep = aggregate(instances, tax, freq, seen, ks);
      const std::string per_depth = ev.per_depth.empty() ? ev.out + ".per_depth.csv" : ev.per_depth;
      write_atomic(ev.out, [&](std::ostream& os) { os << report_to_json(rep).dump(2) << '\n'; });
      write_atomic(per_depth, [&](std::ostream& os) { write_per_depth_csv(os, rep); });
      ctx.manifest({ev.out, per_depth}, {{"instances", instances.size()}, {"missing_predictions", missing}});
      std::cout << "micro_hp " << rep.micro_hp << "\nmacro_hp " << rep.macro_hp
                << "\nabstention_rate " << rep.abstention_rate << '\n';
    };
  });

  // imbalance
  struct {
    std::string data, taxonomy, out;
  } im;
  auto* im_cmd = app.add_subcommand("imbalance", "Per-class imbalance ratios");
  im_cmd->add_option("--data", im.data, "Labeled records")->required()->check(CLI::ExistingFile);
  im_cmd->add_option("--taxonomy", im.taxonomy, "Taxonomy CSV")->required()->check(CLI::ExistingFile);
  im_cmd->add_option("--out", im.out, "Output CSV")->required();
  im_cmd->callback([&] {
    ctx.commands = {im_cmd};
    action = [&] {
      ctx.input(im.data);
      ctx.input(im.taxonomy);
      const Taxonomy tax = Taxonomy::load(im.taxonomy);
      std::vector<LabelCode> labels;
      for (const TenderRecord& r : strict_records(im.data)) {
        if (r.cpv) labels.push_back(tax.canonical(*r.cpv));
      }
      if (labels.empty()) throw DomainError("imbalance: no labeled records");
      const ImbalanceReport rep = imbalance(labels, tax);
      write_atomic(im.out, [&](std::ostream& os) {
        os << "code,support,irlbp\n";
        for (const auto& [code, support] : rep.support) {
          os << code.str() << ',' << support << ',';
          if (const auto it = rep.irlbp.find(code); it != rep.irlbp.end()) os << it->second;
          os << '\n';
        }
      });
      ctx.manifest({im.out}, {{"hmeanir", rep.hmeanir},
                             {"n_zero_support", rep.n_zero_support},
                             {"max_support", rep.max_support}});
      std::cout << "hmeanir " << rep.hmeanir << "\nzero_support " << rep.n_zero_support << '\n';
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (e.get_exit_code() != 0) std::cerr << app.help();
    return 1;
  }

  g_level = g.log_level == "error"  ? Level::Error
            : g.log_level == "warn" ? Level::Warn
            : g.log_level == "debug" ? Level::Debug
                                     : Level::Info;
  ctx.seed = g.seed;
  try {
    action();
    return 0;
  } catch (const PartialRunError& e) {
    log(Level::Error, e.what());
    return 2;
  } catch (const FormatError& e) {
    log(Level::Error, e.what());
    return 1;
  } catch (const DomainError& e) {
    log(Level::Error, e.what());
    return 1;
  } catch (const UnknownCodeError& e) {
    log(Level::Error, e.what());
    return 1;
  } catch (const CLI::Error& e) {
    log(Level::Error, e.what());
    return 1;
  } catch (const std::exception& e) {
    log(Level::Error, e.what());
    return 2;
  }
}
