#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "deem/analysis.hpp"
#include "deem/datasets.hpp"
#include "deem/ds_model.hpp"
#include "deem/errors.hpp"
#include "deem/serialization.hpp"
#include "deem/trainer.hpp"

#ifndef DEEM_VERSION
#define DEEM_VERSION "unknown"
#endif

namespace deem::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  return path.parent_path() / (path.stem().string() + suffix);
}

std::vector<int> one_based(const std::vector<int>& v) {
  std::vector<int> out(v);
  for (int& x : out) ++x;
  return out;
}

json subset_json(const SubsetAccuracy& s) {
  return {{"value", s.value}, {"subset_size", s.subset_size}, {"empty_subset", s.empty_subset}};
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_json(const fs::path& path, const json& j) { write_text_file_atomic(path, j.dump(2) + "\n"); }

// ---- manifests --------------------------------------------------------------

struct Manifest {
  explicit Manifest(std::string name) : command(std::move(name)) {}
  std::string command;
  json config = nullptr;
  std::optional<std::uint64_t> seed;
  json inputs = json::object();
  json outputs = json::object();
  json summary = json::object();
  std::string status = "ok";
};

void write_manifest(const fs::path& path, const Manifest& m, std::chrono::steady_clock::time_point start) {
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json j = {{"command", m.command},
            {"status", m.status},
            {"version", DEEM_VERSION},
            {"config", m.config},
            {"seed", m.seed ? json(*m.seed) : json(nullptr)},
            {"inputs", m.inputs},
            {"outputs", m.outputs},
            {"summary", m.summary},
            {"duration_seconds", seconds}};
  write_json(path, j);
}

// ---- run configuration ------------------------------------------------------

struct ConfigFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  double learning_rate = 0, step_size_alpha = 0, layer_noise_sigma = 0, irbm_noise_sigma = 0;
  std::size_t batch_size = 0, epochs = 0, sampler_steps = 0, num_layers = 0;
  bool persistent_chains = false;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters;
};

template <class T>
void bind(CLI::App* app, ConfigFlags& f, const char* name, T& slot, T RunConfig::*field, const char* help) {
  f.setters.emplace_back(app->add_option(name, slot, help), [&slot, field](RunConfig& c) { c.*field = slot; });
}

void add_config_flags(CLI::App* app, ConfigFlags& f) {
  app->add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  bind(app, f, "--seed", f.seed, &RunConfig::seed, "random seed (default: $DEEM_SEED or 0)");
  bind(app, f, "--learning-rate", f.learning_rate, &RunConfig::learning_rate, "SGD step size");
  bind(app, f, "--batch-size", f.batch_size, &RunConfig::batch_size, "samples per update");
  bind(app, f, "--epochs", f.epochs, &RunConfig::epochs, "passes over the data");
  bind(app, f, "--sampler-steps", f.sampler_steps, &RunConfig::sampler_steps, "DMALA steps per update");
  bind(app, f, "--step-size-alpha", f.step_size_alpha, &RunConfig::step_size_alpha, "DMALA step size");
  bind(app, f, "--layer-noise-sigma", f.layer_noise_sigma, &RunConfig::layer_noise_sigma, "layer init noise");
  bind(app, f, "--irbm-noise-sigma", f.irbm_noise_sigma, &RunConfig::irbm_noise_sigma, "iRBM init noise");
  bind(app, f, "--num-layers", f.num_layers, &RunConfig::num_layers, "multinomial layers before the iRBM");
  bind(app, f, "--persistent-chains", f.persistent_chains, &RunConfig::persistent_chains,
       "keep negative chains across updates (true/false)");
}

std::uint64_t env_seed() {
  const char* env = std::getenv("DEEM_SEED");
  if (!env || !*env) return 0;
  std::uint64_t seed = 0;
  const char* end = env + std::char_traits<char>::length(env);
  const auto [ptr, ec] = std::from_chars(env, end, seed);
  if (ec != std::errc() || ptr != end) throw UsageError(std::string("DEEM_SEED is not a non-negative integer: ") + env);
  return seed;
}

RunConfig resolve_config(const ConfigFlags& f) {
  RunConfig config;
  config.seed = env_seed();
  if (!f.config_path.empty()) config = run_config_from_json(read_text_file(f.config_path), config);
  for (const auto& [option, apply] : f.setters)
    if (option->count() > 0) apply(config);
  config.validate();
  return config;
}

// ---- data ---------------------------------------------------------------------

struct DataFlags {
  std::string path;
  bool soft = false;
  int num_classes = 0;
};

void add_data_flags(CLI::App* app, DataFlags& f, bool with_classes = true) {
  app->add_option("--data", f.path, "predictions CSV")->required()->check(CLI::ExistingFile);
  app->add_flag("--soft", f.soft, "read per-class probability columns instead of hard labels");
  if (with_classes) app->add_option("--num-classes", f.num_classes, "K (inferred from hard labels when omitted)");
}

struct Dataset {
  OneHotBatch batch;
  std::optional<LabelMatrix> labels;
  std::optional<LabelVector> truth;
};

Dataset load_dataset(const DataFlags& f, int num_classes) {
  if (f.soft) {
    if (num_classes < 2) throw UsageError("--soft needs --num-classes");
    return {load_soft_predictions_csv(f.path, num_classes), std::nullopt, std::nullopt};
  }
  PredictionTable table = load_predictions_csv(f.path, num_classes);
  OneHotBatch batch = encode_one_hot(table.labels);
  return {std::move(batch), std::move(table.labels), std::move(table.truth)};
}

Dataset load_for_model(const DataFlags& f, const DeemModel& model) {
  Dataset data = load_dataset(f, model.num_classes());
  if (data.batch.units() != model.units())
    throw ShapeMismatch("data has " + std::to_string(data.batch.units()) + " classifiers, model expects " +
                        std::to_string(model.units()));
  return data;
}

LabelVector with_classes(const LabelVector& v, int k) { return {k, v.data()}; }

std::string trace_csv(const EnergyTrace& t) {
  std::ostringstream s;
  s << "epoch,positive,negative,difference,acceptance_rate\n";
  s << "0," << num(t.initial.positive) << ',' << num(t.initial.negative) << ',' << num(t.initial.difference) << ",\n";
  for (std::size_t e = 0; e < t.epochs(); ++e)
    s << e + 1 << ',' << num(t.positive[e]) << ',' << num(t.negative[e]) << ',' << num(t.difference[e]) << ','
      << (e < t.acceptance_rate.size() ? num(t.acceptance_rate[e]) : "") << '\n';
  return s.str();
}

// ---- generate -----------------------------------------------------------------

struct GenerateArgs {
  std::string kind, out, params_out, mask_out, manifest;
  std::size_t n = 0, d = 10, informative = 4;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = a.seed_opt->count() ? a.seed : env_seed();
  const fs::path data_path = a.out;
  const fs::path params_path = a.params_out.empty() ? sibling(data_path, ".params.json") : fs::path(a.params_out);
  Manifest m{"generate"};
  m.seed = seed;
  m.config = {{"kind", a.kind}, {"n", a.n}};
  json sidecar = {{"kind", a.kind}, {"n", a.n}, {"seed", seed}};

  if (a.kind == "cond_ind") {
    const CondIndData g = gen_cond_ind(a.n, seed, a.d, a.informative);
    m.config["d"] = a.d;
    m.config["informative"] = a.informative;
    sidecar["informative"] = a.informative;
    sidecar["ds_params"] = json::parse(to_json(g.params));
    save_predictions_csv(data_path, g.labels, g.truth);
  } else if (a.kind == "tree3k") {
    const Tree3kData g = gen_tree3k(a.n, seed);
    json transitions = json::array();
    for (const auto& t : g.transitions) transitions.push_back(matrix_json(t));
    sidecar["transitions"] = std::move(transitions);
    save_predictions_csv(data_path, g.labels, g.truth);
  } else {
    const AmpData g = gen_amp_data(a.n, seed);
    const fs::path mask_path = a.mask_out.empty() ? sibling(data_path, ".expert.csv") : fs::path(a.mask_out);
    sidecar["accuracies"] = g.accuracies;
    sidecar["expert_column"] = g.labels.classifiers();
    sidecar["expert_classes"] = {1, 2};
    sidecar["expert_mask"] = mask_path.filename().string();
    save_predictions_csv(data_path, g.labels, g.truth);
    save_mask_csv(mask_path, g.expert_mask);
    m.outputs["expert_mask"] = mask_path.string();
  }
  write_json(params_path, sidecar);
  m.outputs["data"] = data_path.string();
  m.outputs["params"] = params_path.string();
  write_manifest(a.manifest.empty() ? sibling(data_path, ".manifest.json") : fs::path(a.manifest), m, start);
  out << "wrote " << a.n << " rows to " << data_path.string() << '\n';
  return kExitOk;
}

// ---- train --------------------------------------------------------------------

struct TrainArgs {
  DataFlags data;
  ConfigFlags config;
  std::string model_out, trace_out, dead_out, manifest;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig config = resolve_config(a.config);
  const Dataset data = load_dataset(a.data, a.data.num_classes);
  const fs::path model_path = a.model_out;
  const fs::path trace_path = a.trace_out.empty() ? sibling(model_path, ".trace.csv") : fs::path(a.trace_out);
  const fs::path dead_path = a.dead_out.empty() ? sibling(model_path, ".dead_units.json") : fs::path(a.dead_out);
  const fs::path manifest_path = a.manifest.empty() ? sibling(model_path, ".manifest.json") : fs::path(a.manifest);

  Manifest m{"train"};
  m.config = json::parse(to_json(config));
  m.seed = config.seed;
  m.inputs["data"] = a.data.path;
  if (!a.config.config_path.empty()) m.inputs["config"] = a.config.config_path;
  m.outputs["trace"] = trace_path.string();

  const DeemModel initial = make_model(data.batch.num_classes(), data.batch.units(), config);
  try {
    const TrainResult result = train(initial, data.batch, config);
    write_text_file_atomic(model_path, to_json(result.model, config));
    write_text_file_atomic(trace_path, trace_csv(result.trace));
    write_json(dead_path, {{"count", result.dead_units.size()}, {"dead_units", one_based(result.dead_units)}});
    m.outputs["model"] = model_path.string();
    m.outputs["dead_units"] = dead_path.string();
    m.summary = {{"epochs", result.trace.epochs()},
                 {"dead_units", result.dead_units.size()},
                 {"final_difference", result.trace.epochs() ? result.trace.difference.back() : result.trace.initial.difference}};
    if (data.truth) m.summary["train_accuracy"] = accuracy(infer(result.model, data.batch), with_classes(*data.truth, data.batch.num_classes()));
    write_manifest(manifest_path, m, start);
    out << "trained " << result.trace.epochs() << " epochs; model written to " << model_path.string() << '\n';
    if (!result.dead_units.empty()) out << "warning: " << result.dead_units.size() << " dead output unit(s)\n";
    return kExitOk;
  } catch (const NonFiniteLoss& e) {
    write_text_file_atomic(trace_path, trace_csv(e.trace()));
    m.status = "diverged";
    m.summary = {{"epochs", e.trace().epochs()}, {"error", e.what()}};
    write_manifest(manifest_path, m, start);
    err << "error: training diverged: " << e.what() << "; partial trace in " << trace_path.string() << '\n';
    return kExitDiverged;
  }
}

// ---- infer --------------------------------------------------------------------

struct InferArgs {
  DataFlags data;
  std::string model, out, manifest;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const LoadedModel loaded = deem_model_from_json(read_text_file(a.model));
  const Dataset data = load_for_model(a.data, loaded.model);
  const LabelVector pred = infer(loaded.model, data.batch);
  save_labels_csv(a.out, pred);
  Manifest m{"infer"};
  m.config = json::parse(to_json(loaded.config));
  m.seed = loaded.config.seed;
  m.inputs = {{"model", a.model}, {"data", a.data.path}};
  m.outputs["predictions"] = a.out;
  m.summary["rows"] = pred.size();
  write_manifest(a.manifest.empty() ? sibling(a.out, ".manifest.json") : fs::path(a.manifest), m, start);
  out << "wrote " << pred.size() << " predictions to " << a.out << '\n';
  return kExitOk;
}

// ---- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string pred, truth, ensemble, mask, model, out, manifest;
  bool compare = false;
  int num_classes = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  LabelVector pred = load_labels_csv(a.pred, a.num_classes);
  LabelVector truth = load_labels_csv(a.truth, a.num_classes);
  std::optional<LabelMatrix> ensemble;
  if (!a.ensemble.empty()) ensemble = load_predictions_csv(a.ensemble, a.num_classes).labels;
  std::optional<LoadedModel> model;
  if (!a.model.empty()) model = deem_model_from_json(read_text_file(a.model));

  int k = std::max(pred.num_classes(), truth.num_classes());
  if (ensemble) k = std::max(k, ensemble->num_classes());
  if (model) k = std::max(k, model->model.num_classes());
  pred = with_classes(pred, k);
  truth = with_classes(truth, k);
  if (ensemble) ensemble = LabelMatrix(ensemble->samples(), ensemble->classifiers(), k, ensemble->data());

  json report = {{"samples", pred.size()}, {"num_classes", k}, {"accuracy", accuracy(pred, truth)}};
  if (ensemble) report["accuracy_quality"] = subset_json(accuracy_quality(pred, truth, *ensemble));
  if (!a.mask.empty()) {
    const std::vector<bool> mask = load_mask_csv(a.mask);
    report["expert"] = subset_json(masked_accuracy(pred, truth, mask, true));
    report["remaining"] = subset_json(masked_accuracy(pred, truth, mask, false));
  }
  if (a.compare) {
    if (!ensemble) throw UsageError("--compare needs --ensemble");
    json table = {{"prediction", accuracy(pred, truth)},
                  {"majority_vote", accuracy(majority_vote(*ensemble), truth)},
                  {"ds_em", accuracy(ds_predict(ds_fit_em(*ensemble).params, *ensemble), truth)}};
    if (model) {
      if (model->model.units() != ensemble->classifiers() || model->model.num_classes() != k)
        throw ShapeMismatch("model shape does not match the ensemble");
      table[model->model.layers.empty() ? "irbm" : "deem"] = accuracy(infer(model->model, encode_one_hot(*ensemble)), truth);
    }
    report["comparison"] = std::move(table);
  }

  const std::string text = report.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    write_text_file_atomic(a.out, text);
    out << "accuracy " << num(report["accuracy"].get<double>()) << "; report written to " << a.out << '\n';
  }
  const fs::path manifest_path =
      !a.manifest.empty() ? fs::path(a.manifest) : a.out.empty() ? fs::path() : sibling(a.out, ".manifest.json");
  if (!manifest_path.empty()) {
    Manifest m{"eval"};
    m.inputs = {{"predictions", a.pred}, {"truth", a.truth}};
    if (ensemble) m.inputs["ensemble"] = a.ensemble;
    if (!a.mask.empty()) m.inputs["mask"] = a.mask;
    if (model) m.inputs["model"] = a.model;
    if (!a.out.empty()) m.outputs["report"] = a.out;
    m.summary = report;
    write_manifest(manifest_path, m, start);
  }
  return kExitOk;
}

// ---- analyze ------------------------------------------------------------------

struct AnalyzeArgs {
  DataFlags data;
  std::string model, truth, params, mask, out_dir;
};

std::optional<DsParams> load_params_sidecar(const std::string& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0, 0);
  }
  if (j.is_object() && j.contains("ds_params")) return ds_params_from_json(j["ds_params"].dump());
  if (j.is_object() && j.contains("psi")) return ds_params_from_json(text);
  return std::nullopt;
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const LoadedModel loaded = deem_model_from_json(read_text_file(a.model));
  const DeemModel& model = loaded.model;
  const Dataset data = load_for_model(a.data, model);
  LabelVector truth = with_classes(load_labels_csv(a.truth, model.num_classes()), model.num_classes());
  if (truth.size() != data.batch.samples()) throw ShapeMismatch("truth length does not match the data");
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);

  const MiReport mi = mi_disentanglement_report(model, data.batch, truth);
  json layers = json::array(), layer_summary = json::array();
  for (const MiLayerEntry& layer : mi.layers) {
    json classes = json::array();
    for (const MiClassEntry& c : layer.classes)
      classes.push_back({{"true_class", c.true_class + 1},
                         {"samples", c.samples},
                         {"small_subset", c.small_subset},
                         {"max_off_diagonal", c.summary.max_off_diagonal},
                         {"frobenius_off_diagonal", c.summary.frobenius_off_diagonal},
                         {"mi", matrix_json(c.mi)}});
    layers.push_back({{"layer", layer.layer}, {"mean_max", layer.mean_max}, {"mean_frobenius", layer.mean_frobenius},
                      {"classes", std::move(classes)}});
    layer_summary.push_back({{"layer", layer.layer}, {"mean_max", layer.mean_max}, {"mean_frobenius", layer.mean_frobenius}});
  }
  write_json(dir / "mi_report.json", {{"layers", std::move(layers)}});

  std::vector<bool> mask;
  if (!a.mask.empty()) mask = load_mask_csv(a.mask);
  const std::vector<double> importance = learner_importance(model, data.batch, mask);
  std::ostringstream imp;
  imp << "classifier,importance\n";
  for (std::size_t i = 0; i < importance.size(); ++i) imp << i + 1 << ',' << num(importance[i]) << '\n';
  write_text_file_atomic(dir / "importance.csv", imp.str());

  json summary = {{"mi_layers", std::move(layer_summary)}, {"importance", importance}, {"recovery", nullptr}};
  Manifest m{"analyze"};
  m.config = json::parse(to_json(loaded.config));
  m.seed = loaded.config.seed;
  m.inputs = {{"model", a.model}, {"data", a.data.path}, {"truth", a.truth}};
  if (!a.mask.empty()) m.inputs["mask"] = a.mask;
  m.outputs = {{"mi_report", (dir / "mi_report.json").string()},
               {"importance", (dir / "importance.csv").string()},
               {"summary", (dir / "summary.json").string()}};

  if (!a.params.empty()) {
    m.inputs["params"] = a.params;
    if (const std::optional<DsParams> truth_params = load_params_sidecar(a.params)) {
      const RecoveryReport r = recovery_report(*truth_params, model.irbm);
      std::ostringstream rec;
      rec << "parameter,truth,recovered\n";
      for (const RecoveryPair& p : r.pairs) rec << p.name << ',' << num(p.truth) << ',' << num(p.recovered) << '\n';
      write_text_file_atomic(dir / "recovery.csv", rec.str());
      summary["recovery"] = {
          {"correlation", r.correlation}, {"max_abs_error", r.max_abs_error}, {"alignment", one_based(r.alignment)}};
      m.outputs["recovery"] = (dir / "recovery.csv").string();
    }
  }
  write_json(dir / "summary.json", summary);
  m.summary = summary;
  write_manifest(dir / "manifest.json", m, start);
  out << "analysis written to " << dir.string() << '\n';
  return kExitOk;
}

// ---- lr-sweep -----------------------------------------------------------------

struct SweepArgs {
  DataFlags data;
  ConfigFlags config;
  std::vector<double> lrs;
  double ema_alpha = 0.9;
  std::string out_dir;
};

int cmd_lr_sweep(const SweepArgs& a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig base = resolve_config(a.config);
  if (!(a.ema_alpha > 0.0 && a.ema_alpha < 1.0)) throw UsageError("--ema-alpha must lie in (0, 1)");
  const Dataset data = load_dataset(a.data, a.data.num_classes);
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  const DeemModel initial = make_model(data.batch.num_classes(), data.batch.units(), base);

  json trials = json::array();
  json outputs = json::object();
  for (std::size_t t = 0; t < a.lrs.size(); ++t) {
    RunConfig config = base;
    config.learning_rate = a.lrs[t];
    config.validate();
    EnergyTrace trace;
    bool diverged = false;
    std::string error;
    try {
      trace = train(initial, data.batch, config).trace;
    } catch (const NonFiniteLoss& e) {
      trace = e.trace();
      diverged = true;
      error = e.what();
    }
    const TraceVerdict v = energy_trace_postprocess(trace, a.ema_alpha);
    std::ostringstream csv;
    csv << "epoch,positive,negative,difference,positive_ema,negative_ema,difference_ema\n";
    for (std::size_t e = 0; e < v.positive.size(); ++e) {
      const auto raw = [&](const std::vector<double>& s, double first) { return e == 0 ? first : s[e - 1]; };
      csv << e << ',' << num(raw(trace.positive, trace.initial.positive)) << ','
          << num(raw(trace.negative, trace.initial.negative)) << ',' << num(raw(trace.difference, trace.initial.difference))
          << ',' << num(v.positive[e]) << ',' << num(v.negative[e]) << ',' << num(v.difference[e]) << '\n';
    }
    const std::string name = "trace_" + std::to_string(t + 1) + ".csv";
    write_text_file_atomic(dir / name, csv.str());
    outputs["trace_" + std::to_string(t + 1)] = (dir / name).string();
    json trial = {{"learning_rate", a.lrs[t]},
                  {"trace", name},
                  {"epochs", trace.epochs()},
                  {"initial_difference", trace.initial.difference},
                  {"diverged", diverged},
                  {"positive_increasing", v.positive_increasing},
                  {"negative_increasing", v.negative_increasing},
                  {"difference_exploded", v.difference_exploded},
                  {"stable", v.stable() && !diverged}};
    if (diverged) trial["error"] = error;
    trials.push_back(std::move(trial));
    out << "lr " << num(a.lrs[t]) << ": " << (diverged ? "diverged" : v.stable() ? "stable" : "flagged") << '\n';
  }
  write_json(dir / "sweep.json", {{"ema_alpha", a.ema_alpha}, {"trials", trials}});
  outputs["sweep"] = (dir / "sweep.json").string();

  Manifest m{"lr-sweep"};
  m.config = json::parse(to_json(base));
  m.config["learning_rates"] = a.lrs;
  m.config["ema_alpha"] = a.ema_alpha;
  m.seed = base.seed;
  m.inputs["data"] = a.data.path;
  if (!a.config.config_path.empty()) m.inputs["config"] = a.config.config_path;
  m.outputs = std::move(outputs);
  m.summary["trials"] = trials;
  write_manifest(dir / "manifest.json", m, start);
  return kExitOk;
}

// ---- inject-expert ------------------------------------------------------------

struct InjectArgs {
  std::string data, truth, out, manifest;
  std::size_t column = 0;
  std::vector<int> classes;
  int num_classes = 0;
};

int cmd_inject(const InjectArgs& a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const PredictionTable table = load_predictions_csv(a.data, a.num_classes);
  const int k = table.labels.num_classes();
  std::optional<LabelVector> truth = table.truth;
  if (!a.truth.empty()) truth = load_labels_csv(a.truth, k);
  if (!truth) throw UsageError("no truth: the data has no label column and --truth was not given");
  if (a.column < 1) throw UsageError("--column is 1-based");
  std::vector<int> classes;
  for (int c : a.classes) {
    if (c < 1 || c > k) throw LabelOutOfRange("expert class " + std::to_string(c) + " outside 1.." + std::to_string(k));
    classes.push_back(c - 1);
  }
  const LabelVector t = with_classes(*truth, k);
  const LabelMatrix injected = inject_expert(table.labels, t, a.column - 1, classes);
  if (table.truth)
    save_predictions_csv(a.out, injected, t);
  else
    save_predictions_csv(a.out, injected);

  Manifest m{"inject-expert"};
  m.config = {{"column", a.column}, {"classes", a.classes}};
  m.inputs["data"] = a.data;
  if (!a.truth.empty()) m.inputs["truth"] = a.truth;
  m.outputs["data"] = a.out;
  write_manifest(a.manifest.empty() ? sibling(a.out, ".manifest.json") : fs::path(a.manifest), m, start);
  out << "classifier " << a.column << " made expert on " << classes.size() << " class(es); wrote " << a.out << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised ensemble learning with deep energy-based models", "deem"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DEEM_VERSION);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "write a synthetic prediction matrix");
  generate->add_option("--kind", gen.kind, "generator")->required()->check(CLI::IsMember({"cond_ind", "tree3k", "amp_data"}));
  generate->add_option("--n", gen.n, "rows")->required()->check(CLI::PositiveNumber);
  gen.seed_opt = generate->add_option("--seed", gen.seed, "random seed (default: $DEEM_SEED or 0)");
  generate->add_option("--d", gen.d, "classifiers (cond_ind)");
  generate->add_option("--informative", gen.informative, "informative classifiers (cond_ind)");
  generate->add_option("--out", gen.out, "predictions CSV with a label column")->required();
  generate->add_option("--params-out", gen.params_out, "generator sidecar JSON");
  generate->add_option("--mask-out", gen.mask_out, "expert mask CSV (amp_data)");
  generate->add_option("--manifest", gen.manifest, "run manifest path");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "fit a model to a prediction matrix");
  add_data_flags(train_cmd, tr.data);
  add_config_flags(train_cmd, tr.config);
  train_cmd->add_option("--model-out", tr.model_out, "model JSON")->required();
  train_cmd->add_option("--trace-out", tr.trace_out, "energy trace CSV");
  train_cmd->add_option("--dead-units-out", tr.dead_out, "dead-units report JSON");
  train_cmd->add_option("--manifest", tr.manifest, "run manifest path");

  InferArgs inf;
  CLI::App* infer_cmd = app.add_subcommand("infer", "predict one label per row");
  infer_cmd->add_option("--model", inf.model, "model JSON")->required()->check(CLI::ExistingFile);
  add_data_flags(infer_cmd, inf.data, false);
  infer_cmd->add_option("--out", inf.out, "labels CSV")->required();
  infer_cmd->add_option("--manifest", inf.manifest, "run manifest path");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
  eval_cmd->add_option("--pred", ev.pred, "CSV with a label column")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--truth", ev.truth, "CSV with a label column")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--ensemble", ev.ensemble, "ensemble predictions CSV")->check(CLI::ExistingFile);
  eval_cmd->add_option("--mask", ev.mask, "expert mask CSV")->check(CLI::ExistingFile);
  eval_cmd->add_option("--model", ev.model, "model JSON for the comparison table")->check(CLI::ExistingFile);
  eval_cmd->add_flag("--compare", ev.compare, "add majority vote and DS-EM accuracies");
  eval_cmd->add_option("--num-classes", ev.num_classes, "K");
  eval_cmd->add_option("--out", ev.out, "report JSON (stdout when omitted)");
  eval_cmd->add_option("--manifest", ev.manifest, "run manifest path");

  AnalyzeArgs an;
  CLI::App* analyze = app.add_subcommand("analyze", "mutual information, importance and recovery reports");
  analyze->add_option("--model", an.model, "model JSON")->required()->check(CLI::ExistingFile);
  add_data_flags(analyze, an.data, false);
  analyze->add_option("--truth", an.truth, "CSV with a label column")->required()->check(CLI::ExistingFile);
  analyze->add_option("--params", an.params, "generator sidecar JSON")->check(CLI::ExistingFile);
  analyze->add_option("--mask", an.mask, "restrict importance to a subset")->check(CLI::ExistingFile);
  analyze->add_option("--out-dir", an.out_dir, "output directory")->required();

  SweepArgs sw;
  CLI::App* sweep = app.add_subcommand("lr-sweep", "train once per learning rate from a shared initialization");
  add_data_flags(sweep, sw.data);
  add_config_flags(sweep, sw.config);
  sweep->add_option("--lrs", sw.lrs, "comma-separated learning rates")->required()->delimiter(',');
  sweep->add_option("--ema-alpha", sw.ema_alpha, "trace smoothing factor");
  sweep->add_option("--out-dir", sw.out_dir, "output directory")->required();

  InjectArgs inj;
  CLI::App* inject = app.add_subcommand("inject-expert", "make one classifier an oracle on chosen classes");
  inject->add_option("--data", inj.data, "predictions CSV")->required()->check(CLI::ExistingFile);
  inject->add_option("--truth", inj.truth, "CSV with a label column (default: the data's own)")->check(CLI::ExistingFile);
  inject->add_option("--column", inj.column, "1-based classifier column")->required();
  inject->add_option("--classes", inj.classes, "comma-separated 1-based classes")->required()->delimiter(',');
  inject->add_option("--num-classes", inj.num_classes, "K");
  inject->add_option("--out", inj.out, "output CSV")->required();
  inject->add_option("--manifest", inj.manifest, "run manifest path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen, out);
    if (train_cmd->parsed()) return cmd_train(tr, out, err);
    if (infer_cmd->parsed()) return cmd_infer(inf, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (analyze->parsed()) return cmd_analyze(an, out);
    if (sweep->parsed()) return cmd_lr_sweep(sw, out);
    if (inject->parsed()) return cmd_inject(inj, out);
  } catch (const NonFiniteLoss& e) {
    err << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const ParseError& e) {
    err << "error: " << e.what();
    if (e.row() > 0) err << " (row " << e.row() << ", column " << e.column() << ')';
    err << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace deem::cli
