#include "nglare/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "nglare/costsim.hpp"
#include "nglare/io.hpp"
#include "nglare/pipeline.hpp"
#include "nglare/report.hpp"
#include "nglare/scores.hpp"
#include "nglare/stats.hpp"
#include "nglare/synthgen.hpp"

namespace nglare::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return kConfig;
    case ErrorKind::Data: return kData;
    case ErrorKind::Numeric: return kNumeric;
  }
  return kInternal;
}

std::string report_dir_name(const std::string& command, const json& config) {
  return command + "-" + io::sha256_hex(config.dump()).substr(0, 16);
}

namespace {

// ---- config access ----

// Reads keys from the user config, records the resolved value of every key it is asked for,
// and rejects keys nobody asked for.
class Settings {
 public:
  explicit Settings(json user) : user_(std::move(user)) {}

  template <class T>
  T get(const std::string& key, T fallback) {
    T v = fallback;
    if (auto it = user_.find(key); it != user_.end() && !it->is_null()) {
      try {
        v = it->get<T>();
      } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type (got " + std::string(it->type_name()) + ")");
      }
    }
    resolved_[key] = v;
    return v;
  }

  template <class T>
  std::optional<T> get_optional(const std::string& key) {
    auto it = user_.find(key);
    if (it == user_.end() || it->is_null()) {
      resolved_[key] = nullptr;
      return std::nullopt;
    }
    try {
      T v = it->get<T>();
      resolved_[key] = v;
      return v;
    } catch (const json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type (got " + std::string(it->type_name()) + ")");
    }
  }

  // Raw access for structured values; the value is copied into the resolved config as is.
  json get_raw(const std::string& key, json fallback) {
    auto it = user_.find(key);
    json v = (it == user_.end() || it->is_null()) ? std::move(fallback) : *it;
    resolved_[key] = v;
    return v;
  }

  bool has(const std::string& key) const {
    auto it = user_.find(key);
    return it != user_.end() && !it->is_null();
  }

  void finish() const {
    for (auto it = user_.begin(); it != user_.end(); ++it)
      if (!resolved_.contains(it.key()))
        throw ConfigError("unknown config key '" + it.key() + "'", "check the key against the command's documented options");
  }

  const json& resolved() const { return resolved_; }

 private:
  json user_;
  json resolved_ = json::object();
};

fs::path existing_path(Settings& s, const std::string& key) {
  const auto p = s.get_optional<std::string>(key);
  if (!p) throw ConfigError("missing required input '" + key + "'", "pass --" + key + " or set \"" + key + "\" in the config");
  if (!fs::exists(*p)) throw ConfigError("input path '" + *p + "' does not exist", "check --" + key);
  return *p;
}

std::size_t positive(Settings& s, const std::string& key, std::size_t fallback) {
  const auto v = s.get<long long>(key, static_cast<long long>(fallback));
  if (v <= 0) throw ConfigError("config key '" + key + "' must be positive");
  return static_cast<std::size_t>(v);
}

// ---- shared pipeline options ----

struct PipelineKeys {
  bool grouping = true;
  bool rank = false;
  bool angle_space = false;
  bool jss = false;
};

PipelineConfig read_pipeline(Settings& s, PipelineKeys keys, std::size_t threads) {
  PipelineConfig c;
  c.threads = threads;
  if (keys.grouping) {
    c.layer_group_count = positive(s, "layer_groups", 3);
    const auto mode = s.get<std::string>("progress", "shared");
    if (mode == "shared") {
      c.progress.mode = ProgressMode::SharedReference;
    } else if (mode == "per_group") {
      c.progress.mode = ProgressMode::PerGroup;
    } else {
      throw ConfigError("progress must be 'shared' or 'per_group', got '" + mode + "'");
    }
    if (auto g = s.get_optional<long long>("reference_group")) {
      if (*g < 0 || static_cast<std::size_t>(*g) >= c.layer_group_count)
        throw ConfigError("reference_group out of range", "use a 0-based index below layer_groups");
      c.progress.reference_group = static_cast<std::size_t>(*g);
    }
  }
  if (keys.rank) {
    const json r = s.get_raw("rank", "auto");
    const double fraction = s.get<double>("variance_fraction", 0.95);
    const auto max_rank = s.get_optional<long long>("max_rank");
    if (max_rank && *max_rank <= 0) throw ConfigError("max_rank must be positive");
    if (r.is_string() && r.get<std::string>() == "auto") {
      if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("variance_fraction must lie in (0, 1]");
      c.rank = RankPolicy::explained_variance(
          fraction, max_rank ? std::optional<std::size_t>(static_cast<std::size_t>(*max_rank)) : std::nullopt);
    } else if (r.is_number_integer() && r.get<long long>() > 0) {
      c.rank = RankPolicy::fixed(r.get<std::size_t>());
    } else {
      throw ConfigError("rank must be \"auto\" or a positive integer");
    }
  }
  if (keys.angle_space) {
    const auto space = s.get<std::string>("angle_space", "ambient");
    if (space == "ambient") {
      c.angle_space = AngleSpace::Ambient;
    } else if (space == "whitened") {
      c.angle_space = AngleSpace::Whitened;
    } else {
      throw ConfigError("angle_space must be 'ambient' or 'whitened', got '" + space + "'");
    }
  }
  if (keys.jss) {
    c.jss.slice_count = positive(s, "slices", 10);
    c.jss.bin_count = positive(s, "bins", 32);
    c.jss.smoothing = s.get<double>("smoothing", 0.5);
    c.jss.early_threshold = s.get<double>("early_threshold", 0.4);
    if (!(c.jss.smoothing >= 0.0)) throw ConfigError("smoothing must be non-negative");
    if (!(c.jss.early_threshold >= 0.0 && c.jss.early_threshold <= 1.0))
      throw ConfigError("early_threshold must lie in [0, 1]");
  }
  return c;
}

// ---- output ----

struct Output {
  json results = json::object();
  // Files (relative path -> bytes) written next to report.json. Commands may also write
  // directly into `dir` before returning.
  std::map<std::string, std::string> files;
};

struct Context {
  std::string command;
  fs::path staging;  // temp directory that becomes the report directory
  std::size_t threads = 1;
  std::shared_ptr<spdlog::logger> log;
};

json file_digests(const fs::path& dir) {
  std::vector<fs::path> paths;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) paths.push_back(fs::relative(e.path(), dir));
  std::sort(paths.begin(), paths.end());
  json j = json::object();
  for (const auto& p : paths) j[p.generic_string()] = io::sha256_hex(io::read_file(dir / p));
  return j;
}

// ---- synth ----

SyntheticSpec read_synth_spec(Settings& s) {
  SyntheticSpec spec;
  spec.model_id = s.get<std::string>("model_id", spec.model_id);
  spec.dim = positive(s, "dim", spec.dim);
  spec.true_rank = positive(s, "true_rank", spec.true_rank);
  spec.num_nodes = positive(s, "num_nodes", spec.num_nodes);
  spec.num_layers = positive(s, "num_layers", spec.num_layers);
  spec.n_per_condition = positive(s, "n_per_condition", spec.n_per_condition);
  spec.drift = s.get<double>("drift", spec.drift);
  spec.collapse_at = s.get_optional<double>("collapse_at");
  spec.collapse_strength = s.get<double>("collapse_strength", spec.collapse_strength);
  spec.noise = s.get<double>("noise", spec.noise);
  spec.subspace_scale = s.get<double>("subspace_scale", spec.subspace_scale);
  spec.step_scale = s.get<double>("step_scale", spec.step_scale);
  spec.drift_scale = s.get<double>("drift_scale", spec.drift_scale);
  spec.refusal_offset = s.get<double>("refusal_offset", spec.refusal_offset);
  spec.refusal_pull = s.get<double>("refusal_pull", spec.refusal_pull);
  spec.plain_drift = s.get<double>("plain_drift", spec.plain_drift);
  spec.schedule = parse_drift_schedule(s.get<std::string>("schedule", to_string(spec.schedule)));
  spec.step_at = s.get<double>("step_at", spec.step_at);
  spec.seed = s.get<std::uint64_t>("seed", spec.seed);
  return spec;
}

std::function<Output(Context&)> prepare_synth_entry(Settings& s, std::size_t) {
  const SyntheticSpec spec = read_synth_spec(s);
  const auto levels = s.get_optional<std::vector<double>>("safety_levels");
  spec.validate();
  return [spec, levels](Context& ctx) {
    Output o;
    if (!levels) {
      const auto suite = generate_suite(spec);
      write_trajectories(ctx.staging / "container", suite.container);
      o.results = {{"model_id", spec.model_id},
                   {"records", suite.container.records.size()},
                   {"collapsed_refusals", collapsed_count(spec)},
                   {"container", "container"}};
      return o;
    }
    const auto suite = generate_model_suite(spec, *levels, spec.seed);
    std::ostringstream truth;
    truth << "model_id,safety_level\n";
    json models = json::array();
    for (std::size_t i = 0; i < suite.models.size(); ++i) {
      const auto& m = suite.models[i].container;
      write_trajectories(ctx.staging / "models" / m.model_id, m);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", suite.safety_levels[i]);
      truth << m.model_id << ',' << buf << '\n';
      models.push_back({{"model_id", m.model_id}, {"safety_level", suite.safety_levels[i]},
                        {"container", "models/" + m.model_id}});
      ctx.log->info("synth: wrote {}", m.model_id);
    }
    o.files["ground_truth.csv"] = truth.str();
    o.results = {{"models", std::move(models)}, {"ground_truth", "ground_truth.csv"}};
    return o;
  };
}


// ---- fit / angles ----

std::vector<BenignManifold> load_manifolds(const fs::path& dir, const std::vector<std::string>& labels) {
  const fs::path root = fs::exists(dir / "manifolds") ? dir / "manifolds" : dir;
  std::vector<BenignManifold> out;
  for (std::size_t g = 0; g < labels.size(); ++g) {
    const fs::path p = root / std::to_string(g);
    if (!fs::exists(p))
      throw ConfigError("no manifold for layer group " + std::to_string(g) + " under " + root.string(),
                        "use the same layer_groups as the fit run");
    auto m = load_manifold(p);
    if (m.group_label != labels[g])
      throw ConfigError("manifold group '" + m.group_label + "' does not match layer group '" + labels[g] + "'",
                        "use the same layer_groups as the fit run");
    out.push_back(std::move(m));
  }
  if (fs::exists(root / std::to_string(labels.size())))
    throw ConfigError("fit run has more layer groups than requested", "use the same layer_groups as the fit run");
  return out;
}

std::function<Output(Context&)> prepare_fit(Settings& s, std::size_t threads) {
  const fs::path input = existing_path(s, "input");
  const PipelineConfig pc = read_pipeline(s, {.grouping = true, .rank = true}, threads);
  return [=](Context& ctx) {
    const auto ds = prepare_dataset(load_trajectories(input), pc);
    const auto ms = fit_benign_manifolds(ds, pc.rank);
    json groups = json::array();
    for (const auto& m : ms) {
      const std::string sub = "manifolds/" + std::to_string(m.group);
      save_manifold(ctx.staging / sub, m);
      std::vector<double> ev(m.eigenvalues.data(), m.eigenvalues.data() + m.eigenvalues.size());
      groups.push_back({{"group", m.group},
                        {"label", m.group_label},
                        {"rank", m.rank()},
                        {"dim", m.dim()},
                        {"sample_count", m.sample_count},
                        {"eigenvalues", ev},
                        {"on_manifold_tolerance", m.on_manifold_tolerance},
                        {"path", sub}});
      ctx.log->info("fit: group {} rank {}", m.group_label, m.rank());
    }
    Output o;
    o.results = {{"model_id", ds.model_id}, {"groups", std::move(groups)}};
    return o;
  };
}

json condition_counts(const std::array<std::size_t, 4>& counts) {
  json j = json::object();
  for (Condition c : kAllConditions) j[to_string(c)] = counts[condition_index(c)];
  return j;
}

std::function<Output(Context&)> prepare_angles(Settings& s, std::size_t threads) {
  const fs::path input = existing_path(s, "input");
  const fs::path manifolds = existing_path(s, "manifolds");
  const PipelineConfig pc = read_pipeline(s, {.grouping = true, .angle_space = true}, threads);
  return [=](Context&) {
    const auto ds = prepare_dataset(load_trajectories(input), pc);
    const auto ms = load_manifolds(manifolds, ds.group_labels);
    const auto angles = compute_angles(ds.trajectories, ms, pc.angle_space, pc.threads);
    Output o;
    o.files["angles.csv"] = format_angle_csv(angles);
    o.results = {{"model_id", ds.model_id},
                 {"group_labels", ds.group_labels},
                 {"present", condition_counts(angles.present_counts())},
                 {"missing", condition_counts(angles.missing_counts())},
                 {"angles", "angles.csv"}};
    return o;
  };
}

// model_id recorded by the run that produced `file`, if any.
std::optional<std::string> sibling_model_id(const fs::path& file) {
  const fs::path report = file.parent_path() / "report.json";
  if (!fs::exists(report)) return std::nullopt;
  try {
    const json j = json::parse(io::read_file(report));
    if (j.contains("results") && j["results"].contains("model_id") && j["results"]["model_id"].is_string())
      return j["results"]["model_id"].get<std::string>();
  } catch (const json::exception&) {
  }
  return std::nullopt;
}

// ---- jss ----

std::function<Output(Context&)> prepare_jss(Settings& s, std::size_t threads) {
  const bool from_angles = s.has("angles");
  if (from_angles == s.has("input"))
    throw ConfigError("jss needs exactly one of 'angles' or 'input'", "pass --angles FILE or --input DIR");
  fs::path source;
  PipelineConfig pc;
  if (from_angles) {
    source = existing_path(s, "angles");
    s.get_optional<std::string>("input");
    pc = read_pipeline(s, {.grouping = false, .jss = true}, threads);
  } else {
    source = existing_path(s, "input");
    s.get_optional<std::string>("angles");
    pc = read_pipeline(s, {.grouping = true, .rank = true, .angle_space = true, .jss = true}, threads);
  }
  BootstrapOptions bo;
  const auto replicates = s.get<long long>("bootstrap_replicates", 0);
  if (replicates < 0) throw ConfigError("bootstrap_replicates must be non-negative");
  bo.replicates = static_cast<std::size_t>(replicates);
  bo.confidence = s.get<double>("bootstrap_confidence", bo.confidence);
  bo.include_identity = s.get<bool>("bootstrap_include_identity", bo.include_identity);
  bo.seed = s.get<std::uint64_t>("seed", 0);
  bo.threads = threads;
  if (!(bo.confidence > 0.0 && bo.confidence < 1.0)) throw ConfigError("bootstrap_confidence must lie in (0, 1)");
  if (bo.replicates > 0 && from_angles)
    throw ConfigError("bootstrap resamples trajectories and needs a container", "pass --input instead of --angles");

  return [=](Context& ctx) {
    Output o;
    JssReport report;
    std::string model_id = "unknown";
    if (from_angles) {
      report = jss_from_angles(read_angle_csv(source), pc.jss);
      model_id = sibling_model_id(source).value_or(model_id);
    } else {
      const auto ds = prepare_dataset(load_trajectories(source), pc);
      model_id = ds.model_id;
      report = evaluate_dataset(ds, pc);
      if (bo.replicates > 0) {
        ctx.log->info("jss: bootstrap with {} replicates", bo.replicates);
        json b = json::array();
        for (const auto& r : bootstrap_jss(ds, pc, bo)) b.push_back(to_json(r));
        o.files["bootstrap.json"] = b.dump(2) + "\n";
      }
    }
    const json rj = to_json(report);
    o.files["jss.json"] = rj.dump(2) + "\n";
    o.files["jss_slices.csv"] = format_jss_csv(report);
    o.results = {{"model_id", model_id}, {"outputs", rj["outputs"]}, {"report", "jss.json"}};
    return o;
  };
}

// ---- proxy ----

std::function<Output(Context&)> prepare_proxy(Settings& s, std::size_t) {
  const auto inputs = s.get<std::vector<std::string>>("jss", {});
  if (inputs.empty()) throw ConfigError("proxy needs at least one JSS report", "pass --jss DIR (repeatable)");
  for (const auto& p : inputs)
    if (!fs::exists(p)) throw ConfigError("input path '" + p + "' does not exist", "check --jss");
  const auto agg_name = s.get<std::string>("aggregation", "cross_group_mean");
  ProxyAggregation agg;
  if (agg_name == "cross_group_mean") {
    agg = ProxyAggregation::CrossGroupMean;
  } else if (agg_name == "per_group_mean") {
    agg = ProxyAggregation::PerGroupMean;
  } else {
    throw ConfigError("aggregation must be 'cross_group_mean' or 'per_group_mean'");
  }
  return [=](Context&) {
    json rows = json::array();
    std::set<std::string> seen;
    std::ostringstream csv;
    csv << "model_id,score\n";
    for (const auto& in : inputs) {
      const fs::path file = fs::is_directory(in) ? fs::path(in) / "jss.json" : fs::path(in);
      const std::string fallback = fs::is_directory(in) ? fs::path(in).filename().string() : file.stem().string();
      const std::string id = sibling_model_id(file).value_or(fallback);
      if (!seen.insert(id).second) throw DataError("model '" + id + "' appears twice", "give each JSS report once");
      json j;
      try {
        j = json::parse(io::read_file(file));
      } catch (const json::exception& e) {
        throw DataError("cannot parse JSS report " + file.string() + ": " + e.what());
      }
      const auto scores = proxy_scores(jss_report_from_json(j), id, agg);
      rows.push_back(to_json(scores));
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", scores.jss_proxy);
      csv << id << ',' << buf << '\n';
    }
    Output o;
    o.files["scores.csv"] = csv.str();
    o.results = {{"models", std::move(rows)}, {"scores", "scores.csv"}};
    return o;
  };
}

// ---- rank ----

std::vector<std::pair<std::string, double>> read_score_csv(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<std::pair<std::string, double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'model_id,score'");
    const std::string id = line.substr(0, comma);
    std::string rest = line.substr(comma + 1);
    if (const auto c2 = rest.find(','); c2 != std::string::npos) rest.resize(c2);
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str() || *end != '\0') {
      if (rows.empty() && line_no == 1) continue;  // header
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": score '" + rest + "' is not a number");
    }
    if (!std::isfinite(v)) throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-finite score");
    rows.emplace_back(id, v);
  }
  return rows;
}

std::function<Output(Context&)> prepare_rank(Settings& s, std::size_t) {
  const fs::path scores_path = existing_path(s, "scores");
  const fs::path truth_path = existing_path(s, "truth");
  const auto max_lag = s.get_optional<long long>("max_lag");
  if (max_lag && *max_lag < 0) throw ConfigError("max_lag must be non-negative");
  return [=](Context&) {
    const auto scores = read_score_csv(scores_path);
    const auto truth = read_score_csv(truth_path);
    std::map<std::string, double> by_id;
    for (const auto& [id, v] : scores)
      if (!by_id.emplace(id, v).second) throw DataError("model '" + id + "' appears twice in " + scores_path.string());
    std::vector<double> a;
    std::vector<double> b;
    std::vector<std::string> ids;
    for (const auto& [id, v] : truth) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw DataError("model '" + id + "' has ground truth but no score", "score every model");
      a.push_back(it->second);
      b.push_back(v);
      ids.push_back(id);
      by_id.erase(it);
    }
    if (!by_id.empty())
      throw DataError("model '" + by_id.begin()->first + "' has a score but no ground truth", "add it to the truth CSV");
    const auto cmp = compare_rankings(a, b);
    Output o;
    o.results = to_json(cmp);
    o.results["models"] = ids;
    o.results["p_value_exact"] = cmp.n <= 10;
    if (max_lag) {
      const auto lag = lag_analysis(a, b, static_cast<int>(*max_lag));
      json corr = json::array();
      for (const auto& c : lag.correlations) corr.push_back(c ? json(*c) : json(nullptr));
      o.results["lag"] = {{"best_lag", lag.best_lag}, {"lags", lag.lags}, {"correlations", std::move(corr)}};
    }
    return o;
  };
}

// ---- anm ----

std::function<Output(Context&)> prepare_anm(Settings& s, std::size_t threads) {
  const fs::path input = existing_path(s, "input");
  const PipelineConfig pc = read_pipeline(s, {.grouping = true}, threads);
  const json phrases = s.get_raw("seed_phrases", json::array());
  const double tau_pred = s.get<double>("tau_pred", 1.0);
  const double tau_ref = s.get<double>("tau_ref", 0.05);
  const std::size_t slices = positive(s, "slices", 10);
  if (!(tau_pred > 0.0) || !(tau_ref > 0.0)) throw ConfigError("tau_pred and tau_ref must be positive");
  if (!phrases.is_array() || phrases.empty())
    throw ConfigError("anm needs seed_phrases", "list token id arrays or {\"text\", \"tokens\"} objects");
  std::vector<std::vector<std::size_t>> seeds;
  std::vector<std::string> texts;
  try {
    for (const auto& p : phrases) {
      if (p.is_array()) {
        seeds.push_back(p.get<std::vector<std::size_t>>());
        texts.emplace_back();
      } else {
        seeds.push_back(p.at("tokens").get<std::vector<std::size_t>>());
        texts.push_back(p.value("text", std::string{}));
      }
    }
  } catch (const json::exception&) {
    throw ConfigError("malformed seed_phrases entry", "use token id arrays or {\"text\", \"tokens\"} objects");
  }
  return [=](Context& ctx) {
    const auto container = load_trajectories(input);
    if (!container.vocabulary)
      throw DataError("container " + input.string() + " has no vocabulary", "re-extract with embeddings and logits");
    const auto& vocab = *container.vocabulary;
    const auto proto = build_refusal_prototype(load_embeddings(input, vocab), seeds, tau_ref, texts);
    const auto ds = prepare_dataset(container, pc);
    const std::size_t ref = pc.progress.reference_group.value_or(ds.group_labels.size() / 2);
    const auto grid = SliceGrid::uniform(slices);
    json curves = json::object();
    for (Condition c : kAllConditions) {
      std::vector<double> values;
      std::vector<double> progress;
      for (std::size_t i = 0; i < container.records.size(); ++i) {
        const auto& rec = container.records[i];
        if (rec.condition != c) continue;
        const auto logits = load_logits(input, rec, vocab.vocab_size);
        const auto& s_t = ds.trajectories[i].progress[ref];
        for (Eigen::Index t = 0; t < logits.rows(); ++t) {
          values.push_back(anm(proto, logits.row(t).transpose(), tau_pred));
          progress.push_back(s_t[static_cast<std::size_t>(t)]);
        }
      }
      if (values.empty()) {
        curves[to_string(c)] = nullptr;
        continue;
      }
      curves[to_string(c)] = to_json(anm_curve_from_nodes(values, progress, grid, tau_pred));
      ctx.log->info("anm: condition {} over {} nodes", to_string(c), values.size());
    }
    Output o;
    o.results = {{"model_id", container.model_id},
                 {"vocab_size", vocab.vocab_size},
                 {"prototype_mass", proto.w_ref.sum()},
                 {"curves", std::move(curves)}};
    return o;
  };
}

// ---- cost ----

std::function<Output(Context&)> prepare_cost(Settings& s, std::size_t) {
  CostParams p;
  p.targets = s.get<std::uint64_t>("targets", 0);
  p.offline_turns = s.get<double>("offline_turns", 0.0);
  p.redteam_turns = s.get<double>("redteam_turns", 0.0);
  p.attacker_tokens = s.get<double>("attacker_tokens", 0.0);
  p.subject_tokens = s.get<double>("subject_tokens", 0.0);
  p.evaluator_tokens = s.get<double>("evaluator_tokens", 0.0);
  p.attacker_seconds_per_token = s.get<double>("attacker_seconds_per_token", 0.0);
  p.subject_seconds_per_token = s.get<double>("subject_seconds_per_token", 0.0);
  p.evaluator_seconds_per_token = s.get<double>("evaluator_seconds_per_token", 0.0);
  p.offline_jss_seconds = s.get<double>("offline_jss_seconds", 0.0);
  p.benign_construction_seconds = s.get<double>("benign_construction_seconds", 0.0);
  p.validate();
  return [=](Context&) {
    const auto roles = baseline_role_tokens(p);
    const auto t = time_cost(p);
    const double total = roles.total();
    auto share = [&](double v) { return total > 0.0 ? json(v / total) : json(nullptr); };
    Output o;
    o.results = {
        {"tokens", {{"ours", token_cost_ours(p)}, {"baseline", token_cost_baseline(p)}, {"ratio", cost_ratio(p)}}},
        {"baseline_roles",
         {{"attacker", roles.attacker},
          {"subject", roles.subject},
          {"evaluator", roles.evaluator},
          {"attacker_share", share(roles.attacker)},
          {"subject_share", share(roles.subject)},
          {"evaluator_share", share(roles.evaluator)}}},
        {"seconds",
         {{"baseline_attacker", t.baseline_attacker},
          {"baseline_subject", t.baseline_subject},
          {"baseline_evaluator", t.baseline_evaluator},
          {"baseline_total", t.baseline_total},
          {"ours_forward", t.ours_forward},
          {"ours_offline_jss", t.ours_offline_jss},
          {"ours_benign_construction", t.ours_benign_construction},
          {"ours_total", t.ours_total}}}};
    return o;
  };
}

// ---- dispatch ----

struct Command {
  std::string name;
  std::string description;
  std::vector<std::string> path_flags;  // --flag VALUE stored under config key "flag"
  std::function<std::function<Output(Context&)>(Settings&, std::size_t)> prepare;
  bool uses_seed = false;
};

std::vector<Command> commands() {
  return {
      {"fit", "fit the benign manifold of each layer group", {"input"}, prepare_fit},
      {"angles", "turning angles of every trajectory", {"input", "manifolds"}, prepare_angles},
      {"jss", "slice-wise JS separability report", {"input", "angles"}, prepare_jss, true},
      {"proxy", "JB/PB ratio, JR min/max and the combined proxy", {}, prepare_proxy},
      {"rank", "rank agreement between scores and ground truth", {"scores", "truth"}, prepare_rank},
      {"anm", "alignment with a refusal prototype along progress", {"input"}, prepare_anm},
      {"cost", "token and time cost of both evaluation pipelines", {}, prepare_cost},
      {"synth", "synthetic trajectory containers", {}, prepare_synth_entry, true},
  };
}

spdlog::level::level_enum log_level() {
  const char* v = std::getenv("NGLARE_LOG");
  if (!v || !*v) return spdlog::level::warn;
  const std::string s = v;
  if (s == "error") return spdlog::level::err;
  if (s == "warn") return spdlog::level::warn;
  if (s == "info") return spdlog::level::info;
  if (s == "debug") return spdlog::level::debug;
  throw ConfigError("NGLARE_LOG must be one of error, warn, info, debug (got '" + s + "')");
}

json load_config_file(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file '" + path + "' does not exist");
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
  return j;
}

fs::path free_destination(const fs::path& root, const std::string& name) {
  fs::path dest = root / name;
  for (int k = 1; fs::exists(dest); ++k) dest = root / (name + "." + std::to_string(k));
  return dest;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::string command = "";
  fs::path staging;
  try {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err);
    auto log = std::make_shared<spdlog::logger>("nglare", sink);
    log->set_pattern("[%l] %v");
    log->set_level(log_level());

    CLI::App app{"Trajectory geometry safety evaluation", "nglare"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1, 1);
    std::string config_file;
    std::string out_dir = "reports";
    std::size_t threads = 0;
    std::uint64_t seed = 0;
    app.add_option("--config", config_file, "JSON config; flags override its keys");
    app.add_option("--out", out_dir, "root directory for report directories")->capture_default_str();
    auto* threads_opt = app.add_option("--threads", threads, "worker threads (default: all cores)")
                            ->check(CLI::PositiveNumber);
    auto* seed_opt = app.add_option("--seed", seed, "random seed");

    const auto cmds = commands();
    std::map<std::string, std::string> flag_values;
    std::vector<std::string> jss_inputs;
    std::string alias_config;
    for (const auto& c : cmds) {
      auto* sub = app.add_subcommand(c.name, c.description);
      sub->fallthrough();
      for (const auto& f : c.path_flags) sub->add_option("--" + f, flag_values[c.name + "." + f]);
      if (c.name == "proxy") sub->add_option("--jss", jss_inputs, "JSS report directory or jss.json (repeatable)");
      if (c.name == "jss") sub->add_option("--bootstrap", flag_values["jss.bootstrap_replicates"], "bootstrap replicates");
      if (c.name == "synth") sub->add_option("--spec", alias_config, "synthetic spec JSON (same as --config)");
      if (c.name == "cost") sub->add_option("--params", alias_config, "cost parameter JSON (same as --config)");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForVersion&) {
      out << kToolVersion << "\n";
      return kOk;
    } catch (const CLI::Success&) {
      out << app.help();
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << "nglare: " << e.what() << "\n";
      return kConfig;
    }

    const auto* sub = app.get_subcommands().front();
    command = sub->get_name();
    const auto& cmd = *std::find_if(cmds.begin(), cmds.end(), [&](const Command& c) { return c.name == command; });

    if (!alias_config.empty() && !config_file.empty())
      throw ConfigError("both --config and --" + std::string(command == "synth" ? "spec" : "params") + " given",
                        "pass one config file");
    if (!alias_config.empty()) config_file = alias_config;
    json user = config_file.empty() ? json::object() : load_config_file(config_file);

    for (const auto& [key, value] : flag_values) {
      const auto dot = key.find('.');
      if (key.substr(0, dot) != command || value.empty()) continue;
      const std::string k = key.substr(dot + 1);
      if (k == "bootstrap_replicates") {
        try {
          user[k] = std::stoll(value);
        } catch (const std::exception&) {
          throw ConfigError("--bootstrap expects an integer, got '" + value + "'");
        }
      } else {
        user[k] = value;
      }
    }
    if (!jss_inputs.empty()) user["jss"] = jss_inputs;
    if (seed_opt->count() > 0) {
      if (cmd.uses_seed) {
        user["seed"] = seed;
      } else {
        log->warn("--seed has no effect on '{}'", command);
      }
    }
    if (user.contains("threads")) {
      if (threads_opt->count() == 0) {
        try {
          threads = user["threads"].get<std::size_t>();
        } catch (const json::exception&) {
          throw ConfigError("config key 'threads' must be a positive integer");
        }
      }
      user.erase("threads");
    }
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

    Settings settings(std::move(user));
    auto runner = cmd.prepare(settings, threads);
    settings.finish();
    const json resolved = settings.resolved();
    const std::string name = report_dir_name(command, resolved);

    const fs::path root = out_dir;
    fs::create_directories(root);
    staging = root / (".tmp-" + name + "-" + std::to_string(::getpid()));
    fs::remove_all(staging);
    fs::create_directories(staging);

    Context ctx{command, staging, threads, log};
    log->info("{}: staging in {}", command, staging.string());
    Output o = runner(ctx);
    for (const auto& [rel, bytes] : o.files) {
      fs::create_directories((staging / rel).parent_path());
      io::write_file_atomic(staging / rel, bytes);
    }
    json report;
    report["tool"] = "nglare";
    report["version"] = kToolVersion;
    report["command"] = command;
    report["config"] = resolved;
    report["config_hash"] = io::sha256_hex(resolved.dump());
    report["results"] = std::move(o.results);
    report["files"] = file_digests(staging);
    io::write_file_atomic(staging / "report.json", report.dump(2) + "\n");

    const fs::path dest = free_destination(root, name);
    fs::rename(staging, dest);
    staging.clear();
    out << dest.string() << "\n";
    return kOk;
  } catch (const Error& e) {
    err << "nglare " << command << ": " << e.what();
    if (!e.hint().empty()) err << " (hint: " << e.hint() << ")";
    err << "\n";
    std::error_code ec;
    if (!staging.empty()) fs::remove_all(staging, ec);
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "nglare " << command << ": internal error: " << e.what() << "\n";
    std::error_code ec;
    if (!staging.empty()) fs::remove_all(staging, ec);
    return kInternal;
  }
}

}  // namespace nglare::cli
