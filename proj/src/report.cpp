#include "nglare/report.hpp"

#include <cmath>

#include "nglare/error.hpp"

namespace nglare {

using json = nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

namespace {

json condition_counts(const std::array<std::size_t, 4>& counts) {
  json j = json::object();
  for (Condition c : kAllConditions) j[to_string(c)] = counts[condition_index(c)];
  return j;
}

std::array<std::size_t, 4> parse_counts(const json& j) {
  std::array<std::size_t, 4> out{};
  for (Condition c : kAllConditions) out[condition_index(c)] = j.value(to_string(c), std::size_t{0});
  return out;
}

}  // namespace

json to_json(const JssReport& r) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["unit"] = "nats";
  j["config"] = {{"slice_count", r.config.slice_count},
                 {"bin_count", r.config.bin_count},
                 {"smoothing", r.config.smoothing},
                 {"early_threshold", r.config.early_threshold},
                 {"early_threshold_snapped", r.snapped_early_threshold}};
  j["group_labels"] = r.group_labels;
  j["manifold_ranks"] = r.manifold_ranks;
  j["angle_counts"] = {{"present", condition_counts(r.present_angles)},
                       {"missing", condition_counts(r.missing_angles)}};
  json outputs = json::object();
  for (const auto& p : r.pairs) {
    const std::string tag = std::string{to_char(p.a), ',', to_char(p.b)};
    outputs["JSS(" + tag + ")"] = p.jss;
    outputs["JSS_early(" + tag + ")"] = p.jss_early;
  }
  j["outputs"] = std::move(outputs);
  json pairs = json::array();
  for (const auto& p : r.pairs) {
    json pj;
    pj["pair"] = p.label();
    pj["a"] = to_string(p.a);
    pj["b"] = to_string(p.b);
    pj["jss"] = p.jss;
    pj["jss_early"] = p.jss_early;
    pj["flagged_slices"] = p.flagged_slices;
    pj["slice_means"] = p.slice_means();
    json groups = json::array();
    for (const auto& g : p.groups) {
      json slices = json::array();
      for (const auto& e : g.slices)
        slices.push_back({{"index", e.index},
                          {"lo", e.lo},
                          {"hi", e.hi},
                          {"js", e.js},
                          {"count_a", e.count_a},
                          {"count_b", e.count_b},
                          {"flag", to_string(e.flag)},
                          {"early", e.early}});
      groups.push_back({{"label", g.label}, {"jss", g.jss}, {"jss_early", g.jss_early}, {"slices", std::move(slices)}});
    }
    pj["groups"] = std::move(groups);
    pairs.push_back(std::move(pj));
  }
  j["pairs"] = std::move(pairs);
  return j;
}

JssReport jss_report_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kReportSchemaVersion)
      throw DataError("unsupported JSS report schema_version");
    JssReport r;
    const auto& c = j.at("config");
    r.config.slice_count = c.at("slice_count").get<std::size_t>();
    r.config.bin_count = c.at("bin_count").get<std::size_t>();
    r.config.smoothing = c.at("smoothing").get<double>();
    r.config.early_threshold = c.at("early_threshold").get<double>();
    r.snapped_early_threshold = c.at("early_threshold_snapped").get<double>();
    r.group_labels = j.at("group_labels").get<std::vector<std::string>>();
    r.manifold_ranks = j.value("manifold_ranks", std::vector<std::size_t>{});
    if (j.contains("angle_counts")) {
      r.present_angles = parse_counts(j["angle_counts"].at("present"));
      r.missing_angles = parse_counts(j["angle_counts"].at("missing"));
    }
    for (const auto& pj : j.at("pairs")) {
      PairSection p;
      p.a = parse_condition(pj.at("a").get<std::string>());
      p.b = parse_condition(pj.at("b").get<std::string>());
      p.jss = pj.at("jss").get<double>();
      p.jss_early = pj.at("jss_early").get<double>();
      p.flagged_slices = pj.at("flagged_slices").get<std::size_t>();
      for (const auto& gj : pj.at("groups")) {
        GroupSection g;
        g.label = gj.at("label").get<std::string>();
        g.jss = gj.at("jss").get<double>();
        g.jss_early = gj.at("jss_early").get<double>();
        for (const auto& ej : gj.at("slices")) {
          SliceEntry e;
          e.index = ej.at("index").get<std::size_t>();
          e.lo = ej.at("lo").get<double>();
          e.hi = ej.at("hi").get<double>();
          e.js = ej.at("js").get<double>();
          e.count_a = ej.at("count_a").get<std::size_t>();
          e.count_b = ej.at("count_b").get<std::size_t>();
          e.flag = parse_slice_flag(ej.at("flag").get<std::string>());
          e.early = ej.at("early").get<bool>();
          g.slices.push_back(e);
        }
        p.groups.push_back(std::move(g));
      }
      r.pairs.push_back(std::move(p));
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed JSS report: ") + e.what());
  }
}

json to_json(const ProxyScores& s) {
  return {{"model_id", s.model_id}, {"jb_pb_ratio", s.jb_pb_ratio}, {"jr_minmax", s.jr_minmax}, {"jss_proxy", s.jss_proxy}};
}

json to_json(const BootstrapResult& r) {
  json samples = json::array();
  for (double v : r.samples) samples.push_back(number_or_null(v));
  return {{"metric", r.metric},
          {"point", number_or_null(r.point)},
          {"ci_low", number_or_null(r.ci_low)},
          {"ci_high", number_or_null(r.ci_high)},
          {"replicates", r.replicates},
          {"seed", r.seed},
          {"undefined_count", r.undefined_count},
          {"samples", std::move(samples)}};
}

json to_json(const RankingComparison& r) {
  return {{"kendall_tau", r.kendall_tau},
          {"p_value_tau", r.p_value_tau},
          {"spearman_rho", r.spearman_rho},
          {"pearson_r", r.pearson_r},
          {"n", r.n}};
}

json to_json(const AnmCurve& c) {
  json values = json::array();
  for (const auto& v : c.values) values.push_back(v ? json(*v) : json(nullptr));
  json j = {{"tau_pred", c.tau_pred}, {"values", std::move(values)}, {"counts", c.counts}};
  if (c.normalized) {
    json norm = json::array();
    for (const auto& v : *c.normalized) norm.push_back(v ? json(*v) : json(nullptr));
    j["normalized"] = std::move(norm);
  } else {
    j["normalized"] = nullptr;
    j["normalized_undefined"] = "zero range";
  }
  return j;
}

}  // namespace nglare
