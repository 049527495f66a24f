#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "../support/gen.hpp"
#include "nglare/error.hpp"
#include "nglare/scores.hpp"
#include "nglare/synthgen.hpp"

using namespace nglare;

namespace {

// Report with hand-set slice values: values[pair][group][slice].
JssReport hand_report(const std::array<std::vector<std::vector<double>>, 4>& values) {
  JssReport r;
  const auto grid = SliceGrid::uniform(values[0][0].size(), 0.4);
  for (std::size_t k = 0; k < 4; ++k) {
    PairSection p;
    p.a = kComparisons[k].first;
    p.b = kComparisons[k].second;
    for (std::size_t g = 0; g < values[k].size(); ++g) {
      GroupSection gs;
      gs.label = "g" + std::to_string(g);
      for (std::size_t i = 0; i < values[k][g].size(); ++i) {
        SliceEntry e;
        e.index = i;
        e.js = values[k][g][i];
        e.early = grid.is_early(i);
        gs.jss += e.js;
        if (e.early) gs.jss_early += e.js;
        gs.slices.push_back(e);
      }
      p.jss += gs.jss / static_cast<double>(values[k].size());
      p.groups.push_back(gs);
    }
    r.pairs.push_back(p);
  }
  return r;
}

Eigen::MatrixXd random_embeddings(gen::Gen& g, std::size_t vocab, std::size_t dim) { return g.matrix(vocab, dim); }

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.n_per_condition = 10;
  s.num_nodes = 11;
  return s;
}

}  // namespace

TEST_CASE("proxy metrics from slice values") {
  // J-B, J-R, B-R, P-B; two groups, two slices each.
  const auto r = hand_report({{
      {{0.1, 0.3}, {0.3, 0.1}},  // J-B: means 0.2, 0.2 -> sum 0.4
      {{0.2, 0.6}, {0.2, 0.2}},  // J-R: means 0.2, 0.4
      {{0.0, 0.0}, {0.0, 0.0}},
      {{0.4, 0.4}, {0.4, 0.4}},  // P-B: sum 0.8
  }});
  CHECK(jb_pb_ratio(r) == doctest::Approx(0.5));
  CHECK(jr_minmax(r) == doctest::Approx(0.5));
  CHECK(jss_proxy(0.5, 0.5) == 0.5);
  const auto s = proxy_scores(r, "m");
  CHECK(s.model_id == "m");
  CHECK(s.jss_proxy == doctest::Approx(0.5));
  // Per-group aggregation: J-R groups give 1/3 and 1.
  CHECK(jr_minmax(r, ProxyAggregation::PerGroupMean) == doctest::Approx((1.0 / 3.0 + 1.0) / 2.0));
  CHECK(jb_pb_ratio(r, ProxyAggregation::PerGroupMean) == doctest::Approx(0.5));
}

TEST_CASE("undefined proxies raise instead of returning a number") {
  const auto r = hand_report({{
      {{0.1, 0.3}},
      {{0.0, 0.0}},
      {{0.0, 0.0}},
      {{0.0, 0.0}},
  }});
  CHECK_THROWS_AS(jb_pb_ratio(r), UndefinedMetricError);
  CHECK_THROWS_AS(jr_minmax(r), UndefinedMetricError);
  CHECK_THROWS_AS(proxy_scores(r, "m"), UndefinedMetricError);
}

TEST_CASE("softmax is shift invariant and numerically stable") {
  Eigen::VectorXd z(3);
  z << 1000.0, 999.0, -1e6;
  const auto p = softmax(z);
  CHECK(p.allFinite());
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(p(0) / p(1) == doctest::Approx(std::exp(1.0)));
  CHECK((softmax(z.array() + 5.0) - p).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((softmax(z, 2.0) - softmax(z / 2.0)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(softmax(z, 0.0), ConfigError);
}

TEST_CASE("ANM contracts") {
  gen::Gen g(51);
  const std::size_t V = 40;
  const auto emb = random_embeddings(g, V, 8);
  const auto proto = build_refusal_prototype(emb, {{3, 4}, {7}, {10, 11, 12}});
  CHECK(std::abs(proto.w_ref.sum() - 1.0) < 1e-9);
  CHECK((proto.w_ref.array() >= 0.0).all());
  CHECK(std::abs(proto.c_hat.norm() - 1.0) < 1e-12);

  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd z = g.vector(V) * 3.0;
    const double base = anm(proto, z);
    CHECK(std::abs(anm(proto, (z.array() + g.normal() * 50.0).matrix()) - base) < 1e-9);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
  }
  for (Eigen::Index v : {0, 7, 39}) {
    Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(V);
    one_hot(v) = 1e4;
    CHECK(std::abs(anm(proto, one_hot) - proto.w_ref(v)) < 1e-9);
  }
  CHECK(std::abs(anm(proto, Eigen::VectorXd::Constant(V, 2.5)) - 1.0 / V) < 1e-9);
  CHECK_THROWS_AS(anm(proto, Eigen::VectorXd::Zero(V + 1)), DataError);
}

TEST_CASE("refusal prototype concentrates on tokens near the seeds") {
  // Token 0 and 1 point the same way; token 2 is orthogonal.
  Eigen::MatrixXd emb(3, 2);
  emb << 1, 0, 2, 0, 0, 1;
  const auto proto = build_refusal_prototype(emb, {{0}}, 0.05);
  CHECK(proto.w_ref(0) == doctest::Approx(proto.w_ref(1)));
  CHECK(proto.w_ref(2) < 1e-8);
  CHECK_THROWS_AS(build_refusal_prototype(emb, {}), ConfigError);
  CHECK_THROWS_AS(build_refusal_prototype(emb, {{5}}), DataError);
  CHECK_THROWS_AS(build_refusal_prototype(emb, {{0}}, 0.0), ConfigError);
  Eigen::MatrixXd zero_row = emb;
  zero_row.row(1).setZero();
  CHECK_THROWS_AS(build_refusal_prototype(zero_row, {{0}}), DataError);
}

TEST_CASE("ANM curve averages nodes per slice") {
  const std::vector<double> values{0.1, 0.3, 0.5, 0.9};
  const std::vector<double> s{0.0, 0.05, 0.5, 1.0};
  const auto c = anm_curve_from_nodes(values, s, SliceGrid::uniform(4, 0.5), 1.0);
  REQUIRE(c.values.size() == 4);
  CHECK(*c.values[0] == doctest::Approx(0.2));
  CHECK_FALSE(c.values[1]);
  CHECK(*c.values[2] == doctest::Approx(0.5));
  CHECK(*c.values[3] == doctest::Approx(0.9));
  CHECK(c.counts == std::vector<std::size_t>{2, 0, 1, 1});
  REQUIRE(c.normalized);
  CHECK((*c.normalized)[0] == doctest::Approx(0.0));
  CHECK((*c.normalized)[3] == doctest::Approx(1.0));
  const auto flat = anm_curve_from_nodes(std::vector<double>{0.4, 0.4}, std::vector<double>{0.0, 1.0},
                                         SliceGrid::uniform(4, 0.5), 1.0);
  CHECK_FALSE(flat.normalized);
  CHECK_THROWS_AS(anm_curve_from_nodes(values, std::vector<double>{0.0}, SliceGrid::uniform(), 1.0), DataError);
}

TEST_CASE("percentile interval uses order statistics") {
  std::vector<double> v;
  for (int i = 0; i <= 100; ++i) v.push_back(100 - i);
  const auto [lo, hi] = percentile_interval(v, 0.9);
  CHECK(lo == 5.0);
  CHECK(hi == 95.0);
  v.push_back(std::nan(""));
  CHECK(percentile_interval(v, 0.9).first == 5.0);
  CHECK(std::isnan(percentile_interval({std::nan("")}, 0.9).first));
}

TEST_CASE("bootstrap indices are reproducible and in range") {
  const auto a = bootstrap_indices(25, 7, 3, Condition::Jailbreak);
  CHECK(a == bootstrap_indices(25, 7, 3, Condition::Jailbreak));
  CHECK(a != bootstrap_indices(25, 7, 4, Condition::Jailbreak));
  CHECK(a != bootstrap_indices(25, 7, 3, Condition::Benign));
  for (auto i : a) CHECK(i < 25);
}

TEST_CASE("bootstrap is deterministic and independent of thread count") {
  PipelineConfig cfg;
  const auto ds = prepare_dataset(generate_suite(small_spec()).container, cfg);
  BootstrapOptions o;
  o.replicates = 12;
  o.seed = 99;
  const auto a = bootstrap_jss(ds, cfg, o);
  o.threads = 3;
  const auto b = bootstrap_jss(ds, cfg, o);
  REQUIRE(a.size() == bootstrap_metric_names().size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].metric == b[k].metric);
    CHECK(a[k].point == b[k].point);
    CHECK(a[k].ci_low == b[k].ci_low);
    CHECK(a[k].ci_high == b[k].ci_high);
    for (std::size_t i = 0; i < a[k].samples.size(); ++i)
      CHECK((a[k].samples[i] == b[k].samples[i] || (std::isnan(a[k].samples[i]) && std::isnan(b[k].samples[i]))));
    // Replica 0 is the original data.
    CHECK(a[k].samples[0] == a[k].point);
    CHECK(a[k].ci_low <= a[k].point);
    CHECK(a[k].point <= a[k].ci_high);
  }
  o.seed = 100;
  const auto c = bootstrap_jss(ds, cfg, o);
  CHECK(c[0].samples != a[0].samples);
}

TEST_CASE("bootstrap of identical trajectories has zero width") {
  auto container = generate_suite(small_spec()).container;
  std::map<Condition, RawTrajectory> first;
  for (const auto& r : container.records) first.emplace(r.condition, r);
  for (auto& r : container.records) r.values = first.at(r.condition).values;
  PipelineConfig cfg;
  const auto ds = prepare_dataset(container, cfg);
  BootstrapOptions o;
  o.replicates = 8;
  for (const auto& r : bootstrap_jss(ds, cfg, o)) {
    CHECK(r.undefined_count == 0);
    CHECK(r.ci_low == r.ci_high);
    CHECK(r.ci_low == r.point);
  }
}

TEST_CASE("bootstrap option validation") {
  PipelineConfig cfg;
  const auto ds = prepare_dataset(generate_suite(small_spec()).container, cfg);
  BootstrapOptions o;
  o.replicates = 0;
  CHECK_THROWS_AS(bootstrap_jss(ds, cfg, o), ConfigError);
  o.replicates = 2;
  o.confidence = 1.0;
  CHECK_THROWS_AS(bootstrap_jss(ds, cfg, o), ConfigError);
}

TEST_CASE("refusal and unsafe rates") {
  const std::vector<std::string> texts{"I'm sorry, but no.", "Sure, here it is", "i CANNOT help", "ok"};
  CHECK(refusal_rate(texts, default_refusal_patterns()) == 0.5);
  CHECK_THROWS_AS(refusal_rate(std::vector<std::string>{}, default_refusal_patterns()), UndefinedMetricError);
  const std::vector<SafetyLabel> labels{SafetyLabel::Safe, SafetyLabel::Unsafe, SafetyLabel::Unsafe, SafetyLabel::Safe,
                                        SafetyLabel::Safe};
  CHECK(unsafe_rate(labels) == doctest::Approx(0.4));
  CHECK_THROWS_AS(unsafe_rate(std::vector<SafetyLabel>{}), UndefinedMetricError);
}
