#include "nglare/pipeline.hpp"

#include "nglare/error.hpp"
#include "nglare/parallel.hpp"

namespace nglare {

std::size_t Dataset::count(Condition c) const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.condition == c ? 1 : 0;
  return n;
}

Dataset prepare_dataset(const TrajectoryContainer& container, const PipelineConfig& config) {
  const auto grouping = LayerGrouping::even(container.num_layers, config.layer_group_count);
  Dataset ds;
  ds.model_id = container.model_id;
  for (const auto& g : grouping.groups()) ds.group_labels.push_back(g.label);
  ds.trajectories.resize(container.records.size());
  parallel_for(container.records.size(), config.threads, [&](std::size_t i) {
    ds.trajectories[i] = standardize_progress(group_layers(container.records[i], grouping), config.progress);
  });
  return ds;
}

std::vector<BenignManifold> fit_benign_manifolds(const Dataset& dataset, const RankPolicy& policy) {
  std::size_t rows = 0;
  std::size_t dim = 0;
  for (const auto& t : dataset.trajectories) {
    if (t.condition != Condition::Benign) continue;
    rows += t.num_nodes();
    dim = t.dim();
  }
  if (rows == 0) throw DataError("no benign (B) trajectories to fit the manifold", "add B-condition records");
  std::vector<BenignManifold> out;
  for (std::size_t g = 0; g < dataset.group_labels.size(); ++g) {
    Eigen::MatrixXd samples(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    Eigen::Index row = 0;
    for (const auto& t : dataset.trajectories) {
      if (t.condition != Condition::Benign) continue;
      samples.middleRows(row, t.groups[g].rows()) = t.groups[g];
      row += t.groups[g].rows();
    }
    out.push_back(fit_manifold(samples, policy, g, dataset.group_labels[g]));
  }
  return out;
}

JssReport evaluate_dataset(const Dataset& dataset, const PipelineConfig& config) {
  const auto manifolds = fit_benign_manifolds(dataset, config.rank);
  return run_jss_core(dataset.trajectories, manifolds, config.jss, config.angle_space, config.threads);
}

}  // namespace nglare
