#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nglare {

// Probing conditions. Serialized as the single characters B, J, R, P.
enum class Condition : char {
  Benign = 'B',
  Jailbreak = 'J',
  IdealRefusal = 'R',
  PlainQuery = 'P',
};

inline constexpr std::array<Condition, 4> kAllConditions = {
    Condition::Benign, Condition::Jailbreak, Condition::IdealRefusal, Condition::PlainQuery};

char to_char(Condition c);
std::string to_string(Condition c);
Condition parse_condition(std::string_view tag);
std::size_t condition_index(Condition c);

// One dumped trajectory: num_nodes stacks of num_layers vectors of hidden_size floats,
// stored flat in [node][layer][component] order exactly as on disk.
struct RawTrajectory {
  std::string id;
  Condition condition = Condition::Benign;
  std::string model_id;
  std::size_t num_nodes = 0;
  std::size_t num_layers = 0;
  std::size_t hidden_size = 0;
  std::vector<float> values;

  std::span<const float> layer(std::size_t node, std::size_t layer) const;

  // Throws DataError naming the record (and node, for non-finite values).
  void validate() const;
};

struct VocabularyInfo {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 0;
  std::string embeddings_file = "embeddings.bin";
};

struct TrajectoryContainer {
  std::string model_id;
  std::size_t num_layers = 0;
  std::size_t hidden_size = 0;
  std::vector<RawTrajectory> records;
  std::optional<VocabularyInfo> vocabulary;
};

inline constexpr int kContainerFormatVersion = 1;

TrajectoryContainer load_trajectories(const std::filesystem::path& dir);
void write_trajectories(const std::filesystem::path& dir, const TrajectoryContainer& container);

// Sidecars: per-record next-token logits (T x |V|) and a shared embedding matrix (|V| x d_emb).
std::filesystem::path logits_path(const std::filesystem::path& dir, std::string_view record_id);
Eigen::MatrixXd load_logits(const std::filesystem::path& dir, const RawTrajectory& record,
                            std::size_t vocab_size);
void write_logits(const std::filesystem::path& dir, std::string_view record_id,
                  const Eigen::MatrixXf& logits);
Eigen::MatrixXd load_embeddings(const std::filesystem::path& dir, const VocabularyInfo& vocab);
void write_embeddings(const std::filesystem::path& dir, const VocabularyInfo& vocab,
                      const Eigen::MatrixXf& embeddings);

struct LayerGroup {
  std::string label;
  std::size_t first = 0;  // inclusive, 0-based
  std::size_t last = 0;   // exclusive
  std::size_t size() const { return last - first; }
};

// Contiguous partition of layers. Remainder layers go to the earliest groups.
class LayerGrouping {
 public:
  static LayerGrouping even(std::size_t num_layers, std::size_t group_count = 3);
  static LayerGrouping from_groups(std::vector<LayerGroup> groups);

  const std::vector<LayerGroup>& groups() const { return groups_; }
  std::size_t group_count() const { return groups_.size(); }
  std::size_t num_layers() const { return groups_.empty() ? 0 : groups_.back().last; }
  std::size_t middle() const { return groups_.size() / 2; }
  const std::string& label(std::size_t g) const { return groups_.at(g).label; }

 private:
  std::vector<LayerGroup> groups_;
};

std::vector<std::string> default_group_labels(std::size_t group_count);

struct GroupedTrajectory {
  std::string id;
  Condition condition = Condition::Benign;
  std::string model_id;
  std::vector<std::string> group_labels;
  // Per group: num_nodes x d matrix, one row per node.
  std::vector<Eigen::MatrixXd> groups;
  // Per group standardized progress; empty until standardize_progress runs.
  std::vector<std::vector<double>> progress;

  std::size_t num_nodes() const { return groups.empty() ? 0 : static_cast<std::size_t>(groups[0].rows()); }
  std::size_t dim() const { return groups.empty() ? 0 : static_cast<std::size_t>(groups[0].cols()); }
  bool standardized() const { return !progress.empty(); }
};

GroupedTrajectory group_layers(const RawTrajectory& raw, const LayerGrouping& grouping);

enum class ProgressMode { SharedReference, PerGroup };

struct ProgressOptions {
  ProgressMode mode = ProgressMode::SharedReference;
  // Defaults to the middle group.
  std::optional<std::size_t> reference_group;
  double degenerate_tolerance = 1e-9;
};

// Cumulative arc length over total arc length, one value per row of `nodes`.
std::vector<double> arc_length_progress(const Eigen::MatrixXd& nodes, double degenerate_tolerance = 1e-9);

GroupedTrajectory standardize_progress(GroupedTrajectory traj, const ProgressOptions& options = {});

}  // namespace nglare
