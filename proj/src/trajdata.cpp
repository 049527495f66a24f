#include "nglare/trajdata.hpp"

#include <cmath>
#include <json.hpp>

#include "nglare/error.hpp"
#include "nglare/io.hpp"

namespace nglare {

namespace fs = std::filesystem;
using json = nlohmann::json;

char to_char(Condition c) { return static_cast<char>(c); }

std::string to_string(Condition c) { return std::string(1, to_char(c)); }

Condition parse_condition(std::string_view tag) {
  if (tag.size() == 1) {
    switch (tag[0]) {
      case 'B': return Condition::Benign;
      case 'J': return Condition::Jailbreak;
      case 'R': return Condition::IdealRefusal;
      case 'P': return Condition::PlainQuery;
      default: break;
    }
  }
  throw DataError("unknown condition tag '" + std::string(tag) + "'", "expected one of B, J, R, P");
}

std::size_t condition_index(Condition c) {
  for (std::size_t i = 0; i < kAllConditions.size(); ++i)
    if (kAllConditions[i] == c) return i;
  return 0;
}

std::span<const float> RawTrajectory::layer(std::size_t node, std::size_t l) const {
  const std::size_t offset = (node * num_layers + l) * hidden_size;
  return std::span<const float>(values).subspan(offset, hidden_size);
}

void RawTrajectory::validate() const {
  if (num_nodes < 2)
    throw DataError("record '" + id + "': trajectory needs at least 2 nodes, got " + std::to_string(num_nodes));
  if (num_layers == 0 || hidden_size == 0)
    throw DataError("record '" + id + "': zero layers or zero hidden size");
  if (values.size() != num_nodes * num_layers * hidden_size)
    throw DataError("record '" + id + "': payload holds " + std::to_string(values.size()) +
                    " scalars, expected " + std::to_string(num_nodes * num_layers * hidden_size));
  const std::size_t per_node = num_layers * hidden_size;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw DataError("record '" + id + "': non-finite value at node " + std::to_string(i / per_node),
                      "re-extract the record; activations must be finite");
  }
}

namespace {

json manifest_for(const TrajectoryContainer& c) {
  json m;
  m["format_version"] = kContainerFormatVersion;
  m["model_id"] = c.model_id;
  m["num_layers"] = c.num_layers;
  m["hidden_size"] = c.hidden_size;
  m["dtype"] = "f32";
  m["layout"] = "node_major";
  json records = json::array();
  for (const auto& r : c.records) {
    records.push_back({{"id", r.id},
                       {"condition", to_string(r.condition)},
                       {"num_nodes", r.num_nodes},
                       {"file", r.id + ".bin"},
                       {"byte_length", r.num_nodes * r.num_layers * r.hidden_size * 4}});
  }
  m["records"] = std::move(records);
  if (c.vocabulary) {
    m["vocabulary"] = {{"size", c.vocabulary->vocab_size},
                       {"embedding_dim", c.vocabulary->embedding_dim},
                       {"embeddings_file", c.vocabulary->embeddings_file}};
  }
  return m;
}

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw DataError(where + ": manifest field '" + key + "' missing");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(where + ": manifest field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

}  // namespace

TrajectoryContainer load_trajectories(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  json m;
  try {
    m = json::parse(io::read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw DataError("corrupt manifest " + manifest_path.string() + ": " + e.what());
  }
  const std::string where = manifest_path.string();
  if (require<int>(m, "format_version", where) != kContainerFormatVersion)
    throw DataError(where + ": unsupported format_version", "this build reads format_version 1");
  if (require<std::string>(m, "dtype", where) != "f32") throw DataError(where + ": dtype must be \"f32\"");
  if (require<std::string>(m, "layout", where) != "node_major")
    throw DataError(where + ": layout must be \"node_major\"");

  TrajectoryContainer c;
  c.model_id = require<std::string>(m, "model_id", where);
  c.num_layers = require<std::size_t>(m, "num_layers", where);
  c.hidden_size = require<std::size_t>(m, "hidden_size", where);
  if (m.contains("vocabulary")) {
    const auto& v = m["vocabulary"];
    VocabularyInfo info;
    info.vocab_size = require<std::size_t>(v, "size", where);
    info.embedding_dim = require<std::size_t>(v, "embedding_dim", where);
    info.embeddings_file = v.value("embeddings_file", std::string("embeddings.bin"));
    c.vocabulary = info;
  }

  for (const auto& rec : require<json>(m, "records", where)) {
    RawTrajectory r;
    r.id = require<std::string>(rec, "id", where);
    const std::string rwhere = "record '" + r.id + "'";
    r.condition = parse_condition(require<std::string>(rec, "condition", rwhere));
    r.model_id = c.model_id;
    r.num_nodes = require<std::size_t>(rec, "num_nodes", rwhere);
    r.num_layers = c.num_layers;
    r.hidden_size = c.hidden_size;
    if (rec.contains("hidden_size") && rec["hidden_size"].get<std::size_t>() != c.hidden_size)
      throw DataError(rwhere + ": dimension mismatch, manifest hidden_size " + std::to_string(c.hidden_size) +
                      " but record declares " + std::to_string(rec["hidden_size"].get<std::size_t>()),
                      "hidden sizes must be uniform across layers and records");
    if (rec.contains("num_layers") && rec["num_layers"].get<std::size_t>() != c.num_layers)
      throw DataError(rwhere + ": dimension mismatch, manifest num_layers " + std::to_string(c.num_layers) +
                      " but record declares " + std::to_string(rec["num_layers"].get<std::size_t>()));
    const auto byte_length = require<std::size_t>(rec, "byte_length", rwhere);
    const std::size_t expected = r.num_nodes * r.num_layers * r.hidden_size * 4;
    if (byte_length != expected)
      throw DataError(rwhere + ": dimension mismatch, byte_length " + std::to_string(byte_length) +
                      " != T*L*d*4 = " + std::to_string(expected));
    const fs::path payload = dir / require<std::string>(rec, "file", rwhere);
    std::string bytes;
    try {
      bytes = io::read_file(payload);
    } catch (const DataError&) {
      throw DataError(rwhere + ": missing payload " + payload.string());
    }
    if (bytes.size() != expected)
      throw DataError(rwhere + ": payload " + payload.string() + " has " + std::to_string(bytes.size()) +
                          " bytes, expected " + std::to_string(expected),
                      "the file is truncated or belongs to a different manifest");
    r.values = io::decode_f32_le(bytes);
    r.validate();
    c.records.push_back(std::move(r));
  }
  return c;
}

void write_trajectories(const fs::path& dir, const TrajectoryContainer& c) {
  fs::create_directories(dir);
  for (const auto& r : c.records) {
    if (r.num_layers != c.num_layers || r.hidden_size != c.hidden_size)
      throw DataError("record '" + r.id + "': dimensions differ from the container");
    r.validate();
    io::write_file_atomic(dir / (r.id + ".bin"), io::encode_f32_le(r.values));
  }
  io::write_file_atomic(dir / "manifest.json", manifest_for(c).dump(2) + "\n");
}

fs::path logits_path(const fs::path& dir, std::string_view record_id) {
  return dir / (std::string(record_id) + ".logits.bin");
}

namespace {

Eigen::MatrixXd read_matrix(const fs::path& path, std::size_t rows, std::size_t cols, const std::string& what) {
  const std::string bytes = io::read_file(path);
  if (bytes.size() != rows * cols * 4)
    throw DataError(what + ": " + path.string() + " has " + std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(rows * cols * 4));
  const auto values = io::decode_f32_le(bytes);
  Eigen::MatrixXd out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const float v = values[i * cols + j];
      if (!std::isfinite(v)) throw DataError(what + ": non-finite value at row " + std::to_string(i));
      out(i, j) = v;
    }
  return out;
}

std::string encode_rows(const Eigen::MatrixXf& m) {
  std::vector<float> flat(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat[i * m.cols() + j] = m(i, j);
  return io::encode_f32_le(flat);
}

}  // namespace

Eigen::MatrixXd load_logits(const fs::path& dir, const RawTrajectory& record, std::size_t vocab_size) {
  return read_matrix(logits_path(dir, record.id), record.num_nodes, vocab_size, "logits for record '" + record.id + "'");
}

void write_logits(const fs::path& dir, std::string_view record_id, const Eigen::MatrixXf& logits) {
  io::write_file_atomic(logits_path(dir, record_id), encode_rows(logits));
}

Eigen::MatrixXd load_embeddings(const fs::path& dir, const VocabularyInfo& vocab) {
  return read_matrix(dir / vocab.embeddings_file, vocab.vocab_size, vocab.embedding_dim, "embeddings");
}

void write_embeddings(const fs::path& dir, const VocabularyInfo& vocab, const Eigen::MatrixXf& embeddings) {
  if (static_cast<std::size_t>(embeddings.rows()) != vocab.vocab_size ||
      static_cast<std::size_t>(embeddings.cols()) != vocab.embedding_dim)
    throw DataError("embedding matrix shape does not match vocabulary metadata");
  io::write_file_atomic(dir / vocab.embeddings_file, encode_rows(embeddings));
}

std::vector<std::string> default_group_labels(std::size_t group_count) {
  switch (group_count) {
    case 1: return {"all"};
    case 2: return {"lower", "upper"};
    case 3: return {"lower", "middle", "upper"};
    default: break;
  }
  std::vector<std::string> labels;
  for (std::size_t g = 0; g < group_count; ++g) labels.push_back("g" + std::to_string(g));
  return labels;
}

LayerGrouping LayerGrouping::even(std::size_t num_layers, std::size_t group_count) {
  if (group_count == 0 || group_count > num_layers)
    throw ConfigError("cannot split " + std::to_string(num_layers) + " layers into " + std::to_string(group_count) +
                          " non-empty groups",
                      "set layer_group_count between 1 and the number of layers");
  const auto labels = default_group_labels(group_count);
  const std::size_t base = num_layers / group_count;
  const std::size_t extra = num_layers % group_count;
  std::vector<LayerGroup> groups;
  std::size_t start = 0;
  for (std::size_t g = 0; g < group_count; ++g) {
    const std::size_t n = base + (g < extra ? 1 : 0);
    groups.push_back({labels[g], start, start + n});
    start += n;
  }
  return from_groups(std::move(groups));
}

LayerGrouping LayerGrouping::from_groups(std::vector<LayerGroup> groups) {
  if (groups.empty()) throw ConfigError("layer grouping needs at least one group");
  std::size_t expected = 0;
  for (const auto& g : groups) {
    if (g.first != expected || g.last <= g.first)
      throw ConfigError("layer groups must be contiguous, ordered and non-empty (group '" + g.label + "')");
    expected = g.last;
  }
  LayerGrouping out;
  out.groups_ = std::move(groups);
  return out;
}

GroupedTrajectory group_layers(const RawTrajectory& raw, const LayerGrouping& grouping) {
  if (grouping.num_layers() != raw.num_layers)
    throw ConfigError("record '" + raw.id + "': grouping covers " + std::to_string(grouping.num_layers()) +
                      " layers but the trajectory has " + std::to_string(raw.num_layers));
  GroupedTrajectory out;
  out.id = raw.id;
  out.condition = raw.condition;
  out.model_id = raw.model_id;
  const auto T = static_cast<Eigen::Index>(raw.num_nodes);
  const auto d = static_cast<Eigen::Index>(raw.hidden_size);
  for (const auto& g : grouping.groups()) {
    out.group_labels.push_back(g.label);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(T, d);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (std::size_t l = g.first; l < g.last; ++l) {
        const auto v = raw.layer(static_cast<std::size_t>(t), l);
        for (Eigen::Index k = 0; k < d; ++k) m(t, k) += v[static_cast<std::size_t>(k)];
      }
    }
    m /= static_cast<double>(g.size());
    out.groups.push_back(std::move(m));
  }
  return out;
}

std::vector<double> arc_length_progress(const Eigen::MatrixXd& nodes, double degenerate_tolerance) {
  const auto T = nodes.rows();
  if (T < 2) throw DegenerateTrajectoryError("trajectory has fewer than 2 nodes");
  std::vector<double> cumulative(static_cast<std::size_t>(T), 0.0);
  for (Eigen::Index t = 1; t < T; ++t)
    cumulative[t] = cumulative[t - 1] + (nodes.row(t) - nodes.row(t - 1)).norm();
  const double total = cumulative.back();
  if (!(total >= degenerate_tolerance))
    throw DegenerateTrajectoryError("total arc length " + std::to_string(total) + " is below tolerance",
                                    "the trajectory does not move; drop the record or check extraction");
  for (auto& c : cumulative) c /= total;
  cumulative.back() = 1.0;
  return cumulative;
}

GroupedTrajectory standardize_progress(GroupedTrajectory traj, const ProgressOptions& options) {
  if (traj.groups.empty()) throw DataError("record '" + traj.id + "': no layer groups");
  traj.progress.clear();
  try {
    if (options.mode == ProgressMode::PerGroup) {
      for (const auto& g : traj.groups) traj.progress.push_back(arc_length_progress(g, options.degenerate_tolerance));
    } else {
      const std::size_t ref = options.reference_group.value_or(traj.groups.size() / 2);
      if (ref >= traj.groups.size()) throw ConfigError("progress reference group out of range");
      auto s = arc_length_progress(traj.groups[ref], options.degenerate_tolerance);
      traj.progress.assign(traj.groups.size(), s);
    }
  } catch (const DegenerateTrajectoryError& e) {
    throw DegenerateTrajectoryError("record '" + traj.id + "': " + e.what(), e.hint());
  }
  return traj;
}

}  // namespace nglare
