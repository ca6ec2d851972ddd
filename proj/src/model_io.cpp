#include "dbt/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dbt/errors.hpp"

namespace dbt {

namespace {

using nlohmann::json;

class Writer {
public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) {
    u64(s.size());
    out_ += s;
  }
  std::string& str() { return out_; }

private:
  std::string out_;
};

class Reader {
public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view bytes() {
    const std::uint64_t n = u64();
    need(n);
    std::string_view s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t count(std::size_t max) {
    const std::uint64_t n = u64();
    if (n > max) throw DataError("model file is corrupt (implausible element count)");
    return static_cast<std::size_t>(n);
  }
  bool done() const { return pos_ == data_.size(); }

private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) throw DataError("model file is truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

void write_tree(Writer& w, const DecisionTree& tree) {
  w.i32(tree.num_features());
  w.u64(tree.nodes().size());
  for (const TreeNode& n : tree.nodes()) {
    w.i32(n.feature);
    w.u8(static_cast<std::uint8_t>(n.kind));
    w.f64(n.threshold);
    w.u64(n.left_categories.size());
    for (auto c : n.left_categories) w.i32(c);
    w.u64(n.right_categories.size());
    for (auto c : n.right_categories) w.i32(c);
    w.u8(n.default_left ? 1 : 0);
    w.i32(n.left);
    w.i32(n.right);
    w.f64(n.gain);
  }
  w.u64(tree.leaf_values().size());
  for (double v : tree.leaf_values()) w.f64(v);
}

DecisionTree read_tree(Reader& r) {
  constexpr std::size_t kMax = std::size_t{1} << 28;
  const int num_features = r.i32();
  std::vector<TreeNode> nodes(r.count(kMax));
  for (TreeNode& n : nodes) {
    n.feature = r.i32();
    const auto kind = r.u8();
    if (kind > 1) throw DataError("model file is corrupt (unknown split kind)");
    n.kind = static_cast<SplitKind>(kind);
    n.threshold = r.f64();
    n.left_categories.resize(r.count(kMax));
    for (auto& c : n.left_categories) c = r.i32();
    n.right_categories.resize(r.count(kMax));
    for (auto& c : n.right_categories) c = r.i32();
    n.default_left = r.u8() != 0;
    n.left = r.i32();
    n.right = r.i32();
    n.gain = r.f64();
  }
  std::vector<double> leaves(r.count(kMax));
  for (double& v : leaves) v = r.f64();
  try {
    return DecisionTree(std::move(nodes), std::move(leaves), num_features);
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("model file holds an invalid tree: ") + e.what());
  }
}

json tree_params_json(const TreeParams& p) {
  return {{"num_leaves", p.num_leaves},
          {"min_samples_leaf", p.min_samples_leaf},
          {"learning_rate", p.learning_rate},
          {"max_categorical_cardinality", p.max_categorical_cardinality}};
}

TreeParams tree_params_from(const json& j) {
  TreeParams p;
  p.num_leaves = j.at("num_leaves").get<int>();
  p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.max_categorical_cardinality = j.at("max_categorical_cardinality").get<int>();
  return p;
}

json header_json(const DiffusionModel& m) {
  const DbtConfig& c = m.config;
  json cols = json::array();
  for (const ColumnSpec& col : m.schema.columns)
    cols.push_back({{"name", col.name},
                    {"kind", col.kind == FeatureKind::numeric ? "numeric" : "categorical"},
                    {"categories", col.categories}});
  return {
      {"format_version", kModelFormatVersion},
      {"model_kind", to_string(m.kind)},
      {"task", to_string(c.task)},
      {"schedule",
       {{"timesteps", c.timesteps}, {"beta_start", c.beta_start}, {"beta_end", c.beta_end}}},
      {"config",
       {{"n_noise", c.n_noise},
        {"tree", tree_params_json(c.tree)},
        {"mean_estimator",
         {{"n_trees", c.mean_estimator.n_trees},
          {"shrinkage", c.mean_estimator.shrinkage},
          {"tree", tree_params_json(c.mean_estimator.tree)},
          {"loss", to_string(c.mean_estimator.loss)}}},
        {"prior_mean", to_string(c.prior_mean)},
        {"prototype_epsilon", c.prototype_epsilon},
        {"seed", c.seed}}},
      {"schema", {{"response", m.schema.response_name}, {"columns", cols}}},
      {"step_trees", m.step_trees.size()},
  };
}

void apply_header(const json& h, DiffusionModel& m) {
  DbtConfig& c = m.config;
  m.kind = model_kind_from_string(h.at("model_kind").get<std::string>());
  c.task = task_kind_from_string(h.at("task").get<std::string>());
  const json& s = h.at("schedule");
  c.timesteps = s.at("timesteps").get<int>();
  c.beta_start = s.at("beta_start").get<double>();
  c.beta_end = s.at("beta_end").get<double>();
  const json& cfg = h.at("config");
  c.n_noise = cfg.at("n_noise").get<int>();
  c.tree = tree_params_from(cfg.at("tree"));
  const json& me = cfg.at("mean_estimator");
  c.mean_estimator.n_trees = me.at("n_trees").get<int>();
  c.mean_estimator.shrinkage = me.at("shrinkage").get<double>();
  c.mean_estimator.tree = tree_params_from(me.at("tree"));
  c.mean_estimator.loss = loss_kind_from_string(me.at("loss").get<std::string>());
  c.prior_mean = prior_mean_from_string(cfg.at("prior_mean").get<std::string>());
  c.prototype_epsilon = cfg.at("prototype_epsilon").get<double>();
  c.seed = cfg.at("seed").get<std::uint64_t>();
  m.schema = {};
  m.schema.response_name = h.at("schema").at("response").get<std::string>();
  for (const json& col : h.at("schema").at("columns")) {
    ColumnSpec spec;
    spec.name = col.at("name").get<std::string>();
    const auto kind = col.at("kind").get<std::string>();
    if (kind != "numeric" && kind != "categorical")
      throw DataError("model file has unknown column kind '" + kind + "'");
    spec.kind = kind == "numeric" ? FeatureKind::numeric : FeatureKind::categorical;
    spec.categories = col.at("categories").get<std::vector<std::string>>();
    m.schema.columns.push_back(std::move(spec));
  }
}

std::string_view check_prefix(std::string_view bytes) {
  if (bytes.size() < sizeof(kModelMagic) + 4 ||
      std::memcmp(bytes.data(), kModelMagic, sizeof(kModelMagic)) != 0)
    throw DataError("not a model file (bad magic)");
  Reader r(bytes.substr(sizeof(kModelMagic)));
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion)
    throw DataError("model file format version " + std::to_string(version) +
                    " is not supported (this build reads version " +
                    std::to_string(kModelFormatVersion) + ")");
  return bytes.substr(sizeof(kModelMagic) + 4);
}

bool same_params(const TreeParams& a, const TreeParams& b) {
  return a.num_leaves == b.num_leaves && a.min_samples_leaf == b.min_samples_leaf &&
         a.learning_rate == b.learning_rate &&
         a.max_categorical_cardinality == b.max_categorical_cardinality;
}

}  // namespace

std::string serialize_model(const DiffusionModel& model) {
  if (static_cast<int>(model.step_trees.size()) != model.config.timesteps)
    throw InvalidArgument("model has " + std::to_string(model.step_trees.size()) +
                          " step trees for " + std::to_string(model.config.timesteps) +
                          " timesteps");
  Writer body;
  body.f64(model.target_transform.mean);
  body.f64(model.target_transform.scale);
  body.f64(model.positive_rate);
  const MeanEstimator& est = model.mean_estimator;
  body.u8(static_cast<std::uint8_t>(est.loss()));
  body.f64(est.base_score());
  body.f64(est.shrinkage());
  body.u64(est.trees().size());
  for (const auto& t : est.trees()) write_tree(body, t);
  body.u64(model.step_trees.size());
  for (const auto& t : model.step_trees) write_tree(body, t);

  Writer out;
  out.str().append(kModelMagic, sizeof(kModelMagic));
  out.u32(kModelFormatVersion);
  out.bytes(header_json(model).dump(2));
  out.bytes(body.str());
  return std::move(out.str());
}

std::string model_header(const std::string& bytes) {
  Reader r(check_prefix(bytes));
  return std::string(r.bytes());
}

DiffusionModel deserialize_model(const std::string& bytes) {
  Reader r(check_prefix(bytes));
  DiffusionModel m;
  try {
    apply_header(json::parse(r.bytes()), m);
  } catch (const json::exception& e) {
    throw DataError(std::string("model file header is malformed: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("model file header is invalid: ") + e.what());
  }
  m.schedule = m.config.schedule();

  Reader b(r.bytes());
  if (!r.done()) throw DataError("model file has trailing bytes");
  m.target_transform.mean = b.f64();
  m.target_transform.scale = b.f64();
  m.positive_rate = b.f64();
  const auto loss = b.u8();
  if (loss > 1) throw DataError("model file is corrupt (unknown loss kind)");
  const double base = b.f64();
  const double shrinkage = b.f64();
  std::vector<DecisionTree> est_trees(b.count(1u << 24));
  for (auto& t : est_trees) t = read_tree(b);
  m.mean_estimator =
      MeanEstimator(static_cast<LossKind>(loss), base, shrinkage, std::move(est_trees));
  const std::size_t steps = b.count(1u << 24);
  if (static_cast<int>(steps) != m.config.timesteps)
    throw DataError("model file has " + std::to_string(steps) + " step trees for " +
                    std::to_string(m.config.timesteps) + " timesteps");
  m.step_trees.resize(steps);
  for (auto& t : m.step_trees) {
    t = read_tree(b);
    if (t.num_features() != m.input_width())
      throw DataError("step tree input width does not match the model schema");
  }
  if (!b.done()) throw DataError("model file body has trailing bytes");
  return m;
}

void save_model(const DiffusionModel& model, const std::string& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing model file '" + path + "'");
}

DiffusionModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

bool operator==(const DbtConfig& a, const DbtConfig& b) {
  return a.timesteps == b.timesteps && a.beta_start == b.beta_start &&
         a.beta_end == b.beta_end && a.n_noise == b.n_noise && same_params(a.tree, b.tree) &&
         a.mean_estimator.n_trees == b.mean_estimator.n_trees &&
         a.mean_estimator.shrinkage == b.mean_estimator.shrinkage &&
         same_params(a.mean_estimator.tree, b.mean_estimator.tree) &&
         a.mean_estimator.loss == b.mean_estimator.loss && a.prior_mean == b.prior_mean &&
         a.task == b.task && a.prototype_epsilon == b.prototype_epsilon && a.seed == b.seed;
}

bool operator==(const DiffusionModel& a, const DiffusionModel& b) {
  return a.kind == b.kind && a.config == b.config && a.mean_estimator == b.mean_estimator &&
         a.step_trees == b.step_trees && a.schema == b.schema &&
         a.target_transform == b.target_transform && a.positive_rate == b.positive_rate;
}

}  // namespace dbt
