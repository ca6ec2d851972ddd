#include "dbt/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "dbt/errors.hpp"

namespace dbt {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw InvalidArgument("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<T>(key, item));
  }
  if (out.empty()) throw InvalidArgument("config key '" + key + "' needs at least one value");
  return out;
}

std::string show(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s << ',';
    if constexpr (std::is_floating_point_v<T>)
      s << show(v[i]);
    else
      s << v[i];
  }
  return s.str();
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DBT_INT(KEY, FIELD)                                                        \
  Entry {                                                                          \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<int>(KEY, v); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                 \
  }
#define DBT_DOUBLE(KEY, FIELD)                                                        \
  Entry {                                                                             \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<double>(KEY, v); }, \
        [](const RunConfig& c) { return show(c.FIELD); }                              \
  }
#define DBT_U64(KEY, FIELD)                                                                  \
  Entry {                                                                                    \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<std::uint64_t>(KEY, v); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                           \
  }
#define DBT_STRING(KEY, FIELD)                                          \
  Entry {                                                               \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = v; },       \
        [](const RunConfig& c) { return c.FIELD; }                      \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"task", [](RunConfig& c, const std::string& v) { c.model.task = task_kind_from_string(v); },
       [](const RunConfig& c) { return to_string(c.model.task); }},
      {"model_kind",
       [](RunConfig& c, const std::string& v) { c.model_kind = model_kind_from_string(v); },
       [](const RunConfig& c) { return to_string(c.model_kind); }},
      DBT_U64("seed", model.seed),
      DBT_INT("timesteps", model.timesteps),
      DBT_DOUBLE("beta_start", model.beta_start),
      DBT_DOUBLE("beta_end", model.beta_end),
      DBT_INT("n_noise", model.n_noise),
      DBT_INT("num_leaves", model.tree.num_leaves),
      DBT_INT("min_samples_leaf", model.tree.min_samples_leaf),
      DBT_DOUBLE("learning_rate", model.tree.learning_rate),
      DBT_INT("max_categorical_cardinality", model.tree.max_categorical_cardinality),
      {"prior_mean",
       [](RunConfig& c, const std::string& v) { c.model.prior_mean = prior_mean_from_string(v); },
       [](const RunConfig& c) { return to_string(c.model.prior_mean); }},
      DBT_DOUBLE("prototype_epsilon", model.prototype_epsilon),
      DBT_INT("mean.n_trees", model.mean_estimator.n_trees),
      DBT_DOUBLE("mean.shrinkage", model.mean_estimator.shrinkage),
      DBT_INT("mean.num_leaves", model.mean_estimator.tree.num_leaves),
      DBT_INT("mean.min_samples_leaf", model.mean_estimator.tree.min_samples_leaf),
      DBT_STRING("data", data),
      DBT_STRING("test_data", test_data),
      DBT_STRING("response_column", response_column),
      {"delimiter",
       [](RunConfig& c, const std::string& v) {
         if (v == "\\t" || v == "tab")
           c.delimiter = '\t';
         else if (v.size() == 1)
           c.delimiter = v[0];
         else
           throw InvalidArgument("config key 'delimiter' must be a single character");
       },
       [](const RunConfig& c) { return c.delimiter == '\t' ? std::string("tab") : std::string(1, c.delimiter); }},
      DBT_STRING("missing_sentinel", missing_sentinel),
      DBT_DOUBLE("mcar_rate", mcar_rate),
      DBT_DOUBLE("train_fraction", split.train_fraction),
      DBT_U64("fold_seed", split.fold_seed),
      DBT_U64("fold_index", split.fold_index),
      DBT_INT("folds", folds),
      DBT_INT("samples", samples),
      {"alphas", [](RunConfig& c, const std::string& v) { c.alphas = parse_list<double>("alphas", v); },
       [](const RunConfig& c) { return join(c.alphas); }},
      DBT_INT("qice_bins", qice_bins),
      DBT_DOUBLE("piw_lo", piw_lo),
      DBT_DOUBLE("piw_hi", piw_hi),
      {"piw_scale",
       [](RunConfig& c, const std::string& v) {
         if (v == "logit")
           c.piw_scale = PiwScale::logit;
         else if (v == "probability")
           c.piw_scale = PiwScale::probability;
         else
           throw InvalidArgument("config key 'piw_scale' must be logit or probability");
       },
       [](const RunConfig& c) {
         return std::string(c.piw_scale == PiwScale::logit ? "logit" : "probability");
       }},
      {"importance_timesteps",
       [](RunConfig& c, const std::string& v) {
         c.importance_timesteps = parse_list<int>("importance_timesteps", v);
       },
       [](const RunConfig& c) { return join(c.importance_timesteps); }},
      {"toy_task",
       [](RunConfig& c, const std::string& v) {
         if (v.size() != 1 || v[0] < 'a' || v[0] > 'e')
           throw InvalidArgument("config key 'toy_task' must be one of a..e");
         c.toy_task = v[0];
       },
       [](const RunConfig& c) { return std::string(1, c.toy_task); }},
      DBT_INT("toy_rows", toy_rows),
      DBT_INT("threads", threads),
      DBT_STRING("out_dir", out_dir),
  };
  return table;
}

#undef DBT_INT
#undef DBT_DOUBLE
#undef DBT_U64
#undef DBT_STRING

}  // namespace

std::vector<std::string> run_config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.emplace_back(e.key);
  return out;
}

int RunConfig::effective_samples() const {
  if (samples > 0) return samples;
  return model.task == TaskKind::classification ? 10 : 100;
}

CsvOptions RunConfig::csv_options() const {
  CsvOptions o;
  o.delimiter = delimiter;
  o.missing_sentinel = missing_sentinel;
  o.response_column = response_column;
  o.task = model.task;
  return o;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& e : entries())
    if (key == e.key) {
      e.set(*this, trim(value));
      return;
    }
  throw InvalidArgument("unknown config key '" + key + "'");
}

void RunConfig::merge_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(number) + " has no '='");
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  merge_text(buf.str());
}

void RunConfig::validate() const {
  model.validate();
  if (!(mcar_rate >= 0.0 && mcar_rate < 1.0)) throw InvalidArgument("mcar_rate must lie in [0, 1)");
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  if (folds < 1) throw InvalidArgument("folds must be >= 1");
  if (samples < 0) throw InvalidArgument("samples must be >= 0");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw InvalidArgument("alphas must lie in (0, 1)");
  if (qice_bins < 1) throw InvalidArgument("qice_bins must be >= 1");
  if (!(piw_lo >= 0.0 && piw_lo < piw_hi && piw_hi <= 100.0))
    throw InvalidArgument("need 0 <= piw_lo < piw_hi <= 100");
  if (toy_rows < 1) throw InvalidArgument("toy_rows must be >= 1");
  if (threads < 0) throw InvalidArgument("threads must be >= 0");
}

std::string RunConfig::format() const {
  std::ostringstream out;
  for (const auto& e : entries()) out << e.key << '=' << e.get(*this) << '\n';
  return out.str();
}

}  // namespace dbt
