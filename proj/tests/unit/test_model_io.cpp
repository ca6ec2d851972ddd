#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "dbt/card_t.hpp"
#include "dbt/errors.hpp"
#include "dbt/model_io.hpp"

using namespace dbt;

namespace {

Dataset mixed_data(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u;
  Dataset d;
  d.schema.columns = {{"x", FeatureKind::numeric, {}},
                      {"c", FeatureKind::categorical, {"red", "green", "blue"}}};
  d.schema.response_name = "target";
  d.cells.resize(n, 2);
  d.response.resize(n);
  for (int i = 0; i < n; ++i) {
    d.cells(i, 0) = i % 9 == 0 ? kMissing : u(rng);
    d.cells(i, 1) = std::floor(3 * u(rng));
    d.response(i) = 2 * d.cells(i, 1) + (std::isnan(d.cells(i, 0)) ? 0.0 : d.cells(i, 0)) + 0.1 * u(rng);
  }
  return d;
}

DbtConfig config(TaskKind task = TaskKind::regression) {
  DbtConfig c;
  c.timesteps = 12;
  c.n_noise = 4;
  c.tree.num_leaves = 12;
  c.tree.min_samples_leaf = 3;
  c.mean_estimator.n_trees = 5;
  c.task = task;
  c.seed = 5;
  return c;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dbt_test_" + name);
}

}  // namespace

TEST_CASE("round trip preserves the model and its predictions") {
  const Dataset train = mixed_data(150, 1);
  for (ModelKind kind : {ModelKind::dbt, ModelKind::card_t}) {
    CAPTURE(to_string(kind));
    const DiffusionModel m =
        kind == ModelKind::dbt ? train_dbt(train, config()) : train_card_t(train, config());
    const std::string bytes = serialize_model(m);
    const DiffusionModel back = deserialize_model(bytes);
    CHECK(back == m);
    CHECK(serialize_model(back) == bytes);
    CHECK(sample(back, train, 4, 9) == sample(m, train, 4, 9));
    CHECK(back.schedule.alpha_bar(12) == m.schedule.alpha_bar(12));
  }
}

TEST_CASE("classification models keep threshold and loss") {
  Dataset train = mixed_data(150, 2);
  train.response = (train.response.array() > 2.5).cast<double>();
  const DiffusionModel m = train_dbt(train, config(TaskKind::classification));
  const DiffusionModel back = deserialize_model(serialize_model(m));
  CHECK(back.positive_rate == m.positive_rate);
  CHECK(back.mean_estimator.loss() == LossKind::logistic);
  CHECK(sample(back, train, 3, 1) == sample(m, train, 3, 1));
}

TEST_CASE("file save and load") {
  const DiffusionModel m = train_dbt(mixed_data(100, 3), config());
  const auto path = temp_file("model.dbt");
  save_model(m, path.string());
  CHECK(load_model(path.string()) == m);
  const std::string header = model_header(serialize_model(m));
  CHECK(header.find("\"model_kind\"") != std::string::npos);
  CHECK(header.find("\"green\"") != std::string::npos);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(path.string()), DataError);
}

TEST_CASE("corrupt or mismatched files are rejected") {
  const std::string bytes = serialize_model(train_dbt(mixed_data(80, 4), config()));
  CHECK_THROWS_AS(deserialize_model("not a model"), DataError);
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() / 2)), DataError);

  std::string wrong_version = bytes;
  wrong_version[8] = static_cast<char>(kModelFormatVersion + 1);
  try {
    deserialize_model(wrong_version);
    FAIL("expected a version error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_model(bad_magic), DataError);
}

TEST_CASE("identical training runs give byte-identical files") {
  const Dataset train = mixed_data(120, 6);
  CHECK(serialize_model(train_dbt(train, config())) == serialize_model(train_dbt(train, config())));
}
