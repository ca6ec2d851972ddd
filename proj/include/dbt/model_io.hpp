#pragma once

#include <cstdint>
#include <string>

#include "dbt/dbt.hpp"

namespace dbt {

// Container layout, all integers little-endian:
//   8-byte magic "DBTMODEL", u32 format version,
//   u64 header length, JSON header (kind, config, schema; human-readable),
//   u64 body length, binary body (transform, mean estimator, step trees).
// The schedule is stored as (T, beta_start, beta_end) and rebuilt on load.
inline constexpr char kModelMagic[8] = {'D', 'B', 'T', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string serialize_model(const DiffusionModel& model);
DiffusionModel deserialize_model(const std::string& bytes);

void save_model(const DiffusionModel& model, const std::string& path);
DiffusionModel load_model(const std::string& path);

// JSON header of a model file, for inspection.
std::string model_header(const std::string& bytes);

bool operator==(const DbtConfig& a, const DbtConfig& b);
bool operator==(const DiffusionModel& a, const DiffusionModel& b);

}  // namespace dbt
