#pragma once

// CARD-T: per-timestep trees fitted independently to the forward-process
// noise. Shares the model container, inputs, and configuration with DBT so
// the two differ only in target and in training dependency.

#include <optional>
#include <vector>

#include "dbt/dbt.hpp"

namespace dbt {

using CardTModel = DiffusionModel;

// `order` lists the timesteps in the order they are fitted (default T..1).
// Each timestep draws from its own stream, so the order does not affect the
// result.
DiffusionModel train_card_t(const Dataset& train, const DbtConfig& config,
                            TrainReport* report = nullptr,
                            const TrainHooks& hooks = {},
                            const std::optional<std::vector<int>>& order = {});

SampleMatrix sample_card_t(const DiffusionModel& model, const Dataset& rows,
                           int samples, std::uint64_t seed);

}  // namespace dbt
