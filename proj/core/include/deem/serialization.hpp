#pragma once

#include <filesystem>
#include <string>

#include "deem/core_types.hpp"
#include "deem/ds_model.hpp"
#include "deem/rbm.hpp"
#include "deem/trainer.hpp"

namespace deem {

inline constexpr int kModelFormatVersion = 1;

std::string to_json(const RunConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
RunConfig run_config_from_json(const std::string& text, RunConfig defaults = {});

std::string to_json(const DsParams& params);
DsParams ds_params_from_json(const std::string& text);

std::string to_json(const RbmParams& params);
RbmParams rbm_params_from_json(const std::string& text);

std::string to_json(const DeemModel& model, const RunConfig& config);
struct LoadedModel {
  DeemModel model;
  RunConfig config;
};
LoadedModel deem_model_from_json(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it into place.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace deem
