#pragma once

#include <filesystem>
#include "json.hpp"

#include "dse/powermodel.hpp"

namespace dse {

// y_pre / y_post are row-major lists of [re, im] pairs; a list of rows is
// also accepted. Loading runs SystemCase::validate().
SystemCase case_from_json(const nlohmann::json& j);
nlohmann::json case_to_json(const SystemCase& sys);

SystemCase load_case(const std::filesystem::path& path);
void save_case(const SystemCase& sys, const std::filesystem::path& path);

}  // namespace dse
