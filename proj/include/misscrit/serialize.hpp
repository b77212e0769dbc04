#pragma once

// JSON forms of the library's value types and the study output files.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "misscrit/criteria.hpp"
#include "misscrit/em.hpp"
#include "misscrit/fisher.hpp"
#include "misscrit/simulate.hpp"

namespace misscrit {

std::string tool_version();

// {"k": 2, "variance_classes": [[1, 2]], "label": "..."}; classes are 1-based.
void to_json(nlohmann::json& j, const MixtureSpec& spec);
MixtureSpec spec_from_json(const nlohmann::json& j);
MixtureSpec read_spec_file(const std::filesystem::path& path);

// weights, means, class_variances and per-component variances.
void to_json(nlohmann::json& j, const Params& theta);
Params params_from_json(const MixtureSpec& spec, const nlohmann::json& j);

void to_json(nlohmann::json& j, const EmConfig& cfg);
void to_json(nlohmann::json& j, const FitResult& fit);
void to_json(nlohmann::json& j, const FisherBundle& b);  // matrices as row-major arrays
void to_json(nlohmann::json& j, const CriteriaReport& r);
void to_json(nlohmann::json& j, const StudyConfig& cfg);
void to_json(nlohmann::json& j, const MeanSe& m);
void to_json(nlohmann::json& j, const StudyTables& t);

// Inverse of to_json(StudyConfig); truth may be given with per-component
// "variances" and the reference by label or index.
StudyConfig study_config_from_json(const nlohmann::json& j);

// Markdown rendering of the aggregate tables.
std::string tables_markdown(const StudyResult& r);

// records.csv: one row per replicate x candidate, preceded by '#' lines that
// echo the schema version, tool version and resolved config.
std::string records_csv(const StudyResult& r);

// tables.json carries the same echo.
nlohmann::json tables_json(const StudyResult& r);

// Writes records.csv, tables.json and tables.md into dir (created if needed).
void write_study_outputs(const std::filesystem::path& dir, const StudyResult& r);

}  // namespace misscrit
