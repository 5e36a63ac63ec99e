#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "touchgen/eval/pipeline.hpp"

namespace touchgen::eval {

// One grid cell: ordered (key, value) overrides applied to the base config.
using AblationCell = std::vector<std::pair<std::string, nlohmann::json>>;

// The published axes: conditions, mechanism, layers, n_gs, theta_t. Any
// dotted config path (e.g. "train.steps") is accepted as well.
bool is_ablation_key(const std::string& key);

// {"axis": [v1, v2, ...], ...} -> cartesian product in key order of the
// object. ConfigError for unknown keys or empty / non-array value lists.
std::vector<AblationCell> expand_grid(const nlohmann::json& grid);

struct AblationRow {
    AblationCell cell;
    // "ok" or "error"; failed cells stay in the table.
    std::string status = "ok";
    std::string error;
    double final_loss = 0.0;
    std::optional<MetricReport> report;
};

struct AblationOptions {
    // Optional CTTP scorer shared by all cells.
    cttp::CttpModel* cttp = nullptr;
    std::function<void(std::size_t cell, long step, double loss)> progress;
};

// Trains and evaluates every cell with the base seed; artefacts go to
// out_dir/cell_<i>/, the table to out_dir/ablation.csv.
std::vector<AblationRow> run_ablation(const ExperimentConfig& base, const nlohmann::json& grid,
                                      const std::filesystem::path& out_dir, const AblationOptions& options = {});

std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace touchgen::eval
