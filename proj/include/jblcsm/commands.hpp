#pragma once

// The fit, scores, rates and simulate commands behind the jblcsm executable.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jblcsm/estimation.hpp"
#include "jblcsm/simulation.hpp"

namespace jblcsm {

enum ExitCode : int { exit_ok = 0, exit_input_error = 1, exit_convergence_failure = 2, exit_pathology = 3 };

struct RunConfig {
    std::string command;
    std::string data;     // wide CSV
    std::string fit_file; // fit.json of an earlier `fit` run (scores, rates)
    std::string model = "full";
    std::string expression = "midpoint";
    std::string framework = "lcsm";
    std::uint64_t seed = 0;
    std::size_t reps = 100;
    std::string conditions = "all";
    std::string out = ".";
    std::string grid; // "start:stop:step" or comma list; empty = observed time range
    unsigned threads = 0; // 0 = JBLCSM_THREADS or hardware concurrency
    int restarts = 10;
    int max_iterations = 2000;
    bool dry_run = false;
    bool export_data = false;

    ModelSpec spec() const;
    FitConfig fit_config() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Overwrites only the fields present in `j`; unknown keys raise InputError.
void merge_config(RunConfig& c, const nlohmann::json& j);
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

/// Fields that determine results (paths and thread count excluded).
nlohmann::json result_relevant_config(const RunConfig& c);
std::string config_hash(const RunConfig& c);

/// "all", or comma-separated indices and inclusive ranges such as "0,4,10-12".
std::vector<int> parse_condition_filter(const std::string& text, int count);

/// "start:stop:step" or comma-separated times.
Eigen::VectorXd parse_time_grid(const std::string& text);

/// Loads estimates written by cmd_fit.
FitResult read_fit_json(const std::filesystem::path& path);
nlohmann::json fit_to_json(const FitResult& r);

int cmd_fit(const RunConfig& c);
int cmd_scores(const RunConfig& c);
int cmd_rates(const RunConfig& c);
int cmd_simulate(const RunConfig& c);

/// Dispatches on `c.command`, mapping exceptions onto the exit-code contract.
int run_command(const RunConfig& c);

} // namespace jblcsm
