#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fal/federation.hpp"

namespace fal {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;   // bad config, options or inputs; failed study
inline constexpr int kExitRuntime = 2;  // failure while training or writing outputs

struct RunOptions {
    std::string config_path;  // empty: start from an empty document
    std::string preset;       // overrides the document's preset when set
    std::vector<std::string> overrides;  // key=value
    std::string out;          // overrides the document's "out" when set
};

/// Trains per the resolved config; writes metrics.csv, resolved_config.json
/// and curves.svg into the output directory.
int cmd_run(const RunOptions& opt, Algorithm algo, std::ostream& log, std::ostream& err);

struct VerifyOptions {
    std::string study;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<std::size_t>> m_grid;
    std::optional<std::size_t> local_steps;
    std::optional<std::size_t> seeds;
    std::optional<std::size_t> rounds;
    std::optional<std::size_t> width;
    std::optional<std::size_t> samples;
    std::optional<double> rho;
    std::optional<double> delta;
};

const std::vector<std::string>& study_names();

/// Runs a named study and writes <study>.csv and <study>.json; exit 0 iff every
/// check passes.
int cmd_verify(const VerifyOptions& opt, std::ostream& log, std::ostream& err);

struct GenDataOptions {
    std::string kind;  // sphere | clusters
    std::string out;
    std::uint64_t seed = 0;
    // sphere
    std::size_t n_clients = 2;
    std::size_t per_client = 4;
    std::size_t d = 3;
    double delta = 0.3;
    double rho = 0.0;
    // clusters
    double scale = 2.5;
    std::size_t clusters_clients = 4;
    double flip_rate = 0.05;
    bool shard_by_cluster = false;
    std::string scaling = "means";
};

/// Writes train.csv (and test.csv for clusters) and prints the separability
/// statistics.
int cmd_gen_data(const GenDataOptions& opt, std::ostream& log, std::ostream& err);

}  // namespace fal
