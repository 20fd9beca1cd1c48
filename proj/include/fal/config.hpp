#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fal/data.hpp"
#include "fal/federation.hpp"

namespace fal {

/// Invalid configuration. `line` is 1-based, 0 when no source line applies.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& msg, std::size_t line = 0);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

enum class DataKind { Sphere, Clusters, Csv };

struct DataSpec {
    DataKind kind = DataKind::Sphere;
    // sphere
    std::size_t clients = 2;
    std::size_t per_client = 4;
    std::size_t dim = 3;
    double delta = 0.3;
    // clusters
    ClusterConfig clusters;
    // csv
    std::string train_path;
    std::string test_path;
    std::uint64_t seed = 0;
};

struct RunConfig {
    std::string preset;  // "theory", "experiment6" or empty
    FalConfig fal;
    DataSpec data;
    std::string out;
};

/// Names accepted by the "preset" key.
const std::vector<std::string>& preset_names();

/// Resolves a config document: preset defaults first, then every key the
/// document sets. Unknown keys and bad values throw ConfigError; `source` is
/// the original text, used to attach line numbers.
RunConfig resolve_config(const nlohmann::json& doc, const std::string& source = {});

/// Parses JSON text and resolves it.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Applies `key=value` overrides to a document. Dotted keys address nested
/// objects; values are parsed as JSON and fall back to plain strings.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& assignments);

/// Fully explicit document; resolving it again gives the same RunConfig.
nlohmann::ordered_json to_json(const RunConfig& cfg);

struct LoadedData {
    FederatedDataset train;
    std::vector<DataPoint> test;
};

/// Generates or loads the data a config describes.
LoadedData build_data(const DataSpec& spec, double rho);

}  // namespace fal
