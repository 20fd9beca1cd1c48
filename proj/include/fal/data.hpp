#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fal/core.hpp"
#include "fal/model.hpp"

namespace fal {

enum class DataMode { Theory, Experiment };

struct ClientDataset {
    std::size_t id = 0;
    std::vector<DataPoint> points;
};

struct SeparabilityStats {
    double delta_min = 0.0;
    double gamma_bound = 0.0;
};

struct FederatedDataset {
    std::vector<ClientDataset> clients;
    DataMode mode = DataMode::Theory;
    SeparabilityStats stats;

    std::size_t num_clients() const { return clients.size(); }
    std::size_t points_per_client() const { return clients.empty() ? 0 : clients.front().points.size(); }
    std::size_t dim() const;
    std::size_t total_points() const { return num_clients() * points_per_client(); }
    /// All points, client-major.
    std::vector<DataPoint> flatten() const;
};

/// N*J points drawn uniformly on the manifold {||x|| = 1, x_d = 1/2} with
/// pairwise distance >= delta (rejection sampling), labels uniform in [-1, 1].
/// Throws std::runtime_error after 10^6 consecutive rejections.
FederatedDataset gen_separable_sphere(std::size_t n_clients, std::size_t per_client, std::size_t d, double delta,
                                      RngStream& rng, double rho = 0.0);

/// A uniform draw on the manifold.
Vector sample_manifold_point(RngStream& rng, std::size_t d);

/// What the separability scale multiplies.
enum class ClusterScaling {
    Means,     // cluster centroids move, the unit noise stays
    Features,  // every feature, noise included
};

struct ClusterConfig {
    double scale = 1.0;
    std::size_t per_class_train = 400;
    std::size_t per_class_test = 100;
    double flip_rate = 0.05;
    bool shard_by_cluster = false;
    ClusterScaling scaling = ClusterScaling::Means;
    /// Two centroids per class, before scaling: {class0_a, class0_b, class1_a, class1_b}.
    std::array<std::array<double, 2>, 4> means{{{-2.0, 0.0}, {0.0, 2.0}, {2.0, 0.0}, {0.0, -2.0}}};
};

struct ClusterData {
    FederatedDataset train;
    std::vector<DataPoint> test;
};

/// Two-class, two-clusters-per-class Gaussian data in R^2 with labels in {-1, +1}.
/// Training labels are flipped with probability `flip_rate`; the training set is
/// shuffled and cut into `n_clients` equal contiguous shards (grouped by cluster
/// first when `shard_by_cluster`).
ClusterData gen_gaussian_clusters(const ClusterConfig& cfg, std::size_t n_clients, RngStream& rng);

SeparabilityStats separability_stats(const FederatedDataset& ds, double rho);
SeparabilityStats separability_stats(const std::vector<DataPoint>& points, double rho);

/// CSV with header `client,index,y,x0,...`; numbers use 17 significant digits.
void save_csv(const FederatedDataset& ds, const std::filesystem::path& path);
void save_csv(const std::vector<DataPoint>& points, const std::filesystem::path& path);
std::string to_csv(const FederatedDataset& ds);
/// Throws std::runtime_error naming the offending line.
FederatedDataset load_csv(const std::filesystem::path& path);
FederatedDataset parse_csv(const std::string& text);

std::string format_double(double v);

}  // namespace fal
