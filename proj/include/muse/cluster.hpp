#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "muse/features.hpp"
#include "muse/signal.hpp"

namespace muse::discretize {

// Rows are observations, columns are features.

struct Standardizer {
    Vector mean;
    Vector scale; // population std, 1 where a feature is constant

    [[nodiscard]] static Standardizer fit(const Matrix& rows);
    [[nodiscard]] Matrix apply(const Matrix& rows) const;
    [[nodiscard]] Vector apply(const Vector& row) const;
};

struct Pca {
    Vector mean;
    Matrix components;         // features x k, orthonormal columns
    Vector eigenvalues;        // k leading eigenvalues, descending
    Vector explained_ratio;    // eigenvalues / total variance
    Vector all_eigenvalues;    // full spectrum, descending

    [[nodiscard]] Matrix project(const Matrix& rows) const;
    [[nodiscard]] Vector project(const Vector& row) const;
};

// Principal axes of the (population) covariance matrix. Each component is
// signed so that its largest-magnitude coordinate is positive.
[[nodiscard]] Pca fit_pca(const Matrix& rows, Index n_components = 5);

enum class ClusterMethod { kmeans, gmm };

std::string_view to_string(ClusterMethod method);
ClusterMethod parse_method(std::string_view name);

struct KMeansResult {
    Matrix centres; // k x dims
    std::vector<int> labels;
    double inertia = 0.0;
    std::vector<double> inertia_history; // inertia after every assignment step of the kept run
    int restart = 0;
};

// Lloyd's algorithm with k-means++ seeding; best inertia over the restarts.
[[nodiscard]] KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts = 10,
                                  int max_iter = 300);

struct GmmResult {
    Vector weights;
    Matrix means; // k x dims
    std::vector<Matrix> covariances;
    std::vector<double> log_likelihood; // total log-likelihood per EM iteration
    bool converged = false;
};

// Full-covariance Gaussian mixture fitted by EM from a k-means start.
[[nodiscard]] GmmResult fit_gmm(const Matrix& points, int k, std::uint64_t seed, int max_iter = 200,
                                double tol = 1e-6);

struct Clustering {
    ClusterMethod method = ClusterMethod::kmeans;
    std::uint64_t seed = 101;
    Matrix centres; // component means for gmm
    // gmm only
    Vector weights;
    std::vector<Matrix> covariances;
};

[[nodiscard]] Clustering fit_clusters(const Matrix& projected, ClusterMethod method, std::uint64_t seed = 101,
                                      int k = 5);

// Index of the closest centre, lowest index on ties.
[[nodiscard]] int assign_nearest(const Matrix& centres, const Vector& point);

struct ClusterModel {
    Target target = Target::valence;
    Standardizer standardizer;
    Pca pca;
    Clustering clustering;

    [[nodiscard]] Vector transform(const Vector& features) const;
    [[nodiscard]] Matrix transform(const Matrix& features) const;
    [[nodiscard]] int classify(const Vector& features) const;
};

// Fits standardizer, PCA and clustering on training rows only.
[[nodiscard]] ClusterModel fit_class_model(const Matrix& train_features, Target target, ClusterMethod method,
                                           std::uint64_t seed = 101, int k = 5, Index n_components = 5);

struct ClusterReport {
    double silhouette = 0.0;
    std::vector<long> class_counts;
    bool min_share_ok = false;
};

// Mean silhouette; points in singleton clusters contribute 0.
[[nodiscard]] double silhouette(const Matrix& points, std::span<const int> labels);

// The smallest class must hold at least a quarter of the chance share,
// i.e. 5 % of all points for five classes.
[[nodiscard]] bool min_share_ok(std::span<const long> counts);

[[nodiscard]] ClusterReport validate_clusters(const Matrix& points, std::span<const int> labels, int k = 5);

void save(const ClusterModel& model, const std::filesystem::path& path);
[[nodiscard]] ClusterModel load_cluster_model(const std::filesystem::path& path);

} // namespace muse::discretize
