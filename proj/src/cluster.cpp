#include "muse/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include <json.hpp>

#include "muse/log.hpp"

namespace muse::discretize {

std::string_view to_string(ClusterMethod method)
{
    return method == ClusterMethod::kmeans ? "kmeans" : "gmm";
}

ClusterMethod parse_method(std::string_view name)
{
    if (name == "kmeans") return ClusterMethod::kmeans;
    if (name == "gmm") return ClusterMethod::gmm;
    throw ParameterError("unknown cluster method '" + std::string(name) + "'");
}

// --- standardizer ----------------------------------------------------------

Standardizer Standardizer::fit(const Matrix& rows)
{
    if (rows.rows() < 1) throw ParameterError("Standardizer: no rows");
    Standardizer s;
    s.mean = rows.colwise().mean().transpose();
    s.scale = ((rows.rowwise() - s.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
    for (Index j = 0; j < s.scale.size(); ++j)
        if (!(s.scale(j) > 0.0)) s.scale(j) = 1.0;
    return s;
}

Matrix Standardizer::apply(const Matrix& rows) const
{
    if (rows.cols() != mean.size()) throw ParameterError("Standardizer: feature count mismatch");
    return ((rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

Vector Standardizer::apply(const Vector& row) const
{
    if (row.size() != mean.size()) throw ParameterError("Standardizer: feature count mismatch");
    return ((row - mean).array() / scale.array()).matrix();
}

// --- pca -------------------------------------------------------------------

Matrix Pca::project(const Matrix& rows) const
{
    if (rows.cols() != mean.size()) throw ParameterError("Pca: feature count mismatch");
    return (rows.rowwise() - mean.transpose()) * components;
}

Vector Pca::project(const Vector& row) const
{
    if (row.size() != mean.size()) throw ParameterError("Pca: feature count mismatch");
    return components.transpose() * (row - mean);
}

Pca fit_pca(const Matrix& rows, Index n_components)
{
    const Index n = rows.rows();
    const Index d = rows.cols();
    if (n_components < 1) throw ParameterError("fit_pca: need at least one component");
    if (n < n_components + 1)
        throw ParameterError("fit_pca: " + std::to_string(n) + " rows, at least " + std::to_string(n_components + 1)
                             + " required");
    if (d < n_components)
        throw ParameterError("fit_pca: " + std::to_string(d) + " features cannot give " + std::to_string(n_components)
                             + " components");

    Pca pca;
    pca.mean = rows.colwise().mean().transpose();
    const Matrix centred = rows.rowwise() - pca.mean.transpose();
    const Matrix cov = (centred.transpose() * centred) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("fit_pca: eigen decomposition failed");
    pca.all_eigenvalues = solver.eigenvalues().reverse();
    const Matrix vectors = solver.eigenvectors().rowwise().reverse();

    const double largest = std::max(pca.all_eigenvalues(0), 0.0);
    const double cutoff = std::max(largest * 1e-10, std::numeric_limits<double>::min());
    const Index rank = (pca.all_eigenvalues.array() > cutoff).count();
    if (rank < n_components)
        throw ParameterError("fit_pca: covariance has rank " + std::to_string(rank) + ", "
                             + std::to_string(n_components) + " components requested");

    pca.components = vectors.leftCols(n_components);
    for (Index c = 0; c < n_components; ++c) {
        Index pivot = 0;
        pca.components.col(c).cwiseAbs().maxCoeff(&pivot);
        if (pca.components(pivot, c) < 0) pca.components.col(c) *= -1.0;
    }
    pca.eigenvalues = pca.all_eigenvalues.head(n_components);
    const double total = pca.all_eigenvalues.cwiseMax(0.0).sum();
    pca.explained_ratio = pca.eigenvalues / total;
    return pca;
}

// --- k-means ---------------------------------------------------------------

namespace {

Index distinct_rows(const Matrix& points)
{
    std::set<std::vector<double>> seen;
    for (Index i = 0; i < points.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(points.cols()));
        for (Index j = 0; j < points.cols(); ++j) row[static_cast<std::size_t>(j)] = points(i, j);
        seen.insert(std::move(row));
    }
    return static_cast<Index>(seen.size());
}

void check_points(const Matrix& points, int k, const char* who)
{
    if (k < 1) throw ParameterError(std::string(who) + ": k must be positive");
    if (points.rows() < k)
        throw ParameterError(std::string(who) + ": " + std::to_string(points.rows()) + " points for "
                             + std::to_string(k) + " clusters");
    if (!points.allFinite()) throw ParameterError(std::string(who) + ": non-finite points");
    const Index distinct = distinct_rows(points);
    if (distinct < k)
        throw ParameterError(std::string(who) + ": only " + std::to_string(distinct) + " distinct points for "
                             + std::to_string(k) + " clusters");
}

Matrix kmeans_plus_plus(const Matrix& points, int k, std::mt19937_64& rng)
{
    const Index n = points.rows();
    Matrix centres(k, points.cols());
    std::uniform_int_distribution<Index> first(0, n - 1);
    centres.row(0) = points.row(first(rng));
    Vector d2 = (points.rowwise() - centres.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        std::uniform_real_distribution<double> u(0.0, total);
        const double target = u(rng);
        Index chosen = n - 1;
        double acc = 0.0;
        for (Index i = 0; i < n; ++i) {
            acc += d2(i);
            if (acc > target && d2(i) > 0.0) {
                chosen = i;
                break;
            }
        }
        if (!(d2(chosen) > 0.0)) d2.maxCoeff(&chosen);
        centres.row(c) = points.row(chosen);
        d2 = d2.cwiseMin((points.rowwise() - centres.row(c)).rowwise().squaredNorm());
    }
    return centres;
}

KMeansResult lloyd(const Matrix& points, Matrix centres, int max_iter)
{
    const Index n = points.rows();
    const auto k = static_cast<int>(centres.rows());
    KMeansResult r;
    r.labels.assign(static_cast<std::size_t>(n), -1);
    Vector dist(n);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        double inertia = 0.0;
        for (Index i = 0; i < n; ++i) {
            const int best = assign_nearest(centres, points.row(i).transpose());
            const double d = (points.row(i) - centres.row(best)).squaredNorm();
            dist(i) = d;
            inertia += d;
            if (r.labels[static_cast<std::size_t>(i)] != best) changed = true;
            r.labels[static_cast<std::size_t>(i)] = best;
        }
        r.inertia_history.push_back(inertia);
        r.inertia = inertia;
        if (!changed) break;

        Matrix sums = Matrix::Zero(k, points.cols());
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        for (Index i = 0; i < n; ++i) {
            const int c = r.labels[static_cast<std::size_t>(i)];
            sums.row(c) += points.row(i);
            ++counts[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centres.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            // Empty cluster: restart it on the worst-served point.
            Index far = 0;
            dist.maxCoeff(&far);
            centres.row(c) = points.row(far);
            dist(far) = 0.0;
        }
    }
    r.centres = std::move(centres);
    return r;
}

} // namespace

int assign_nearest(const Matrix& centres, const Vector& point)
{
    if (centres.rows() == 0) throw ParameterError("assign_nearest: no centres");
    if (centres.cols() != point.size()) throw ParameterError("assign_nearest: dimension mismatch");
    int best = 0;
    double best_d = (centres.row(0).transpose() - point).squaredNorm();
    for (Index c = 1; c < centres.rows(); ++c) {
        const double d = (centres.row(c).transpose() - point).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts, int max_iter)
{
    check_points(points, k, "kmeans");
    if (restarts < 1 || max_iter < 1) throw ParameterError("kmeans: restarts and max_iter must be positive");
    std::mt19937_64 rng(seed);
    KMeansResult best;
    for (int r = 0; r < restarts; ++r) {
        auto run = lloyd(points, kmeans_plus_plus(points, k, rng), max_iter);
        run.restart = r;
        if (r == 0 || run.inertia < best.inertia) best = std::move(run);
    }
    return best;
}

// --- gaussian mixture ------------------------------------------------------

namespace {

struct Component {
    Eigen::LLT<Matrix> chol;
    double log_det = 0.0;
};

Component factor(Matrix& cov)
{
    const Index d = cov.rows();
    Component c;
    c.chol.compute(cov);
    double ridge = 1e-6 * std::max(cov.trace() / static_cast<double>(d), 1e-12);
    while (c.chol.info() != Eigen::Success || c.chol.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0) {
        cov.diagonal().array() += ridge;
        ridge *= 10.0;
        c.chol.compute(cov);
    }
    c.log_det = 2.0 * c.chol.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return c;
}

void m_step(const Matrix& points, const Matrix& resp, GmmResult& g)
{
    const Index n = points.rows();
    const Index d = points.cols();
    const Index k = resp.cols();
    g.weights.resize(k);
    g.means.resize(k, d);
    g.covariances.resize(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j) {
        const double nk = resp.col(j).sum();
        g.weights(j) = nk / static_cast<double>(n);
        if (nk <= 1e-12) {
            if (g.covariances[static_cast<std::size_t>(j)].size() == 0) g.covariances[static_cast<std::size_t>(j)] = Matrix::Identity(d, d);
            continue;
        }
        g.means.row(j) = (resp.col(j).transpose() * points) / nk;
        const Matrix centred = points.rowwise() - g.means.row(j);
        g.covariances[static_cast<std::size_t>(j)] =
            (centred.transpose() * resp.col(j).asDiagonal() * centred) / nk;
    }
}

// Returns the mean per-point log-likelihood and fills the responsibilities.
double e_step(const Matrix& points, GmmResult& g, Matrix& resp)
{
    const Index n = points.rows();
    const Index d = points.cols();
    const Index k = g.means.rows();
    const double log_2pi = std::log(2.0 * std::numbers::pi);
    Matrix logp(n, k);
    for (Index j = 0; j < k; ++j) {
        auto comp = factor(g.covariances[static_cast<std::size_t>(j)]);
        const double log_w = g.weights(j) > 0.0 ? std::log(g.weights(j)) : -std::numeric_limits<double>::infinity();
        const Matrix centred = (points.rowwise() - g.means.row(j)).transpose();
        const Matrix solved = comp.chol.matrixL().solve(centred);
        const Vector maha = solved.colwise().squaredNorm().transpose();
        logp.col(j) = (log_w - 0.5 * (static_cast<double>(d) * log_2pi + comp.log_det) - 0.5 * maha.array()).matrix();
    }
    resp.resize(n, k);
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double top = logp.row(i).maxCoeff();
        const double lse = top + std::log((logp.row(i).array() - top).exp().sum());
        resp.row(i) = (logp.row(i).array() - lse).exp();
        total += lse;
    }
    return total / static_cast<double>(n);
}

} // namespace

GmmResult fit_gmm(const Matrix& points, int k, std::uint64_t seed, int max_iter, double tol)
{
    check_points(points, k, "fit_gmm");
    if (max_iter < 1) throw ParameterError("fit_gmm: max_iter must be positive");
    const auto init = kmeans(points, k, seed);
    Matrix resp = Matrix::Zero(points.rows(), k);
    for (Index i = 0; i < points.rows(); ++i) resp(i, init.labels[static_cast<std::size_t>(i)]) = 1.0;

    GmmResult g;
    m_step(points, resp, g);
    for (int it = 0; it < max_iter; ++it) {
        const double ll = e_step(points, g, resp);
        if (!std::isfinite(ll)) throw NumericError("fit_gmm: non-finite log-likelihood");
        g.log_likelihood.push_back(ll * static_cast<double>(points.rows()));
        if (g.log_likelihood.size() >= 2) {
            const double gain = (g.log_likelihood.back() - g.log_likelihood[g.log_likelihood.size() - 2])
                                / static_cast<double>(points.rows());
            if (gain < tol) {
                g.converged = true;
                break;
            }
        }
        m_step(points, resp, g);
    }
    return g;
}

Clustering fit_clusters(const Matrix& projected, ClusterMethod method, std::uint64_t seed, int k)
{
    Clustering c;
    c.method = method;
    c.seed = seed;
    if (method == ClusterMethod::kmeans) {
        c.centres = kmeans(projected, k, seed).centres;
        return c;
    }
    auto g = fit_gmm(projected, k, seed);
    c.centres = std::move(g.means);
    c.weights = std::move(g.weights);
    c.covariances = std::move(g.covariances);
    return c;
}

// --- model -----------------------------------------------------------------

Vector ClusterModel::transform(const Vector& features) const
{
    return pca.project(standardizer.apply(features));
}

Matrix ClusterModel::transform(const Matrix& features) const
{
    return pca.project(standardizer.apply(features));
}

int ClusterModel::classify(const Vector& features) const
{
    return assign_nearest(clustering.centres, transform(features));
}

ClusterModel fit_class_model(const Matrix& train_features, Target target, ClusterMethod method, std::uint64_t seed,
                             int k, Index n_components)
{
    ClusterModel model;
    model.target = target;
    model.standardizer = Standardizer::fit(train_features);
    const Matrix z = model.standardizer.apply(train_features);
    model.pca = fit_pca(z, n_components);
    model.clustering = fit_clusters(model.pca.project(z), method, seed, k);
    return model;
}

// --- validation ------------------------------------------------------------

double silhouette(const Matrix& points, std::span<const int> labels)
{
    const Index n = points.rows();
    if (static_cast<Index>(labels.size()) != n) throw ParameterError("silhouette: label count mismatch");
    int k = 0;
    for (int l : labels) {
        if (l < 0) throw ParameterError("silhouette: negative label");
        k = std::max(k, l + 1);
    }
    std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    const auto non_empty = std::count_if(sizes.begin(), sizes.end(), [](Index s) { return s > 0; });
    if (non_empty < 2) throw UndefinedError("silhouette: needs at least two non-empty clusters");

    double total = 0.0;
    std::vector<double> sums(static_cast<std::size_t>(k));
    for (Index i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        if (sizes[own] < 2) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            sums[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += (points.row(i) - points.row(j)).norm();
        }
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sums.size(); ++c)
            if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

bool min_share_ok(std::span<const long> counts)
{
    if (counts.empty()) throw ParameterError("min_share_ok: no classes");
    long total = 0;
    for (long c : counts) total += c;
    const long smallest = *std::min_element(counts.begin(), counts.end());
    // smallest / total >= (1 / k) / 4
    return smallest * 4 * static_cast<long>(counts.size()) >= total;
}

ClusterReport validate_clusters(const Matrix& points, std::span<const int> labels, int k)
{
    ClusterReport report;
    report.class_counts.assign(static_cast<std::size_t>(k), 0);
    for (int l : labels) {
        if (l < 0 || l >= k) throw ParameterError("validate_clusters: label out of range");
        ++report.class_counts[static_cast<std::size_t>(l)];
    }
    report.silhouette = silhouette(points, labels);
    report.min_share_ok = min_share_ok(report.class_counts);
    return report;
}

// --- persistence -----------------------------------------------------------

namespace {

using nlohmann::json;

json to_json(const Matrix& m)
{
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const Vector& v)
{
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Matrix matrix_from(const json& j)
{
    const auto rows = static_cast<Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (static_cast<Index>(j.at(i).size()) != cols) throw DataError("cluster model: ragged matrix");
        for (Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
    }
    return m;
}

Vector vector_from(const json& j)
{
    Vector v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
    return v;
}

constexpr const char* model_format = "muse-cluster-model";
constexpr int model_version = 1;

} // namespace

void save(const ClusterModel& model, const std::filesystem::path& path)
{
    json j;
    j["format"] = model_format;
    j["version"] = model_version;
    j["target"] = std::string(to_string(model.target));
    j["standardizer"] = {{"mean", to_json(model.standardizer.mean)}, {"scale", to_json(model.standardizer.scale)}};
    j["pca"] = {{"mean", to_json(model.pca.mean)},
                {"components", to_json(model.pca.components)},
                {"eigenvalues", to_json(model.pca.eigenvalues)},
                {"explained_ratio", to_json(model.pca.explained_ratio)},
                {"all_eigenvalues", to_json(model.pca.all_eigenvalues)}};
    json c;
    c["method"] = std::string(to_string(model.clustering.method));
    c["seed"] = model.clustering.seed;
    c["centres"] = to_json(model.clustering.centres);
    if (model.clustering.method == ClusterMethod::gmm) {
        c["weights"] = to_json(model.clustering.weights);
        json covs = json::array();
        for (const auto& cov : model.clustering.covariances) covs.push_back(to_json(cov));
        c["covariances"] = std::move(covs);
    }
    j["clustering"] = std::move(c);

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write cluster model '" + path.string() + "'");
    out << j.dump(1) << '\n';
}

ClusterModel load_cluster_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot read cluster model '" + path.string() + "'");
    try {
        const json j = json::parse(in);
        if (j.at("format") != model_format) throw DataError("'" + path.string() + "' is not a cluster model");
        if (j.at("version").get<int>() != model_version)
            throw DataError("unsupported cluster model version in '" + path.string() + "'");
        ClusterModel m;
        m.target = parse_target(j.at("target").get<std::string>());
        m.standardizer.mean = vector_from(j.at("standardizer").at("mean"));
        m.standardizer.scale = vector_from(j.at("standardizer").at("scale"));
        const auto& p = j.at("pca");
        m.pca.mean = vector_from(p.at("mean"));
        m.pca.components = matrix_from(p.at("components"));
        m.pca.eigenvalues = vector_from(p.at("eigenvalues"));
        m.pca.explained_ratio = vector_from(p.at("explained_ratio"));
        m.pca.all_eigenvalues = vector_from(p.at("all_eigenvalues"));
        const auto& c = j.at("clustering");
        m.clustering.method = parse_method(c.at("method").get<std::string>());
        m.clustering.seed = c.at("seed").get<std::uint64_t>();
        m.clustering.centres = matrix_from(c.at("centres"));
        if (m.clustering.method == ClusterMethod::gmm) {
            m.clustering.weights = vector_from(c.at("weights"));
            for (const auto& cov : c.at("covariances")) m.clustering.covariances.push_back(matrix_from(cov));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed cluster model '" + path.string() + "': " + e.what());
    }
}

} // namespace muse::discretize
