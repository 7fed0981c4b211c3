#include "gpgmm/hgmm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace gpgmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)
constexpr double kMinComponentMass = 4.0;

using SampleMatrix = Eigen::Matrix<double, 4, Eigen::Dynamic>;

SampleMatrix to_matrix(std::span<const DistanceSample> samples) {
    SampleMatrix m(4, static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        m.col(static_cast<Eigen::Index>(i)) << samples[i].position, samples[i].distance;
    }
    return m;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// log(pi_k N(x_n | mu_k, Sigma_k)) for every sample (rows) and component (cols).
Eigen::MatrixXd log_joint(const SampleMatrix &x, const std::vector<Gaussian4> &comps) {
    const Eigen::Index n = x.cols();
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(comps.size()));
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const Eigen::LLT<Mat4> llt(comps[k].covariance);
        const Mat4 l = llt.matrixL();
        const double log_det = 2.0 * l.diagonal().array().log().sum();
        SampleMatrix z = x.colwise() - comps[k].mean;
        l.triangularView<Eigen::Lower>().solveInPlace(z);
        out.col(static_cast<Eigen::Index>(k)) =
            (std::log(comps[k].weight) - 0.5 * log_det - 2.0 * kLog2Pi) - 0.5 * z.colwise().squaredNorm().array().transpose();
    }
    return out;
}

// Row-wise log-sum-exp.
Eigen::VectorXd log_sum_exp_rows(const Eigen::MatrixXd &m) {
    const Eigen::VectorXd mx = m.rowwise().maxCoeff();
    return mx.array() + (m.colwise() - mx).array().exp().rowwise().sum().log();
}

std::vector<std::size_t> hard_assign(const SampleMatrix &x, const std::vector<Gaussian4> &comps) {
    const Eigen::MatrixXd lj = log_joint(x, comps);
    std::vector<std::size_t> out(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < lj.cols(); ++k) {
            if (lj(i, k) > lj(i, best)) best = k;
        }
        out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    return out;
}

Mat4 sample_covariance(const SampleMatrix &x, const Vec4 &mean) {
    const SampleMatrix c = x.colwise() - mean;
    return c * c.transpose() / static_cast<double>(x.cols());
}

std::vector<Gaussian4> kmeanspp_init(const SampleMatrix &x, std::size_t k, double reg_eps,
                                     std::uint64_t seed) {
    const Eigen::Index n = x.cols();
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> centers;
    centers.push_back(std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng));
    Eigen::VectorXd d2 = (x.colwise() - x.col(centers[0])).colwise().squaredNorm().transpose();
    while (centers.size() < k) {
        const double total = d2.sum();
        Eigen::Index next = 0;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (next = 0; next < n - 1; ++next) {
                r -= d2[next];
                if (r < 0.0) break;
            }
        } else {
            next = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
        }
        centers.push_back(next);
        d2 = d2.cwiseMin((x.colwise() - x.col(next)).colwise().squaredNorm().transpose());
    }

    std::vector<std::vector<Eigen::Index>> members(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            const double d = (x.col(i) - x.col(centers[c])).squaredNorm();
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        members[best].push_back(i);
    }

    const Vec4 global_mean = x.rowwise().mean();
    const Mat4 global_cov = sample_covariance(x, global_mean) / static_cast<double>(k);
    std::vector<Gaussian4> init;
    for (std::size_t c = 0; c < k; ++c) {
        const auto &m = members[c];
        Vec4 mean = x.col(centers[c]);
        Mat4 cov = global_cov;
        if (m.size() >= 5) {
            SampleMatrix sub(4, static_cast<Eigen::Index>(m.size()));
            for (std::size_t j = 0; j < m.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = x.col(m[j]);
            mean = sub.rowwise().mean();
            cov = sample_covariance(sub, mean);
        }
        cov.diagonal().array() += reg_eps;
        const double w = std::max<double>(static_cast<double>(m.size()), 1.0) / static_cast<double>(n);
        init.push_back(Gaussian4::make(w, mean, cov));
    }
    double wsum = 0.0;
    for (const auto &g : init) wsum += g.weight;
    for (auto &g : init) g.weight /= wsum;
    return init;
}

EmResult run_em(const SampleMatrix &x, std::vector<Gaussian4> comps, const EmConfig &cfg) {
    EmResult res;
    double prev = -std::numeric_limits<double>::infinity();
    for (int iter = 0;; ++iter) {
        const Eigen::MatrixXd lj = log_joint(x, comps);
        const Eigen::VectorXd lse = log_sum_exp_rows(lj);
        const double ll = lse.sum();
        res.log_likelihood.push_back(ll);
        if (!std::isfinite(ll)) throw ModelError("EM log-likelihood is not finite");
        const bool after_deletion =
            !res.deletions.empty() && res.deletions.back() + 1 == res.log_likelihood.size() - 1;
        if (iter > 0 && !after_deletion && ll - prev <= cfg.tol * std::abs(prev)) {
            res.converged = true;
            break;
        }
        if (iter >= cfg.max_iter) break;
        prev = ll;

        const Eigen::MatrixXd resp = (lj.colwise() - lse).array().exp();
        const Eigen::VectorXd mass = resp.colwise().sum().transpose();
        std::vector<Gaussian4> next;
        double kept_mass = 0.0;
        for (std::size_t k = 0; k < comps.size(); ++k) {
            if (mass[static_cast<Eigen::Index>(k)] >= kMinComponentMass) kept_mass += mass[static_cast<Eigen::Index>(k)];
        }
        for (std::size_t k = 0; k < comps.size(); ++k) {
            const Eigen::Index kk = static_cast<Eigen::Index>(k);
            const double nk = mass[kk];
            if (nk < kMinComponentMass) {
                std::ostringstream os;
                os << "em iteration " << iter << ": deleted component " << k << " (mass " << nk << ")";
                res.log.push_back(os.str());
                continue;
            }
            const Vec4 mean = x * resp.col(kk) / nk;
            const SampleMatrix c = x.colwise() - mean;
            Mat4 cov = (c * resp.col(kk).asDiagonal() * c.transpose()) / nk;
            cov = 0.5 * (cov + cov.transpose()).eval();
            cov.diagonal().array() += cfg.reg_eps;
            next.push_back(Gaussian4::make(nk / kept_mass, mean, cov));
        }
        if (next.empty()) throw ModelError("EM deleted every component");
        if (next.size() != comps.size()) res.deletions.push_back(res.log_likelihood.size() - 1);
        comps = std::move(next);
        res.iterations = iter + 1;
    }
    res.components = std::move(comps);
    return res;
}

Mat4 read_upper(const double *v) {
    Mat4 m;
    int k = 0;
    for (int i = 0; i < 4; ++i) {
        for (int j = i; j < 4; ++j) {
            m(i, j) = v[k];
            m(j, i) = v[k];
            ++k;
        }
    }
    return m;
}

}  // namespace

Gaussian4 Gaussian4::make(double weight, const Vec4 &mean, const Mat4 &covariance) {
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + covariance.cwiseAbs().maxCoeff())) {
        throw ModelError("component covariance is not symmetric");
    }
    const Eigen::LLT<Mat4> llt(covariance);
    if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
        throw ModelError("component covariance is not positive definite");
    }
    Gaussian4 g;
    g.weight = weight;
    g.mean = mean;
    g.covariance = covariance;
    const Mat4 p = llt.solve(Mat4::Identity());
    g.precision = 0.5 * (p + p.transpose());
    return g;
}

std::vector<DistanceSample> augment_virtual_points(const OrientedPointCloud &cloud, double spacing) {
    if (!(spacing > 0.0)) throw ArgumentError("virtual point spacing must be > 0");
    if (!cloud.has_normals()) throw ArgumentError("virtual points need normals; cloud has none");
    cloud.validate();
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!cloud.normal_valid(i)) bad.push_back(i);
    }
    if (!bad.empty()) {
        std::string msg = "null normals at indices:";
        for (std::size_t i = 0; i < bad.size() && i < 20; ++i) msg += " " + std::to_string(bad[i]);
        if (bad.size() > 20) msg += " ... (" + std::to_string(bad.size()) + " total)";
        throw ArgumentError(msg);
    }
    std::vector<DistanceSample> out;
    out.reserve(3 * cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 &p = cloud.points[i];
        const Vec3 &n = cloud.normals[i];
        out.push_back({p, 0.0});
        out.push_back({p + spacing * n, spacing});
        out.push_back({p - spacing * n, -spacing});
    }
    return out;
}

EmResult fit_em(std::span<const DistanceSample> samples, std::size_t k, const EmConfig &config,
                std::uint64_t seed) {
    if (k < 1) throw ArgumentError("EM needs K >= 1");
    if (samples.size() < 4 * k) {
        throw ArgumentError("EM with K=" + std::to_string(k) + " needs at least " + std::to_string(4 * k) +
                            " samples, got " + std::to_string(samples.size()));
    }
    const SampleMatrix x = to_matrix(samples);
    return run_em(x, kmeanspp_init(x, k, config.reg_eps, seed), config);
}

EmResult fit_em(std::span<const DistanceSample> samples, std::vector<Gaussian4> init, const EmConfig &config) {
    if (init.empty()) throw ArgumentError("EM needs K >= 1");
    if (samples.size() < 4 * init.size()) {
        throw ArgumentError("EM with K=" + std::to_string(init.size()) + " needs at least " +
                            std::to_string(4 * init.size()) + " samples");
    }
    return run_em(to_matrix(samples), std::move(init), config);
}

double principal_curvature(const Eigen::MatrixXd &covariance) {
    if (covariance.rows() != covariance.cols() || covariance.rows() == 0) {
        throw ArgumentError("principal_curvature needs a non-empty square matrix");
    }
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw ArgumentError("principal_curvature: matrix is not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance, Eigen::EigenvaluesOnly);
    Eigen::VectorXd ev = solver.eigenvalues();
    if (ev.minCoeff() < -1e-12) throw ArgumentError("principal_curvature: matrix is not positive semidefinite");
    ev = ev.cwiseMax(0.0);
    const double total = ev.sum();
    return total > 0.0 ? ev.minCoeff() / total : 0.0;
}

HgmmModel::HgmmModel(std::vector<Gaussian4> leaves, std::vector<int> depths, HgmmConfig config,
                     std::vector<HgmmNode> roots, std::vector<std::string> log)
    : leaves_(std::move(leaves)),
      depths_(std::move(depths)),
      config_(config),
      roots_(std::move(roots)),
      log_(std::move(log)) {
    if (depths_.size() != leaves_.size()) throw ModelError("leaf/depth count mismatch");
    double wsum = 0.0;
    for (const auto &g : leaves_) wsum += g.weight;
    if (leaves_.empty() || std::abs(wsum - 1.0) > 1e-9) throw ModelError("leaf weights must sum to 1");

    cache_.reserve(leaves_.size());
    for (const auto &g : leaves_) {
        LeafCache c;
        c.spatial_mean = g.mean.head<3>();
        const Mat3 sxx = g.covariance.topLeftCorner<3, 3>();
        const Eigen::LLT<Mat3> llt(sxx);
        if (llt.info() != Eigen::Success) throw ModelError("spatial covariance is not positive definite");
        c.spatial_chol = llt.matrixL();
        const double log_det = 2.0 * c.spatial_chol.diagonal().array().log().sum();
        c.log_norm = std::log(g.weight) - 0.5 * log_det - 1.5 * kLog2Pi;
        const double lyy = g.precision(3, 3);
        if (!(lyy > 0.0)) throw ModelError("component has non-positive Lambda_YY");
        c.slope = -g.precision.block<1, 3>(3, 0).transpose() / lyy;
        c.distance_mean = g.mean[3];
        c.conditional_variance = 1.0 / lyy;
        cache_.push_back(c);
    }
}

int HgmmModel::max_leaf_depth() const {
    return depths_.empty() ? 0 : *std::max_element(depths_.begin(), depths_.end());
}

namespace {

struct HgmmBuilder {
    const SampleMatrix &x;
    const HgmmConfig &cfg;
    std::uint64_t counter = 0;
    std::vector<Gaussian4> leaves;
    std::vector<int> depths;
    std::vector<std::string> log;

    std::uint64_t next_seed() { return splitmix64(cfg.seed ^ splitmix64(counter++)); }

    double curvature(const Gaussian4 &g) const {
        if (cfg.spatial_curvature) return principal_curvature(g.covariance.topLeftCorner<3, 3>());
        return principal_curvature(g.covariance);
    }

    SampleMatrix gather(const std::vector<Eigen::Index> &idx) const {
        SampleMatrix sub(4, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = x.col(idx[j]);
        return sub;
    }

    // Expands `comps` (fitted jointly on `idx`) into nodes at `depth`.
    std::vector<HgmmNode> expand(const std::vector<Gaussian4> &comps, const std::vector<Eigen::Index> &idx,
                                 int depth) {
        const SampleMatrix sub = gather(idx);
        const auto assign = hard_assign(sub, comps);
        std::vector<std::vector<Eigen::Index>> groups(comps.size());
        for (std::size_t j = 0; j < assign.size(); ++j) groups[assign[j]].push_back(idx[j]);

        std::vector<HgmmNode> nodes;
        for (std::size_t k = 0; k < comps.size(); ++k) {
            HgmmNode node;
            node.component = comps[k];
            node.depth = depth;
            node.support = groups[k].size();
            node.curvature = curvature(comps[k]);
            const bool complex = node.curvature > cfg.curvature_threshold;
            const bool can_split = depth < cfg.max_depth && node.support >= cfg.min_points &&
                                   node.support >= 4 * cfg.fanout && cfg.fanout >= 2;
            if (complex && can_split) {
                try {
                    const SampleMatrix child_x = gather(groups[k]);
                    const auto em = run_em(child_x, kmeanspp_init(child_x, cfg.fanout, cfg.em.reg_eps, next_seed()),
                                           cfg.em);
                    for (const auto &l : em.log) log.push_back("depth " + std::to_string(depth + 1) + ": " + l);
                    if (em.components.size() >= 2) {
                        std::vector<Gaussian4> children = em.components;
                        for (auto &c : children) c.weight *= node.component.weight;
                        node.children = expand(children, groups[k], depth + 1);
                    } else {
                        log.push_back("depth " + std::to_string(depth) + ": split collapsed to one component; kept as leaf");
                    }
                } catch (const Error &e) {
                    log.push_back("depth " + std::to_string(depth) + ": child fit failed (" + e.what() +
                                  "); kept as leaf");
                    node.children.clear();
                }
            }
            if (node.children.empty()) {
                leaves.push_back(node.component);
                depths.push_back(depth);
            }
            nodes.push_back(std::move(node));
        }
        return nodes;
    }
};

}  // namespace

HgmmModel fit_hgmm(std::span<const DistanceSample> samples, const HgmmConfig &config) {
    if (config.root_k < 1 || config.fanout < 1) throw ArgumentError("root_k and fanout must be >= 1");
    if (samples.size() < 4 * config.root_k) {
        throw ArgumentError("HGMM needs at least " + std::to_string(4 * config.root_k) + " samples");
    }
    const SampleMatrix x = to_matrix(samples);
    HgmmBuilder b{x, config, 0, {}, {}, {}};
    const auto root_em = run_em(x, kmeanspp_init(x, config.root_k, config.em.reg_eps, b.next_seed()), config.em);
    for (const auto &l : root_em.log) b.log.push_back("depth 0: " + l);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.cols(); ++i) all[static_cast<std::size_t>(i)] = i;
    auto roots = b.expand(root_em.components, all, 0);
    double wsum = 0.0;
    for (const auto &g : b.leaves) wsum += g.weight;
    for (auto &g : b.leaves) g.weight /= wsum;
    return HgmmModel(std::move(b.leaves), std::move(b.depths), config, std::move(roots), std::move(b.log));
}

void write_hgmm(std::ostream &out, const HgmmModel &model) {
    const auto &c = model.config();
    char buf[1024];
    out << "hgmm 1\n";
    std::snprintf(buf, sizeof buf,
                  "config root_k %zu fanout %zu curvature_threshold %.17g max_depth %d min_points %zu "
                  "spatial_curvature %d seed %llu em_max_iter %d em_tol %.17g em_reg_eps %.17g\n",
                  c.root_k, c.fanout, c.curvature_threshold, c.max_depth, c.min_points,
                  c.spatial_curvature ? 1 : 0, static_cast<unsigned long long>(c.seed), c.em.max_iter, c.em.tol,
                  c.em.reg_eps);
    out << buf;
    out << "leaves " << model.size() << '\n';
    for (std::size_t k = 0; k < model.size(); ++k) {
        const auto &g = model.leaves()[k];
        std::string line;
        auto put = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g ", v);
            line += buf;
        };
        put(g.weight);
        for (int i = 0; i < 4; ++i) put(g.mean[i]);
        for (int i = 0; i < 4; ++i) {
            for (int j = i; j < 4; ++j) put(g.covariance(i, j));
        }
        line += std::to_string(model.depths()[k]);
        out << line << '\n';
    }
    out << "end hgmm\n";
}

HgmmModel read_hgmm(std::istream &in) {
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "hgmm") throw ParseError("expected 'hgmm' record", 0);
    if (version != 1) throw ParseError("unsupported hgmm version " + std::to_string(version), 0);
    if (!(in >> tag) || tag != "config") throw ParseError("expected hgmm config line", 0);
    HgmmConfig c;
    std::string line;
    std::getline(in, line);
    {
        std::istringstream ls(line);
        std::string key;
        while (ls >> key) {
            if (key == "root_k") ls >> c.root_k;
            else if (key == "fanout") ls >> c.fanout;
            else if (key == "curvature_threshold") ls >> c.curvature_threshold;
            else if (key == "max_depth") ls >> c.max_depth;
            else if (key == "min_points") ls >> c.min_points;
            else if (key == "spatial_curvature") { int v; ls >> v; c.spatial_curvature = v != 0; }
            else if (key == "seed") { unsigned long long v; ls >> v; c.seed = v; }
            else if (key == "em_max_iter") ls >> c.em.max_iter;
            else if (key == "em_tol") ls >> c.em.tol;
            else if (key == "em_reg_eps") ls >> c.em.reg_eps;
            else throw ParseError("unknown hgmm config key '" + key + "'", 0);
            if (!ls) throw ParseError("bad value for hgmm config key '" + key + "'", 0);
        }
    }
    std::size_t n = 0;
    if (!(in >> tag >> n) || tag != "leaves") throw ParseError("expected 'leaves N'", 0);
    std::vector<Gaussian4> leaves;
    std::vector<int> depths;
    for (std::size_t k = 0; k < n; ++k) {
        double v[15];
        for (double &x : v) {
            std::string tok;
            if (!(in >> tok)) throw ParseError("truncated hgmm leaf " + std::to_string(k), 0);
            try {
                std::size_t used = 0;
                x = std::stod(tok, &used);
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception &) {
                throw ParseError("bad number in hgmm leaf " + std::to_string(k), 0);
            }
        }
        int depth = 0;
        if (!(in >> depth)) throw ParseError("missing depth for hgmm leaf " + std::to_string(k), 0);
        leaves.push_back(Gaussian4::make(v[0], Vec4(v[1], v[2], v[3], v[4]), read_upper(v + 5)));
        depths.push_back(depth);
    }
    if (!(in >> tag) || tag != "end") throw ParseError("expected 'end hgmm'", 0);
    in >> tag;
    return HgmmModel(std::move(leaves), std::move(depths), c);
}

}  // namespace gpgmm
