#include "vulnscore/linear_model.hpp"

#include "vulnscore/error.hpp"
#include "vulnscore/file_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vulnscore {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Fda ? "fda" : "svm"; }

ModelKind parse_model_kind(std::string_view text) {
    if (text == "fda" || text == "FDA")
        return ModelKind::Fda;
    if (text == "svm" || text == "SVM")
        return ModelKind::Svm;
    throw SchemaError("unknown model kind '" + std::string(text) + "' (expected fda or svm)");
}

// ---------------------------------------------------------------------------
// FeatureMask

FeatureMask FeatureMask::all(const FeatureDictionary& dictionary) {
    return FeatureMask(std::vector<bool>(dictionary.size(), true));
}

FeatureMask FeatureMask::none(const FeatureDictionary& dictionary) {
    return FeatureMask(std::vector<bool>(dictionary.size(), false));
}

FeatureMask FeatureMask::layers(const FeatureDictionary& dictionary, std::initializer_list<Layer> layers) {
    std::vector<bool> bits(dictionary.size(), false);
    for (std::size_t i = 0; i < dictionary.size(); ++i)
        bits[i] = std::find(layers.begin(), layers.end(), dictionary[i].layer) != layers.end();
    return FeatureMask(std::move(bits));
}

FeatureMask FeatureMask::from_names(const FeatureDictionary& dictionary, std::span<const std::string> names) {
    std::vector<bool> bits(dictionary.size(), false);
    for (const auto& n : names) {
        auto idx = dictionary.index_of(n);
        if (!idx)
            throw UnknownFeatureError(n);
        bits[*idx] = true;
    }
    return FeatureMask(std::move(bits));
}

std::size_t FeatureMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

std::vector<std::size_t> FeatureMask::indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i])
            out.push_back(i);
    return out;
}

std::vector<std::string> FeatureMask::names(const FeatureDictionary& dictionary) const {
    std::vector<std::string> out;
    for (auto i : indices())
        out.push_back(dictionary[i].name);
    return out;
}

// ---------------------------------------------------------------------------
// Tables and design matrices

FeatureTable FeatureTable::from_dataset(const Dataset& dataset) {
    FeatureTable t;
    const auto& dict = dataset.dictionary;
    const auto n = static_cast<Eigen::Index>(dataset.instances.size());
    const auto p = static_cast<Eigen::Index>(dict.size());
    t.names = dict.names();
    for (const auto& d : dict)
        t.layers.push_back(d.layer);
    t.values = Eigen::MatrixXd::Constant(n, p, std::numeric_limits<double>::quiet_NaN());
    t.labels.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& inst = dataset.instances[static_cast<std::size_t>(i)];
        t.labels(i) = inst.label == Label::Vulnerable ? 1.0 : -1.0;
        for (const auto& [name, value] : inst.features)
            if (auto j = dict.index_of(name))
                t.values(i, static_cast<Eigen::Index>(*j)) = value;
    }
    return t;
}

DesignMatrix build_design_matrix(const FeatureTable& table, const FeatureMask& mask,
                                 std::span<const std::size_t> rows, std::span<const double> weights) {
    if (mask.size() != table.cols())
        throw std::invalid_argument("feature mask does not match the dictionary size");
    if (mask.count() == 0)
        throw ModelError("feature mask selects no features");
    if (!weights.empty() && weights.size() != table.rows())
        throw std::invalid_argument("instance weights do not match the table");

    bool pos = false, neg = false;
    for (auto r : rows) {
        (table.labels(static_cast<Eigen::Index>(r)) > 0 ? pos : neg) = true;
    }
    if (!pos || !neg)
        throw ModelError("training data contains a single class; both vulnerable and benign_flaw are required");

    DesignMatrix m;
    m.columns = mask.indices();
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(m.columns.size());
    m.x.resize(n, p);
    m.y.resize(n);
    m.weights.resize(n);
    m.imputation.assign(m.columns.size(), 0.0);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto col = static_cast<Eigen::Index>(m.columns[static_cast<std::size_t>(j)]);
        m.features.push_back(table.names[static_cast<std::size_t>(col)]);
        double sum = 0.0;
        std::size_t seen = 0;
        for (auto r : rows) {
            const double v = table.values(static_cast<Eigen::Index>(r), col);
            if (!std::isnan(v)) {
                sum += v;
                ++seen;
            }
        }
        const double fill = seen ? sum / static_cast<double>(seen) : 0.0;
        m.imputation[static_cast<std::size_t>(j)] = fill;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = table.values(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]), col);
            m.x(i, j) = std::isnan(v) ? fill : v;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = rows[static_cast<std::size_t>(i)];
        m.y(i) = table.labels(static_cast<Eigen::Index>(r));
        m.weights(i) = weights.empty() ? 1.0 : weights[r];
    }
    return m;
}

DesignMatrix build_design_matrix(const Dataset& dataset, const FeatureMask& mask) {
    const auto table = FeatureTable::from_dataset(dataset);
    std::vector<std::size_t> rows(table.rows());
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i] = i;
    return build_design_matrix(table, mask, rows);
}

std::vector<double> layer3_instance_weights(const FeatureTable& table, double beta) {
    if (!(beta >= 0.0) || !std::isfinite(beta))
        throw std::invalid_argument("beta must be a non-negative finite number");
    std::vector<Eigen::Index> l3;
    for (std::size_t j = 0; j < table.layers.size(); ++j)
        if (table.layers[j] == Layer::L3)
            l3.push_back(static_cast<Eigen::Index>(j));
    std::vector<double> out(table.rows(), 1.0);
    if (l3.empty())
        return out;
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::size_t present = 0;
        for (auto j : l3) {
            const double v = table.values(static_cast<Eigen::Index>(i), j);
            if (!std::isnan(v) && v != 0.0)
                ++present;
        }
        out[i] = 1.0 + beta * static_cast<double>(present) / static_cast<double>(l3.size());
    }
    return out;
}

std::vector<double> layer3_instance_weights(const Dataset& dataset, double beta) {
    return layer3_instance_weights(FeatureTable::from_dataset(dataset), beta);
}

// ---------------------------------------------------------------------------
// Standardizer

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    const auto n = x.rows();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double mean = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            mean += x(i, j);
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = x(i, j) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        const bool flat = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
        s.mean.push_back(mean);
        s.sd.push_back(flat ? 1.0 : sd);
        s.zero_var.push_back(flat);
    }
    return s;
}

double Standardizer::transform_value(std::size_t j, double raw) const {
    return zero_var[j] ? 0.0 : (raw - mean[j]) / sd[j];
}

double Standardizer::inverse_value(std::size_t j, double z) const {
    return z * sd[j] + mean[j];
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd z(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            z(i, j) = transform_value(static_cast<std::size_t>(j), x(i, j));
    return z;
}

// ---------------------------------------------------------------------------
// Models

Label label_for_decision(double decision) {
    return decision >= 0.0 ? Label::Vulnerable : Label::BenignFlaw;
}

double TrainedModel::decision_value(std::span<const double> raw) const {
    if (raw.size() != features.size())
        throw ModelError("input has " + std::to_string(raw.size()) + " values, model expects " +
                         std::to_string(features.size()));
    double s = b;
    for (std::size_t j = 0; j < features.size(); ++j) {
        const double v = std::isnan(raw[j]) ? imputation[j] : raw[j];
        s += w[j] * standardizer.transform_value(j, v);
    }
    return s;
}

double TrainedModel::decision_value(const FeatureVector& x) const {
    std::vector<double> raw(features.size());
    for (std::size_t j = 0; j < features.size(); ++j)
        raw[j] = x.get(features[j]).value_or(std::numeric_limits<double>::quiet_NaN());
    return decision_value(raw);
}

Label TrainedModel::predict(const FeatureVector& x) const { return label_for_decision(decision_value(x)); }
Label TrainedModel::predict(std::span<const double> raw) const { return label_for_decision(decision_value(raw)); }

std::vector<double> TrainedModel::raw_weights() const {
    std::vector<double> out(w.size(), 0.0);
    for (std::size_t j = 0; j < w.size(); ++j)
        if (!standardizer.zero_var[j])
            out[j] = w[j] / standardizer.sd[j];
    return out;
}

namespace {

void require_both_classes(const DesignMatrix& m) {
    if (m.x.cols() == 0)
        throw ModelError("design matrix has no features");
    bool pos = false, neg = false;
    for (Eigen::Index i = 0; i < m.y.size(); ++i)
        (m.y(i) > 0 ? pos : neg) = true;
    if (!pos || !neg)
        throw ModelError("training data contains a single class; both vulnerable and benign_flaw are required");
}

TrainedModel model_shell(ModelKind kind, const DesignMatrix& m, Standardizer standardizer) {
    TrainedModel model;
    model.kind = kind;
    model.features = m.features;
    model.standardizer = std::move(standardizer);
    model.imputation = m.imputation;
    return model;
}

} // namespace

TrainedModel train_fda(const DesignMatrix& m, const FdaOptions& options) {
    require_both_classes(m);
    if (!(options.ridge >= 0.0))
        throw std::invalid_argument("ridge must be non-negative");

    auto standardizer = Standardizer::fit(m.x);
    const Eigen::MatrixXd z = standardizer.transform(m.x);
    const auto n = z.rows();
    const auto p = z.cols();

    Eigen::VectorXd mu_pos = Eigen::VectorXd::Zero(p), mu_neg = Eigen::VectorXd::Zero(p);
    double w_pos = 0.0, w_neg = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (m.y(i) > 0) {
            mu_pos += m.weights(i) * z.row(i).transpose();
            w_pos += m.weights(i);
        } else {
            mu_neg += m.weights(i) * z.row(i).transpose();
            w_neg += m.weights(i);
        }
    }
    mu_pos /= w_pos;
    mu_neg /= w_neg;

    Eigen::MatrixXd centered(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& mu = m.y(i) > 0 ? mu_pos : mu_neg;
        centered.row(i) = std::sqrt(m.weights(i)) * (z.row(i) - mu.transpose());
    }
    Eigen::MatrixXd scatter = centered.transpose() * centered;
    const double trace = scatter.trace();
    double reg = options.ridge * trace / static_cast<double>(p);
    if (!(trace > 0.0))
        reg = options.ridge > 0.0 ? options.ridge : 1.0;
    scatter.diagonal().array() += reg;

    Eigen::VectorXd w = scatter.ldlt().solve(mu_pos - mu_neg);
    if (!w.allFinite())
        throw ModelError("within-class scatter is singular; increase the ridge parameter");
    for (Eigen::Index j = 0; j < p; ++j)
        if (standardizer.zero_var[static_cast<std::size_t>(j)])
            w(j) = 0.0;
    const double norm = w.norm();
    if (norm > 0.0)
        w /= norm;

    auto model = model_shell(ModelKind::Fda, m, std::move(standardizer));
    model.w.assign(w.data(), w.data() + p);
    model.b = -w.dot(mu_pos + mu_neg) / 2.0;
    model.hyperparams["ridge"] = options.ridge;
    model.training.converged = true;
    model.training.epochs = 0;
    return model;
}

SvmDualSolution solve_svm_dual(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& upper,
                               double tol, long max_epochs) {
    const auto n = static_cast<std::size_t>(z.rows());
    const auto p = static_cast<std::size_t>(z.cols());
    const std::size_t stride = p + 1;

    // Row-major copy augmented with the constant bias column.
    std::vector<double> x(n * stride);
    std::vector<double> qd(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 1.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double v = z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            x[i * stride + j] = v;
            sq += v * v;
        }
        x[i * stride + p] = 1.0;
        qd[i] = sq;
    }

    std::vector<double> alpha(n, 0.0);
    std::vector<double> w(stride, 0.0);

    auto gradient = [&](std::size_t i) {
        const double* xi = &x[i * stride];
        double s = 0.0;
        for (std::size_t j = 0; j < stride; ++j)
            s += w[j] * xi[j];
        return y(static_cast<Eigen::Index>(i)) * s - 1.0;
    };
    auto projected = [&](std::size_t i, double g) {
        const double u = upper(static_cast<Eigen::Index>(i));
        if (alpha[i] <= 0.0)
            return std::min(g, 0.0);
        if (alpha[i] >= u)
            return std::max(g, 0.0);
        return g;
    };
    auto max_violation = [&] {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            v = std::max(v, std::abs(projected(i, gradient(i))));
        return v;
    };

    // Active-set polish started from the current iterate: free coefficients
    // solve y_i f(x_i) = 1 exactly, the rest sit at 0 or at their bound. A step
    // leaving the box stops at the first bound hit; a bound coefficient that
    // violates its KKT condition is freed. The result replaces the iterate only
    // when it passes the full KKT check.
    enum class At : unsigned char { Zero, Free, Upper };
    auto polish = [&]() {
        // Start from the iterate's partition; at most p + 1 coefficients can be
        // free, so the ones with the largest gradients go to the bound their
        // gradient points at.
        std::vector<double> a = alpha;
        std::vector<At> state(n);
        std::vector<std::pair<double, std::size_t>> candidates;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = upper(static_cast<Eigen::Index>(i));
            state[i] = a[i] <= 0.0 ? At::Zero : (a[i] >= u ? At::Upper : At::Free);
            if (state[i] == At::Free)
                candidates.emplace_back(std::abs(gradient(i)), i);
        }
        if (candidates.size() > stride) {
            std::sort(candidates.begin(), candidates.end());
            for (std::size_t c = stride; c < candidates.size(); ++c) {
                const std::size_t i = candidates[c].second;
                const bool to_upper = gradient(i) < 0.0;
                state[i] = to_upper ? At::Upper : At::Zero;
                a[i] = to_upper ? upper(static_cast<Eigen::Index>(i)) : 0.0;
            }
        }
        std::vector<double> wa(stride);
        auto rebuild_w = [&] {
            std::fill(wa.begin(), wa.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (a[i] == 0.0)
                    continue;
                const double c = a[i] * y(static_cast<Eigen::Index>(i));
                for (std::size_t j = 0; j < stride; ++j)
                    wa[j] += c * x[i * stride + j];
            }
        };
        auto margin = [&](std::size_t i) {
            double s = 0.0;
            for (std::size_t j = 0; j < stride; ++j)
                s += wa[j] * x[i * stride + j];
            return y(static_cast<Eigen::Index>(i)) * s;
        };
        const std::size_t max_rounds = 2 * n + 8;
        for (std::size_t round = 0; round < max_rounds; ++round) {
            std::vector<std::size_t> free_set;
            std::vector<double> base(stride, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (state[i] == At::Free) {
                    free_set.push_back(i);
                } else if (state[i] == At::Upper) {
                    const double c = a[i] * y(static_cast<Eigen::Index>(i));
                    for (std::size_t j = 0; j < stride; ++j)
                        base[j] += c * x[i * stride + j];
                }
            }
            const auto f = static_cast<Eigen::Index>(free_set.size());
            Eigen::VectorXd sol(f);
            if (f > 0) {
                Eigen::MatrixXd q(f, f);
                Eigen::VectorXd rhs(f);
                for (Eigen::Index r = 0; r < f; ++r) {
                    const std::size_t i = free_set[static_cast<std::size_t>(r)];
                    const double yi = y(static_cast<Eigen::Index>(i));
                    double bi = 0.0;
                    for (std::size_t j = 0; j < stride; ++j)
                        bi += base[j] * x[i * stride + j];
                    rhs(r) = 1.0 - yi * bi;
                    for (Eigen::Index c = 0; c <= r; ++c) {
                        const std::size_t k = free_set[static_cast<std::size_t>(c)];
                        double dot = 0.0;
                        for (std::size_t j = 0; j < stride; ++j)
                            dot += x[i * stride + j] * x[k * stride + j];
                        q(r, c) = q(c, r) = yi * y(static_cast<Eigen::Index>(k)) * dot;
                    }
                }
                // Duplicated rows make q singular; the system stays consistent,
                // so a rank-revealing solve still gives a usable point.
                Eigen::LDLT<Eigen::MatrixXd> ldlt(q);
                if (ldlt.info() == Eigen::Success && ldlt.isPositive() && free_set.size() <= stride)
                    sol = ldlt.solve(rhs);
                else
                    sol = q.completeOrthogonalDecomposition().solve(rhs);
                if (!sol.allFinite() || !(q * sol).isApprox(rhs, 1e-10))
                    return false;
            }
            // Largest feasible step from the current free values towards `sol`.
            double step = 1.0;
            std::size_t blocking = n;
            for (Eigen::Index r = 0; r < f; ++r) {
                const std::size_t i = free_set[static_cast<std::size_t>(r)];
                const double u = upper(static_cast<Eigen::Index>(i));
                const double target = sol(r), cur = a[i];
                double t = 1.0;
                if (target < 0.0)
                    t = cur / (cur - target);
                else if (target > u)
                    t = (u - cur) / (target - cur);
                if (t < step) {
                    step = t;
                    blocking = i;
                }
            }
            for (Eigen::Index r = 0; r < f; ++r) {
                const std::size_t i = free_set[static_cast<std::size_t>(r)];
                a[i] = blocking == n ? sol(r) : a[i] + step * (sol(r) - a[i]);
            }
            if (blocking != n) {
                const double u = upper(static_cast<Eigen::Index>(blocking));
                const bool to_upper = sol(static_cast<Eigen::Index>(
                                          std::find(free_set.begin(), free_set.end(), blocking) - free_set.begin())) > u;
                a[blocking] = to_upper ? u : 0.0;
                state[blocking] = to_upper ? At::Upper : At::Zero;
                continue;
            }
            rebuild_w();
            std::size_t worst = n;
            double worst_violation = tol;
            for (std::size_t i = 0; i < n; ++i) {
                double v = 0.0;
                if (state[i] == At::Zero)
                    v = 1.0 - margin(i);
                else if (state[i] == At::Upper)
                    v = margin(i) - 1.0;
                if (v > worst_violation) {
                    worst_violation = v;
                    worst = i;
                }
            }
            if (worst == n)
                break;
            state[worst] = At::Free;
            if (round + 1 == max_rounds)
                return false;
        }
        const auto saved_alpha = alpha;
        const auto saved_w = w;
        alpha = a;
        rebuild_w();
        w = wa;
        if (max_violation() <= tol)
            return true;
        alpha = saved_alpha;
        w = saved_w;
        return false;
    };
    long polish_gap = 10; // grows after every failed attempt, up to 50 epochs
    long next_polish = polish_gap;

    // Shrinking: a coordinate stuck at a bound whose gradient points outward by
    // more than the previous sweep's extreme violation is dropped from the
    // active list until the active problem converges; the list stays in
    // index order.
    std::vector<std::size_t> active(n);
    for (std::size_t i = 0; i < n; ++i)
        active[i] = i;
    const double inf = std::numeric_limits<double>::infinity();
    double pg_max_old = inf, pg_min_old = -inf;

    SvmDualSolution sol;
    for (long epoch = 1; epoch <= max_epochs; ++epoch) {
        double pg_max = -inf, pg_min = inf;
        std::size_t kept = 0;
        for (std::size_t s = 0; s < active.size(); ++s) {
            const std::size_t i = active[s];
            const double g = gradient(i);
            const double u = upper(static_cast<Eigen::Index>(i));
            double pg = 0.0;
            if (alpha[i] <= 0.0) {
                if (g > pg_max_old)
                    continue;
                pg = std::min(g, 0.0);
            } else if (alpha[i] >= u) {
                if (g < pg_min_old)
                    continue;
                pg = std::max(g, 0.0);
            } else {
                pg = g;
            }
            active[kept++] = i;
            pg_max = std::max(pg_max, pg);
            pg_min = std::min(pg_min, pg);
            if (pg == 0.0)
                continue;
            const double old = alpha[i];
            alpha[i] = std::clamp(old - g / qd[i], 0.0, u);
            const double delta = (alpha[i] - old) * y(static_cast<Eigen::Index>(i));
            if (delta != 0.0) {
                const double* xi = &x[i * stride];
                for (std::size_t j = 0; j < stride; ++j)
                    w[j] += delta * xi[j];
            }
        }
        const bool shrunk = kept < active.size();
        active.resize(kept);
        sol.epochs = epoch;

        if (epoch == next_polish) {
            if (polish()) {
                sol.converged = true;
                break;
            }
            polish_gap = std::min(polish_gap + 10, 50L);
            next_polish = epoch + polish_gap;
        }

        const double sweep_violation = std::max(std::abs(pg_max), std::abs(pg_min));
        if (active.empty() || sweep_violation <= tol) {
            // The sweep measured violations before its own updates; confirm on the final iterate.
            if (max_violation() <= tol) {
                sol.converged = true;
                break;
            }
            if (shrunk || active.size() < n) {
                active.resize(n);
                for (std::size_t i = 0; i < n; ++i)
                    active[i] = i;
            }
            pg_max_old = inf;
            pg_min_old = -inf;
            continue;
        }
        pg_max_old = pg_max > 0.0 ? pg_max : inf;
        pg_min_old = pg_min < 0.0 ? pg_min : -inf;
    }

    sol.max_violation = max_violation();
    sol.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(n));
    sol.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(stride));
    double sum_alpha = 0.0;
    for (double a : alpha)
        sum_alpha += a;
    sol.objective = sum_alpha - 0.5 * sol.w.squaredNorm();
    return sol;
}

TrainedModel train_svm(const DesignMatrix& m, const SvmOptions& options) {
    require_both_classes(m);
    if (!(options.c > 0.0) || !std::isfinite(options.c))
        throw std::invalid_argument("C must be positive");
    if (!(options.tol > 0.0))
        throw std::invalid_argument("tol must be positive");
    if (options.max_epochs < 1)
        throw std::invalid_argument("max_iter must be at least 1");

    auto standardizer = Standardizer::fit(m.x);
    const Eigen::MatrixXd z = standardizer.transform(m.x);
    const Eigen::VectorXd upper = options.c * m.weights;
    auto sol = solve_svm_dual(z, m.y, upper, options.tol, options.max_epochs);

    const auto p = z.cols();
    auto model = model_shell(ModelKind::Svm, m, std::move(standardizer));
    model.w.assign(sol.w.data(), sol.w.data() + p);
    model.b = sol.w(p);
    model.hyperparams["C"] = options.c;
    model.hyperparams["tol"] = options.tol;
    model.hyperparams["max_iter"] = static_cast<double>(options.max_epochs);
    model.training.converged = sol.converged;
    model.training.epochs = sol.epochs;
    model.training.dual_objective = sol.objective;
    model.training.max_violation = sol.max_violation;
    model.training.dual_coefficients.assign(sol.alpha.data(), sol.alpha.data() + sol.alpha.size());
    return model;
}

TrainedModel train_model(ModelKind kind, const DesignMatrix& m, const LearnerOptions& options) {
    return kind == ModelKind::Fda ? train_fda(m, options.fda) : train_svm(m, options.svm);
}

// ---------------------------------------------------------------------------
// Serialization

ordered_json model_to_json(const TrainedModel& model) {
    ordered_json j;
    j["schema_version"] = "1";
    j["kind"] = to_string(model.kind);
    j["features"] = model.features;
    j["w"] = model.w;
    j["b"] = model.b;
    ordered_json s;
    s["mean"] = model.standardizer.mean;
    s["sd"] = model.standardizer.sd;
    s["zero_var"] = model.standardizer.zero_var;
    j["standardizer"] = std::move(s);
    j["imputation"] = model.imputation;
    ordered_json hp = ordered_json::object();
    for (const auto& [k, v] : model.hyperparams)
        hp[k] = v;
    j["hyperparams"] = std::move(hp);
    ordered_json t;
    t["converged"] = model.training.converged;
    t["epochs"] = model.training.epochs;
    j["training"] = std::move(t);
    return j;
}

namespace {

std::vector<double> number_array(const json& doc, const char* key, std::size_t expected) {
    const auto& v = doc.at(key);
    if (!v.is_array() || v.size() != expected)
        throw SchemaError(std::string("model: '") + key + "' must be an array of " + std::to_string(expected) +
                          " numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number())
            throw SchemaError(std::string("model: '") + key + "' must contain numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

} // namespace

TrainedModel model_from_json(const json& doc) {
    if (!doc.is_object())
        throw SchemaError("model document must be a JSON object");
    try {
        const auto& version = doc.at("schema_version");
        if (!version.is_string() || version.get<std::string>() != "1")
            throw SchemaVersionError(version.is_string() ? version.get<std::string>() : version.dump());
        TrainedModel m;
        m.kind = parse_model_kind(doc.at("kind").get<std::string>());
        m.features = doc.at("features").get<std::vector<std::string>>();
        const auto p = m.features.size();
        m.w = number_array(doc, "w", p);
        m.b = doc.at("b").get<double>();
        const auto& s = doc.at("standardizer");
        m.standardizer.mean = number_array(s, "mean", p);
        m.standardizer.sd = number_array(s, "sd", p);
        m.standardizer.zero_var = s.at("zero_var").get<std::vector<bool>>();
        if (m.standardizer.zero_var.size() != p)
            throw SchemaError("model: 'zero_var' length mismatch");
        m.imputation = number_array(doc, "imputation", p);
        if (auto it = doc.find("hyperparams"); it != doc.end())
            for (const auto& [k, v] : it->items())
                m.hyperparams[k] = v.get<double>();
        if (auto it = doc.find("training"); it != doc.end()) {
            m.training.converged = it->at("converged").get<bool>();
            m.training.epochs = it->at("epochs").get<long>();
        }
        for (double v : m.w)
            if (!std::isfinite(v))
                throw SchemaError("model: non-finite weight");
        return m;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model: ") + e.what());
    }
}

TrainedModel load_model(const std::filesystem::path& path) {
    return model_from_json(parse_json_text(read_text_file(path)));
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, model_to_json(model).dump(2) + "\n");
}

} // namespace vulnscore
